#include "lpvssid/data_equations.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lpvssid/errors.hpp"

namespace lpvssid {

namespace {

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) {
    r *= base;
    if (r > (std::size_t(1) << 50))
      throw PipelineError(Stage::data_equations,
                          "Kronecker dimension overflow; reduce windows/orders");
  }
  return r;
}

void check_cap(std::size_t doubles, std::size_t cap, const char* what) {
  if (doubles > cap)
    throw PipelineError(
        Stage::data_equations,
        std::string(what) + " would hold " + std::to_string(doubles) +
            " doubles, beyond the configured cap of " + std::to_string(cap) +
            "; Kronecker regressors grow as (1+n_psi)^window, reduce the "
            "windows/orders or raise WindowConfig::max_doubles");
}

Vec kron_vec(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// hstack of coef[i] * X over the coefficient list (one reachability-style
// recursion step; the new factor is the outermost column index).
Mat expand_left(const MatList& coef, const Mat& X) {
  Mat out(X.rows(), static_cast<Index>(coef.size()) * X.cols());
  for (std::size_t i = 0; i < coef.size(); ++i)
    out.middleCols(static_cast<Index>(i) * X.cols(), X.cols()) = coef[i] * X;
  return out;
}

} // namespace

void WindowConfig::validate() const {
  if (f < 1 || p_win < 1)
    throw std::invalid_argument("future and past windows must be >= 1");
}

Mat contract_cols_outer(const Mat& M, const Vec& weights) {
  const Index B = weights.size();
  if (B <= 0 || M.cols() % B != 0)
    throw std::invalid_argument("contract_cols_outer: width not divisible by factor size");
  const Index w = M.cols() / B;
  Mat out = Mat::Zero(M.rows(), w);
  for (Index i = 0; i < B; ++i)
    if (weights(i) != 0.0) out.noalias() += weights(i) * M.middleCols(i * w, w);
  return out;
}

Mat contract_rows_outer(const Mat& M, const Vec& weights) {
  const Index B = weights.size();
  if (B <= 0 || M.rows() % B != 0)
    throw std::invalid_argument("contract_rows_outer: height not divisible by factor size");
  const Index h = M.rows() / B;
  Mat out = Mat::Zero(h, M.cols());
  for (Index i = 0; i < B; ++i)
    if (weights(i) != 0.0) out.noalias() += weights(i) * M.middleRows(i * h, h);
  return out;
}

Index past_lag_rows(int l, int n_u, int n_ych, int n_psi, int n_mu, Mode mode) {
  if (mode == Mode::open_loop)
    return static_cast<Index>(ipow(1 + n_psi, l)) * (n_u + n_ych);
  return static_cast<Index>(ipow(1 + n_mu, l)) * n_u +
         static_cast<Index>(ipow(1 + n_mu, l - 1)) * (1 + n_psi) * n_ych;
}

Index past_rows(int p_win, int n_u, int n_ych, int n_psi, int n_mu, Mode mode) {
  Index r = 0;
  for (int l = 1; l <= p_win; ++l)
    r += past_lag_rows(l, n_u, n_ych, n_psi, n_mu, mode);
  return r;
}

Index obs_rows(int f, int n_y, int n_psi, int n_mu, Mode mode) {
  Index r = 0;
  for (int k = 1; k <= f; ++k)
    r += mode == Mode::open_loop
             ? static_cast<Index>(ipow(1 + n_psi, k)) * n_y
             : static_cast<Index>((1 + n_psi) * ipow(1 + n_mu, k - 1)) * n_y;
  return r;
}

Mat build_extended_observability(const LpvSsModel& model,
                                 const SchedulingBasis& basis, int f,
                                 ObsVariant variant, Mode mode) {
  if (f < 1) throw std::invalid_argument("future window must be >= 1");
  const int n_psi = model.n_psi();

  MatList Acoef;
  if (mode == Mode::open_loop) {
    Acoef = model.A;
  } else {
    Acoef = closed_loop_coeffs(model, basis).Acal;
  }

  if (variant == ObsVariant::zero_only) {
    Mat out(model.n_y * f, model.n_x);
    Mat acc = Mat::Identity(model.n_x, model.n_x);
    for (int k = 0; k < f; ++k) {
      out.middleRows(k * model.n_y, model.n_y) = model.C[0] * acc;
      acc = Acoef[0] * acc;
    }
    return out;
  }

  // Seed of the stacking recursion: all C coefficients for the full variant,
  // only the non-constant ones for the starred variant.
  Mat block;
  if (variant == ObsVariant::full) {
    block.resize((n_psi + 1) * model.n_y, model.n_x);
    for (int j = 0; j <= n_psi; ++j)
      block.middleRows(j * model.n_y, model.n_y) = model.C[j];
  } else {
    block.resize(n_psi * model.n_y, model.n_x);
    for (int j = 1; j <= n_psi; ++j)
      block.middleRows((j - 1) * model.n_y, model.n_y) = model.C[j];
  }

  std::vector<Mat> levels;
  levels.push_back(block);
  for (int k = 2; k <= f; ++k) {
    // O_k = [O_{k-1} A_0; O_{k-1} A_1; ...]; the outer row-block index is the
    // coefficient acting at the earliest future instant.
    Mat next(static_cast<Index>(Acoef.size()) * levels.back().rows(), model.n_x);
    for (std::size_t i = 0; i < Acoef.size(); ++i)
      next.middleRows(static_cast<Index>(i) * levels.back().rows(),
                      levels.back().rows()) = levels.back() * Acoef[i];
    levels.push_back(std::move(next));
  }

  Index rows = 0;
  for (const Mat& m : levels) rows += m.rows();
  Mat out(rows, model.n_x);
  Index at = 0;
  for (const Mat& m : levels) {
    out.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return out;
}

Mat build_extended_reachability(const LpvSsModel& model,
                                const SchedulingBasis& basis, int p_win,
                                Mode mode) {
  if (p_win < 1) throw std::invalid_argument("past window must be >= 1");
  MatList Acoef, Bcoef, Kcoef;
  if (mode == Mode::open_loop) {
    Acoef = model.A;
    Bcoef = model.B;
    Kcoef = model.K;
  } else {
    ClosedLoopCoeffs cl = closed_loop_coeffs(model, basis);
    Acoef = cl.Acal;
    Bcoef = cl.Bcal;
    Kcoef = cl.K;
  }

  Mat Ru(model.n_x, static_cast<Index>(Bcoef.size()) * model.n_u);
  for (std::size_t i = 0; i < Bcoef.size(); ++i)
    Ru.middleCols(static_cast<Index>(i) * model.n_u, model.n_u) = Bcoef[i];
  Mat Rz(model.n_x, static_cast<Index>(Kcoef.size()) * model.n_y);
  for (std::size_t i = 0; i < Kcoef.size(); ++i)
    Rz.middleCols(static_cast<Index>(i) * model.n_y, model.n_y) = Kcoef[i];

  std::vector<Mat> ublocks{Ru}, zblocks{Rz};
  for (int l = 2; l <= p_win; ++l) {
    ublocks.push_back(expand_left(Acoef, ublocks.back()));
    zblocks.push_back(expand_left(Acoef, zblocks.back()));
  }

  Index cols = 0;
  for (int l = 0; l < p_win; ++l) cols += ublocks[l].cols() + zblocks[l].cols();
  Mat out(model.n_x, cols);
  Index at = 0;
  for (int l = 0; l < p_win; ++l) {
    out.middleCols(at, ublocks[l].cols()) = ublocks[l];
    at += ublocks[l].cols();
    out.middleCols(at, zblocks[l].cols()) = zblocks[l];
    at += zblocks[l].cols();
  }
  return out;
}

Mat tv_observability(const LpvSsModel& model, const SchedulingSamples& s,
                     Index t, int f, Mode mode) {
  Mat out(static_cast<Index>(model.n_y) * f, model.n_x);
  Mat acc = Mat::Identity(model.n_x, model.n_x);
  for (int k = 0; k < f; ++k) {
    const Vec psi = s.psi.col(t + k);
    out.middleRows(static_cast<Index>(k) * model.n_y, model.n_y) =
        eval_matrix(model, Which::C, psi) * acc;
    acc = (mode == Mode::open_loop ? eval_matrix(model, Which::A, psi)
                                   : eval_closed_loop_A(model, psi)) *
          acc;
  }
  return out;
}

Mat tv_reachability(const LpvSsModel& model, const SchedulingSamples& s,
                    Index t, int p_win, Mode mode) {
  Mat out(model.n_x, static_cast<Index>(model.n_u + model.n_y) * p_win);
  Mat prefix = Mat::Identity(model.n_x, model.n_x);
  for (int l = 1; l <= p_win; ++l) {
    const Vec psi = s.psi.col(t - l);
    const Index at = static_cast<Index>(l - 1) * (model.n_u + model.n_y);
    if (mode == Mode::open_loop) {
      out.middleCols(at, model.n_u) = prefix * eval_matrix(model, Which::B, psi);
      out.middleCols(at + model.n_u, model.n_y) =
          prefix * eval_matrix(model, Which::K, psi);
      prefix = prefix * eval_matrix(model, Which::A, psi);
    } else {
      const Mat Bt = eval_closed_loop_B(model, psi);
      out.middleCols(at, model.n_u) = prefix * Bt.leftCols(model.n_u);
      out.middleCols(at + model.n_u, model.n_y) = prefix * Bt.rightCols(model.n_y);
      prefix = prefix * eval_closed_loop_A(model, psi);
    }
  }
  return out;
}

Mat future_selector_matrix(const SchedulingSamples& s, Index t, int f, int n_y,
                           Mode mode) {
  const int n_psi = static_cast<int>(s.psi.rows()) - 1;
  const int n_mu = static_cast<int>(s.mu.rows()) - 1;
  const Index total = obs_rows(f, n_y, n_psi, n_mu, mode);
  Mat N = Mat::Zero(static_cast<Index>(n_y) * f, total);
  Index col = 0;
  for (int k = 0; k < f; ++k) {
    // kron of the scheduling factors, outermost = earliest future instant.
    Vec w(1);
    w(0) = 1.0;
    if (mode == Mode::open_loop) {
      for (int j = 0; j <= k; ++j) w = kron_vec(w, s.psi.col(t + j));
    } else {
      for (int j = 0; j < k; ++j) w = kron_vec(w, s.mu.col(t + j));
      w = kron_vec(w, s.psi.col(t + k));
    }
    for (Index i = 0; i < w.size(); ++i)
      N.block(static_cast<Index>(k) * n_y, col + i * n_y, n_y, n_y) =
          w(i) * Mat::Identity(n_y, n_y);
    col += w.size() * n_y;
  }
  return N;
}

Mat past_selector_matrix(const SchedulingSamples& s, Index t, int p_win,
                         int n_u, int n_ych, Mode mode) {
  const int n_psi = static_cast<int>(s.psi.rows()) - 1;
  const int n_mu = static_cast<int>(s.mu.rows()) - 1;
  const Index rows = past_rows(p_win, n_u, n_ych, n_psi, n_mu, mode);
  Mat M = Mat::Zero(rows, static_cast<Index>(n_u + n_ych) * p_win);
  Index row = 0;
  Vec kern(1);
  kern(0) = 1.0; // shared mu/psi product over lags 1..l-1 resp 1..l
  Vec kern_prev = kern;
  for (int l = 1; l <= p_win; ++l) {
    kern_prev = kern;
    kern = kron_vec(kern, mode == Mode::open_loop ? Vec(s.psi.col(t - l))
                                                  : Vec(s.mu.col(t - l)));
    const Index ucol = static_cast<Index>(l - 1) * (n_u + n_ych);
    for (Index i = 0; i < kern.size(); ++i)
      M.block(row + i * n_u, ucol, n_u, n_u) = kern(i) * Mat::Identity(n_u, n_u);
    row += kern.size() * n_u;
    const Vec kern_y = mode == Mode::open_loop
                           ? kern
                           : Vec(kron_vec(kern_prev, s.psi.col(t - l)));
    for (Index i = 0; i < kern_y.size(); ++i)
      M.block(row + i * n_ych, ucol + n_u, n_ych, n_ych) =
          kern_y(i) * Mat::Identity(n_ych, n_ych);
    row += kern_y.size() * n_ych;
  }
  return M;
}

Vec build_past_regressor(const Mat& u, const Mat& zchan,
                         const SchedulingSamples& s, Index t, int p_win,
                         Mode mode, std::size_t max_doubles) {
  if (t - p_win < 0)
    throw std::out_of_range("past window reaches before the first sample");
  const int n_psi = static_cast<int>(s.psi.rows()) - 1;
  const int n_mu = static_cast<int>(s.mu.rows()) - 1;
  const int n_u = static_cast<int>(u.rows());
  const int n_ych = static_cast<int>(zchan.rows());
  const Index rows = past_rows(p_win, n_u, n_ych, n_psi, n_mu, mode);
  check_cap(static_cast<std::size_t>(rows), max_doubles, "past regressor");

  Vec out(rows);
  Index at = 0;
  Vec kern(1);
  kern(0) = 1.0;
  Vec kern_prev = kern;
  for (int l = 1; l <= p_win; ++l) {
    kern_prev = kern;
    kern = kron_vec(kern, mode == Mode::open_loop ? Vec(s.psi.col(t - l))
                                                  : Vec(s.mu.col(t - l)));
    Vec bu = kron_vec(kern, u.col(t - l));
    out.segment(at, bu.size()) = bu;
    at += bu.size();
    const Vec kern_y = mode == Mode::open_loop
                           ? kern
                           : Vec(kron_vec(kern_prev, s.psi.col(t - l)));
    Vec bz = kron_vec(kern_y, zchan.col(t - l));
    out.segment(at, bz.size()) = bz;
    at += bz.size();
  }
  return out;
}

Index MarkovCoeffs::gu_cols(int m) const {
  if (mode == Mode::open_loop)
    return static_cast<Index>(ipow(1 + n_psi, m + 1)) * n_u;
  return static_cast<Index>((1 + n_psi) * ipow(1 + n_mu, m)) * n_u;
}

Index MarkovCoeffs::gz_cols(int m) const {
  if (mode == Mode::open_loop)
    return static_cast<Index>(ipow(1 + n_psi, m + 1)) * n_y;
  return static_cast<Index>((1 + n_psi) * ipow(1 + n_mu, m - 1) * (1 + n_psi)) * n_y;
}

MarkovCoeffs true_markov_coeffs(const LpvSsModel& model,
                                const SchedulingBasis& basis, int horizon,
                                Mode mode) {
  model.validate();
  MarkovCoeffs g;
  g.mode = mode;
  g.n_y = model.n_y;
  g.n_u = model.n_u;
  g.n_psi = model.n_psi();
  g.n_mu = basis.n_mu();

  MatList Acoef, Bcoef, Kcoef;
  if (mode == Mode::open_loop) {
    Acoef = model.A;
    Bcoef = model.B;
    Kcoef = model.K;
  } else {
    ClosedLoopCoeffs cl = closed_loop_coeffs(model, basis);
    Acoef = cl.Acal;
    Bcoef = cl.Bcal;
    Kcoef = cl.K;
  }

  g.D0.resize(model.n_y, static_cast<Index>(model.n_psi() + 1) * model.n_u);
  for (int j = 0; j <= model.n_psi(); ++j)
    g.D0.middleCols(static_cast<Index>(j) * model.n_u, model.n_u) = model.D[j];

  Mat Xu(model.n_x, static_cast<Index>(Bcoef.size()) * model.n_u);
  for (std::size_t i = 0; i < Bcoef.size(); ++i)
    Xu.middleCols(static_cast<Index>(i) * model.n_u, model.n_u) = Bcoef[i];
  Mat Xz(model.n_x, static_cast<Index>(Kcoef.size()) * model.n_y);
  for (std::size_t i = 0; i < Kcoef.size(); ++i)
    Xz.middleCols(static_cast<Index>(i) * model.n_y, model.n_y) = Kcoef[i];

  for (int m = 1; m <= horizon; ++m) {
    Mat Gu(model.n_y, static_cast<Index>(model.n_psi() + 1) * Xu.cols());
    Mat Gz(model.n_y, static_cast<Index>(model.n_psi() + 1) * Xz.cols());
    for (int j = 0; j <= model.n_psi(); ++j) {
      Gu.middleCols(static_cast<Index>(j) * Xu.cols(), Xu.cols()) = model.C[j] * Xu;
      Gz.middleCols(static_cast<Index>(j) * Xz.cols(), Xz.cols()) = model.C[j] * Xz;
    }
    g.Gu.push_back(std::move(Gu));
    g.Gz.push_back(std::move(Gz));
    if (m < horizon) {
      Xu = expand_left(Acoef, Xu);
      Xz = expand_left(Acoef, Xz);
    }
  }
  return g;
}

HankelEstimate markov_to_hankel(const MarkovCoeffs& coeffs,
                                const WindowConfig& win,
                                bool allow_truncation, bool z_channel) {
  win.validate();
  const int need = win.f + win.p_win - 1;
  if (!allow_truncation &&
      (coeffs.horizon_u() < need || coeffs.horizon_z() < need))
    throw PipelineError(
        Stage::data_equations,
        "insufficient coefficient horizon: the Hankel arrangement needs sub-Markov "
        "lags up to " + std::to_string(need) + " but only " +
            std::to_string(std::min(coeffs.horizon_u(), coeffs.horizon_z())) +
            " were estimated; raise the model orders or pass allow_truncation");

  HankelEstimate h;
  h.mode = coeffs.mode;
  h.win = win;
  h.coeffs = coeffs;
  h.z_channel = z_channel;

  const int n_ych = z_channel ? coeffs.n_y : 0;
  const Index nz = past_rows(win.p_win, coeffs.n_u, n_ych, coeffs.n_psi,
                             coeffs.n_mu, coeffs.mode);
  check_cap(static_cast<std::size_t>(nz) * coeffs.n_y * win.f, win.max_doubles,
            "H0 arrangement");
  h.H0 = Mat::Zero(static_cast<Index>(coeffs.n_y) * win.f, nz);

  // Block (k, l) of O^0_f R_p is the all-zero-index slice of the lag k+l
  // tensor, i.e. its leading columns: contracting the k+1 future factors
  // with e_0 keeps the first sub-block each time.
  for (int k = 0; k < win.f; ++k) {
    Index col = 0;
    for (int l = 1; l <= win.p_win; ++l) {
      const int m = k + l;
      const Index wu = coeffs.mode == Mode::open_loop
                           ? static_cast<Index>(ipow(1 + coeffs.n_psi, l)) * coeffs.n_u
                           : static_cast<Index>(ipow(1 + coeffs.n_mu, l)) * coeffs.n_u;
      const Index wz = past_lag_rows(l, 0, n_ych, coeffs.n_psi, coeffs.n_mu,
                                     coeffs.mode);
      if (m <= coeffs.horizon_u())
        h.H0.block(static_cast<Index>(k) * coeffs.n_y, col, coeffs.n_y, wu) =
            coeffs.Gu[m - 1].leftCols(wu);
      col += wu;
      if (wz > 0 && m <= coeffs.horizon_z())
        h.H0.block(static_cast<Index>(k) * coeffs.n_y, col, coeffs.n_y, wz) =
            coeffs.Gz[m - 1].leftCols(wz);
      col += wz;
    }
  }
  return h;
}

namespace {

// Contract the k+1 future scheduling factors of a lag-(k+l) tensor at time t:
// factors [psi_{t+k}, (psi|mu)_{t+k-1}, ..., (psi|mu)_t] outermost first.
Mat contract_future(const Mat& G, const SchedulingSamples& s, Index t, int k,
                    Mode mode) {
  Mat M = contract_cols_outer(G, s.psi.col(t + k));
  for (int j = k - 1; j >= 0; --j)
    M = contract_cols_outer(M, mode == Mode::open_loop ? Vec(s.psi.col(t + j))
                                                       : Vec(s.mu.col(t + j)));
  return M;
}

// Contract a Toeplitz off-diagonal block: coefficient of z_{t+kp} in y_{t+k},
// d = k - kp >= 1. The y channel of the closed-loop form ends on a psi
// factor at the input time.
Mat contract_toeplitz(const Mat& G, const SchedulingSamples& s, Index t, int k,
                      int kp, Mode mode, bool y_channel) {
  Mat M = contract_cols_outer(G, s.psi.col(t + k));
  for (int j = k - 1; j > kp; --j)
    M = contract_cols_outer(M, mode == Mode::open_loop ? Vec(s.psi.col(t + j))
                                                       : Vec(s.mu.col(t + j)));
  const bool last_is_psi = mode == Mode::open_loop || y_channel;
  M = contract_cols_outer(M, last_is_psi ? Vec(s.psi.col(t + kp))
                                         : Vec(s.mu.col(t + kp)));
  return M;
}

} // namespace

Vec build_toeplitz_correction(const HankelEstimate& hankel,
                              const SchedulingSamples& s, Index t,
                              const Mat& zfut) {
  const MarkovCoeffs& g = hankel.coeffs;
  const int f = hankel.win.f;
  if (zfut.cols() != f || zfut.rows() != g.n_u + g.n_y)
    throw std::invalid_argument("future input stack has wrong dimensions");
  Vec out = Vec::Zero(static_cast<Index>(g.n_y) * f);
  for (int k = 0; k < f; ++k) {
    // Diagonal feedthrough [D(p) 0]: only the u rows of zfut enter.
    out.segment(static_cast<Index>(k) * g.n_y, g.n_y) =
        contract_cols_outer(g.D0, s.psi.col(t + k)) * zfut.col(k).head(g.n_u);
    for (int kp = 0; kp < k; ++kp) {
      const int d = k - kp;
      if (d <= g.horizon_u())
        out.segment(static_cast<Index>(k) * g.n_y, g.n_y) +=
            contract_toeplitz(g.Gu[d - 1], s, t, k, kp, g.mode, false) *
            zfut.col(kp).head(g.n_u);
      if (d <= g.horizon_z())
        out.segment(static_cast<Index>(k) * g.n_y, g.n_y) +=
            contract_toeplitz(g.Gz[d - 1], s, t, k, kp, g.mode, true) *
            zfut.col(kp).tail(g.n_y);
    }
  }
  return out;
}

StackedDataMatrices corrected_future(const DataSet& data,
                                     const SchedulingSamples& s,
                                     const HankelEstimate& hankel) {
  data.validate();
  const MarkovCoeffs& g = hankel.coeffs;
  const int f = hankel.win.f;
  const int p_win = hankel.win.p_win;
  const Index N = data.N();
  if (N < p_win + f)
    throw PipelineError(Stage::data_equations,
                        "dataset too short for the requested windows: need at least " +
                            std::to_string(p_win + f) + " samples");
  if (hankel.mode == Mode::open_loop && !data.xi)
    throw PipelineError(Stage::data_equations,
                        "open-loop stacking requires an innovation sequence");

  const Mat& zchan = hankel.mode == Mode::open_loop ? *data.xi : data.y;
  // The dropped innovation channel leaves only the u-expanded rows of Z.
  const Mat z_empty(0, N);
  const Mat& zchan_stack = hankel.z_channel ? zchan : z_empty;
  const Index n_eff = N - f - p_win + 1;
  const Index nz = hankel.n_z();
  check_cap(static_cast<std::size_t>(nz) * static_cast<std::size_t>(n_eff),
            hankel.win.max_doubles, "stacked past regressor");

  StackedDataMatrices out;
  out.mode = hankel.mode;
  out.win = hankel.win;
  out.t_begin = p_win;
  out.Z.resize(nz, n_eff);
  out.Ycorr.resize(static_cast<Index>(g.n_y) * f, n_eff);

  Mat zfut(g.n_u + g.n_y, f);
  for (Index j = 0; j < n_eff; ++j) {
    const Index t = p_win + j;
    out.Z.col(j) = build_past_regressor(data.u, zchan_stack, s, t, p_win,
                                        hankel.mode, hankel.win.max_doubles);

    for (int k = 0; k < f; ++k) {
      zfut.col(k).head(g.n_u) = data.u.col(t + k);
      zfut.col(k).tail(g.n_y) = zchan.col(t + k);
    }
    Vec y = Vec::Zero(static_cast<Index>(g.n_y) * f);
    for (int k = 0; k < f; ++k)
      y.segment(static_cast<Index>(k) * g.n_y, g.n_y) = data.y.col(t + k);

    y -= build_toeplitz_correction(hankel, s, t, zfut);

    // Subtract the scheduling-dependent observability response
    // N_{t,f} (O_f R_p) M z; the constant part H0 Z is added back below so
    // the net correction is exactly the starred term.
    Index zoff = 0;
    for (int l = 1; l <= p_win; ++l) {
      const Index wu = past_lag_rows(l, g.n_u, 0, g.n_psi, g.n_mu, hankel.mode);
      const Index wzc = past_lag_rows(l, 0, zchan_stack.rows() ? g.n_y : 0,
                                      g.n_psi, g.n_mu, hankel.mode);
      for (int k = 0; k < f; ++k) {
        const int m = k + l;
        if (m <= g.horizon_u())
          y.segment(static_cast<Index>(k) * g.n_y, g.n_y) -=
              contract_future(g.Gu[m - 1], s, t, k, hankel.mode) *
              out.Z.col(j).segment(zoff, wu);
        if (wzc > 0 && m <= g.horizon_z())
          y.segment(static_cast<Index>(k) * g.n_y, g.n_y) -=
              contract_future(g.Gz[m - 1], s, t, k, hankel.mode) *
              out.Z.col(j).segment(zoff + wu, wzc);
      }
      zoff += wu + wzc;
    }
    out.Ycorr.col(j) = y;
  }
  out.Ycorr.noalias() += hankel.H0 * out.Z;
  return out;
}

Mat oracle_evaluate(const LpvSsModel& model, const DataSet& data,
                    const SchedulingSamples& s, const WindowConfig& cfg,
                    Mode mode, bool zero_init, const Vec& x0) {
  data.validate();
  if (!data.xi)
    throw std::invalid_argument("oracle evaluation requires the innovation sequence");
  const Index N = data.N();
  const int f = cfg.f, p_win = cfg.p_win;
  const Index n_eff = N - f - p_win + 1;
  if (n_eff <= 0)
    throw std::invalid_argument("dataset too short for the requested windows");

  auto step = [&](Vec& x, Index tt) {
    const Vec psi = s.psi.col(tt);
    if (mode == Mode::open_loop) {
      x = eval_matrix(model, Which::A, psi) * x +
          eval_matrix(model, Which::B, psi) * data.u.col(tt) +
          eval_matrix(model, Which::K, psi) * data.xi->col(tt);
    } else {
      Vec z(model.n_u + model.n_y);
      z.head(model.n_u) = data.u.col(tt);
      z.tail(model.n_y) = data.y.col(tt);
      x = eval_closed_loop_A(model, psi) * x + eval_closed_loop_B(model, psi) * z;
    }
  };
  auto output = [&](const Vec& x, Index tt) -> Vec {
    const Vec psi = s.psi.col(tt);
    return eval_matrix(model, Which::C, psi) * x +
           eval_matrix(model, Which::D, psi) * data.u.col(tt) + data.xi->col(tt);
  };

  Mat out(static_cast<Index>(model.n_y) * f, n_eff);
  if (zero_init) {
    for (Index j = 0; j < n_eff; ++j) {
      const Index t = p_win + j;
      Vec x = Vec::Zero(model.n_x);
      for (Index tt = t - p_win; tt < t; ++tt) step(x, tt);
      for (int k = 0; k < f; ++k) {
        out.col(j).segment(static_cast<Index>(k) * model.n_y, model.n_y) =
            output(x, t + k);
        step(x, t + k);
      }
    }
  } else {
    Vec x = x0.size() ? x0 : Vec(Vec::Zero(model.n_x));
    Mat states(model.n_x, N);
    for (Index tt = 0; tt < N; ++tt) {
      states.col(tt) = x;
      step(x, tt);
    }
    for (Index j = 0; j < n_eff; ++j) {
      const Index t = p_win + j;
      for (int k = 0; k < f; ++k)
        out.col(j).segment(static_cast<Index>(k) * model.n_y, model.n_y) =
            output(states.col(t + k), t + k);
    }
  }
  return out;
}

} // namespace lpvssid
