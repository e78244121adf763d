#include "lpvssid/pre_estimation.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lpvssid/errors.hpp"

namespace lpvssid {

RidgeConfig::RidgeConfig() {
  // 30 log-spaced points covering interpolation to heavy shrinkage.
  const int n = 30;
  lambda_grid.resize(n);
  const double lo = std::log10(1e-10), hi = std::log10(1e2);
  for (int i = 0; i < n; ++i)
    lambda_grid(i) = std::pow(10.0, lo + (hi - lo) * i / (n - 1));
}

void RidgeConfig::validate() const {
  if (lambda_grid.size() == 0)
    throw std::invalid_argument("ridge lambda grid is empty");
  if ((lambda_grid.array() <= 0).any())
    throw std::invalid_argument("ridge lambda grid must be strictly positive");
}

void GaussNewtonConfig::validate() const {
  if (beta1 <= 0 || gamma <= 0 || lambda_min <= 0 || nu <= 0 || alpha_min <= 0 ||
      epsilon <= 0 || max_iter < 1)
    throw std::invalid_argument("Gauss-Newton constants must be strictly positive");
}

double gcv_score(const Mat& Phi, const Mat& targets, double lambda) {
  if (lambda < 0) throw std::invalid_argument("gcv_score: lambda must be >= 0");
  const Index N = Phi.rows();
  Eigen::JacobiSVD<Mat> svd(Phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec d = svd.singularValues();

  double trace = 0.0;
  for (Index i = 0; i < d.size(); ++i) {
    const double d2 = d(i) * d(i);
    if (d2 > 0 || lambda > 0) trace += d2 / (d2 + lambda);
  }
  if (trace >= static_cast<double>(N) - 1e-9)
    return std::numeric_limits<double>::infinity();

  const Mat Uty = svd.matrixU().transpose() * targets;
  double rss = targets.squaredNorm() - Uty.squaredNorm();
  for (Index i = 0; i < d.size(); ++i) {
    const double d2 = d(i) * d(i);
    const double shrink = lambda / (d2 + lambda); // residual factor on this mode
    rss += (shrink * shrink) * Uty.row(i).squaredNorm();
  }
  const double denom = static_cast<double>(N) - trace;
  return static_cast<double>(N) * rss / (denom * denom);
}

RidgeFit ridge_regression(const Mat& Phi, const Mat& targets,
                          const RidgeConfig& cfg) {
  cfg.validate();
  const Index N = Phi.rows(), C = Phi.cols();
  if (targets.rows() != N)
    throw std::invalid_argument("ridge_regression: row count mismatch");

  RidgeFit fit;
  fit.gcv_curve.resize(cfg.lambda_grid.size());

  if (C <= N) {
    const Mat G = Phi.transpose() * Phi;
    const Mat b = Phi.transpose() * targets;
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    const Vec lam = es.eigenvalues().cwiseMax(0.0);
    const Mat bt = es.eigenvectors().transpose() * b;
    const double y2 = targets.squaredNorm();

    double best = std::numeric_limits<double>::infinity();
    Index best_i = 0;
    for (Index gi = 0; gi < cfg.lambda_grid.size(); ++gi) {
      const double l = cfg.lambda_grid(gi);
      double trace = 0.0, rss = y2;
      for (Index i = 0; i < lam.size(); ++i) {
        const double li = lam(i);
        trace += li / (li + l);
        rss -= bt.row(i).squaredNorm() * (li + 2 * l) / ((li + l) * (li + l));
      }
      rss = std::max(rss, 0.0);
      const double denom = static_cast<double>(N) - trace;
      fit.gcv_curve(gi) = denom <= 1e-9
                              ? std::numeric_limits<double>::infinity()
                              : static_cast<double>(N) * rss / (denom * denom);
      if (fit.gcv_curve(gi) < best) {
        best = fit.gcv_curve(gi);
        best_i = gi;
      }
    }
    fit.lambda = cfg.lambda_grid(best_i);
    const double lam_max = lam.size() ? lam.maxCoeff() : 0.0;
    const bool deficient = lam.size() == 0 || lam.minCoeff() < 1e-12 * lam_max;
    if (deficient && fit.lambda < 1e-15 * std::max(lam_max, 1.0))
      throw PipelineError(Stage::pre_estimation,
                          "regressor is rank deficient and the selected ridge weight is "
                          "effectively zero; use a nonzero lambda");
    Mat theta_t = bt;
    for (Index i = 0; i < lam.size(); ++i) theta_t.row(i) /= (lam(i) + fit.lambda);
    fit.coeffs = es.eigenvectors() * theta_t;
  } else {
    // Wide regressor: dual (kernel) form on the N x N Gram.
    const Mat Kg = Phi * Phi.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(Kg);
    const Vec lam = es.eigenvalues().cwiseMax(0.0);
    const Mat yt = es.eigenvectors().transpose() * targets;

    double best = std::numeric_limits<double>::infinity();
    Index best_i = 0;
    for (Index gi = 0; gi < cfg.lambda_grid.size(); ++gi) {
      const double l = cfg.lambda_grid(gi);
      double trace = 0.0, rss = 0.0;
      for (Index i = 0; i < lam.size(); ++i) {
        trace += lam(i) / (lam(i) + l);
        const double sh = l / (lam(i) + l);
        rss += sh * sh * yt.row(i).squaredNorm();
      }
      const double denom = static_cast<double>(N) - trace;
      fit.gcv_curve(gi) = denom <= 1e-9
                              ? std::numeric_limits<double>::infinity()
                              : static_cast<double>(N) * rss / (denom * denom);
      if (fit.gcv_curve(gi) < best) {
        best = fit.gcv_curve(gi);
        best_i = gi;
      }
    }
    fit.lambda = cfg.lambda_grid(best_i);
    Mat alpha = yt;
    for (Index i = 0; i < lam.size(); ++i) alpha.row(i) /= (lam(i) + fit.lambda);
    fit.coeffs = Phi.transpose() * (es.eigenvectors() * alpha);
  }
  return fit;
}

RegressorLayout RegressorLayout::make(Mode mode, int n_u, int n_ych, int n_psi,
                                      int n_mu, int nb, int nz) {
  RegressorLayout l;
  l.mode = mode;
  l.n_u = n_u;
  l.n_ych = n_ych;
  l.n_psi = n_psi;
  l.n_mu = n_mu;
  l.nb = nb;
  l.nz = nz;
  MarkovCoeffs probe;
  probe.mode = mode;
  probe.n_y = n_ych;
  probe.n_u = n_u;
  probe.n_psi = n_psi;
  probe.n_mu = n_mu;

  Index at = 0;
  l.u_offset.push_back(at);
  at += static_cast<Index>(1 + n_psi) * n_u; // lag-0 feedthrough
  for (int m = 1; m <= nb; ++m) {
    l.u_offset.push_back(at);
    at += probe.gu_cols(m);
  }
  for (int m = 1; m <= nz; ++m) {
    l.z_offset.push_back(at);
    at += probe.gz_cols(m);
  }
  l.cols = at;
  l.t_first = std::max(nb, nz);
  return l;
}

namespace {

Vec kron_vec(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

} // namespace

void fill_regressor_row(const RegressorLayout& layout, const Mat& u,
                        const Mat& zchan, const SchedulingSamples& s, Index t,
                        Vec& row) {
  row.setZero(layout.cols);
  const Vec psi_t = s.psi.col(t);
  row.segment(layout.u_offset[0], psi_t.size() * layout.n_u) =
      kron_vec(psi_t, u.col(t));

  // Scheduling product shared by both channels, extended one lag at a time.
  Vec kern = psi_t;     // open loop: psi_t (x) ... (x) psi_{t-m}
  Vec kern_prev = kern; // closed loop: stops at mu_{t-m+1} for the y channel
  const int maxlag = std::max(layout.nb, layout.nz);
  for (int m = 1; m <= maxlag; ++m) {
    kern_prev = kern;
    kern = kron_vec(kern, layout.mode == Mode::open_loop ? Vec(s.psi.col(t - m))
                                                         : Vec(s.mu.col(t - m)));
    if (m <= layout.nb)
      row.segment(layout.u_offset[m], kern.size() * layout.n_u) =
          kron_vec(kern, u.col(t - m));
    if (m >= 1 && m <= layout.nz) {
      const Vec kern_z = layout.mode == Mode::open_loop
                             ? kern
                             : Vec(kron_vec(kern_prev, s.psi.col(t - m)));
      row.segment(layout.z_offset[m - 1], kern_z.size() * layout.n_ych) =
          kron_vec(kern_z, zchan.col(t - m));
    }
  }
}

void build_regressor(const RegressorLayout& layout, const Mat& u,
                     const Mat& zchan, const Mat& y, const SchedulingSamples& s,
                     std::size_t max_doubles, Mat& Phi, Mat& Y) {
  const Index N = u.cols();
  const Index rows = N - layout.t_first;
  if (rows <= 0)
    throw PipelineError(Stage::pre_estimation,
                        "dataset shorter than the regression order");
  const std::size_t need = static_cast<std::size_t>(rows) *
                           static_cast<std::size_t>(layout.cols);
  if (need > max_doubles)
    throw PipelineError(
        Stage::pre_estimation,
        "regressor would hold " + std::to_string(need) +
            " doubles, beyond the cap of " + std::to_string(max_doubles) +
            "; Kronecker widths grow exponentially with the lag order, reduce "
            "the orders or raise the cap");
  Phi.resize(rows, layout.cols);
  Y.resize(rows, y.rows());
  Vec row(layout.cols);
  for (Index r = 0; r < rows; ++r) {
    const Index t = layout.t_first + r;
    fill_regressor_row(layout, u, zchan, s, t, row);
    Phi.row(r) = row.transpose();
    Y.row(r) = y.col(t).transpose();
  }
}

MarkovCoeffs unpack_coeffs(const RegressorLayout& layout, const Mat& theta) {
  MarkovCoeffs g;
  g.mode = layout.mode;
  g.n_y = static_cast<int>(theta.cols());
  g.n_u = layout.n_u;
  g.n_psi = layout.n_psi;
  g.n_mu = layout.n_mu;
  g.D0 = theta.middleRows(layout.u_offset[0],
                          static_cast<Index>(1 + layout.n_psi) * layout.n_u)
             .transpose();
  for (int m = 1; m <= layout.nb; ++m)
    g.Gu.push_back(
        theta.middleRows(layout.u_offset[m], g.gu_cols(m)).transpose());
  for (int m = 1; m <= layout.nz; ++m)
    g.Gz.push_back(
        theta.middleRows(layout.z_offset[m - 1], g.gz_cols(m)).transpose());
  return g;
}

namespace {

Mat pack_coeffs(const RegressorLayout& layout, const MarkovCoeffs& g, int n_y) {
  Mat theta = Mat::Zero(layout.cols, n_y);
  theta.middleRows(layout.u_offset[0], g.D0.cols()) = g.D0.transpose();
  for (int m = 1; m <= layout.nb && m <= g.horizon_u(); ++m)
    theta.middleRows(layout.u_offset[m], g.Gu[m - 1].cols()) =
        g.Gu[m - 1].transpose();
  for (int m = 1; m <= layout.nz && m <= g.horizon_z(); ++m)
    theta.middleRows(layout.z_offset[m - 1], g.Gz[m - 1].cols()) =
        g.Gz[m - 1].transpose();
  return theta;
}

} // namespace

FirFit fit_lpv_fir(const DataSet& data, const SchedulingBasis& basis, int order,
                   const RidgeConfig& cfg) {
  data.validate();
  if (order < 0) throw std::invalid_argument("FIR order must be >= 0");
  const SchedulingSamples s = eval_scheduling(basis, data.p);
  const auto layout =
      RegressorLayout::make(Mode::open_loop, static_cast<int>(data.u.rows()),
                            static_cast<int>(data.y.rows()), basis.n_psi(),
                            basis.n_mu(), order, 0);
  Mat Phi, Y;
  build_regressor(layout, data.u, data.y /*unused channel*/, data.y, s,
                  WindowConfig{}.max_doubles, Phi, Y);
  RidgeFit rf = ridge_regression(Phi, Y, cfg);

  FirFit out;
  out.coeffs = unpack_coeffs(layout, rf.coeffs);
  out.lambda = rf.lambda;
  out.residuals = Mat::Zero(data.y.rows(), data.N());
  const Mat R = Y - Phi * rf.coeffs;
  for (Index r = 0; r < R.rows(); ++r)
    out.residuals.col(layout.t_first + r) = R.row(r).transpose();
  return out;
}

ArxFit fit_lpv_arx(const DataSet& data, const SchedulingBasis& basis, int na,
                   int nb, const RidgeConfig& cfg) {
  data.validate();
  if (na < 1 || nb < 0) throw std::invalid_argument("ARX orders must be na>=1, nb>=0");
  if (data.N() < std::max(na, nb) + 1)
    throw PipelineError(Stage::pre_estimation,
                        "dataset shorter than max(na, nb) + 1");
  const SchedulingSamples s = eval_scheduling(basis, data.p);
  const auto layout =
      RegressorLayout::make(Mode::closed_loop, static_cast<int>(data.u.rows()),
                            static_cast<int>(data.y.rows()), basis.n_psi(),
                            basis.n_mu(), nb, na);
  Mat Phi, Y;
  build_regressor(layout, data.u, data.y, data.y, s, WindowConfig{}.max_doubles,
                  Phi, Y);
  RidgeFit rf = ridge_regression(Phi, Y, cfg);

  ArxFit out;
  out.coeffs = unpack_coeffs(layout, rf.coeffs);
  out.lambda = rf.lambda;
  out.residuals = Mat::Zero(data.y.rows(), data.N());
  const Mat R = Y - Phi * rf.coeffs;
  for (Index r = 0; r < R.rows(); ++r)
    out.residuals.col(layout.t_first + r) = R.row(r).transpose();
  return out;
}

namespace {

// One-step-ahead residual filter of the MAX form: xi_t enters its own
// regressor lags, so the prediction errors are produced by forward recursion
// with zero warm-up before the first usable instant.
double max_filter(const RegressorLayout& layout, const Mat& u, const Mat& y,
                  const SchedulingSamples& s, const Mat& theta, Mat& xi_hat) {
  const Index N = u.cols();
  xi_hat.setZero(y.rows(), N);
  Vec row(layout.cols);
  double V = 0.0;
  for (Index t = layout.t_first; t < N; ++t) {
    fill_regressor_row(layout, u, xi_hat, s, t, row);
    const Vec e = y.col(t) - theta.transpose() * row;
    xi_hat.col(t) = e;
    V += e.squaredNorm();
  }
  return V;
}

} // namespace

MaxFit fit_lpv_max(const DataSet& data, const SchedulingBasis& basis, int nb,
                   int nc, const FirFit& init, const GaussNewtonConfig& cfg) {
  data.validate();
  cfg.validate();
  if (nb < 0 || nc < 1)
    throw std::invalid_argument("MAX orders must be nb>=0, nc>=1");
  const int n_y = static_cast<int>(data.y.rows());
  const SchedulingSamples s = eval_scheduling(basis, data.p);
  const auto layout =
      RegressorLayout::make(Mode::open_loop, static_cast<int>(data.u.rows()),
                            n_y, basis.n_psi(), basis.n_mu(), nb, nc);
  const Index N = data.N();
  if (N - layout.t_first < layout.cols / 4)
    throw PipelineError(Stage::pre_estimation,
                        "too few samples for the MAX parameterization");

  Mat theta = pack_coeffs(layout, init.coeffs, n_y);
  Mat xi_hat;
  double V = max_filter(layout, data.u, data.y, s, theta, xi_hat);

  MaxFit best;
  best.xi_hat = xi_hat;
  best.objective = V;
  best.objective_trace.push_back(V);

  const Index rows = N - layout.t_first;
  const Index ucols = layout.z_offset.empty() ? layout.cols : layout.z_offset[0];
  const Index zcols = layout.cols - ucols;
  const std::size_t need = static_cast<std::size_t>(rows) *
                           static_cast<std::size_t>(layout.cols);
  if (need > WindowConfig{}.max_doubles)
    throw PipelineError(Stage::pre_estimation,
                        "MAX regressor beyond the size cap; reduce nb/nc");

  Mat Phi(rows, layout.cols);
  Mat Guu; // cached: the u columns never change across PLR iterations
  bool have_guu = false;

  Mat theta_best = theta;
  Vec rowbuf(layout.cols);
  for (int it = 0; it < cfg.max_iter; ++it) {
    // Regressor at the current innovation estimates.
    for (Index r = 0; r < rows; ++r) {
      fill_regressor_row(layout, data.u, xi_hat, s, layout.t_first + r, rowbuf);
      Phi.row(r) = rowbuf.transpose();
    }
    // E equals the filtered residuals by construction.
    Mat E(rows, n_y);
    for (Index r = 0; r < rows; ++r)
      E.row(r) = xi_hat.col(layout.t_first + r).transpose();

    const Mat g = Phi.transpose() * E;
    const double gnorm = g.norm();
    if (2.0 * gnorm <= cfg.epsilon * std::max(1.0, V)) {
      best.converged = true;
      break;
    }

    if (!have_guu) {
      Guu = Phi.leftCols(ucols).transpose() * Phi.leftCols(ucols);
      have_guu = true;
    }
    Mat G(layout.cols, layout.cols);
    G.topLeftCorner(ucols, ucols) = Guu;
    if (zcols > 0) {
      const Mat Guz = Phi.leftCols(ucols).transpose() * Phi.rightCols(zcols);
      G.topRightCorner(ucols, zcols) = Guz;
      G.bottomLeftCorner(zcols, ucols) = Guz.transpose();
      G.bottomRightCorner(zcols, zcols) =
          Phi.rightCols(zcols).transpose() * Phi.rightCols(zcols);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    const Vec lam = es.eigenvalues().cwiseMax(0.0);
    const double lam_max = lam.maxCoeff();
    const Mat gt = es.eigenvectors().transpose() * g;

    double lm = cfg.lambda_min;
    bool accepted = false;
    for (int damp = 0; damp < 8 && !accepted; ++damp, lm *= 10.0) {
      Mat dt = gt;
      for (Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < cfg.gamma * lam_max)
          dt.row(i).setZero(); // truncated direction
        else
          dt.row(i) /= (lam(i) + lm);
      }
      Mat d = es.eigenvectors() * dt;
      double gd = (g.array() * d.array()).sum();
      const double cosang = gd / std::max(1e-300, g.norm() * d.norm());
      if (cosang < cfg.nu) { // orthogonality safeguard: fall back to gradient
        d = g;
        gd = g.squaredNorm();
      }

      for (double alpha = 1.0; alpha >= cfg.alpha_min; alpha *= 0.5) {
        const Mat theta_try = theta + alpha * d;
        Mat xi_try;
        const double V_try =
            max_filter(layout, data.u, data.y, s, theta_try, xi_try);
        if (V_try <= V - cfg.beta1 * alpha * 2.0 * gd) {
          theta = theta_try;
          xi_hat = std::move(xi_try);
          V = V_try;
          accepted = true;
          break;
        }
      }
    }
    best.iterations = it + 1;
    if (!accepted) break; // no admissible step even under heavy damping
    best.objective_trace.push_back(V);
    if (V < best.objective) {
      best.objective = V;
      theta_best = theta;
      best.xi_hat = xi_hat;
    }
  }

  best.coeffs = unpack_coeffs(layout, theta_best);
  return best;
}

} // namespace lpvssid
