#include "lpvssid/ss_estimation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lpvssid/errors.hpp"
#include "lpvssid/simulation.hpp"

namespace lpvssid {

namespace {

Vec kron_vec(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// Solves Theta * Phi = Y in least squares (Theta = Y Phi^+) with a rank
// check at 1e-10 relative tolerance; `what` names the step for errors.
Mat solve_right_pinv(const Mat& Phi, const Mat& Y, const char* what) {
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(Phi.transpose());
  cod.setThreshold(1e-10);
  if (cod.rank() < Phi.rows())
    throw PipelineError(Stage::ss_estimation,
                        std::string(what) +
                            " regressor is rank deficient (rank " +
                            std::to_string(cod.rank()) + " of " +
                            std::to_string(Phi.rows()) +
                            "); enrich the excitation or reduce n_psi");
  return cod.solve(Y.transpose()).transpose();
}

MatList split_blocks(const Mat& Theta, Index at, int count, Index width) {
  MatList out;
  for (int i = 0; i < count; ++i)
    out.push_back(Theta.middleCols(at + i * width, width));
  return out;
}

} // namespace

OutputLsResult estimate_output_matrices(const Mat& X, const DataSet& data,
                                        const SchedulingSamples& s,
                                        Index t_begin) {
  const Index M = X.cols();
  const int n_x = static_cast<int>(X.rows());
  const int n_u = static_cast<int>(data.u.rows());
  const int n_psi1 = static_cast<int>(s.psi.rows());
  if (t_begin + M > data.N())
    throw std::invalid_argument("state columns run past the dataset");

  Mat Phi(static_cast<Index>(n_psi1) * (n_x + n_u), M);
  Mat Y(data.y.rows(), M);
  for (Index j = 0; j < M; ++j) {
    const Index t = t_begin + j;
    Phi.col(j).head(static_cast<Index>(n_psi1) * n_x) =
        kron_vec(s.psi.col(t), X.col(j));
    Phi.col(j).tail(static_cast<Index>(n_psi1) * n_u) =
        kron_vec(s.psi.col(t), data.u.col(t));
    Y.col(j) = data.y.col(t);
  }

  const Mat Theta = solve_right_pinv(Phi, Y, "output-equation");
  OutputLsResult out;
  out.C = split_blocks(Theta, 0, n_psi1, n_x);
  out.D = split_blocks(Theta, static_cast<Index>(n_psi1) * n_x, n_psi1, n_u);
  out.xi = Y - Theta * Phi;
  return out;
}

StateLsResult estimate_state_matrices(const Mat& X, const Mat& xi,
                                      const DataSet& data,
                                      const SchedulingSamples& s,
                                      Index t_begin) {
  const Index M = X.cols();
  if (M < 2)
    throw std::invalid_argument("state regression needs at least 2 instants");
  if (xi.cols() != M)
    throw std::invalid_argument("innovation columns must align with states");
  if (xi.norm() == 0.0)
    throw PipelineError(Stage::ss_estimation,
                        "innovation sequence is identically zero: K is "
                        "unidentifiable (rank-deficient regressor)");
  const int n_x = static_cast<int>(X.rows());
  const int n_u = static_cast<int>(data.u.rows());
  const int n_y = static_cast<int>(xi.rows());
  const int n_psi1 = static_cast<int>(s.psi.rows());

  Mat Phi(static_cast<Index>(n_psi1) * (n_x + n_u + n_y), M - 1);
  Mat Xnext(n_x, M - 1);
  for (Index j = 0; j + 1 < M; ++j) {
    const Index t = t_begin + j;
    const Vec psi = s.psi.col(t);
    Phi.col(j).segment(0, static_cast<Index>(n_psi1) * n_x) =
        kron_vec(psi, X.col(j));
    Phi.col(j).segment(static_cast<Index>(n_psi1) * n_x,
                       static_cast<Index>(n_psi1) * n_u) =
        kron_vec(psi, data.u.col(t));
    Phi.col(j).tail(static_cast<Index>(n_psi1) * n_y) =
        kron_vec(psi, xi.col(j));
    Xnext.col(j) = X.col(j + 1);
  }

  const Mat Theta = solve_right_pinv(Phi, Xnext, "state-equation");
  StateLsResult out;
  out.A = split_blocks(Theta, 0, n_psi1, n_x);
  out.B = split_blocks(Theta, static_cast<Index>(n_psi1) * n_x, n_psi1, n_u);
  out.K = split_blocks(Theta, static_cast<Index>(n_psi1) * (n_x + n_u), n_psi1,
                       n_y);
  return out;
}

namespace {

// State regression without the innovation channel, for records whose
// output-step residuals carry no usable energy (noiseless data); K is pinned
// at zero there.
StateLsResult estimate_state_matrices_no_k(const Mat& X, const DataSet& data,
                                           const SchedulingSamples& s,
                                           Index t_begin, int n_y) {
  const Index M = X.cols();
  const int n_x = static_cast<int>(X.rows());
  const int n_u = static_cast<int>(data.u.rows());
  const int n_psi1 = static_cast<int>(s.psi.rows());
  Mat Phi(static_cast<Index>(n_psi1) * (n_x + n_u), M - 1);
  Mat Xnext(n_x, M - 1);
  for (Index j = 0; j + 1 < M; ++j) {
    const Index t = t_begin + j;
    const Vec psi = s.psi.col(t);
    Phi.col(j).head(static_cast<Index>(n_psi1) * n_x) = kron_vec(psi, X.col(j));
    Phi.col(j).tail(static_cast<Index>(n_psi1) * n_u) =
        kron_vec(psi, data.u.col(t));
    Xnext.col(j) = X.col(j + 1);
  }
  const Mat Theta = solve_right_pinv(Phi, Xnext, "state-equation");
  StateLsResult out;
  out.A = split_blocks(Theta, 0, n_psi1, n_x);
  out.B = split_blocks(Theta, static_cast<Index>(n_psi1) * n_x, n_psi1, n_u);
  for (int i = 0; i < n_psi1; ++i) out.K.push_back(Mat::Zero(n_x, n_y));
  return out;
}

} // namespace

Method method_from_name(const std::string& name) {
  if (name == "cca-ol") return Method::cca_ol;
  if (name == "hk-ol") return Method::hk_ol;
  if (name == "n4sid") return Method::n4sid;
  if (name == "p-cca") return Method::p_cca;
  if (name == "ssarx") return Method::ssarx;
  if (name == "hk-cl") return Method::hk_cl;
  if (name == "pbsid") return Method::pbsid;
  if (name == "p-ssarx") return Method::p_ssarx;
  throw std::invalid_argument(
      "unknown method '" + name +
      "'; supported: cca-ol, hk-ol, n4sid, p-cca, ssarx, hk-cl, pbsid, p-ssarx");
}

const char* method_name(Method m) {
  switch (m) {
    case Method::cca_ol: return "cca-ol";
    case Method::hk_ol: return "hk-ol";
    case Method::n4sid: return "n4sid";
    case Method::p_cca: return "p-cca";
    case Method::ssarx: return "ssarx";
    case Method::hk_cl: return "hk-cl";
    case Method::pbsid: return "pbsid";
    case Method::p_ssarx: return "p-ssarx";
  }
  return "?";
}

bool method_is_open_loop(Method m) {
  return m == Method::cca_ol || m == Method::hk_ol || m == Method::n4sid ||
         m == Method::p_cca;
}

PipelinePrep prepare_pipeline(const DataSet& data, const SchedulingBasis& basis,
                              bool open_loop, const IdentifyConfig& cfg) {
  data.validate();
  cfg.win.validate();
  if (data.N() < cfg.win.p_win + cfg.win.f + 1)
    throw PipelineError(Stage::data_equations,
                        "dataset too short: need N >= p_win + f + 1");

  const int horizon = cfg.win.f + cfg.win.p_win - 1;
  const int nb = cfg.nb < 0 ? horizon : cfg.nb;
  const int nc = cfg.nc < 0 ? horizon : cfg.nc;
  const int na = cfg.na < 0 ? horizon : cfg.na;

  PipelinePrep prep;
  prep.s = eval_scheduling(basis, data.p);

  MarkovCoeffs coeffs;
  Mat xi_hat;
  if (open_loop) {
    FirFit fir = fit_lpv_fir(data, basis, nb, cfg.ridge);
    MaxFit mf = fit_lpv_max(data, basis, nb, nc, fir, cfg.gn);
    coeffs = std::move(mf.coeffs);
    xi_hat = std::move(mf.xi_hat);
    prep.pre_estimation_converged = mf.converged;
    prep.ridge_lambda = fir.lambda;
  } else {
    ArxFit arx = fit_lpv_arx(data, basis, na, nb, cfg.ridge);
    coeffs = std::move(arx.coeffs);
    xi_hat = std::move(arx.residuals);
    prep.ridge_lambda = arx.lambda;
  }

  // Vanishing innovation estimates (noiseless records) make the xi-expanded
  // regressor rows of the open-loop stacking degenerate; the channel is
  // dropped there and the data-equation reduces to its deterministic form.
  const bool z_channel =
      !open_loop || xi_hat.norm() > 1e-6 * std::max(1e-300, data.y.norm());
  prep.hankel =
      markov_to_hankel(coeffs, cfg.win, cfg.allow_truncation, z_channel);

  DataSet stacked_input = data;
  if (open_loop) stacked_input.xi = std::move(xi_hat);
  prep.sdm = corrected_future(stacked_input, prep.s, prep.hankel);
  return prep;
}

IdentifiedModel finish_identify(const DataSet& data,
                                const SchedulingBasis& basis,
                                const PipelinePrep& prep,
                                const IdentifyConfig& cfg) {
  (void)basis;
  if (cfg.n_x < 1) throw std::invalid_argument("state order must be >= 1");

  StateSequence state;
  switch (cfg.method) {
    case Method::cca_ol:
    case Method::ssarx:
      state = cca_state(prep.sdm, cfg.n_x);
      break;
    case Method::hk_ol:
    case Method::hk_cl: {
      UnifiedOptions opt{cfg.n_x, Weighting::identity, false};
      state = unified_state(prep.hankel.H0, prep.sdm.Z, prep.sdm.Ycorr, opt).state;
      break;
    }
    case Method::n4sid:
    case Method::pbsid: {
      UnifiedOptions opt{cfg.n_x, Weighting::gramian_sqrt,
                         cfg.efficient_pbsid && cfg.method == Method::pbsid};
      state = unified_state(prep.hankel.H0, prep.sdm.Z, prep.sdm.Ycorr, opt).state;
      break;
    }
    case Method::p_cca:
    case Method::p_ssarx: {
      UnifiedOptions opt{cfg.n_x, Weighting::whitened, false};
      state = unified_state(prep.hankel.H0, prep.sdm.Z, prep.sdm.Ycorr, opt).state;
      break;
    }
  }

  // Two-step least-squares recovery of the SS matrices.
  OutputLsResult ols =
      estimate_output_matrices(state.X, data, prep.s, prep.sdm.t_begin);
  const double resid_energy = ols.xi.norm();
  const double signal_energy = std::max(1e-300, data.y.norm());
  StateLsResult sls;
  if (resid_energy <= 1e-8 * signal_energy) {
    // Noiseless record: the innovation channel carries no information, K = 0.
    sls = estimate_state_matrices_no_k(state.X, data, prep.s, prep.sdm.t_begin,
                                       static_cast<int>(data.y.rows()));
  } else {
    sls = estimate_state_matrices(state.X, ols.xi, data, prep.s,
                                  prep.sdm.t_begin);
  }

  IdentifiedModel out;
  LpvSsModel m;
  m.n_x = cfg.n_x;
  m.n_u = static_cast<int>(data.u.rows());
  m.n_y = static_cast<int>(data.y.rows());
  m.A = sls.A;
  m.B = sls.B;
  m.C = ols.C;
  m.D = ols.D;
  m.K = sls.K;
  Mat cov = (ols.xi * ols.xi.transpose()) / static_cast<double>(ols.xi.cols());
  cov = 0.5 * (cov + cov.transpose());
  const double floor = std::max(1e-12, 1e-12 * cov.trace());
  m.Xi2 = cov + floor * Mat::Identity(m.n_y, m.n_y);
  m.validate();

  out.model = std::move(m);
  out.singular_values = state.singular_values;
  out.log_likelihood = state.log_likelihood;
  out.pre_estimation_converged = prep.pre_estimation_converged;
  out.ridge_lambda = prep.ridge_lambda;
  out.innovation_covariance = cov;
  out.n_effective = prep.sdm.n_eff();
  out.state = std::move(state);
  return out;
}

IdentifiedModel identify(const DataSet& data, const SchedulingBasis& basis,
                         const IdentifyConfig& cfg) {
  if (cfg.n_x < 1) throw std::invalid_argument("state order must be >= 1");
  const PipelinePrep prep =
      prepare_pipeline(data, basis, method_is_open_loop(cfg.method), cfg);
  return finish_identify(data, basis, prep, cfg);
}

namespace {

std::vector<std::complex<double>> sorted_eigs(const Mat& A) {
  Eigen::EigenSolver<Mat> es(A);
  std::vector<std::complex<double>> v;
  for (Index i = 0; i < A.rows(); ++i) v.push_back(es.eigenvalues()(i));
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return v;
}

} // namespace

ModelDistance model_distance(const LpvSsModel& m1, const LpvSsModel& m2,
                             const SchedulingBasis& basis,
                             const DataSet& validation) {
  if (m1.n_u != m2.n_u || m1.n_y != m2.n_y)
    throw std::invalid_argument("model_distance: IO dimensions differ");
  ModelDistance d;
  const Mat y1 = simulate(m1, basis, validation.u, validation.p, Mat()).y;
  const Mat y2 = simulate(m2, basis, validation.u, validation.p, Mat()).y;
  d.bfr_sim = bfr(y1, y2);
  const Mat p1 = one_step_predictor(m1, basis, validation);
  const Mat p2 = one_step_predictor(m2, basis, validation);
  d.bfr_pred = bfr(p1, p2);
  d.eig_A0_m1 = sorted_eigs(m1.A[0]);
  d.eig_A0_m2 = sorted_eigs(m2.A[0]);
  if (m1.n_psi() >= 1) d.eig_A1_m1 = sorted_eigs(m1.A[1]);
  if (m2.n_psi() >= 1) d.eig_A1_m2 = sorted_eigs(m2.A[1]);
  return d;
}

} // namespace lpvssid
