#include "lpvssid/realization.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lpvssid/errors.hpp"

namespace lpvssid {

SymSqrt sym_sqrt(const Mat& S, const std::string& name, double floor_rel) {
  Eigen::SelfAdjointEigenSolver<Mat> es(S);
  const Vec lam = es.eigenvalues();
  const double lam_max = lam.maxCoeff();
  const double floor = floor_rel * std::max(lam_max, 0.0);
  SymSqrt out;
  out.min_eig = lam.minCoeff();
  if (lam_max <= 0 || out.min_eig < floor)
    throw PersistencyError(name, out.min_eig, floor);
  Vec sq = lam.array().sqrt();
  out.sqrt = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
  out.inv_sqrt = es.eigenvectors() * sq.cwiseInverse().asDiagonal() *
                 es.eigenvectors().transpose();
  out.logdet = lam.array().log().sum();
  return out;
}

namespace {

// Bit-stable SVD sign convention: largest-magnitude entry of every left
// singular vector is made positive; the matching right vector flips too.
void fix_signs(Mat& U, Mat& V) {
  for (Index j = 0; j < U.cols(); ++j) {
    Index imax = 0;
    U.col(j).cwiseAbs().maxCoeff(&imax);
    if (U(imax, j) < 0) {
      U.col(j) = -U.col(j);
      if (j < V.cols()) V.col(j) = -V.col(j);
    }
  }
}

} // namespace

ConstrainedSvdResult constrained_svd(const Mat& Ycorr, const Mat& Z) {
  if (Ycorr.cols() != Z.cols())
    throw std::invalid_argument("constrained_svd: column counts differ");
  const Index N = Ycorr.cols();
  const double invN = 1.0 / static_cast<double>(N);

  const Mat Sy = invN * (Ycorr * Ycorr.transpose());
  const Mat Sz = invN * (Z * Z.transpose());
  const SymSqrt wy = sym_sqrt(Sy, "corrected-future covariance (1/N) Y Y'");
  const SymSqrt wz = sym_sqrt(Sz, "past-regressor covariance (1/N) Z Z'");

  const Mat Cw = wy.inv_sqrt * (invN * (Ycorr * Z.transpose())) * wz.inv_sqrt;
  Eigen::JacobiSVD<Mat> svd(Cw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Mat U = svd.matrixU();
  Mat V = svd.matrixV();
  fix_signs(U, V);

  ConstrainedSvdResult out;
  out.U_tilde = wy.inv_sqrt * U;
  out.S = svd.singularValues();
  out.V_tilde = wz.inv_sqrt * V;
  out.logdet_cov_y = wy.logdet;
  out.N = N;
  return out;
}

StateSequence cca_state(const StackedDataMatrices& m, int n_x) {
  const ConstrainedSvdResult svd = constrained_svd(m.Ycorr, m.Z);
  if (n_x < 0 || n_x > svd.S.size())
    throw PipelineError(Stage::realization,
                        "requested order exceeds the available rank " +
                            std::to_string(svd.S.size()));
  StateSequence st;
  st.method = m.mode == Mode::open_loop ? "cca" : "ssarx";
  st.singular_values = svd.S;
  st.X = svd.V_tilde.leftCols(n_x).transpose() * m.Z;
  st.log_likelihood = -loglik_cca(svd, n_x, m.win.f,
                                  static_cast<int>(m.Ycorr.rows()) / m.win.f,
                                  m.n_eff());
  return st;
}

double loglik_cca(const ConstrainedSvdResult& svd, int n_x, int f, int n_y,
                  Index N) {
  if (n_x < 0 || n_x > svd.S.size())
    throw std::invalid_argument("loglik_cca: order exceeds spectrum length");
  const double half_n = 0.5 * static_cast<double>(N);
  double neg_log_l =
      half_n * f * n_y * (std::log(2.0 * M_PI) + 1.0) + half_n * svd.logdet_cov_y;
  for (int i = 0; i < n_x; ++i) {
    double s = svd.S(i);
    if (s >= 1.0) s = 1.0 - 1e-12; // clamp near-deterministic directions
    neg_log_l += half_n * std::log1p(-s * s);
  }
  return neg_log_l;
}

UnifiedState unified_state(const Mat& H0, const Mat& Z, const Mat& Ycorr,
                           const UnifiedOptions& opt) {
  if (H0.cols() != Z.rows())
    throw std::invalid_argument("unified_state: H0/Z dimension mismatch");
  const int n_x = opt.n_x;

  if (opt.efficient) {
    // SVD of W1 H0 Z directly; identical state, no square root of Z Z'.
    Mat M = H0 * Z;
    if (opt.weighting == Weighting::whitened) {
      const Mat Sy = (1.0 / Z.cols()) * (Ycorr * Ycorr.transpose());
      M = sym_sqrt(Sy, "corrected-future covariance (1/N) Y Y'").inv_sqrt * M;
    }
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Mat U = svd.matrixU();
    Mat V = svd.matrixV();
    fix_signs(U, V);
    if (n_x < 1 || n_x > svd.singularValues().size())
      throw PipelineError(Stage::realization, "order exceeds available rank");
    UnifiedState out;
    const Vec shalf = svd.singularValues().head(n_x).array().sqrt();
    out.state.X = shalf.asDiagonal() * V.leftCols(n_x).transpose();
    out.state.singular_values = svd.singularValues();
    out.state.method = "unified/efficient";
    out.O0 = U.leftCols(n_x) * shalf.asDiagonal();
    out.Rp = Mat(); // not recoverable without the W2 route
    return out;
  }

  Mat W1inv;
  Mat M = H0;
  if (opt.weighting == Weighting::whitened) {
    const Mat Sy = (1.0 / Z.cols()) * (Ycorr * Ycorr.transpose());
    const SymSqrt wy = sym_sqrt(Sy, "corrected-future covariance (1/N) Y Y'");
    M = wy.inv_sqrt * M;
    W1inv = wy.sqrt;
  }
  Mat W2, W2inv;
  if (opt.weighting != Weighting::identity) {
    const Mat G = Z * Z.transpose();
    const SymSqrt wz = sym_sqrt(G, "past-regressor gramian Z Z'");
    W2 = wz.sqrt;
    W2inv = wz.inv_sqrt;
    M = M * W2;
  }

  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Mat U = svd.matrixU();
  Mat V = svd.matrixV();
  fix_signs(U, V);
  if (n_x < 1 || n_x > svd.singularValues().size())
    throw PipelineError(Stage::realization, "order exceeds available rank");

  UnifiedState out;
  const Vec shalf = svd.singularValues().head(n_x).array().sqrt();
  out.state.singular_values = svd.singularValues();
  out.state.method = "unified";
  out.O0 = (W1inv.size() ? W1inv * U.leftCols(n_x) : Mat(U.leftCols(n_x))) *
           shalf.asDiagonal();
  out.Rp = shalf.asDiagonal() * V.leftCols(n_x).transpose();
  if (W2inv.size()) out.Rp = out.Rp * W2inv;
  out.state.X = out.Rp * Z;
  return out;
}

OrderSelection select_order(const Vec& sv) {
  if (sv.size() == 0)
    throw std::invalid_argument("select_order: empty spectrum");
  OrderSelection sel;
  if (sv.size() == 1) {
    sel.n_x = 1;
    sel.confident = false;
    return sel;
  }
  double best_ratio = -1.0;
  for (Index i = 0; i + 1 < sv.size(); ++i) {
    const double lo = sv(i + 1);
    const double ratio = lo <= 0 ? std::numeric_limits<double>::infinity()
                                 : sv(i) / lo;
    if (ratio > best_ratio + 1e-15) { // strict improvement: ties stay small
      best_ratio = ratio;
      sel.n_x = static_cast<int>(i) + 1;
    }
  }
  sel.confident = best_ratio > 2.0;
  return sel;
}

} // namespace lpvssid
