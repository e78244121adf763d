#include "lpvssid/model.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

#include "lpvssid/rng.hpp"

namespace lpvssid {

namespace {

void check_list(const MatList& list, Index rows, Index cols, const char* name,
                std::size_t expected) {
  if (list.size() != expected)
    throw std::invalid_argument(std::string(name) + " coefficient count mismatch");
  for (const Mat& m : list)
    if (m.rows() != rows || m.cols() != cols)
      throw std::invalid_argument(std::string(name) + " coefficient dimension mismatch");
}

} // namespace

void LpvSsModel::validate() const {
  if (A.empty()) throw std::invalid_argument("model has no coefficient matrices");
  const std::size_t n = A.size();
  check_list(A, n_x, n_x, "A", n);
  check_list(B, n_x, n_u, "B", n);
  check_list(C, n_y, n_x, "C", n);
  check_list(D, n_y, n_u, "D", n);
  check_list(K, n_x, n_y, "K", n);
  if (Xi2.rows() != n_y || Xi2.cols() != n_y)
    throw std::invalid_argument("Xi2 dimension mismatch");
  if (!Xi2.isApprox(Xi2.transpose(), 1e-10))
    throw std::invalid_argument("Xi2 is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(Xi2);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("Xi2 is not positive definite");
}

Mat eval_matrix(const LpvSsModel& model, Which which, const Vec& psi) {
  const MatList* list = nullptr;
  switch (which) {
    case Which::A: list = &model.A; break;
    case Which::B: list = &model.B; break;
    case Which::C: list = &model.C; break;
    case Which::D: list = &model.D; break;
    case Which::K: list = &model.K; break;
  }
  if (psi.size() != static_cast<Index>(list->size()))
    throw std::invalid_argument("psi length does not match coefficient count");
  Mat out = Mat::Zero((*list)[0].rows(), (*list)[0].cols());
  for (Index i = 0; i < psi.size(); ++i) out += psi(i) * (*list)[i];
  return out;
}

Mat eval_closed_loop_A(const LpvSsModel& model, const Vec& psi) {
  return eval_matrix(model, Which::A, psi) -
         eval_matrix(model, Which::K, psi) * eval_matrix(model, Which::C, psi);
}

Mat eval_closed_loop_B(const LpvSsModel& model, const Vec& psi) {
  Mat out(model.n_x, model.n_u + model.n_y);
  out.leftCols(model.n_u) =
      eval_matrix(model, Which::B, psi) -
      eval_matrix(model, Which::K, psi) * eval_matrix(model, Which::D, psi);
  out.rightCols(model.n_y) = eval_matrix(model, Which::K, psi);
  return out;
}

ClosedLoopCoeffs closed_loop_coeffs(const LpvSsModel& model,
                                    const SchedulingBasis& basis) {
  model.validate();
  if (basis.n_psi() != model.n_psi())
    throw std::invalid_argument("basis/model n_psi mismatch");
  const int n_psi = model.n_psi();
  ClosedLoopCoeffs cl;
  cl.Acal.reserve(basis.n_mu() + 1);
  cl.Bcal.reserve(basis.n_mu() + 1);
  cl.K = model.K;

  // Constant and affine entries: A0 - K0C0, then A_i - K_iC0 - K0C_i.
  cl.Acal.push_back(model.A[0] - model.K[0] * model.C[0]);
  cl.Bcal.push_back(model.B[0] - model.K[0] * model.D[0]);
  for (int i = 1; i <= n_psi; ++i) {
    cl.Acal.push_back(model.A[i] - model.K[i] * model.C[0] - model.K[0] * model.C[i]);
    cl.Bcal.push_back(model.B[i] - model.K[i] * model.D[0] - model.K[0] * model.D[i]);
  }
  // Product entries in the mu pair order: -K_iC_i on the diagonal pairs,
  // -K_iC_j - K_jC_i off it.
  for (const auto& [i, j] : basis.mu_pairs()) {
    if (i == j) {
      cl.Acal.push_back(-model.K[i] * model.C[i]);
      cl.Bcal.push_back(-model.K[i] * model.D[i]);
    } else {
      cl.Acal.push_back(-model.K[i] * model.C[j] - model.K[j] * model.C[i]);
      cl.Bcal.push_back(-model.K[i] * model.D[j] - model.K[j] * model.D[i]);
    }
  }
  return cl;
}

LpvSsModel apply_similarity(const LpvSsModel& model, const Mat& T) {
  model.validate();
  if (T.rows() != model.n_x || T.cols() != model.n_x)
    throw std::invalid_argument("similarity transform dimension mismatch");
  Eigen::FullPivLU<Mat> lu(T);
  if (!lu.isInvertible())
    throw std::invalid_argument("similarity transform is singular");
  const Mat Tinv = lu.inverse();

  LpvSsModel out = model;
  for (std::size_t i = 0; i < model.A.size(); ++i) {
    out.A[i] = Tinv * model.A[i] * T;
    out.B[i] = Tinv * model.B[i];
    out.C[i] = model.C[i] * T;
    out.K[i] = Tinv * model.K[i];
  }
  return out;
}

bool empirical_stability_check(const LpvSsModel& model,
                               const SchedulingBasis& basis, Mode mode,
                               const StabilityCheckConfig& cfg) {
  Rng rng(cfg.seed);
  const int n_p = basis.n_p();
  for (int traj = 0; traj < cfg.n_trajectories; ++traj) {
    Vec x = rng.gaussian_matrix(model.n_x, 1);
    x /= x.norm();
    for (int t = 0; t < cfg.length; ++t) {
      Vec p(n_p);
      for (int d = 0; d < n_p; ++d)
        p(d) = rng.uniform(basis.lower()(d), basis.upper()(d));
      const Vec psi = basis.psi(p);
      const Mat At = mode == Mode::open_loop ? eval_matrix(model, Which::A, psi)
                                             : eval_closed_loop_A(model, psi);
      x = At * x;
      if (x.norm() < cfg.tol) break;
      if (!x.allFinite() || x.norm() > 1e12) return false;
    }
    if (x.norm() >= cfg.tol) return false;
  }
  return true;
}

void DataSet::validate() const {
  const Index n = y.cols();
  if (u.cols() != n || p.cols() != n)
    throw std::invalid_argument("dataset sequences have inconsistent lengths");
  if (xi && (xi->cols() != n || xi->rows() != y.rows()))
    throw std::invalid_argument("innovation sequence has inconsistent dimensions");
}

} // namespace lpvssid
