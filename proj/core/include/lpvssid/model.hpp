#ifndef LPVSSID_MODEL_HPP
#define LPVSSID_MODEL_HPP

#include <optional>

#include "lpvssid/basis.hpp"
#include "lpvssid/types.hpp"

namespace lpvssid {

/// LPV state-space model in innovation form,
///   x_{t+1} = A(p_t) x_t + B(p_t) u_t + K(p_t) xi_t
///   y_t     = C(p_t) x_t + D(p_t) u_t + xi_t
/// with every matrix function an affine combination M(p) = sum_i M_i psi^(i)(p)
/// over a shared scheduling basis (psi^(0) = 1) and xi ~ N(0, Xi2).
struct LpvSsModel {
  int n_x = 0, n_u = 0, n_y = 0;
  MatList A, B, C, D, K; // n_psi+1 coefficient matrices each
  Mat Xi2;               // n_y x n_y innovation covariance, SPD

  int n_psi() const { return static_cast<int>(A.size()) - 1; }

  // Throws std::invalid_argument on inconsistent dimensions or a Xi2 that is
  // not symmetric positive definite.
  void validate() const;
};

enum class Which { A, B, C, D, K };

// M(p) = sum_i M_i psi_i for an already-evaluated basis vector.
Mat eval_matrix(const LpvSsModel& model, Which which, const Vec& psi);

// A(p) - K(p) C(p) evaluated pointwise.
Mat eval_closed_loop_A(const LpvSsModel& model, const Vec& psi);

// [B(p) - K(p) D(p), K(p)] evaluated pointwise.
Mat eval_closed_loop_B(const LpvSsModel& model, const Vec& psi);

/// Coefficient lists of the closed-loop dynamics over the extended basis mu:
///   Atil(p) = A(p) - K(p)C(p) = sum_{i=0}^{n_mu} Acal[i] mu^(i)(p)
///   B(p) - K(p)D(p)           = sum_{i=0}^{n_mu} Bcal[i] mu^(i)(p)
/// The y-channel gain K(p) stays affine in psi and is carried unchanged.
struct ClosedLoopCoeffs {
  MatList Acal; // n_mu+1
  MatList Bcal; // n_mu+1
  MatList K;    // n_psi+1
};

ClosedLoopCoeffs closed_loop_coeffs(const LpvSsModel& model,
                                    const SchedulingBasis& basis);

// State basis change x -> T^{-1} x. Throws std::invalid_argument when T is
// numerically singular.
LpvSsModel apply_similarity(const LpvSsModel& model, const Mat& T);

struct StabilityCheckConfig {
  int n_trajectories = 50;
  int length = 1000;
  double tol = 1e-6; // required norm contraction from unit initial state
  std::uint64_t seed = 1234;
};

// Empirical check of asymptotic stability: simulates the homogeneous state
// recursion under independent random scheduling trajectories drawn uniformly
// from the basis box and requires ||x_T|| < tol from ||x_0|| = 1.
bool empirical_stability_check(const LpvSsModel& model,
                               const SchedulingBasis& basis, Mode mode,
                               const StabilityCheckConfig& cfg = {});

/// Aligned input/scheduling/output record of length N (one column per
/// sample). xi carries true innovations when known (oracle tests only).
struct DataSet {
  Mat u; // n_u x N
  Mat p; // n_p x N
  Mat y; // n_y x N
  std::optional<Mat> xi; // n_y x N

  Index N() const { return y.cols(); }
  void validate() const;
};

} // namespace lpvssid

#endif
