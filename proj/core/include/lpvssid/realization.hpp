#ifndef LPVSSID_REALIZATION_HPP
#define LPVSSID_REALIZATION_HPP

#include <optional>
#include <string>

#include "lpvssid/data_equations.hpp"
#include "lpvssid/types.hpp"

namespace lpvssid {

/// Whitened cross-covariance SVD
///   (1/N Y Y')^{-1/2} (1/N Y Z') (1/N Z Z')^{-1/2} = U S V'
/// with Utilde = (1/N Y Y')^{-1/2} U and Vtilde = (1/N Z Z')^{-1/2} V, so
/// Utilde' (1/N Y Y') Utilde = I and likewise for Vtilde (economy columns).
/// Singular values are canonical correlations in [0, 1].
struct ConstrainedSvdResult {
  Mat U_tilde;       // (n_y f) x (n_y f)
  Vec S;             // descending, length min(n_y f, n_Z)
  Mat V_tilde;       // n_Z x length(S)
  double logdet_cov_y = 0.0; // log det (1/N Y Y'); -log det(Utilde)^2
  Index N = 0;
};

// Throws PersistencyError naming the offending matrix when a sample
// covariance has an eigenvalue below 1e-12 times its largest.
ConstrainedSvdResult constrained_svd(const Mat& Ycorr, const Mat& Z);

struct StateSequence {
  Mat X;               // n_x x N_eff
  Vec singular_values; // full spectrum of the defining SVD
  std::string method;
  std::optional<double> log_likelihood;
};

// Maximum-likelihood state estimate Xhat = Vtilde_{n_x}' Z with unit sample
// covariance by construction; same operation serves the open-loop (CCA) and
// closed-loop (SS-ARX) cases through the stacked matrices' mode.
StateSequence cca_state(const StackedDataMatrices& m, int n_x);

// -log L = (f n_y N / 2)(log 2pi + 1) - (N/2) log det(Utilde)^2
//          + (N/2) sum_{i<=n_x} log(1 - s_i^2),
// with s_i clamped at 1 - 1e-12 (near-deterministic directions).
double loglik_cca(const ConstrainedSvdResult& svd, int n_x, int f, int n_y,
                  Index N);

// Weighting pairs of the unified realization theorems. `gramian_sqrt` is the
// N4SID choice in the open loop and the PBSID choice in the closed loop;
// `whitened` is p-CCA resp. p-SS-ARX.
enum class Weighting { identity, gramian_sqrt, whitened };

struct UnifiedOptions {
  int n_x = 0;
  Weighting weighting = Weighting::identity;
  // Square-root-free variant: SVD of W1 H0 Z directly with Xhat = S^{1/2} V',
  // algebraically identical to the gramian_sqrt weighting but cheaper.
  bool efficient = false;
};

struct UnifiedState {
  StateSequence state;
  Mat O0;   // W1^{-1} U_{n_x} S^{1/2}
  Mat Rp;   // S^{1/2} V_{n_x}' W2^{-1}
};

// Weighted SVD realization W1 H0 W2 = U S V', state
// Xhat = S^{1/2} V_{n_x}' W2^{-1} Z. H0 must be pre-estimated; this operation
// never fits anything.
UnifiedState unified_state(const Mat& H0, const Mat& Z, const Mat& Ycorr,
                           const UnifiedOptions& opt);

struct OrderSelection {
  int n_x = 0;
  bool confident = true; // false on a flat spectrum (max gap ratio < 2)
};

// Largest-gap heuristic on a descending spectrum; ties break toward the
// smaller order.
OrderSelection select_order(const Vec& singular_values);

// Symmetric eigendecomposition-based matrix square roots with a relative
// eigenvalue floor; used by every weighting above.
struct SymSqrt {
  Mat sqrt;
  Mat inv_sqrt;
  double logdet = 0.0; // of the original matrix
  double min_eig = 0.0;
};
SymSqrt sym_sqrt(const Mat& S, const std::string& name,
                 double floor_rel = 1e-12);

} // namespace lpvssid

#endif
