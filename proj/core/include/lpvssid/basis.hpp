#ifndef LPVSSID_BASIS_HPP
#define LPVSSID_BASIS_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lpvssid/types.hpp"

namespace lpvssid {

/// Scheduling basis: scalar functions psi^(1)..psi^(n_psi) of the scheduling
/// point p on a box P, with the constant psi^(0) = 1 prepended on evaluation.
///
/// The extended vector mu(p) collects the unique pairwise products needed by
/// the closed-loop (predictor) dynamics:
///   mu = [1, psi^(1)..psi^(n_psi), psi^(i)psi^(j) for 1 <= i <= j]
/// with the (i,j) pairs in lexicographic order, so n_mu = n_psi(n_psi+3)/2.
class SchedulingBasis {
 public:
  using Fn = std::function<double(const Vec&)>;

  // User-defined basis. Each function must be bounded on the box [lo, hi];
  // boundedness is spot-checked on a random sample at construction.
  SchedulingBasis(std::vector<Fn> funcs, Vec lo, Vec hi,
                  std::string family = "custom");

  // psi^(i)(p) = p_i, the built-in family used by the benchmark.
  static SchedulingBasis affine(int n_p, Vec lo, Vec hi);

  // n_psi = 0 (constant matrices, the LTI special case).
  static SchedulingBasis constant(int n_p, Vec lo, Vec hi);

  int n_psi() const { return static_cast<int>(funcs_.size()); }
  int n_p() const { return static_cast<int>(lo_.size()); }
  int n_mu() const { return n_psi() * (n_psi() + 3) / 2; }

  // [1, psi^(1)(p), ..., psi^(n_psi)(p)]; throws std::domain_error if p is
  // outside the declared box.
  Vec psi(const Vec& p) const;

  Vec mu(const Vec& p) const { return mu_from_psi(psi(p)); }

  // Expands an already-evaluated psi vector into the extended mu vector.
  Vec mu_from_psi(const Vec& psi) const;

  // Product pairs (i, j), 1-based into psi, in the order they appear in mu
  // after the leading [1, psi^(1..n_psi)] block.
  const std::vector<std::pair<int, int>>& mu_pairs() const { return pairs_; }

  const Vec& lower() const { return lo_; }
  const Vec& upper() const { return hi_; }
  const std::string& family() const { return family_; }

 private:
  std::vector<Fn> funcs_;
  Vec lo_, hi_;
  std::string family_;
  std::vector<std::pair<int, int>> pairs_;
};

// Scheduling-dependent vectors evaluated once per dataset: column t holds
// psi(p_t) resp. mu(p_t).
struct SchedulingSamples {
  Mat psi; // (n_psi+1) x N
  Mat mu;  // (n_mu+1) x N
};

SchedulingSamples eval_scheduling(const SchedulingBasis& basis, const Mat& p);

} // namespace lpvssid

#endif
