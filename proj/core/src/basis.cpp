#include "lpvssid/basis.hpp"

#include <cmath>
#include <stdexcept>

#include "lpvssid/rng.hpp"

namespace lpvssid {

SchedulingBasis::SchedulingBasis(std::vector<Fn> funcs, Vec lo, Vec hi,
                                 std::string family)
    : funcs_(std::move(funcs)),
      lo_(std::move(lo)),
      hi_(std::move(hi)),
      family_(std::move(family)) {
  if (lo_.size() != hi_.size() || lo_.size() == 0)
    throw std::invalid_argument("scheduling box bounds must be nonempty and consistent");
  if ((hi_.array() < lo_.array()).any())
    throw std::invalid_argument("scheduling box upper bound below lower bound");

  for (int i = 1; i <= n_psi(); ++i)
    for (int j = i; j <= n_psi(); ++j) pairs_.emplace_back(i, j);

  // Spot-check boundedness on a fixed random sample of P.
  Rng rng(0x5eedb0b5u);
  for (int s = 0; s < 256; ++s) {
    Vec p(n_p());
    for (int d = 0; d < n_p(); ++d) p(d) = rng.uniform(lo_(d), hi_(d));
    for (const auto& f : funcs_) {
      const double v = f(p);
      if (!std::isfinite(v) || std::abs(v) > 1e12)
        throw std::invalid_argument("basis function unbounded on the scheduling box");
    }
  }
}

SchedulingBasis SchedulingBasis::affine(int n_p, Vec lo, Vec hi) {
  std::vector<Fn> fs;
  fs.reserve(n_p);
  for (int i = 0; i < n_p; ++i)
    fs.push_back([i](const Vec& p) { return p(i); });
  return SchedulingBasis(std::move(fs), std::move(lo), std::move(hi), "affine");
}

SchedulingBasis SchedulingBasis::constant(int, Vec lo, Vec hi) {
  return SchedulingBasis({}, std::move(lo), std::move(hi), "constant");
}

Vec SchedulingBasis::psi(const Vec& p) const {
  if (p.size() != lo_.size())
    throw std::invalid_argument("scheduling point dimension mismatch");
  const double slack = 1e-9;
  for (Index d = 0; d < p.size(); ++d)
    if (p(d) < lo_(d) - slack || p(d) > hi_(d) + slack)
      throw std::domain_error("scheduling point outside the declared box P");
  Vec out(n_psi() + 1);
  out(0) = 1.0;
  for (int i = 0; i < n_psi(); ++i) out(i + 1) = funcs_[i](p);
  return out;
}

Vec SchedulingBasis::mu_from_psi(const Vec& psi) const {
  if (psi.size() != n_psi() + 1)
    throw std::invalid_argument("psi vector has wrong length");
  Vec out(n_mu() + 1);
  out(0) = 1.0;
  for (int i = 1; i <= n_psi(); ++i) out(i) = psi(i);
  Index k = n_psi() + 1;
  for (const auto& [i, j] : pairs_) out(k++) = psi(i) * psi(j);
  return out;
}

SchedulingSamples eval_scheduling(const SchedulingBasis& basis, const Mat& p) {
  const Index N = p.cols();
  SchedulingSamples s;
  s.psi.resize(basis.n_psi() + 1, N);
  s.mu.resize(basis.n_mu() + 1, N);
  for (Index t = 0; t < N; ++t) {
    s.psi.col(t) = basis.psi(p.col(t));
    s.mu.col(t) = basis.mu_from_psi(s.psi.col(t));
  }
  return s;
}

} // namespace lpvssid
