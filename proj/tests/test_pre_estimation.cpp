#include <doctest.h>

#include <cmath>
#include <lpvssid/errors.hpp>
#include <lpvssid/pre_estimation.hpp>
#include <lpvssid/rng.hpp>
#include <lpvssid/simulation.hpp>

#include "test_helpers.hpp"

using namespace lpvssid;
using test::affine_basis;
using test::random_dataset;
using test::random_model;

namespace {

// Model whose A(p) products of length >= 2 vanish (strictly lower triangular
// coefficients), so any FIR/MAX of order >= 2 contains the truth exactly.
LpvSsModel nilpotent_model(Rng& rng, int n_psi) {
  LpvSsModel m = random_model(rng, 2, 1, 1, n_psi);
  for (auto& Ai : m.A) {
    Ai(0, 0) = Ai(0, 1) = Ai(1, 1) = 0.0;
  }
  return m;
}

double max_coeff_err(const MarkovCoeffs& a, const MarkovCoeffs& b, int upto) {
  double worst = (a.D0 - b.D0).cwiseAbs().maxCoeff();
  for (int m = 1; m <= upto; ++m) {
    worst = std::max(worst, (a.Gu[m - 1] - b.Gu[m - 1]).cwiseAbs().maxCoeff());
  }
  return worst;
}

} // namespace

TEST_CASE("gcv score") {
  Rng rng(61);

  SUBCASE("heavy shrinkage limit approaches the intercept-free baseline") {
    const Mat Phi = rng.gaussian_matrix(200, 5);
    const Mat y = rng.gaussian_matrix(200, 1);
    const double s_inf = gcv_score(Phi, y, 1e12);
    // trace(hat) -> 0 and residual -> y, so the score tends to ||y||^2 / N.
    CHECK(s_inf == doctest::Approx(y.squaredNorm() / 200.0).epsilon(1e-3));
    CHECK(gcv_score(Phi, y, 1e6) < s_inf * 1.01);
  }

  SUBCASE("interpolation returns the +inf sentinel") {
    Mat Phi = Mat::Identity(4, 4);
    const Mat y = rng.gaussian_matrix(4, 1);
    CHECK(std::isinf(gcv_score(Phi, y, 0.0)));
  }

  SUBCASE("orthonormal regressor: GCV tracks the oracle risk minimizer") {
    const Index N = 400, k = 8;
    Mat Phi = rng.gaussian_matrix(N, k);
    Eigen::HouseholderQR<Mat> qr(Phi);
    Phi = qr.householderQ() * Mat::Identity(N, k);
    const Mat theta = rng.gaussian_matrix(k, 1);
    const double sigma = 0.8;
    const Mat y = Phi * theta + sigma * rng.gaussian_matrix(N, 1);

    RidgeConfig cfg;
    Vec risks(cfg.lambda_grid.size()), scores(cfg.lambda_grid.size());
    for (Index i = 0; i < cfg.lambda_grid.size(); ++i) {
      const double l = cfg.lambda_grid(i);
      // Closed-form ridge estimate for orthonormal columns.
      const Mat th = (Phi.transpose() * y) / (1.0 + l);
      risks(i) = (th - theta).squaredNorm();
      scores(i) = gcv_score(Phi, y, l);
    }
    Index best_risk, best_gcv;
    risks.minCoeff(&best_risk);
    scores.minCoeff(&best_gcv);
    CHECK(std::abs(static_cast<int>(best_risk) - static_cast<int>(best_gcv)) <= 1);
  }
}

TEST_CASE("ridge regression") {
  Rng rng(63);
  RidgeConfig cfg;

  SUBCASE("zero data yields zero coefficients at any positive lambda") {
    const Mat Phi = rng.gaussian_matrix(100, 6);
    const RidgeFit fit = ridge_regression(Phi, Mat::Zero(100, 2), cfg);
    CHECK(fit.coeffs.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("rank-deficient regressor with an effectively zero weight fails") {
    Mat Phi(6, 4);
    Phi.setZero();
    Phi.col(0).setOnes();
    Phi.col(1) = Phi.col(0); // duplicated column
    RidgeConfig tiny;
    tiny.lambda_grid = Vec::Constant(1, 1e-30);
    CHECK_THROWS_AS(ridge_regression(Phi, Mat::Ones(6, 1), tiny), PipelineError);
  }

  SUBCASE("primal and dual branches agree with a direct solve") {
    RidgeConfig one;
    one.lambda_grid = Vec::Constant(1, 0.37);
    const Mat Phi = rng.gaussian_matrix(40, 25);
    const Mat y = rng.gaussian_matrix(40, 2);
    const RidgeFit primal = ridge_regression(Phi, y, one);
    const Mat Gp = Phi.transpose() * Phi + 0.37 * Mat::Identity(25, 25);
    const Mat direct_p = Gp.ldlt().solve(Phi.transpose() * y);
    CHECK((primal.coeffs - direct_p).cwiseAbs().maxCoeff() < 1e-8);

    const Mat Phi2 = rng.gaussian_matrix(30, 50); // dual branch: rows < cols
    const Mat y2 = rng.gaussian_matrix(30, 1);
    const RidgeFit wide = ridge_regression(Phi2, y2, one);
    const Mat G = Phi2.transpose() * Phi2 + 0.37 * Mat::Identity(50, 50);
    const Mat direct = G.ldlt().solve(Phi2.transpose() * y2);
    CHECK((wide.coeffs - direct).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("the standalone gcv_score agrees with the grid curve") {
    const Mat Phi = rng.gaussian_matrix(60, 10);
    const Mat y = rng.gaussian_matrix(60, 2);
    const RidgeFit fit = ridge_regression(Phi, y, cfg);
    for (Index i = 0; i < cfg.lambda_grid.size(); i += 7)
      CHECK(fit.gcv_curve(i) ==
            doctest::Approx(gcv_score(Phi, y, cfg.lambda_grid(i))).epsilon(1e-6));
  }
}

TEST_CASE("FIR estimation recovers truncated impulse-response coefficients") {
  Rng rng(67);
  LpvSsModel m = nilpotent_model(rng, 1);
  for (auto& Ki : m.K) Ki.setZero(); // K = 0 so the truth is exactly FIR
  SchedulingBasis basis = affine_basis(1);
  DataSet d = random_dataset(rng, m, basis, 3000, 0.0);

  const FirFit fit = fit_lpv_fir(d, basis, 3, RidgeConfig{});
  const MarkovCoeffs truth = true_markov_coeffs(m, basis, 3, Mode::open_loop);
  CHECK(max_coeff_err(fit.coeffs, truth, 3) < 1e-6);

  SUBCASE("order 0 keeps only the static gain") {
    const FirFit d0 = fit_lpv_fir(d, basis, 0, RidgeConfig{});
    CHECK(d0.coeffs.horizon_u() == 0);
    CHECK(d0.coeffs.D0.cols() == 2);
  }

  SUBCASE("white-noise-only output shrinks with growing lambda") {
    DataSet noise = d;
    Rng nrng(5);
    noise.y = nrng.gaussian_matrix(1, 3000);
    RidgeConfig big;
    big.lambda_grid = Vec::Constant(1, 1e9);
    const FirFit shrunk = fit_lpv_fir(noise, basis, 2, big);
    RidgeConfig small;
    small.lambda_grid = Vec::Constant(1, 1e-6);
    const FirFit loose = fit_lpv_fir(noise, basis, 2, small);
    CHECK(shrunk.coeffs.D0.cwiseAbs().maxCoeff() <
          1e-3 * loose.coeffs.D0.cwiseAbs().maxCoeff() + 1e-12);
  }
}

TEST_CASE("ARX estimation") {
  Rng rng(71);

  SUBCASE("noiseless LTI ARX(1,1) truth is recovered to 1e-8") {
    SchedulingBasis basis0 = SchedulingBasis::constant(
        1, Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));
    Rng drng(19);
    const Index N = 2000;
    const Mat u = drng.gaussian_matrix(1, N);
    Mat y = Mat::Zero(1, N);
    const double a = 0.6, b0 = 0.5, b1 = -0.3;
    for (Index t = 1; t < N; ++t)
      y(0, t) = a * y(0, t - 1) + b0 * u(0, t) + b1 * u(0, t - 1);
    DataSet d;
    d.u = u;
    d.y = y;
    d.p = Mat::Zero(1, N);

    RidgeConfig tiny;
    tiny.lambda_grid = Vec::Constant(1, 1e-10);
    const ArxFit fit = fit_lpv_arx(d, basis0, 1, 1, tiny);
    CHECK(fit.coeffs.Gz[0](0, 0) == doctest::Approx(a).epsilon(1e-8));
    CHECK(fit.coeffs.D0(0, 0) == doctest::Approx(b0).epsilon(1e-8));
    CHECK(fit.coeffs.Gu[0](0, 0) == doctest::Approx(b1).epsilon(1e-8));
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("zero data gives zero coefficients") {
    SchedulingBasis basis = affine_basis(1);
    DataSet d;
    d.u = Mat::Zero(1, 200);
    d.y = Mat::Zero(1, 200);
    Rng drng(20);
    d.p = drng.uniform_matrix(1, 200, -1.0, 1.0);
    const ArxFit fit = fit_lpv_arx(d, basis, 2, 2, RidgeConfig{});
    CHECK(fit.coeffs.D0.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(fit.coeffs.Gu[0].cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("too-short records are rejected") {
    SchedulingBasis basis = affine_basis(1);
    DataSet d;
    d.u = Mat::Zero(1, 5);
    d.y = Mat::Zero(1, 5);
    d.p = Mat::Zero(1, 5);
    CHECK_THROWS_AS(fit_lpv_arx(d, basis, 6, 6, RidgeConfig{}), PipelineError);
  }

  SUBCASE("noiseless LPV truth: residual floor set by the predictor tail") {
    Rng mrng(23);
    LpvSsModel m = random_model(mrng, 2, 1, 1, 1, 0.3, 0.05);
    SchedulingBasis basis = affine_basis(1);
    DataSet d = random_dataset(mrng, m, basis, 3000, 0.0);
    RidgeConfig tiny;
    tiny.lambda_grid = Vec::Constant(1, 1e-8);
    const ArxFit fit = fit_lpv_arx(d, basis, 6, 6, tiny);
    CHECK(fit.residuals.rightCols(2000).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("MAX estimation by pseudo-linear regression") {
  Rng rng(73);
  SchedulingBasis basis = affine_basis(1);

  SUBCASE("noiseless data degenerates to the FIR fit with vanishing residuals") {
    LpvSsModel m = nilpotent_model(rng, 1);
    for (auto& Ki : m.K) Ki.setZero();
    DataSet d = random_dataset(rng, m, basis, 2000, 0.0);
    const FirFit fir = fit_lpv_fir(d, basis, 2, RidgeConfig{});
    const MaxFit mf = fit_lpv_max(d, basis, 2, 2, fir, GaussNewtonConfig{});
    CHECK(mf.xi_hat.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(max_coeff_err(mf.coeffs, fir.coeffs, 2) < 1e-6);
  }

  SUBCASE("recovers the noise channel of a MAX-exact truth") {
    LpvSsModel m = nilpotent_model(rng, 1);
    DataSet d = random_dataset(rng, m, basis, 6000, 0.3);
    const FirFit fir = fit_lpv_fir(d, basis, 2, RidgeConfig{});
    const MaxFit mf = fit_lpv_max(d, basis, 2, 2, fir, GaussNewtonConfig{});
    const MarkovCoeffs truth = true_markov_coeffs(m, basis, 2, Mode::open_loop);
    CHECK((mf.coeffs.Gz[0] - truth.Gz[0]).cwiseAbs().maxCoeff() < 0.08);
    double err = 0.0;
    for (Index t = 100; t < d.N(); ++t)
      err = std::max(err,
                     (mf.xi_hat.col(t) - d.xi->col(t)).cwiseAbs().maxCoeff());
    CHECK(err < 0.15);
  }

  SUBCASE("objective trace is non-increasing across accepted iterates") {
    LpvSsModel m = random_model(rng, 2, 1, 1, 1, 0.35, 0.08);
    DataSet d = random_dataset(rng, m, basis, 1500, 0.4);
    const FirFit fir = fit_lpv_fir(d, basis, 3, RidgeConfig{});
    const MaxFit mf = fit_lpv_max(d, basis, 3, 3, fir, GaussNewtonConfig{});
    for (std::size_t i = 1; i < mf.objective_trace.size(); ++i)
      CHECK(mf.objective_trace[i] <= mf.objective_trace[i - 1] + 1e-12);
  }

  SUBCASE("consistency improves with sample size on in-class truths") {
    LpvSsModel m = nilpotent_model(rng, 1);
    Rng d1rng(101), d2rng(101);
    DataSet d1 = random_dataset(d1rng, m, basis, 500, 0.2);
    DataSet d2 = random_dataset(d2rng, m, basis, 5000, 0.2);
    const MarkovCoeffs truth = true_markov_coeffs(m, basis, 2, Mode::open_loop);
    auto err_of = [&](const DataSet& d) {
      const FirFit fir = fit_lpv_fir(d, basis, 2, RidgeConfig{});
      const MaxFit mf = fit_lpv_max(d, basis, 2, 2, fir, GaussNewtonConfig{});
      return max_coeff_err(mf.coeffs, truth, 2);
    };
    const double e1 = err_of(d1), e2 = err_of(d2);
    CHECK(e2 < 0.5 * e1);
  }
}
