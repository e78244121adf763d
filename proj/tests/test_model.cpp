#include <doctest.h>

#include <lpvssid/model.hpp>
#include <lpvssid/model_io.hpp>
#include <lpvssid/rng.hpp>
#include <lpvssid/simulation.hpp>
#include <sstream>

#include "test_helpers.hpp"

using namespace lpvssid;
using test::affine_basis;
using test::random_model;

TEST_CASE("matrix function evaluation") {
  Rng rng(3);
  LpvSsModel m = random_model(rng, 2, 1, 1, 1);

  SUBCASE("constant term only") {
    Vec psi(2);
    psi << 1, 0;
    CHECK((eval_matrix(m, Which::A, psi) - m.A[0]).norm() == doctest::Approx(0.0));
  }
  SUBCASE("sum of identities") {
    LpvSsModel mi = m;
    mi.A[0] = Mat::Identity(2, 2);
    mi.A[1] = Mat::Identity(2, 2);
    Vec psi(2);
    psi << 1, 1;
    CHECK((eval_matrix(mi, Which::A, psi) - 2 * Mat::Identity(2, 2)).norm() ==
          doctest::Approx(0.0));
  }
  SUBCASE("direct arithmetic, entrywise") {
    Vec psi(2);
    psi << 1, 0.7;
    const Mat expect = m.A[0] + 0.7 * m.A[1];
    CHECK((eval_matrix(m, Which::A, psi) - expect).cwiseAbs().maxCoeff() <
          1e-15);
  }
  SUBCASE("length mismatch is rejected") {
    CHECK_THROWS_AS(eval_matrix(m, Which::A, Vec::Ones(3)),
                    std::invalid_argument);
  }
}

TEST_CASE("closed-loop coefficient lists over the extended scheduling") {
  Rng rng(5);
  SchedulingBasis basis = affine_basis(2);

  SUBCASE("no feedback term: Acal_i = A_i, products vanish") {
    LpvSsModel m = random_model(rng, 2, 2, 2, 2);
    for (auto& Ki : m.K) Ki.setZero();
    const ClosedLoopCoeffs cl = closed_loop_coeffs(m, basis);
    REQUIRE(static_cast<int>(cl.Acal.size()) == basis.n_mu() + 1);
    for (int i = 0; i <= 2; ++i)
      CHECK((cl.Acal[i] - m.A[i]).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    for (std::size_t i = 3; i < cl.Acal.size(); ++i)
      CHECK(cl.Acal[i].cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("C_i = 0 for i >= 1 kills the product entries") {
    LpvSsModel m = random_model(rng, 2, 2, 2, 2);
    m.C[1].setZero();
    m.C[2].setZero();
    const ClosedLoopCoeffs cl = closed_loop_coeffs(m, basis);
    for (std::size_t i = 3; i < cl.Acal.size(); ++i)
      CHECK(cl.Acal[i].cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("pointwise reconstruction over 100 random points") {
    LpvSsModel m = random_model(rng, 2, 2, 2, 2);
    const ClosedLoopCoeffs cl = closed_loop_coeffs(m, basis);
    for (int rep = 0; rep < 100; ++rep) {
      Vec p(2);
      p << rng.uniform(-1, 1), rng.uniform(-1, 1);
      const Vec mu = basis.mu(p);
      const Vec psi = basis.psi(p);
      Mat acal = Mat::Zero(2, 2), bcal = Mat::Zero(2, 2);
      for (Index i = 0; i < mu.size(); ++i) {
        acal += mu(i) * cl.Acal[i];
        bcal += mu(i) * cl.Bcal[i];
      }
      CHECK((acal - eval_closed_loop_A(m, psi)).cwiseAbs().maxCoeff() < 1e-12);
      const Mat bt = eval_closed_loop_B(m, psi);
      CHECK((bcal - bt.leftCols(2)).cwiseAbs().maxCoeff() < 1e-12);
      Mat kk = Mat::Zero(2, 2);
      for (Index i = 0; i < psi.size(); ++i) kk += psi(i) * cl.K[i];
      CHECK((kk - bt.rightCols(2)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("similarity transforms") {
  Rng rng(7);
  LpvSsModel m = random_model(rng, 3, 2, 2, 1);
  SchedulingBasis basis = affine_basis(1);

  SUBCASE("identity leaves the model unchanged") {
    const LpvSsModel t = apply_similarity(m, Mat::Identity(3, 3));
    for (int i = 0; i <= 1; ++i) {
      CHECK((t.A[i] - m.A[i]).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((t.C[i] - m.C[i]).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("scalar similarity scales B and C, leaves A") {
    const LpvSsModel t = apply_similarity(m, 2.0 * Mat::Identity(3, 3));
    for (int i = 0; i <= 1; ++i) {
      CHECK((t.A[i] - m.A[i]).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((t.B[i] - 0.5 * m.B[i]).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((t.C[i] - 2.0 * m.C[i]).cwiseAbs().maxCoeff() < 1e-14);
      CHECK((t.D[i] - m.D[i]).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("singular transform is rejected") {
    Mat T = Mat::Zero(3, 3);
    T(0, 0) = 1.0;
    CHECK_THROWS_AS(apply_similarity(m, T), std::invalid_argument);
  }
  SUBCASE("IO behavior is invariant under a random transform") {
    Mat T = rng.gaussian_matrix(3, 3);
    T += 3.0 * Mat::Identity(3, 3);
    const LpvSsModel mt = apply_similarity(m, T);
    Rng drng(71);
    const Mat u = drng.gaussian_matrix(2, 200);
    Mat p(1, 200);
    for (int t = 0; t < 200; ++t) p(0, t) = drng.uniform(-1, 1);
    const Mat xi = 0.2 * drng.gaussian_matrix(2, 200);
    const Vec x0 = drng.gaussian_matrix(3, 1);
    const Mat y1 = simulate(m, basis, u, p, xi, x0).y;
    const Mat y2 = simulate(mt, basis, u, p, xi, T.inverse() * x0).y;
    CHECK((y1 - y2).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("empirical stability check") {
  Rng rng(9);
  SchedulingBasis basis = affine_basis(1);
  LpvSsModel stable = random_model(rng, 2, 1, 1, 1, 0.4, 0.1);
  CHECK(empirical_stability_check(stable, basis, Mode::open_loop));
  LpvSsModel unstable = stable;
  unstable.A[0] *= 4.0;
  CHECK_FALSE(empirical_stability_check(unstable, basis, Mode::open_loop));
}

TEST_CASE("model validation catches bad covariance") {
  Rng rng(15);
  LpvSsModel m = random_model(rng, 2, 1, 1, 1);
  m.Xi2 = -Mat::Identity(1, 1);
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("model serialization round trip at full precision") {
  Rng rng(21);
  LpvSsModel m = random_model(rng, 2, 2, 2, 2);
  SchedulingBasis basis = affine_basis(2);
  ModelDiagnostics diag;
  diag.method = "cca-ol";
  diag.singular_values = Vec::LinSpaced(4, 1.0, 0.1);
  diag.log_likelihood = -123.456;

  std::stringstream ss;
  save_model(ss, m, basis, &diag);
  const LoadedModel back = load_model(ss);
  for (int i = 0; i <= 2; ++i) {
    CHECK((back.model.A[i] - m.A[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.model.K[i] - m.K[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((back.model.Xi2 - m.Xi2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.basis.family() == "affine");
  REQUIRE(back.diagnostics.has_value());
  CHECK(back.diagnostics->method == "cca-ol");
  CHECK(back.diagnostics->log_likelihood == doctest::Approx(-123.456));
  CHECK(back.diagnostics->singular_values.size() == 4);
}
