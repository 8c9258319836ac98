#include <catch2/catch_amalgamated.hpp>

#include <itl_pursuit/nok.hpp>

#include "oracles.hpp"

using namespace itl_pursuit;

namespace {

Eigen::VectorXd single(double e) {
  Eigen::VectorXd v(1);
  v[0] = e;
  return v;
}

// 40x3 system with one +30 spike at row 7, plus its spike-deleted twin.
struct SpikedSystem {
  Matrix A{40, 3};
  Signal b{40};
  Matrix A_masked{39, 3};
  Signal b_masked{39};

  SpikedSystem() {
    std::mt19937_64 gen(31);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Index j = 0; j < 3; ++j)
      for (Index i = 0; i < 40; ++i) A(i, j) = nd(gen);
    Eigen::Vector3d xs(1.2, -0.7, 2.0);
    b = A * xs;
    b[7] += 30.0;
    Index r = 0;
    for (Index i = 0; i < 40; ++i) {
      if (i == 7) continue;
      A_masked.row(r) = A.row(i);
      b_masked[r] = b[i];
      ++r;
    }
  }
};

// 30x3 system with mild dense noise; well-behaved for iteration tracing.
struct NoisySystem {
  Matrix A{30, 3};
  Signal b{30};

  NoisySystem() {
    std::mt19937_64 gen(55);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (Index j = 0; j < 3; ++j)
      for (Index i = 0; i < 30; ++i) A(i, j) = nd(gen);
    Eigen::Vector3d xs(1.0, -2.0, 0.5);
    b = A * xs;
    for (Index i = 0; i < 30; ++i) b[i] += noise(gen);
  }
};

}  // namespace

TEST_CASE("solver config validates its parameters") {
  NokConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.p = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameterError);
  cfg = NokConfig{};
  cfg.irls_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameterError);
  cfg = NokConfig{};
  cfg.irls_max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameterError);
  cfg = NokConfig{};
  cfg.weight_cap = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameterError);
  cfg = NokConfig{};
  cfg.sigma_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidParameterError);
}

TEST_CASE("loss vanishes at zero error and matches hand values") {
  CHECK(nok_loss(Eigen::VectorXd::Zero(5), 1.0, 1.7) == 0.0);

  Eigen::VectorXd e(2);
  e << 1.0, -1.0;
  CHECK(nok_loss(e, 1.0, 2.0) ==
        Catch::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));
  CHECK(nok_loss(e, 1.0, 2.0) == Catch::Approx(0.3934693402873666).epsilon(1e-12));
}

TEST_CASE("loss at p=2 averages one minus the gaussian kernel") {
  const Eigen::VectorXd e = test_oracle::random_signal(40, 71);
  for (double sigma : {0.5, 1.0, 2.0}) {
    double want = 0.0;
    for (Index i = 0; i < e.size(); ++i)
      want += 1.0 - gaussian_kernel(e[i], sigma, false);
    want /= static_cast<double>(e.size());
    CHECK(nok_loss(e, sigma, 2.0) == Catch::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("per-sample penalty is even, bounded, and grows with error size") {
  for (double p : {1.3, 1.7, 2.0, 2.5}) {
    for (double sigma : {0.7, 1.0}) {
      double prev = 0.0;
      for (int i = 1; i <= 40; ++i) {
        const double e = 0.1 * i;
        const double rho = nok_loss(single(e), sigma, p);
        CHECK(rho == nok_loss(single(-e), sigma, p));
        CHECK(rho > prev);
        CHECK(rho < 1.0);
        prev = rho;
      }
      // saturation: far-out errors cost nearly the same
      const double far1 = nok_loss(single(50.0), sigma, p);
      const double far2 = nok_loss(single(500.0), sigma, p);
      CHECK(far2 - far1 < 1e-12);
      CHECK(far2 <= 1.0);
    }
  }
}

TEST_CASE("loss rejects bad parameters") {
  const Eigen::VectorXd e = single(1.0);
  CHECK_THROWS_AS(nok_loss(e, 0.0, 2.0), InvalidParameterError);
  CHECK_THROWS_AS(nok_loss(e, 1.0, 0.0), InvalidParameterError);
  CHECK_THROWS_AS(nok_loss(Eigen::VectorXd(), 1.0, 2.0), ShapeError);
}

TEST_CASE("weights recover the closed form at p=2") {
  CHECK(nok_weights(single(0.0), 1.0, 2.0)[0] == 1.0);
  for (double sigma : {0.5, 1.0, 2.0}) {
    for (double e : {-2.0, -0.3, 0.4, 1.5}) {
      const double want = std::exp(-e * e / (2.0 * sigma * sigma)) / (sigma * sigma);
      CHECK(nok_weights(single(e), sigma, 2.0)[0] ==
            Catch::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("weights cap the removable singularity below p=2") {
  CHECK(nok_weights(single(0.0), 1.0, 1.7)[0] == 1e8);
  CHECK(nok_weights(single(0.0), 1.0, 1.3, 500.0)[0] == 500.0);
  // nearby errors stay finite, positive, and below the cap
  const Eigen::VectorXd w = nok_weights(single(1e-2), 1.0, 1.7);
  CHECK(w[0] > 0.0);
  CHECK(std::isfinite(w[0]));
}

TEST_CASE("weights match the slope of the penalty") {
  // gamma(e) must equal rho'(e)/e on a 50-point grid for each p.
  for (double p : {1.3, 1.7, 2.0, 2.5}) {
    for (int i = 0; i < 50; ++i) {
      const double e = -3.0 + 6.0 * i / 49.0;
      if (p < 2.0 && std::abs(e) < 1e-3) continue;
      const double fd = test_oracle::rho_derivative_fd(e, 1.0, p) / e;
      const double got = nok_weights(single(e), 1.0, p)[0];
      CHECK(std::abs(got - fd) <= 1e-5 * std::max(std::abs(fd), std::abs(got)));
    }
  }
}

TEST_CASE("weights reject bad parameters") {
  CHECK_THROWS_AS(nok_weights(single(1.0), 0.0, 2.0), InvalidParameterError);
  CHECK_THROWS_AS(nok_weights(single(1.0), 1.0, -1.0), InvalidParameterError);
  CHECK_THROWS_AS(nok_weights(single(1.0), 1.0, 2.0, 0.0), InvalidParameterError);
  CHECK_THROWS_AS(nok_weights(Eigen::VectorXd(), 1.0, 2.0), ShapeError);
}

TEST_CASE("width update tracks the residual and floors at exact fits") {
  Matrix A(2, 1);
  A << 1.0, 0.0;
  Signal b(2);
  b << 1.0, 2.0;
  Eigen::VectorXd x(1);
  x << 1.0;
  // residual (0, 2): width = sqrt(4 / (2*2)) = 1
  CHECK(sigma_update(b, A, x) == Catch::Approx(1.0).margin(1e-14));

  Signal fit(2);
  fit << 1.0, 0.0;
  CHECK(sigma_update(fit, A, x) == kSigmaFloor);
  CHECK(sigma_update(fit, A, x, 1e-3) == 1e-3);

  CHECK_THROWS_AS(sigma_update(b, A, Eigen::VectorXd::Zero(3)), ShapeError);
  CHECK_THROWS_AS(sigma_update(b, A, x, 0.0), InvalidParameterError);
}

TEST_CASE("weighted step with unit weights equals plain least squares") {
  const Matrix A = test_oracle::random_matrix(20, 4, 81);
  const Signal b = test_oracle::random_signal(20, 82);
  const Eigen::VectorXd plain = ls_solve(A, b);
  const Eigen::VectorXd weighted =
      weighted_ls_step(b, A, Eigen::VectorXd::Ones(20));
  CHECK((plain - weighted).norm() <= 1e-15);
}

TEST_CASE("weighted step with masked rows matches the deleted-row oracle") {
  SpikedSystem sys;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(40);
  w[7] = 0.0;
  const Eigen::VectorXd got = weighted_ls_step(sys.b, sys.A, w);
  const Eigen::VectorXd want = test_oracle::normal_ls(sys.A_masked, sys.b_masked);
  CHECK((got - want).norm() <= 1e-8 * want.norm());
  // the masked fit ignores the spike entirely
  Eigen::Vector3d xs(1.2, -0.7, 2.0);
  CHECK((got - xs).norm() <= 1e-8);
}

TEST_CASE("weighted step matches the weighted normal-equations oracle") {
  std::mt19937_64 gen(83);
  std::uniform_real_distribution<double> wd(0.1, 2.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix A = test_oracle::random_matrix(30, 4, 900 + seed);
    const Signal b = test_oracle::random_signal(30, 950 + seed);
    Eigen::VectorXd w(30);
    for (Index i = 0; i < 30; ++i) w[i] = wd(gen);
    const Eigen::VectorXd got = weighted_ls_step(b, A, w);
    const Eigen::VectorXd want = test_oracle::weighted_normal_ls(A, b, w);
    CHECK((got - want).norm() <= 1e-8 * std::max(1.0, want.norm()));
    // weighted normal equations hold at the solution
    const Eigen::VectorXd grad =
        A.transpose() * (w.asDiagonal() * (b - A * got));
    CHECK(grad.norm() <= 1e-8 * std::max(1.0, (A.transpose() * (w.asDiagonal() * b)).norm()));
  }
}

TEST_CASE("weighted step survives extreme weight scales") {
  // internal rescaling keeps huge uniform weights from overflowing
  const Matrix A = test_oracle::random_matrix(15, 3, 84);
  const Signal b = test_oracle::random_signal(15, 85);
  const Eigen::VectorXd base = weighted_ls_step(b, A, Eigen::VectorXd::Ones(15));
  const Eigen::VectorXd huge =
      weighted_ls_step(b, A, Eigen::VectorXd::Constant(15, 1e300));
  CHECK((base - huge).norm() <= 1e-10 * std::max(1.0, base.norm()));
}

TEST_CASE("weighted step rejects degenerate systems and bad weights") {
  const Matrix A = test_oracle::random_matrix(10, 2, 86);
  const Signal b = test_oracle::random_signal(10, 87);
  try {
    weighted_ls_step(b, A, Eigen::VectorXd::Zero(10));
    FAIL("expected SingularSystemError");
  } catch (const SingularSystemError& err) {
    CHECK(std::isinf(err.condition_estimate()));
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
  w[3] = -0.5;
  CHECK_THROWS_AS(weighted_ls_step(b, A, w), InvalidParameterError);
  CHECK_THROWS_AS(weighted_ls_step(b, A, Eigen::VectorXd::Ones(9)), ShapeError);
  CHECK_THROWS_AS(weighted_ls_step(test_oracle::random_signal(9, 88), A,
                                   Eigen::VectorXd::Ones(10)),
                  ShapeError);
}

TEST_CASE("reweighted fit short-circuits on exactly representable signals") {
  const Matrix A = test_oracle::random_matrix(25, 3, 89);
  Eigen::Vector3d xs(2.0, -1.0, 0.5);
  const Signal b = A * xs;
  NokConfig cfg;
  const auto st = irls_fit(b, A, cfg, ls_solve(A, b));
  CHECK(st.converged);
  CHECK(st.iterations <= 2);
  CHECK(st.loss < 1e-10);
  CHECK((st.coefficients - xs).norm() <= 1e-10);
}

TEST_CASE("reweighted fit suppresses a corrupted coordinate") {
  SpikedSystem sys;
  NokConfig cfg;
  cfg.p = 2.0;
  const auto st = irls_fit(sys.b, sys.A, cfg, ls_solve(sys.A, sys.b));
  CHECK(st.converged);

  std::vector<double> clean;
  for (Index i = 0; i < 40; ++i)
    if (i != 7) clean.push_back(st.weights[i]);
  std::sort(clean.begin(), clean.end());
  const double median = clean[clean.size() / 2];
  CHECK(st.weights[7] < 0.01 * median);

  const Eigen::VectorXd masked =
      test_oracle::normal_ls(sys.A_masked, sys.b_masked);
  CHECK((st.coefficients - masked).norm() <= 1e-3);
}

TEST_CASE("reweighted fit reproduces a literal reweighting loop") {
  NoisySystem sys;
  const Eigen::VectorXd init = ls_solve(sys.A, sys.b);
  const auto trace =
      test_oracle::naive_reweight_p2(sys.b, sys.A, init, 6, kSigmaFloor);
  for (int t = 1; t <= 6; ++t) {
    NokConfig cfg;
    cfg.p = 2.0;
    cfg.irls_tol = 1e-15;  // disable the early stop so every step runs
    cfg.irls_max_iter = t;
    const auto st = irls_fit(sys.b, sys.A, cfg, init);
    const int it = st.iterations;
    REQUIRE(it >= 1);
    REQUIRE(it <= 6);
    CHECK((st.coefficients - trace.x[static_cast<size_t>(it)]).norm() <= 1e-10);
    CHECK(std::abs(st.sigma - trace.sigma[static_cast<size_t>(it - 1)]) <= 1e-10);
    CHECK((st.weights - trace.weights[static_cast<size_t>(it - 1)]).norm() <=
          1e-10);
  }
}

TEST_CASE("reweighted fit decreases the loss at p=2") {
  NoisySystem sys;
  NokConfig cfg;
  cfg.p = 2.0;
  const auto st = irls_fit(sys.b, sys.A, cfg, ls_solve(sys.A, sys.b));
  REQUIRE(st.loss_history.size() >= 2);
  for (size_t i = 1; i < st.loss_history.size(); ++i)
    CHECK(st.loss_history[i] <= st.loss_history[i - 1] + 1e-12);
  CHECK(st.loss_history.back() <= st.loss_history.front());
}

TEST_CASE("converged fit is a fixed point of its own update") {
  SpikedSystem spiked;
  NoisySystem noisy;
  const auto check_fixed_point = [](const Signal& b, const Matrix& A) {
    NokConfig cfg;  // p = 1.7
    const auto st = irls_fit(b, A, cfg, ls_solve(A, b));
    REQUIRE(st.converged);
    const Eigen::VectorXd resid = b - A * st.coefficients;
    const double sigma = sigma_update(b, A, st.coefficients, cfg.sigma_floor);
    const Eigen::VectorXd w = nok_weights(resid, sigma, cfg.p, cfg.weight_cap);
    const Eigen::VectorXd next = weighted_ls_step(b, A, w);
    CHECK((next - st.coefficients).norm() <=
          1e-8 * std::max(1.0, st.coefficients.norm()));
    CHECK(std::abs(sigma - st.sigma) <= 1e-8 * sigma);
  };
  check_fixed_point(spiked.b, spiked.A);
  check_fixed_point(noisy.b, noisy.A);
}

TEST_CASE("weighted width feed rescues zeroed coordinates exactly") {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix A(60, 3);
  for (Index j = 0; j < 3; ++j)
    for (Index i = 0; i < 60; ++i) A(i, j) = nd(gen);
  Eigen::Vector3d xs(1.5, -1.2, 0.8);
  Signal b = A * xs;
  for (Index i : {3, 11, 19, 27, 35, 43}) b[i] = 0.0;

  NokConfig cfg;  // p = 1.7
  const auto init = ls_solve(A, b);
  const auto plain = irls_fit(b, A, cfg, init);
  const auto polished =
      irls_fit(b, A, cfg, plain.coefficients, WidthFeed::WeightedResidual);
  CHECK(plain.converged);
  CHECK(polished.converged);
  // the plain feed's width stays inflated by the corrupted rows; feeding the
  // weighted residual back lets the width collapse onto the clean rows
  CHECK((plain.coefficients - xs).norm() > 1e-4);
  CHECK((polished.coefficients - xs).norm() < 1e-10);
}

TEST_CASE("reweighted fit reports a consistent final state") {
  SpikedSystem sys;
  NokConfig cfg;
  cfg.p = 2.0;
  const auto st = irls_fit(sys.b, sys.A, cfg, ls_solve(sys.A, sys.b));
  REQUIRE(!st.loss_history.empty());
  CHECK(st.loss == st.loss_history.back());
  CHECK(st.sigma >= cfg.sigma_floor);
  CHECK(st.iterations >= 1);
  CHECK(st.weights.size() == 40);
  CHECK(st.weighted_residual.size() == 40);
  CHECK((st.weights.array() >= 0.0).all());
  CHECK((st.weights.array() <= cfg.weight_cap).all());
  const Eigen::VectorXd resid = sys.b - sys.A * st.coefficients;
  const Eigen::VectorXd want = st.weights.cwiseSqrt().cwiseProduct(resid);
  CHECK((st.weighted_residual - want).norm() <= 1e-12 * std::max(1.0, want.norm()));
}

TEST_CASE("reweighted fit validates shapes and config") {
  const Matrix A = test_oracle::random_matrix(10, 2, 95);
  const Signal b = test_oracle::random_signal(10, 96);
  NokConfig bad;
  bad.p = -1.0;
  CHECK_THROWS_AS(irls_fit(b, A, bad, Eigen::VectorXd::Zero(2)),
                  InvalidParameterError);
  NokConfig cfg;
  CHECK_THROWS_AS(irls_fit(b, A, cfg, Eigen::VectorXd::Zero(3)), ShapeError);
  CHECK_THROWS_AS(irls_fit(test_oracle::random_signal(9, 97), A, cfg,
                           Eigen::VectorXd::Zero(2)),
                  ShapeError);
}
