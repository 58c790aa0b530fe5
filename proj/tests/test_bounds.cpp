#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "snm/bounds.hpp"
#include "snm/ellipsoid.hpp"
#include "snm/linalg.hpp"
#include "snm/martingale.hpp"
#include "snm/types.hpp"
#include "support/containment_oracle.hpp"
#include "support/reference.hpp"

using snm::BernsteinParamsd;
using snm::Index;
using snm::MartingaleState;
using snm::Matd;
using snm::SubGaussianParamsd;
using snm::SymMatrix;
using snm::Vecd;

namespace {

SymMatrix<double> random_pd(Index d, std::mt19937_64& rng, double ridge = 0.2) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matd m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) m(i, j) = normal(rng);
  return SymMatrix<double>(
      Matd(m * m.transpose() + ridge * Matd::Identity(d, d)));
}

MartingaleState<double> random_state(Index d, std::int64_t n,
                                     SymMatrix<double> gamma,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MartingaleState<double> st(d, std::move(gamma));
  for (std::int64_t t = 0; t < n; ++t) {
    Vecd x(d);
    for (Index i = 0; i < d; ++i) x[i] = normal(rng);
    st.observe(x, normal(rng));
  }
  return st;
}

// Parameters satisfying both burn-in halves by a wide margin for unit-ball
// covariates and |w| <= 1, for use with from_components states.
BernsteinParamsd admitted_params(Index d, double eps = 0.1, double nu = 0.2) {
  BernsteinParamsd p;
  p.sigma_var_sq = 0.5;
  p.b_w = 1.0;
  p.b_x_sq = SymMatrix<double>::Identity(d);
  p.eps = eps;
  p.nu = nu;
  p.delta = 0.05;
  double d_plus_2 = double(d + 2);
  double v_scale = 1.2 * d_plus_2 / (eps * std::numbers::e);
  p.v = SymMatrix<double>::Scaled(d, v_scale);
  double gamma_scale =
      1.2 * std::numbers::e * (1.0 + nu) * (1.0 + nu) * v_scale;
  p.gamma = SymMatrix<double>::Scaled(d, gamma_scale);
  return p;
}

MartingaleState<double> admitted_state(const BernsteinParamsd& p, Index d,
                                       std::uint64_t seed, double s_scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vecd s(d);
  for (Index i = 0; i < d; ++i) s[i] = s_scale * normal(rng);
  SymMatrix<double> vt = random_pd(d, rng, 0.5);
  return MartingaleState<double>::from_components(s, vt, p.gamma, 10);
}

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("sub-gaussian radius at time zero is two log(1/delta) times sigma") {
  for (Index d : {Index(1), Index(4)}) {
    MartingaleState<double> st(d, SymMatrix<double>::Identity(d));
    SubGaussianParamsd p{1.0, std::exp(-1.0), SymMatrix<double>::Identity(d)};
    auto rep = snm::subgaussian_radius_sq(st, p);
    REQUIRE(rep.radius_sq.has_value());
    CHECK(*rep.radius_sq == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(rep.logdet_ratio == doctest::Approx(0.0));
    CHECK(rep.self_norm_sq == 0.0);
    CHECK(rep.burnin_ok);
    CHECK_FALSE(rep.delta_inflated);
  }
}

TEST_CASE("sub-gaussian radius matches the flat oracle") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    Index d = 1 + Index(trial % 5);
    SymMatrix<double> gamma = random_pd(d, rng);
    auto st = random_state(d, 30 + trial, gamma, 1000 + trial);
    SubGaussianParamsd p{0.1 + 3.0 * unif(rng), 0.01 + 0.4 * unif(rng), gamma};
    auto rep = snm::subgaussian_radius_sq(st, p);
    double expected = ref::subgaussian_radius_sq(st.v_sum(), gamma.mat(),
                                                 p.sigma_sq, p.delta);
    CHECK(*rep.radius_sq == doctest::Approx(expected).epsilon(1e-10));
    CHECK(rep.self_norm_sq ==
          doctest::Approx(ref::quad_inv(st.gram_matrix(), st.s()))
              .epsilon(1e-10));
  }
}

TEST_CASE("sub-gaussian radius requires a positive definite regularizer") {
  SymMatrix<double> singular(Matd(Vecd::Unit(2, 0).asDiagonal()));
  MartingaleState<double> st(2, singular);
  st.observe(Vecd::Unit(2, 0), 1.0);
  st.observe(Vecd::Unit(2, 1), 1.0);
  REQUIRE(st.gram_pd());
  SubGaussianParamsd p{1.0, 0.1, singular};
  CHECK_THROWS_AS(snm::subgaussian_radius_sq(st, p), snm::GammaSingular);
}

TEST_CASE("radius evaluation rejects a mismatched regularizer") {
  MartingaleState<double> st(2, SymMatrix<double>::Identity(2));
  SubGaussianParamsd p{1.0, 0.1, SymMatrix<double>::Scaled(2, 2.0)};
  CHECK_THROWS_AS(snm::subgaussian_radius_sq(st, p), std::invalid_argument);
}

TEST_CASE("parameter validation rejects out-of-range inputs") {
  SymMatrix<double> id = SymMatrix<double>::Identity(2);
  CHECK_THROWS_AS((SubGaussianParamsd{0.0, 0.1, id}.validate()),
                  std::invalid_argument);
  CHECK_THROWS_AS((SubGaussianParamsd{1.0, 0.0, id}.validate()),
                  std::invalid_argument);
  CHECK_THROWS_AS((SubGaussianParamsd{1.0, 1.0, id}.validate()),
                  std::invalid_argument);

  BernsteinParamsd p = admitted_params(2);
  p.validate();  // baseline passes
  auto expect_invalid = [](BernsteinParamsd q) {
    CHECK_THROWS_AS(q.validate(), std::invalid_argument);
  };
  BernsteinParamsd bad = p;
  bad.sigma_var_sq = 1.5;  // exceeds b_w^2 = 1
  expect_invalid(bad);
  bad = p;
  bad.eps = 0.0;
  expect_invalid(bad);
  bad = p;
  bad.eps = 1.0;
  expect_invalid(bad);
  bad = p;
  bad.nu = 0.0;
  expect_invalid(bad);
  bad = p;
  bad.delta = 0.0;
  expect_invalid(bad);
  bad = p;
  bad.b_x_sq = SymMatrix<double>::Identity(3);
  expect_invalid(bad);
}

TEST_CASE("ridge recipe ties the reference matrix to the regularizer") {
  SymMatrix<double> gamma = SymMatrix<double>::Scaled(3, 2.5);
  auto p = BernsteinParamsd::ridge(gamma, 0.5, 1.0,
                                   SymMatrix<double>::Identity(3), 0.1, 0.2,
                                   0.05);
  CHECK(p.v.mat() == gamma.mat());
  CHECK(p.gamma.mat() == gamma.mat());
  CHECK(p.delta_inflated);
  CHECK(p.sigma_var_eps_sq() == doctest::Approx(0.5 / 0.9).epsilon(1e-15));
}

TEST_CASE("unregularized deviation statistic matches the flat oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 15; ++trial) {
    Index d = 1 + Index(trial % 4);
    SymMatrix<double> gamma = random_pd(d, rng);
    auto st = random_state(d, 20 + trial, gamma, 2000 + trial);
    double lhs = snm::unregularized_deviation_lhs(st);
    CHECK(lhs == doctest::Approx(
                     ref::unregularized_lhs(st.s(), st.v_sum(), gamma.mat()))
                     .epsilon(1e-9));
    SubGaussianParamsd p{1.3, 0.07, gamma};
    auto rep = snm::unregularized_deviation_bound(st, p);
    CHECK(*rep.radius_sq ==
          doctest::Approx(ref::unregularized_radius_sq(st.v_sum(), gamma.mat(),
                                                       p.sigma_sq, p.delta))
              .epsilon(1e-10));
    CHECK(rep.self_norm_sq == doctest::Approx(lhs).epsilon(1e-12));
  }
}

TEST_CASE("unregularized deviation requires a positive definite raw sum") {
  MartingaleState<double> st(2, SymMatrix<double>::Identity(2));
  st.observe(Vecd::Unit(2, 0), 1.0);  // rank-1 raw sum
  CHECK_THROWS_AS(snm::unregularized_deviation_lhs(st),
                  snm::NotPositiveDefinite);
}

TEST_CASE("alpha matches the flat oracle and clamps at zero") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 15; ++trial) {
    Index d = 1 + Index(trial % 4);
    SymMatrix<double> gamma = random_pd(d, rng);
    SymMatrix<double> v = random_pd(d, rng);
    auto st = random_state(d, 25, gamma, 3000 + trial);
    for (double sig_eps_sq : {1.0, 0.37, 4.2}) {
      double got = snm::bernstein_alpha(st, v, 0.3, sig_eps_sq);
      double want = ref::bernstein_alpha(st.s(), st.gram_matrix(), v.mat(),
                                         0.3, sig_eps_sq, d);
      CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
  }
  // Zero statistic: the max with zero engages.
  MartingaleState<double> st(3, SymMatrix<double>::Identity(3));
  CHECK(snm::bernstein_alpha(st, SymMatrix<double>::Identity(3), 0.3) == 0.0);
  CHECK_THROWS_AS(
      snm::bernstein_alpha(st, SymMatrix<double>::Identity(3), 0.0),
      std::invalid_argument);
}

TEST_CASE("burn-in margins are exact in the scalar case") {
  const double e = std::numbers::e;
  BernsteinParamsd p;
  p.sigma_var_sq = 0.2;
  p.b_w = 0.5;
  p.b_x_sq = SymMatrix<double>::Scaled(1, 0.8);
  p.gamma = SymMatrix<double>::Scaled(1, 1.0);
  p.v = SymMatrix<double>::Scaled(1, 1.0);
  p.eps = 0.3;
  p.nu = 0.1;
  p.delta = 0.05;

  auto st = MartingaleState<double>::from_components(
      Vecd::Zero(1), SymMatrix<double>::Scaled(1, 4.0), p.gamma, 7);
  auto bs = snm::burnin_check(st, p);
  double scaled_v = e * 1.21 * 1.0;
  double static_lhs = 1.21 / 0.3 * 3.0 * 0.25 * 0.8;
  CHECK(bs.data_margin == doctest::Approx(5.0 - scaled_v).epsilon(1e-12));
  CHECK(bs.static_margin ==
        doctest::Approx(scaled_v - static_lhs).epsilon(1e-12));
  CHECK(bs.data_ok);
  CHECK(bs.static_ok);
  CHECK(bs.ok());
}

TEST_CASE("burn-in failure modes are reported separately") {
  BernsteinParamsd p = admitted_params(2);

  // Data condition fails: tiny accumulated sum against a huge reference.
  auto small = MartingaleState<double>::from_components(
      Vecd::Zero(2), SymMatrix<double>::Zero(2), SymMatrix<double>::Identity(2),
      1);
  BernsteinParamsd p_small = p;
  p_small.gamma = SymMatrix<double>::Identity(2);
  auto bs = snm::burnin_check(small, p_small);
  CHECK_FALSE(bs.data_ok);
  CHECK(bs.static_ok);
  CHECK_FALSE(bs.ok());

  // Static condition fails: reference matrix too small for the bounds.
  BernsteinParamsd p_static = p;
  p_static.v = SymMatrix<double>::Scaled(2, 1e-6);
  auto st = admitted_state(p, 2, 99, 1.0);
  auto bs2 = snm::burnin_check(st, p_static);
  CHECK(bs2.data_ok);
  CHECK_FALSE(bs2.static_ok);

  // Exactly met condition counts as satisfied (margin ~ 0 within tolerance).
  BernsteinParamsd p_exact = p;
  p_exact.gamma = SymMatrix<double>::Identity(2);
  double e_nu_sq = std::numbers::e * 1.44;
  auto exact = MartingaleState<double>::from_components(
      Vecd::Zero(2),
      SymMatrix<double>(Matd(e_nu_sq * p.v.mat() - Matd::Identity(2, 2))),
      p_exact.gamma, 3);
  auto bs3 = snm::burnin_check(exact, p_exact);
  CHECK(std::abs(bs3.data_margin) < 1e-9 * p.v.mat().norm());
  CHECK(bs3.data_ok);
}

TEST_CASE("variance-sensitive radius matches the flat oracle when admitted") {
  for (Index d : {Index(1), Index(2), Index(4)}) {
    BernsteinParamsd p = admitted_params(d);
    for (int k = 0; k < 8; ++k) {
      auto st = admitted_state(p, d, 4000 + std::uint64_t(k), 3.0);
      auto rep = snm::bernstein_radius_sq(st, p);
      REQUIRE(rep.radius_sq.has_value());
      double want =
          ref::bernstein_radius_sq(st.s(), st.v_sum(), p.gamma.mat(),
                                   p.v.mat(), p.sigma_var_sq, p.eps, p.nu,
                                   p.delta);
      CHECK(*rep.radius_sq == doctest::Approx(want).epsilon(1e-10));
      double want_alpha =
          ref::bernstein_alpha(st.s(), st.gram_matrix(), p.v.mat(), p.nu,
                               p.sigma_var_eps_sq(), d);
      CHECK(rep.alpha == doctest::Approx(want_alpha).epsilon(1e-10));
      CHECK(rep.leading_factor ==
            doctest::Approx(ref::leading_factor_exact(rep.alpha, p.eps))
                .epsilon(1e-12));
      CHECK(rep.burnin_ok);
      CHECK(rep.data_ok);
      CHECK(rep.static_ok);
    }
  }
}

TEST_CASE("radius under general variance equals the unit-variance rescaling") {
  const Index d = 2;
  const double eps = 0.2;
  const double sigma_var_sq = 0.64;
  const double sigma_eps_sq = sigma_var_sq / (1.0 - eps);  // 0.8
  const double sigma_eps = std::sqrt(sigma_eps_sq);

  BernsteinParamsd p;
  p.sigma_var_sq = sigma_var_sq;
  p.b_w = 1.0;
  p.b_x_sq = SymMatrix<double>::Identity(d);
  p.eps = eps;
  p.nu = 0.2;
  p.delta = 0.05;
  p.v = SymMatrix<double>::Scaled(d, 10.0);
  p.gamma = SymMatrix<double>::Scaled(d, 40.0);

  BernsteinParamsd q = p;
  q.sigma_var_sq = sigma_var_sq / sigma_eps_sq;  // = 1 - eps: unit convention
  q.b_w = 1.0 / sigma_eps;

  std::mt19937_64 rng(314);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  MartingaleState<double> st(d, p.gamma);
  MartingaleState<double> st_unit(d, q.gamma);
  for (int t = 0; t < 300; ++t) {
    Vecd x(d);
    for (Index i = 0; i < d; ++i) x[i] = normal(rng);
    if (x.norm() > 1.0) x /= x.norm();
    double w = unif(rng);
    st.observe(x, w);
    st_unit.observe(x, w / sigma_eps);
  }

  auto rep = snm::bernstein_radius_sq(st, p);
  auto rep_unit = snm::bernstein_radius_sq(st_unit, q);
  CHECK(q.sigma_var_eps_sq() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(rep.alpha == doctest::Approx(rep_unit.alpha).epsilon(1e-10));
  CHECK(*rep.radius_sq ==
        doctest::Approx(sigma_eps_sq * *rep_unit.radius_sq).epsilon(1e-10));
  CHECK(rep.self_norm_sq ==
        doctest::Approx(sigma_eps_sq * rep_unit.self_norm_sq).epsilon(1e-10));
  // Violation indicators agree: both sides scale by the same factor.
  CHECK(rep.self_norm_sq / *rep.radius_sq ==
        doctest::Approx(rep_unit.self_norm_sq / *rep_unit.radius_sq)
            .epsilon(1e-10));
}

TEST_CASE("leading factor: reference values and relaxation domination") {
  using snm::LeadingFactorMode;
  CHECK(snm::leading_factor(1.0, 0.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(snm::leading_factor(1.0, 0.0, LeadingFactorMode::QuadraticRelax) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(snm::leading_factor(1.0, 0.0, LeadingFactorMode::LinearRelax) ==
        doctest::Approx(1.5).epsilon(1e-15));
  CHECK(snm::leading_factor(0.0, 0.0) == 1.0);
  CHECK(snm::leading_factor(0.0, 0.25) == doctest::Approx(4.0 / 3.0));

  for (double alpha = 0.0; alpha <= 10.0; alpha += 0.01) {
    double exact = snm::leading_factor(alpha, 0.1);
    double quad =
        snm::leading_factor(alpha, 0.1, LeadingFactorMode::QuadraticRelax);
    double lin =
        snm::leading_factor(alpha, 0.1, LeadingFactorMode::LinearRelax);
    CHECK(exact <= quad * (1.0 + 1e-15));
    CHECK(exact <= lin * (1.0 + 1e-15));
    // The eps dependence is a clean 1/(1-eps) scaling.
    CHECK(exact * (1.0 - 0.1) ==
          doctest::Approx(snm::leading_factor(alpha, 0.0)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(snm::leading_factor(-0.1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(snm::leading_factor(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(snm::leading_factor(1.0, -0.1), std::invalid_argument);
}

TEST_CASE("burn-in violations surface as exceptions with margins attached") {
  BernsteinParamsd p = admitted_params(2);
  p.gamma = SymMatrix<double>::Identity(2);
  auto st = MartingaleState<double>::from_components(
      Vecd::Zero(2), SymMatrix<double>::Zero(2), p.gamma, 1);
  try {
    snm::bernstein_radius_sq(st, p);
    FAIL("expected BurninViolated");
  } catch (const snm::BurninViolated& e) {
    CHECK_FALSE(e.data_ok());
    CHECK(e.static_ok());
    CHECK(e.data_margin() < 0.0);
    CHECK(std::string(e.what()).find("burn-in") != std::string::npos);
  }

  auto rep = snm::try_bernstein_radius_sq(st, p);
  CHECK_FALSE(rep.radius_sq.has_value());
  CHECK_FALSE(rep.burnin_ok);
  CHECK_FALSE(rep.data_ok);
  CHECK(rep.static_ok);
  CHECK(std::isnan(rep.alpha));
  CHECK(std::isnan(rep.leading_factor));
  CHECK(std::isnan(rep.logdet_ratio));
  CHECK(rep.self_norm_sq == 0.0);  // gram is PD here (Gamma = I), s = 0
  auto bs = snm::burnin_check(st, p);
  CHECK(rep.data_margin == bs.data_margin);
  CHECK(rep.static_margin == bs.static_margin);

  // With a singular regularizer and no data the statistic itself is NaN.
  BernsteinParamsd p0 = p;
  p0.gamma = SymMatrix<double>::Zero(2);
  auto st0 = MartingaleState<double>::from_components(
      Vecd::Zero(2), SymMatrix<double>::Zero(2), p0.gamma, 0);
  auto rep0 = snm::try_bernstein_radius_sq(st0, p0);
  CHECK_FALSE(rep0.radius_sq.has_value());
  CHECK(std::isnan(rep0.self_norm_sq));
}

TEST_CASE("exponent identities hold across regularizers and magnitudes") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Index d = 1 + Index(trial % 5);
    bool zero_gamma = trial % 2 == 0;
    SymMatrix<double> gamma =
        zero_gamma ? SymMatrix<double>::Zero(d) : random_pd(d, rng);
    auto st = random_state(d, 20 + 5 * trial, gamma, 5000 + trial);
    REQUIRE(st.gram_pd());
    for (double scale : {1e-3, 1.0, 1e3}) {
      Vecd lambda(d);
      for (Index i = 0; i < d; ++i) lambda[i] = scale * normal(rng);
      double direct = snm::martingale_exponent_direct(lambda, st);
      double completed = snm::martingale_exponent_completed(lambda, st);
      double want = ref::exponent_direct(lambda, st.s(), st.v_sum());
      double denom = 1.0 + std::abs(direct);
      CHECK(std::abs(direct - want) / denom < 1e-9);
      CHECK(std::abs(completed - direct) / denom < 1e-9);
      double lhs = ref::rearrangement_lhs(lambda, st.s(), st.v_sum());
      double rhs = ref::rearrangement_rhs(lambda, st.s(), st.v_sum(),
                                          gamma.mat());
      CHECK(std::abs(lhs - rhs) / (1.0 + std::abs(lhs)) < 1e-9);
    }
  }
  MartingaleState<double> st(2, SymMatrix<double>::Identity(2));
  CHECK_THROWS_AS(snm::martingale_exponent_direct(Vecd(Vecd::Zero(3)), st),
                  snm::DimensionMismatch);
}

TEST_CASE("gaussian KL: closed form in one dimension and flat oracle") {
  // KL(N(m, a) || N(0, b)) = (a/b - 1 + m^2/b + log(b/a)) / 2.
  auto closed = [](double m, double a, double b) {
    return 0.5 * (a / b - 1.0 + m * m / b + std::log(b / a));
  };
  Vecd m(1);
  m << 0.7;
  CHECK(snm::kl_gaussian(m, SymMatrix<double>::Scaled(1, 0.5),
                         SymMatrix<double>::Scaled(1, 2.0)) ==
        doctest::Approx(closed(0.7, 0.5, 2.0)).epsilon(1e-14));

  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Index d = 1 + Index(trial % 5);
    Vecd mean(d);
    for (Index i = 0; i < d; ++i) mean[i] = normal(rng);
    SymMatrix<double> rho = random_pd(d, rng);
    SymMatrix<double> pi = random_pd(d, rng);
    double got = snm::kl_gaussian(mean, rho, pi);
    double want = ref::kl_gaussian(mean, rho.mat(), pi.mat());
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
    CHECK(got >= -1e-12);
  }
  SymMatrix<double> id2 = SymMatrix<double>::Identity(2);
  CHECK(snm::kl_gaussian(Vecd(Vecd::Zero(2)), id2, id2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(
      snm::kl_gaussian(Vecd(Vecd::Zero(3)), id2, id2), snm::DimensionMismatch);
}

TEST_CASE("gaussian KL with matched covariances recovers the logdet ratio") {
  // With rho = N(0, (V+G)^-1) and pi = N(0, G^-1):
  //   2 KL = tr(G (V+G)^-1) - d + [logdet(V+G) - logdet G].
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Index d = 1 + Index(trial % 4);
    SymMatrix<double> gamma = random_pd(d, rng);
    auto st = random_state(d, 40, gamma, 7000 + trial);
    auto rep = snm::subgaussian_radius_sq(st, {1.0, 0.1, gamma});
    Matd gram = st.gram_matrix();
    SymMatrix<double> rho(Matd(gram.inverse()));
    SymMatrix<double> pi(Matd(gamma.mat().inverse()));
    double kl = snm::kl_gaussian(Vecd(Vecd::Zero(d)), rho, pi);
    double trace_term = (gamma.mat() * gram.inverse()).trace();
    double recovered = 2.0 * kl - trace_term + double(d);
    CHECK(recovered == doctest::Approx(rep.logdet_ratio).epsilon(1e-9));
  }
}

TEST_CASE("uniform-ellipsoid KL is half the logdet ratio, nested only") {
  using snm::Ellipsoid;
  Ellipsoid<double> rho(Vecd::Zero(2), SymMatrix<double>::Identity(2));
  Ellipsoid<double> pi(Vecd::Zero(2), SymMatrix<double>::Scaled(2, 4.0));
  CHECK(snm::kl_uniform_ellipsoids(rho, pi) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(snm::kl_uniform_ellipsoids(pi, rho), snm::NotContained);

  Vecd off(2);
  off << 3.0, 0.0;
  Ellipsoid<double> shifted(off, SymMatrix<double>::Identity(2));
  CHECK_THROWS_AS(snm::kl_uniform_ellipsoids(shifted, pi), snm::NotContained);
}

TEST_CASE("uniform second moment is the shape over d+2") {
  std::mt19937_64 rng(8);
  SymMatrix<double> shape = random_pd(3, rng);
  SymMatrix<double> m = snm::uniform_ellipsoid_second_moment(shape);
  CHECK((m.mat() - shape.mat() / 5.0).norm() <= 1e-15 * shape.mat().norm());
}

TEST_CASE("certifying ellipsoids have the documented geometry") {
  const Index d = 3;
  BernsteinParamsd p = admitted_params(d);
  auto st = admitted_state(p, d, 9001, 2.0);
  auto pair = snm::bernstein_ellipsoids(st, p);

  Matd gram = st.gram_matrix();
  double alpha = snm::bernstein_alpha(st, p.v, p.nu, p.sigma_var_eps_sq());
  Vecd want_center = gram.inverse() * st.s() /
                     ((1.0 + alpha) * std::sqrt(p.sigma_var_eps_sq()));
  CHECK((pair.rho.center() - want_center).norm() <
        1e-10 * (1.0 + want_center.norm()));
  Matd want_rho_shape = 5.0 * gram.inverse();
  CHECK((pair.rho.shape().mat() - want_rho_shape).norm() <
        1e-10 * want_rho_shape.norm());
  CHECK(pair.pi.center() == Vecd::Zero(d));
  Matd want_pi_shape = 5.0 / std::numbers::e * p.v.mat().inverse();
  CHECK((pair.pi.shape().mat() - want_pi_shape).norm() <
        1e-10 * want_pi_shape.norm());

  // Under the burn-in condition the data ellipsoid sits inside the
  // reference ellipsoid; cross-check with the sampling oracle.
  CHECK(snm::ellipsoid_contains(pair.pi, pair.rho));
  std::mt19937_64 rng(9);
  CHECK(ref::sampled_contains(pair.pi, pair.rho, 2000, rng, 1e-6));
}

TEST_CASE("containment holds for admitted states across statistic sizes") {
  for (Index d : {Index(1), Index(2), Index(5)}) {
    BernsteinParamsd p = admitted_params(d);
    for (double s_scale : {0.0, 1e-3, 1.0, 1e3, 1e6}) {
      auto st = admitted_state(p, d, 77 + std::uint64_t(100 * s_scale), s_scale);
      REQUIRE(snm::burnin_check(st, p).ok());
      auto pair = snm::bernstein_ellipsoids(st, p);
      CHECK(snm::ellipsoid_contains(pair.pi, pair.rho, 1e-9));
    }
  }
}

TEST_CASE("scalar sufficient condition: threshold at zero statistic") {
  // At s = 0 the condition reduces to (1+nu)^2 >= e.
  const Index d = 2;
  auto make = [&](double nu) {
    BernsteinParamsd p = admitted_params(d, 0.1, nu);
    auto st = MartingaleState<double>::from_components(
        Vecd::Zero(d), SymMatrix<double>::Scaled(d, 1.0), p.gamma, 1);
    return snm::alpha_sufficient_condition(st, p);
  };
  CHECK(make(0.7));        // (1.7)^2 = 2.89 > e
  CHECK_FALSE(make(0.6));  // (1.6)^2 = 2.56 < e
}

TEST_CASE("sufficient condition implies containment on admitted states") {
  std::mt19937_64 rng(10);
  int n_sufficient = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Index d = 1 + Index(trial % 4);
    double nu = trial % 3 == 0 ? 0.8 : 0.3;
    BernsteinParamsd p = admitted_params(d, 0.1, nu);
    std::uniform_real_distribution<double> mag(0.0, 6.0);
    auto st = admitted_state(p, d, 11000 + std::uint64_t(trial),
                             std::pow(10.0, mag(rng) - 3.0));
    if (!snm::burnin_check(st, p).ok()) continue;
    if (snm::alpha_sufficient_condition(st, p)) {
      ++n_sufficient;
      auto pair = snm::bernstein_ellipsoids(st, p);
      CHECK(snm::ellipsoid_contains(pair.pi, pair.rho, 1e-9));
    }
  }
  CHECK(n_sufficient > 0);  // the check must not be vacuous
}

TEST_CASE("deployable radius dominates the oracle radius") {
  for (Index d : {Index(1), Index(3)}) {
    BernsteinParamsd p = admitted_params(d);
    for (int k = 0; k < 10; ++k) {
      auto st = admitted_state(p, d, 13000 + std::uint64_t(k), 1.5);
      auto oracle = snm::bernstein_radius_sq(st, p);
      auto deploy = snm::deployable_bernstein_radius_sq(st, p);
      CHECK(deploy.alpha >= oracle.alpha * (1.0 - 1e-12));
      CHECK(*deploy.radius_sq >= *oracle.radius_sq * (1.0 - 1e-12));
      CHECK(deploy.delta_inflated);
      CHECK(deploy.logdet_ratio ==
            doctest::Approx(oracle.logdet_ratio).epsilon(1e-12));
    }
    // Same burn-in gate as the oracle bound.
    BernsteinParamsd tight = p;
    tight.gamma = SymMatrix<double>::Scaled(d, 1e-3);
    auto bad = MartingaleState<double>::from_components(
        Vecd::Zero(d), SymMatrix<double>::Zero(d), tight.gamma, 0);
    CHECK_THROWS_AS(snm::deployable_bernstein_radius_sq(bad, tight),
                    snm::BurninViolated);
  }
}

}  // TEST_SUITE
