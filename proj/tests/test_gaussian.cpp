#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "ffep/errors.hpp"
#include "ffep/gaussian.hpp"

using namespace ffep;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("natural parameters of a standard normal") {
  const auto g = DiagGaussian::from_mean_variance(vec({0.0}), vec({1.0}));
  CHECK(g.neg_half_precision()[0] == doctest::Approx(-0.5));
  CHECK(g.linear()[0] == 0.0);
  CHECK(g.log_mass() == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(g.log_scale() == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
}

TEST_CASE("mean and variance from natural parameters") {
  const DiagGaussian g(0.0, vec({2.0, -1.0}), vec({-0.5, -2.0}));
  CHECK(g.mean()[0] == doctest::Approx(2.0));
  CHECK(g.mean()[1] == doctest::Approx(-0.25));
  CHECK(g.variance()[1] == doctest::Approx(0.25));
  CHECK(g.precision()[1] == 4.0);
}

TEST_CASE("unit message and products") {
  const auto u = DiagGaussian::unit(3);
  CHECK(u.log_scale() == 0.0);
  CHECK(u.linear().isZero());
  CHECK_FALSE(u.is_proper());
  const auto g = DiagGaussian::from_mean_variance(vec({1, 2, 3}), vec({1, 4, 9}), 0.3);
  CHECK(multiply(g, u) == g);
  CHECK(divide(g, u) == g);
  CHECK(divide(multiply(g, g), g) == g);
}

TEST_CASE("product of two normals") {
  const auto a = DiagGaussian::from_mean_variance(vec({0.0}), vec({1.0}));
  const auto b = DiagGaussian::from_mean_variance(vec({2.0}), vec({1.0}));
  const auto p = multiply(a, b);
  CHECK(p.mean()[0] == doctest::Approx(1.0));
  CHECK(p.variance()[0] == doctest::Approx(0.5));
  // Integral of the product of two unit normals 2 apart: N(0; 2, 2).
  CHECK(p.log_mass() == doctest::Approx(-0.5 * std::log(4.0 * std::numbers::pi) - 1.0));
}

TEST_CASE("improper messages") {
  const DiagGaussian g(0.0, vec({1.0}), vec({0.5}));
  CHECK_FALSE(g.is_proper());
  CHECK_THROWS_AS(g.mean(), ImproperGaussianError);
  CHECK_THROWS_AS(g.variance(), ImproperGaussianError);
  CHECK_THROWS_AS(g.log_mass(), ImproperGaussianError);
  CHECK_THROWS_AS(natural_to_moments(g), ImproperGaussianError);
  const DiagGaussian tiny(0.0, vec({0.0}), vec({-1e-13}));
  CHECK(tiny.is_proper());
  CHECK_FALSE(tiny.is_proper(1e-12));
}

TEST_CASE("construction errors") {
  CHECK_THROWS_AS(DiagGaussian(0.0, vec({1.0, 2.0}), vec({-1.0})), UsageError);
  CHECK_THROWS_AS(DiagGaussian(0.0, Vector(), Vector()), UsageError);
  const auto a = DiagGaussian::unit(2);
  const auto b = DiagGaussian::unit(3);
  CHECK_THROWS_AS(multiply(a, b), UsageError);
  CHECK_THROWS_AS(divide(a, b), UsageError);
}

TEST_CASE("eval_log") {
  const DiagGaussian g(0.5, vec({1.0, -2.0}), vec({-0.5, -1.0}));
  const Vector t = vec({2.0, 3.0});
  CHECK(g.eval_log(t) == doctest::Approx(0.5 + 2.0 - 6.0 - 2.0 - 9.0));
  CHECK_FALSE(DiagGaussian(0.0, vec({NAN}), vec({-1.0})).is_finite());
}

TEST_CASE("moment matching examples and errors") {
  MomentVector m;
  m.m0 = 2.0;
  m.m1 = vec({0.0});
  m.m2 = vec({2.0});
  const auto g = moments_to_natural(m);
  CHECK(g.mean()[0] == doctest::Approx(0.0));
  CHECK(g.variance()[0] == doctest::Approx(1.0));
  CHECK(g.log_mass() == doctest::Approx(std::log(2.0)));

  m.m2 = vec({0.0});  // variance -1... with m1 = 0: E[x^2] = 0
  try {
    moments_to_natural(m);
    FAIL("expected MomentMatchError");
  } catch (const MomentMatchError& e) {
    CHECK(e.coordinate() == 0);
  }
  m.m0 = 0.0;
  m.m2 = vec({1.0});
  try {
    moments_to_natural(m);
    FAIL("expected MomentMatchError");
  } catch (const MomentMatchError& e) {
    CHECK(e.coordinate() == -1);
  }
}

TEST_CASE("moments round trip on random Gaussians") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mean(-5.0, 5.0), logvar(-4.0, 4.0), mass(-3.0, 3.0);
  std::uniform_int_distribution<int> dims(1, 8);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index d = dims(rng);
    Vector mu(d), var(d);
    for (Index i = 0; i < d; ++i) {
      mu[i] = mean(rng);
      var[i] = std::exp(logvar(rng));
    }
    const auto g = DiagGaussian::from_mean_variance(mu, var, mass(rng));
    const auto back = moments_to_natural(natural_to_moments(g));
    CHECK(std::abs(back.log_scale() - g.log_scale()) <= 1e-9 * (1.0 + std::abs(g.log_scale())));
    for (Index i = 0; i < d; ++i) {
      CHECK(back.linear()[i] == doctest::Approx(g.linear()[i]).epsilon(1e-9).scale(1.0));
      CHECK(back.neg_half_precision()[i] ==
            doctest::Approx(g.neg_half_precision()[i]).epsilon(1e-9));
    }
  }
}
