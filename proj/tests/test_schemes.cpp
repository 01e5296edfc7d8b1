#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>

#include "doctest.h"
#include "ffep/errors.hpp"
#include "ffep/factors.hpp"
#include "ffep/schemes.hpp"
#include "test_support.hpp"

using namespace ffep;
using ffep::testing::max_param_diff;
using ffep::testing::random_proper;

namespace {

Vector scalar(double x) { return Vector::Constant(1, x); }

DiagGaussian normal1(double mean, double var, double log_mass = 0.0) {
  return DiagGaussian::from_mean_variance(scalar(mean), scalar(var), log_mass);
}

class ConstantFactor final : public LogFactor {
 public:
  ConstantFactor(Index d, double log_c) : d_(d), log_c_(log_c) {}
  Index dim() const override { return d_; }
  double log_value(const Vector&) const override { return log_c_; }
  FactorDerivatives log_derivatives(const Vector&) const override {
    return {Vector::Zero(d_), Vector::Zero(d_)};
  }

 private:
  Index d_;
  double log_c_;
};

// log f(theta) = -loss(theta) for one example with y = 1, x = 1.
class SingleExample final : public LogFactor {
 public:
  explicit SingleExample(LossKind loss) : loss_(loss) {}
  Index dim() const override { return 1; }
  double log_value(const Vector& t) const override { return -loss_value(loss_, t[0]); }
  FactorDerivatives log_derivatives(const Vector& t) const override {
    const auto d = loss_derivatives(loss_, t[0]);
    return {scalar(-d.first), scalar(-d.second)};
  }

 private:
  LossKind loss_;
};

class ZeroFactor final : public LogFactor {
 public:
  Index dim() const override { return 1; }
  double log_value(const Vector&) const override { return -INFINITY; }
  FactorDerivatives log_derivatives(const Vector&) const override { return {scalar(0), scalar(0)}; }
};

}  // namespace

TEST_CASE("rule points and weights") {
  const auto rule = build_rule(normal1(0.0, 1.0), std::sqrt(1.5));
  REQUIRE(rule.size() == 3);
  CHECK(rule.points(0, 0) == 0.0);
  CHECK(rule.points(1, 0) == doctest::Approx(1.224745).epsilon(1e-6));
  CHECK(rule.points(2, 0) == doctest::Approx(-1.224745).epsilon(1e-6));
  for (Index j = 0; j < 3; ++j) CHECK(rule.weights[j] == doctest::Approx(1.0 / 3.0));

  const auto cav3 = DiagGaussian::from_mean_variance(Vector::Zero(3), Vector::Ones(3));
  CHECK(std::abs(build_rule(cav3, std::sqrt(3.0)).weights[0]) < 1e-15);
  const auto cav4 = DiagGaussian::from_mean_variance(Vector::Zero(4), Vector::Ones(4));
  const auto r4 = build_rule(cav4, default_gamma(4));
  for (Index j = 0; j < 9; ++j) CHECK(r4.weights[j] == doctest::Approx(1.0 / 9.0));
  CHECK_THROWS_AS(build_rule(DiagGaussian::unit(2), 1.0), ImproperGaussianError);
}

TEST_CASE("rule points are reflections through the center") {
  std::mt19937_64 rng(9);
  const auto cav = random_proper(rng, 5);
  const auto rule = build_rule(cav, 1.7);
  CHECK(std::abs(rule.weights.sum() - 1.0) < 1e-12);
  for (Index j = 1; j <= 5; ++j) {
    const Vector mid = 0.5 * (rule.point(j) + rule.point(j + 5));
    CHECK((mid - cav.mean()).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("option validation and names") {
  SchemeOptions o;
  o.newton_tol = 0.0;
  CHECK_THROWS_AS(validate(o), UsageError);
  o = {};
  o.gamma = -1.0;
  CHECK_THROWS_AS(validate(o), UsageError);
  CHECK(parse_scheme("vq") == SchemeType::kVariationalQuadrature);
  CHECK(scheme_name(SchemeType::kQuickLaplace) == "qla");
  CHECK_THROWS_AS(parse_scheme("ep"), UsageError);
}

TEST_CASE("surrogate gradient matches finite differences") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 0.3);
  const auto cav = random_proper(rng, 3);
  const auto rule = build_rule(cav, default_gamma(3));
  const Eigen::MatrixXd basis = standardized_basis(3, rule.gamma);
  Vector F(7);
  for (Index j = 0; j < 7; ++j) F[j] = std::exp(normal(rng));
  for (int trial = 0; trial < 20; ++trial) {
    Vector alpha(7);
    for (Index i = 0; i < 7; ++i) alpha[i] = normal(rng);
    const auto ev = surrogate_value_grad_hess(alpha, basis, rule.weights, F);
    const double h = 1e-6;
    for (Index i = 0; i < 7; ++i) {
      Vector ap = alpha, am = alpha;
      ap[i] += h;
      am[i] -= h;
      const double fd = (surrogate_value(ap, basis, rule.weights, F) -
                         surrogate_value(am, basis, rule.weights, F)) / (2 * h);
      CHECK(std::abs(fd - ev.gradient[i]) <= 1e-6);
    }
    CHECK(ev.hessian.llt().info() == Eigen::Success);
    CHECK((ev.hessian - ev.hessian.transpose()).norm() <= 1e-12 * ev.hessian.norm());
  }
}

TEST_CASE("surrogate gradient vanishes at an exact log-linear fit") {
  const auto rule = build_rule(normal1(0.3, 2.0), default_gamma(1));
  const Eigen::MatrixXd basis = monomial_basis(rule);
  const Vector alpha0 = Eigen::Vector3d(0.2, -0.4, -0.1);
  const Vector F = (basis * alpha0).array().exp().matrix();
  const auto ev = surrogate_value_grad_hess(alpha0, basis, rule.weights, F);
  CHECK(ev.gradient.lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("surrogate overflow is flagged") {
  const auto rule = build_rule(normal1(0.0, 1.0), default_gamma(1));
  const Eigen::MatrixXd basis = standardized_basis(1, rule.gamma);
  bool overflow = false;
  surrogate_value(Eigen::Vector3d(600.0, 0, 0), basis, rule.weights, Vector::Ones(3), &overflow);
  CHECK(overflow);
}

TEST_CASE("all schemes recover a Gaussian factor") {
  const GaussianFactor f(normal1(1.0, 1.0, 0.7));
  const auto cav = normal1(0.0, 1.0);
  const auto la = approx_laplace(cav, f);
  const auto qla = approx_quick_laplace(cav, f);
  const auto vq = approx_variational_quadrature(cav, f);
  CHECK(max_param_diff(la, f.gaussian()) < 1e-8);
  CHECK(max_param_diff(qla, f.gaussian()) < 1e-8);
  CHECK(max_param_diff(vq, f.gaussian()) < 1e-8);
  CHECK(vq.mean()[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(vq.variance()[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(vq.log_mass() == doctest::Approx(0.7).epsilon(1e-8));
  // The rule is not exact beyond degree 3, so GQ differs from the factor.
  CHECK(max_param_diff(approx_gauss_quadrature(cav, f), f.gaussian()) > 1e-3);
}

TEST_CASE("constant factors") {
  const ConstantFactor f(1, std::log(2.0));
  const auto cav = normal1(0.0, 1.0);
  const auto m = gauss_quadrature_moments(cav, f, default_gamma(1));
  CHECK(m.m0 == doctest::Approx(2.0));
  CHECK(std::abs(m.m1[0]) < 1e-15);
  CHECK(m.m2[0] == doctest::Approx(2.0));
  for (const auto& msg : {approx_gauss_quadrature(cav, f), approx_variational_quadrature(cav, f),
                          approx_laplace(cav, f), approx_quick_laplace(cav, f)}) {
    CHECK(msg.log_scale() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(std::abs(msg.linear()[0]) < 1e-12);
    CHECK(std::abs(msg.neg_half_precision()[0]) < 1e-12);
  }
  SchemeOptions constant_start;
  constant_start.vq_start = VqStart::kConstant;
  const auto report = fit_variational_quadrature(cav, f, constant_start);
  CHECK(report.gradient_inf_norm < 1e-14);
}

TEST_CASE("quick Laplace ignores the cavity variance") {
  const SingleExample f(LossKind::logistic());
  const auto a = approx_quick_laplace(normal1(0.4, 1.0), f);
  const auto b = approx_quick_laplace(normal1(0.4, 9.0), f);
  CHECK(a == b);
  const auto hinge = approx_quick_laplace(normal1(0.2, 1.0), SingleExample(LossKind::hinge()));
  CHECK(hinge.neg_half_precision()[0] == 0.0);
  CHECK(hinge.linear()[0] == 1.0);
}

TEST_CASE("Laplace on one logistic example agrees with a grid oracle") {
  const SingleExample f(LossKind::logistic());
  const auto cav = normal1(0.0, 1.0);
  const auto report = fit_laplace(cav, f);
  // Maximize log c + log f on a dense grid, then refine by bisection on the
  // stationarity condition -t + sigma(-t) = 0.
  double best = -INFINITY, best_t = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double t = -5.0 + 1e-4 * i;
    const double v = -0.5 * t * t - std::log1p(std::exp(-t));
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  double lo = best_t - 1e-3, hi = best_t + 1e-3;
  auto g = [](double t) { return -t + 1.0 / (1.0 + std::exp(t)); };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  const double t_star = 0.5 * (lo + hi);
  CHECK(report.mode[0] == doctest::Approx(t_star).epsilon(1e-6));
  const double s = 1.0 / (1.0 + std::exp(-t_star));
  CHECK(report.message.precision()[0] == doctest::Approx(s * (1.0 - s)).epsilon(1e-6));
  const auto grad = cav.linear()[0] + 2 * cav.neg_half_precision()[0] * report.mode[0] +
                    f.log_derivatives(report.mode).grad[0];
  CHECK(std::abs(grad) <= 1e-6);
}

TEST_CASE("GQ fails on a factor that vanishes everywhere") {
  CHECK_THROWS_AS(approx_gauss_quadrature(normal1(0.0, 1.0), ZeroFactor()), SchemeFailure);
  CHECK_THROWS_AS(approx_variational_quadrature(normal1(0.0, 1.0), ZeroFactor()), SchemeFailure);
}

TEST_CASE("VQ interpolates log f at the rule points") {
  std::mt19937_64 rng(12);
  const Dataset ds = testing::random_dataset(rng, 30, 3);
  const std::vector<std::size_t> idx = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (const auto& loss : {LossKind::logistic(), LossKind::hinge(), LossKind::quasi01()}) {
    const MiniBatchFactor f(ds, idx, loss);
    const auto cav = random_proper(rng, 3, 1.0);
    const auto msg = approx_variational_quadrature(cav, f);
    const auto rule = build_rule(cav, default_gamma(3));
    for (Index j = 0; j < rule.size(); ++j) {
      CHECK(msg.eval_log(rule.point(j)) == doctest::Approx(f.log_value(rule.point(j))).epsilon(1e-9));
    }
  }
}

TEST_CASE("VQ Newton iterates stay positive definite from the constant start") {
  std::mt19937_64 rng(13);
  const Dataset ds = testing::random_dataset(rng, 30, 3);
  const std::vector<std::size_t> idx = {10, 11, 12, 13, 14};
  SchemeOptions constant_start;
  constant_start.vq_start = VqStart::kConstant;
  for (int trial = 0; trial < 20; ++trial) {
    const MiniBatchFactor f(ds, idx, LossKind::logistic());
    const auto cav = random_proper(rng, 3, 1.0);
    const auto report = fit_variational_quadrature(cav, f, constant_start);
    CHECK(report.all_hessians_positive_definite);
    CHECK(report.iterations > 1);
    CHECK(report.gradient_inf_norm <= 1e-4 * report.data_scale);
    const auto direct = approx_variational_quadrature(cav, f);
    CHECK(max_param_diff(report.message, direct) < 1e-6);
  }
}

TEST_CASE("interpolation_to_natural reproduces a quadratic") {
  std::mt19937_64 rng(14);
  const auto cav = random_proper(rng, 4);
  const auto rule = build_rule(cav, default_gamma(4));
  const auto target = random_proper(rng, 4);
  Vector values(rule.size());
  for (Index j = 0; j < rule.size(); ++j) values[j] = target.eval_log(rule.point(j));
  CHECK(max_param_diff(interpolation_to_natural(values, rule), target) < 1e-9);
  CHECK_THROWS_AS(interpolation_to_natural(Vector::Zero(3), rule), UsageError);
}

TEST_CASE("generalized KL diagnostic") {
  const GaussianFactor f(normal1(1.0, 1.0));
  const auto cav = normal1(0.0, 1.0);
  const auto rule = build_rule(cav, default_gamma(1));
  CHECK(std::abs(generalized_kl_diagnostic(cav, f, f.gaussian(), rule)) < 1e-10);
  CHECK(generalized_kl_diagnostic(cav, f, normal1(1.3, 1.0), rule) > 0.0);
}

TEST_CASE("schemes reject improper cavities and mismatched factors") {
  const ConstantFactor f(2, 0.0);
  for (auto type : {SchemeType::kLaplace, SchemeType::kQuickLaplace,
                    SchemeType::kGaussQuadrature, SchemeType::kVariationalQuadrature}) {
    SchemeKind k;
    k.type = type;
    if (type != SchemeType::kQuickLaplace) {
      CHECK_THROWS_AS(approximate(k, DiagGaussian::unit(2), f), ImproperGaussianError);
    }
    CHECK_THROWS_AS(approximate(k, normal1(0.0, 1.0), f), UsageError);
  }
}
