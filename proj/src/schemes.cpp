#include "ffep/schemes.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <string>

#include "ffep/errors.hpp"

namespace ffep {
namespace {

void require_proper_cavity(const DiagGaussian& cavity, const char* who) {
  if (!cavity.is_proper()) {
    throw ImproperGaussianError(std::string(who) + ": cavity is improper");
  }
}

void require_same_dim(const DiagGaussian& cavity, const LogFactor& factor) {
  if (cavity.dim() != factor.dim()) throw UsageError("cavity and factor dimensions differ");
}

double relative_change(const Vector& step, const Vector& params) {
  return step.lpNorm<Eigen::Infinity>() / std::max(1.0, params.lpNorm<Eigen::Infinity>());
}

double gamma_for(const SchemeOptions& options, Index dim) {
  return options.gamma ? *options.gamma : default_gamma(dim);
}

// Centered quadrature sums S0, S1_i = sum w F z_i, S2_i = sum w F z_i^2 in
// standardized coordinates, which avoid cancellation when |mean| >> sigma.
struct CenteredSums {
  double s0 = 0.0;
  Vector s1;
  Vector s2;
};

CenteredSums centered_sums(const QuadratureRule& rule, const Vector& values) {
  const Index d = rule.dim();
  const double g = rule.gamma;
  CenteredSums out{0.0, Vector::Zero(d), Vector::Zero(d)};
  for (Index j = 0; j < rule.size(); ++j) out.s0 += rule.weights[j] * values[j];
  for (Index i = 0; i < d; ++i) {
    const double plus = rule.weights[1 + i] * values[1 + i];
    const double minus = rule.weights[1 + d + i] * values[1 + d + i];
    out.s1[i] = g * (plus - minus);
    out.s2[i] = g * g * (plus + minus);
  }
  return out;
}

}  // namespace

SchemeType parse_scheme(std::string_view name) {
  if (name == "la") return SchemeType::kLaplace;
  if (name == "qla") return SchemeType::kQuickLaplace;
  if (name == "gq") return SchemeType::kGaussQuadrature;
  if (name == "vq") return SchemeType::kVariationalQuadrature;
  throw UsageError("unknown scheme '" + std::string(name) + "' (expected la|qla|gq|vq)");
}

std::string scheme_name(SchemeType type) {
  switch (type) {
    case SchemeType::kLaplace:
      return "la";
    case SchemeType::kQuickLaplace:
      return "qla";
    case SchemeType::kGaussQuadrature:
      return "gq";
    case SchemeType::kVariationalQuadrature:
      return "vq";
  }
  return "unknown";
}

void validate(const SchemeOptions& options) {
  if (!(options.newton_tol > 0.0)) throw UsageError("newton_tol must be positive");
  if (options.newton_max_iter < 1) throw UsageError("newton_max_iter must be at least 1");
  if (options.max_backtracks < 0) throw UsageError("max_backtracks must be nonnegative");
  if (options.gamma && !(*options.gamma > 0.0)) throw UsageError("gamma must be positive");
}

double default_gamma(Index dim) { return std::sqrt(static_cast<double>(dim) + 0.5); }

QuadratureRule build_rule(const DiagGaussian& cavity, double gamma) {
  require_proper_cavity(cavity, "build_rule");
  if (!(gamma > 0.0)) throw UsageError("build_rule: gamma must be positive");
  const Index d = cavity.dim();
  QuadratureRule rule;
  rule.center = cavity.mean();
  rule.scale = cavity.variance().cwiseSqrt();
  rule.gamma = gamma;
  rule.points.resize(2 * d + 1, d);
  rule.weights.resize(2 * d + 1);
  const double g2 = gamma * gamma;
  rule.points.row(0) = rule.center.transpose();
  rule.weights[0] = 1.0 - static_cast<double>(d) / g2;
  for (Index i = 0; i < d; ++i) {
    rule.points.row(1 + i) = rule.center.transpose();
    rule.points(1 + i, i) += gamma * rule.scale[i];
    rule.points.row(1 + d + i) = rule.center.transpose();
    rule.points(1 + d + i, i) -= gamma * rule.scale[i];
    rule.weights[1 + i] = 1.0 / (2.0 * g2);
    rule.weights[1 + d + i] = 1.0 / (2.0 * g2);
  }
  return rule;
}

Eigen::MatrixXd monomial_basis(const QuadratureRule& rule) {
  const Index d = rule.dim();
  Eigen::MatrixXd basis(rule.size(), 2 * d + 1);
  basis.col(0).setOnes();
  basis.middleCols(1, d) = rule.points;
  basis.middleCols(1 + d, d) = rule.points.array().square().matrix();
  return basis;
}

Eigen::MatrixXd standardized_basis(Index dim, double gamma) {
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(2 * dim + 1, 2 * dim + 1);
  basis.col(0).setOnes();
  for (Index i = 0; i < dim; ++i) {
    basis(1 + i, 1 + i) = gamma;
    basis(1 + i, 1 + dim + i) = gamma * gamma;
    basis(1 + dim + i, 1 + i) = -gamma;
    basis(1 + dim + i, 1 + dim + i) = gamma * gamma;
  }
  return basis;
}

double surrogate_value(const Vector& alpha, const Eigen::MatrixXd& basis, const Vector& weights,
                       const Vector& factor_values, bool* overflow) {
  const Vector exponents = basis * alpha;
  if (overflow) *overflow = (exponents.array() > kExponentGuard).any();
  double value = 0.0;
  for (Index j = 0; j < basis.rows(); ++j) {
    value += weights[j] * (std::exp(exponents[j]) - factor_values[j] * exponents[j]);
  }
  return value;
}

SurrogateEvaluation surrogate_value_grad_hess(const Vector& alpha, const Eigen::MatrixXd& basis,
                                              const Vector& weights,
                                              const Vector& factor_values) {
  if (basis.cols() != alpha.size() || basis.rows() != weights.size() ||
      weights.size() != factor_values.size()) {
    throw UsageError("surrogate_value_grad_hess: inconsistent sizes");
  }
  SurrogateEvaluation out;
  const Vector exponents = basis * alpha;
  out.overflow = (exponents.array() > kExponentGuard).any();
  const Vector g = exponents.array().exp().matrix();
  const Vector wg = weights.cwiseProduct(g);
  out.value = wg.sum() - weights.cwiseProduct(factor_values).dot(exponents);
  out.gradient = basis.transpose() * (wg - weights.cwiseProduct(factor_values));
  out.hessian = basis.transpose() * wg.asDiagonal() * basis;
  return out;
}

SurrogateEvaluation surrogate_value_grad_hess(const Vector& alpha, const QuadratureRule& rule,
                                              const Vector& factor_values) {
  return surrogate_value_grad_hess(alpha, monomial_basis(rule), rule.weights, factor_values);
}

StabilizedValues evaluate_on_rule(const LogFactor& factor, const QuadratureRule& rule) {
  StabilizedValues out;
  out.log_values.resize(rule.size());
  double shift = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < rule.size(); ++j) {
    const double lf = factor.log_value(rule.point(j));
    if (std::isnan(lf) || lf == std::numeric_limits<double>::infinity()) {
      throw SchemeFailure("factor log-value is not finite at a quadrature point");
    }
    out.log_values[j] = lf;
    shift = std::max(shift, lf);
  }
  if (!std::isfinite(shift)) throw SchemeFailure("factor vanishes at every quadrature point");
  out.shift = shift;
  out.values = (out.log_values.array() - shift).exp().matrix();
  return out;
}

DiagGaussian taylor_message(const LogFactor& factor, const Vector& theta) {
  const double value = factor.log_value(theta);
  const FactorDerivatives der = factor.log_derivatives(theta);
  Vector linear = der.grad - der.hessdiag.cwiseProduct(theta);
  Vector quad = 0.5 * der.hessdiag;
  const double log_scale =
      value - der.grad.dot(theta) + 0.5 * der.hessdiag.dot(theta.cwiseProduct(theta));
  DiagGaussian message(log_scale, std::move(linear), std::move(quad));
  if (!message.is_finite()) throw SchemeFailure("Taylor expansion produced non-finite values");
  return message;
}

LaplaceReport fit_laplace(const DiagGaussian& cavity, const LogFactor& factor,
                          const SchemeOptions& options) {
  require_proper_cavity(cavity, "approx_laplace");
  require_same_dim(cavity, factor);
  const Vector cavity_curv = 2.0 * cavity.neg_half_precision();
  auto objective = [&](const Vector& theta) {
    return cavity.eval_log(theta) + factor.log_value(theta);
  };

  Vector theta = cavity.mean();
  double current = objective(theta);
  if (!std::isfinite(current)) throw SchemeFailure("Laplace: objective not finite at start");

  LaplaceReport report;
  bool converged = false;
  for (int iter = 1; iter <= options.newton_max_iter && !converged; ++iter) {
    report.iterations = iter;
    const FactorDerivatives der = factor.log_derivatives(theta);
    const Vector grad = cavity.linear() + cavity_curv.cwiseProduct(theta) + der.grad;
    Vector curvature = cavity_curv + der.hessdiag;
    for (Index i = 0; i < curvature.size(); ++i) {
      if (!(curvature[i] < 0.0)) curvature[i] = cavity_curv[i];
    }
    const Vector step = -grad.cwiseQuotient(curvature);
    if (!step.allFinite()) throw SchemeFailure("Laplace: non-finite Newton step");

    double t = 1.0;
    bool accepted = false;
    Vector candidate;
    double value = 0.0;
    for (int k = 0; k <= options.max_backtracks; ++k, t *= 0.5) {
      candidate = theta + t * step;
      value = objective(candidate);
      if (value >= current) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No ascent along the Newton direction at any step length: stationary
      // up to rounding.
      converged = true;
      break;
    }
    theta = std::move(candidate);
    current = value;
    converged = relative_change(t * step, theta) <= options.newton_tol;
  }
  if (!converged) {
    throw SchemeFailure("Laplace: Newton did not converge in " +
                        std::to_string(options.newton_max_iter) + " iterations");
  }
  report.message = taylor_message(factor, theta);
  report.mode = std::move(theta);
  return report;
}

DiagGaussian interpolation_to_natural(const Vector& coefficients, const QuadratureRule& rule,
                                      double shift) {
  const Index d = rule.dim();
  if (coefficients.size() != 2 * d + 1) {
    throw UsageError("interpolation_to_natural: expected 2d+1 coefficients");
  }
  const double g = rule.gamma;
  const double center = coefficients[0];
  const Vector& mu = rule.center;
  const Vector& sigma = rule.scale;
  Vector linear(d);
  Vector quad(d);
  double log_scale = center + shift;
  for (Index i = 0; i < d; ++i) {
    const double plus = coefficients[1 + i];
    const double minus = coefficients[1 + d + i];
    // In z = (theta - mu) / sigma: b z + c z^2 through the three values on axis i.
    const double b = (plus - minus) / (2.0 * g) / sigma[i];
    const double c = ((plus - center) + (minus - center)) / (2.0 * g * g) / (sigma[i] * sigma[i]);
    quad[i] = c;
    linear[i] = b - 2.0 * c * mu[i];
    log_scale += c * mu[i] * mu[i] - b * mu[i];
  }
  return DiagGaussian(log_scale, std::move(linear), std::move(quad));
}

VariationalReport fit_variational_quadrature(const DiagGaussian& cavity,
                                             const LogFactor& factor,
                                             const SchemeOptions& options) {
  require_proper_cavity(cavity, "approx_variational_quadrature");
  require_same_dim(cavity, factor);
  const Index d = cavity.dim();
  const Index n = 2 * d + 1;
  const QuadratureRule rule = build_rule(cavity, gamma_for(options, d));
  const StabilizedValues f = evaluate_on_rule(factor, rule);
  if (!f.log_values.allFinite()) {
    throw SchemeFailure("VQ: factor vanishes at a quadrature point");
  }

  // The 2d+1 basis functions span the same space as (1, theta_i, theta_i^2);
  // we parametrize by the values of log g at the rule points. Newton iterates
  // are invariant under this linear reparametrization, and the surrogate
  // Hessian becomes diag(w_j g_j), which factorizes without cancellation even
  // when the factor spans many orders of magnitude over the points.
  const Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(n, n);
  const Vector& w = rule.weights;
  const Vector& F = f.values;

  Vector alpha(n);
  if (options.vq_start == VqStart::kLogFit) {
    const Vector target = f.log_values.array() - f.shift;
    const Eigen::MatrixXd normal = basis.transpose() * w.asDiagonal() * basis;
    alpha = normal.ldlt().solve(basis.transpose() * w.cwiseProduct(target));
  } else {
    double mean_value = 0.0;
    double positive_weight = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (w[j] > 0.0) {
        mean_value += w[j] * F[j];
        positive_weight += w[j];
      }
    }
    mean_value /= positive_weight;
    alpha.setConstant(std::log(mean_value));
  }
  if (!alpha.allFinite()) throw SchemeFailure("VQ: non-finite starting point");

  VariationalReport report;
  SurrogateEvaluation eval = surrogate_value_grad_hess(alpha, basis, w, F);
  bool converged = false;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (int iter = 1; iter <= options.newton_max_iter && !converged; ++iter) {
    report.iterations = iter;
    llt.compute(eval.hessian);
    ++report.hessian_factorizations;
    if (llt.info() != Eigen::Success) {
      report.all_hessians_positive_definite = false;
      throw SchemeFailure("VQ: surrogate Hessian is not positive definite");
    }
    const Vector step = llt.solve(-eval.gradient);
    if (!step.allFinite()) throw SchemeFailure("VQ: non-finite Newton step");

    // Halve the step while it would overflow the exponentials or increase the
    // objective.
    const double slack = 1e-13 * (1.0 + std::abs(eval.value));
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k <= options.max_backtracks; ++k, t *= 0.5) {
      bool overflow = false;
      const double value = surrogate_value(alpha + t * step, basis, w, F, &overflow);
      if (!overflow && std::isfinite(value) && value <= eval.value + slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) throw SchemeFailure("VQ: step safeguarding exhausted");
    alpha += t * step;
    eval = surrogate_value_grad_hess(alpha, basis, w, F);
    converged = relative_change(t * step, alpha) <= options.newton_tol;
  }
  if (!converged) {
    throw SchemeFailure("VQ: Newton did not converge in " +
                        std::to_string(options.newton_max_iter) + " iterations");
  }

  const Eigen::MatrixXd raw = monomial_basis(rule);
  const Vector g = (basis * alpha).array().exp().matrix();
  report.gradient_inf_norm = (raw.transpose() * w.cwiseProduct(g - F)).lpNorm<Eigen::Infinity>();
  report.data_scale = (raw.transpose() * w.cwiseProduct(F)).lpNorm<Eigen::Infinity>();

  report.message = interpolation_to_natural(basis * alpha, rule, f.shift);
  if (!report.message.is_finite()) throw SchemeFailure("VQ: non-finite message");
  return report;
}

DiagGaussian approx_laplace(const DiagGaussian& cavity, const LogFactor& factor,
                            const SchemeOptions& options) {
  return fit_laplace(cavity, factor, options).message;
}

DiagGaussian approx_quick_laplace(const DiagGaussian& cavity, const LogFactor& factor,
                                  const SchemeOptions&) {
  require_proper_cavity(cavity, "approx_quick_laplace");
  require_same_dim(cavity, factor);
  return taylor_message(factor, cavity.mean());
}

DiagGaussian approx_gauss_quadrature(const DiagGaussian& cavity, const LogFactor& factor,
                                     const SchemeOptions& options) {
  require_proper_cavity(cavity, "approx_gauss_quadrature");
  require_same_dim(cavity, factor);
  const Index d = cavity.dim();
  const QuadratureRule rule = build_rule(cavity, gamma_for(options, d));
  const StabilizedValues f = evaluate_on_rule(factor, rule);
  const CenteredSums sums = centered_sums(rule, f.values);
  if (!(sums.s0 > 0.0) || !std::isfinite(sums.s0)) {
    throw SchemeFailure("GQ: estimated mass is not positive (m0 = " + std::to_string(sums.s0) +
                        ")");
  }
  Vector mean(d);
  Vector variance(d);
  for (Index i = 0; i < d; ++i) {
    const double z_mean = sums.s1[i] / sums.s0;
    const double z_var = sums.s2[i] / sums.s0 - z_mean * z_mean;
    if (!(z_var > 0.0)) {
      throw SchemeFailure("GQ: estimated variance is not positive at coordinate " +
                          std::to_string(i) + " (" + std::to_string(z_var) + " in cavity units)");
    }
    mean[i] = rule.center[i] + rule.scale[i] * z_mean;
    variance[i] = rule.scale[i] * rule.scale[i] * z_var;
  }
  const double log_mass = std::log(sums.s0) + f.shift + cavity.log_mass();
  const DiagGaussian matched = DiagGaussian::from_mean_variance(mean, variance, log_mass);
  DiagGaussian message = divide(matched, cavity);
  if (!message.is_finite()) throw SchemeFailure("GQ: non-finite message");
  return message;
}

DiagGaussian approx_variational_quadrature(const DiagGaussian& cavity, const LogFactor& factor,
                                           const SchemeOptions& options) {
  return fit_variational_quadrature(cavity, factor, options).message;
}

DiagGaussian approximate(const SchemeKind& scheme, const DiagGaussian& cavity,
                         const LogFactor& factor) {
  switch (scheme.type) {
    case SchemeType::kLaplace:
      return approx_laplace(cavity, factor, scheme.options);
    case SchemeType::kQuickLaplace:
      return approx_quick_laplace(cavity, factor, scheme.options);
    case SchemeType::kGaussQuadrature:
      return approx_gauss_quadrature(cavity, factor, scheme.options);
    case SchemeType::kVariationalQuadrature:
      return approx_variational_quadrature(cavity, factor, scheme.options);
  }
  throw UsageError("approximate: unknown scheme");
}

MomentVector gauss_quadrature_moments(const DiagGaussian& cavity, const LogFactor& factor,
                                      double gamma) {
  require_same_dim(cavity, factor);
  const QuadratureRule rule = build_rule(cavity, gamma);
  const StabilizedValues f = evaluate_on_rule(factor, rule);
  const double scale = std::exp(f.shift + cavity.log_mass());
  MomentVector m;
  m.m0 = 0.0;
  m.m1 = Vector::Zero(rule.dim());
  m.m2 = Vector::Zero(rule.dim());
  for (Index j = 0; j < rule.size(); ++j) {
    const double wf = rule.weights[j] * f.values[j];
    const auto theta = rule.points.row(j).transpose();
    m.m0 += wf;
    m.m1 += wf * theta;
    m.m2 += wf * theta.array().square().matrix();
  }
  m.m0 *= scale;
  m.m1 *= scale;
  m.m2 *= scale;
  return m;
}

double generalized_kl_diagnostic(const DiagGaussian& cavity, const LogFactor& factor,
                                 const DiagGaussian& message, const QuadratureRule& rule) {
  if (message.dim() != rule.dim()) throw UsageError("generalized_kl_diagnostic: dimension mismatch");
  Vector lf(rule.size());
  Vector lg(rule.size());
  double shift = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < rule.size(); ++j) {
    const Vector theta = rule.point(j);
    lf[j] = factor.log_value(theta);
    lg[j] = message.eval_log(theta);
    shift = std::max({shift, lf[j], lg[j]});
  }
  if (!std::isfinite(shift)) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (Index j = 0; j < rule.size(); ++j) {
    const double fj = std::exp(lf[j] - shift);
    const double gj = std::exp(lg[j] - shift);
    const double cross = fj > 0.0 ? fj * (lf[j] - lg[j]) : 0.0;
    sum += rule.weights[j] * (cross - fj + gj);
  }
  return std::exp(shift + cavity.log_mass()) * sum;
}

}  // namespace ffep
