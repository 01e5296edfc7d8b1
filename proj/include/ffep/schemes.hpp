#pragma once

// Factor approximation back-ends. Given a proper cavity c and a factor f, each
// scheme returns an unnormalized diagonal Gaussian message g standing in for f:
//
//   la   Laplace: second-order Taylor expansion of log f at the maximizer of c*f
//   qla  quick Laplace: the same expansion taken at the cavity mean
//   gq   moments of c*f from the 2d+1 point precision-3 rule, matched, then /c
//   vq   variational quadrature: minimizes the quadrature-discretized
//        generalized KL objective over g by Newton's method with Cholesky solves
//
// Failures are reported as SchemeFailure; the EP engine decides what to do.

#include <Eigen/Core>
#include <optional>
#include <string>
#include <string_view>

#include "ffep/factors.hpp"
#include "ffep/gaussian.hpp"
#include "ffep/ingest.hpp"

namespace ffep {

enum class SchemeType { kLaplace, kQuickLaplace, kGaussQuadrature, kVariationalQuadrature };

// Starting point of the variational-quadrature Newton iterations.
enum class VqStart {
  kLogFit,    // weighted least-squares fit of the log factor values
  kConstant,  // best constant fit: log of the weighted mean factor value
};

struct SchemeOptions {
  double newton_tol = 1e-5;  // on relative parameter change
  int newton_max_iter = 50;
  int max_backtracks = 30;
  std::optional<double> gamma;  // default sqrt(d + 0.5)
  VqStart vq_start = VqStart::kLogFit;
};

struct SchemeKind {
  SchemeType type = SchemeType::kVariationalQuadrature;
  SchemeOptions options;
};

// "la" | "qla" | "gq" | "vq"
SchemeType parse_scheme(std::string_view name);
std::string scheme_name(SchemeType type);
void validate(const SchemeOptions& options);

double default_gamma(Index dim);

// Points are ordered: center, then center + gamma*sigma_j*e_j for j = 1..d,
// then center - gamma*sigma_j*e_j. Weights are 1 - d/gamma^2 for the center
// and 1/(2 gamma^2) for the others.
struct QuadratureRule {
  Vector center;
  Vector scale;  // cavity standard deviations
  double gamma = 0.0;
  RowMatrix points;
  Vector weights;

  Index dim() const { return center.size(); }
  Index size() const { return points.rows(); }
  Vector point(Index j) const { return points.row(j).transpose(); }
};

QuadratureRule build_rule(const DiagGaussian& cavity, double gamma);

// Rows are phi(theta_j) = (1, theta_j, theta_j^2) for each rule point.
Eigen::MatrixXd monomial_basis(const QuadratureRule& rule);
// The same basis in standardized coordinates z = (theta - center) / scale.
// It depends only on d and gamma.
Eigen::MatrixXd standardized_basis(Index dim, double gamma);

// Coefficients in the interpolation basis of the rule (one basis function per
// point, equal to 1 there and 0 at the others) re-expressed as natural
// parameters in theta. `shift` is added to the constant term.
DiagGaussian interpolation_to_natural(const Vector& coefficients, const QuadratureRule& rule,
                                      double shift = 0.0);

struct SurrogateEvaluation {
  double value = 0.0;
  Vector gradient;
  Eigen::MatrixXd hessian;
  // Some alpha' phi_j exceeded the exponent guard.
  bool overflow = false;
};

inline constexpr double kExponentGuard = 500.0;

// L(alpha) = -alpha' sum_j w_j F_j phi_j + sum_j w_j exp(alpha' phi_j),
// its gradient sum_j w_j (exp(alpha' phi_j) - F_j) phi_j and Hessian
// sum_j w_j exp(alpha' phi_j) phi_j phi_j'. Rows of `basis` are the phi_j.
SurrogateEvaluation surrogate_value_grad_hess(const Vector& alpha, const Eigen::MatrixXd& basis,
                                              const Vector& weights, const Vector& factor_values);
SurrogateEvaluation surrogate_value_grad_hess(const Vector& alpha, const QuadratureRule& rule,
                                              const Vector& factor_values);
double surrogate_value(const Vector& alpha, const Eigen::MatrixXd& basis, const Vector& weights,
                       const Vector& factor_values, bool* overflow = nullptr);

// Log factor values at the rule points and their maximum. Throws
// SchemeFailure when the factor is zero or not finite at every point.
struct StabilizedValues {
  Vector log_values;
  double shift = 0.0;  // max_j log f(theta_j)
  Vector values;       // exp(log f(theta_j) - shift)
};
StabilizedValues evaluate_on_rule(const LogFactor& factor, const QuadratureRule& rule);

struct LaplaceReport {
  DiagGaussian message;
  Vector mode;  // maximizer of c*f
  int iterations = 0;
};

struct VariationalReport {
  DiagGaussian message;
  int iterations = 0;
  int hessian_factorizations = 0;
  bool all_hessians_positive_definite = true;
  // Optimality certificate in the natural parameters of the monomial basis,
  // with F the max-shifted factor values: |grad L(alpha*)|_inf and
  // |sum_j w_j F_j phi(theta_j)|_inf.
  double gradient_inf_norm = 0.0;
  double data_scale = 0.0;
};

// Taylor expansion of log f at theta, as a message.
DiagGaussian taylor_message(const LogFactor& factor, const Vector& theta);

LaplaceReport fit_laplace(const DiagGaussian& cavity, const LogFactor& factor,
                          const SchemeOptions& options = {});
VariationalReport fit_variational_quadrature(const DiagGaussian& cavity, const LogFactor& factor,
                                             const SchemeOptions& options = {});

DiagGaussian approx_laplace(const DiagGaussian& cavity, const LogFactor& factor,
                            const SchemeOptions& options = {});
DiagGaussian approx_quick_laplace(const DiagGaussian& cavity, const LogFactor& factor,
                                  const SchemeOptions& options = {});
DiagGaussian approx_gauss_quadrature(const DiagGaussian& cavity, const LogFactor& factor,
                                     const SchemeOptions& options = {});
DiagGaussian approx_variational_quadrature(const DiagGaussian& cavity, const LogFactor& factor,
                                           const SchemeOptions& options = {});

DiagGaussian approximate(const SchemeKind& scheme, const DiagGaussian& cavity,
                         const LogFactor& factor);

// Quadrature estimate of the raw moments of c*f (absolute mass included).
MomentVector gauss_quadrature_moments(const DiagGaussian& cavity, const LogFactor& factor,
                                      double gamma);

// Quadrature estimate of D(cf || cg) on the rule's points.
double generalized_kl_diagnostic(const DiagGaussian& cavity, const LogFactor& factor,
                                 const DiagGaussian& message, const QuadratureRule& rule);

}  // namespace ffep
