#include "ffep/losses.hpp"

#include <cmath>

#include "ffep/errors.hpp"

namespace ffep {
namespace {

// 1 / (1 + e^{-a}) without overflow.
double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

}  // namespace

LossKind LossKind::quasi01(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw UsageError("quasi01 loss: epsilon must be positive");
  }
  return {LossType::kQuasi01, epsilon};
}

double loss_value(const LossKind& kind, double a) {
  switch (kind.type) {
    case LossType::kLogistic:
      // log(1 + e^{-a})
      if (a >= 0.0) return std::log1p(std::exp(-a));
      return -a + std::log1p(std::exp(a));
    case LossType::kHinge:
      return a < 1.0 ? 1.0 - a : 0.0;
    case LossType::kQuasi01: {
      const double eps = kind.epsilon;
      if (a < 0.0) return 1.0 - eps * a;
      if (a < eps) return 1.0 - a / eps;
      return 0.0;
    }
  }
  return 0.0;
}

LossDerivatives loss_derivatives(const LossKind& kind, double a) {
  switch (kind.type) {
    case LossType::kLogistic: {
      const double s_pos = sigmoid(a);
      const double s_neg = sigmoid(-a);
      return {-s_neg, s_pos * s_neg};
    }
    case LossType::kHinge:
      if (a < 1.0) return {-1.0, 0.0};
      if (a > 1.0) return {0.0, 0.0};
      return {-0.5, 0.0};
    case LossType::kQuasi01: {
      const double eps = kind.epsilon;
      if (a < 0.0) return {-eps, 0.0};
      if (a == 0.0) return {-0.5 * (eps + 1.0 / eps), 0.0};
      if (a < eps) return {-1.0 / eps, 0.0};
      if (a == eps) return {-0.5 / eps, 0.0};
      return {0.0, 0.0};
    }
  }
  return {};
}

LossKind parse_loss(std::string_view name, double epsilon) {
  if (name == "logistic") return LossKind::logistic();
  if (name == "hinge") return LossKind::hinge();
  if (name == "quasi01") return LossKind::quasi01(epsilon);
  throw UsageError("unknown loss '" + std::string(name) + "' (expected logistic|hinge|quasi01)");
}

std::string loss_name(const LossKind& kind) {
  switch (kind.type) {
    case LossType::kLogistic:
      return "logistic";
    case LossType::kHinge:
      return "hinge";
    case LossType::kQuasi01:
      return "quasi01";
  }
  return "unknown";
}

}  // namespace ffep
