#pragma once

// Per-example classification losses as functions of the margin a = y * theta'x.
//
// The hinge and quasi 0-1 losses are piecewise linear. At a kink the first
// derivative is defined as the half sum of its left and right limits; the
// comparison with the kink location is exact (no tolerance band). Second
// derivatives of the piecewise-linear losses are identically zero.

#include <string>
#include <string_view>

namespace ffep {

enum class LossType { kLogistic, kHinge, kQuasi01 };

struct LossKind {
  LossType type = LossType::kLogistic;
  // Only used by kQuasi01.
  double epsilon = 0.1;

  static LossKind logistic() { return {LossType::kLogistic, 0.1}; }
  static LossKind hinge() { return {LossType::kHinge, 0.1}; }
  static LossKind quasi01(double epsilon = 0.1);
};

struct LossDerivatives {
  double first = 0.0;
  double second = 0.0;
};

double loss_value(const LossKind& kind, double margin);
LossDerivatives loss_derivatives(const LossKind& kind, double margin);

// "logistic" | "hinge" | "quasi01"; throws UsageError otherwise.
LossKind parse_loss(std::string_view name, double epsilon = 0.1);
std::string loss_name(const LossKind& kind);

}  // namespace ffep
