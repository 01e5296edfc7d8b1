#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <utility>

#include "ffep/bench.hpp"
#include "ffep/errors.hpp"
#include "ffep/simd.hpp"

namespace ffep {

double total_cost(const Vector& theta, const Dataset& dataset, const LossKind& loss,
                  const std::optional<PriorFactor>& prior) {
  if (theta.size() != dataset.dim()) throw UsageError("total_cost: dimension mismatch");
  const std::size_t n = dataset.n_examples();
  const std::size_t d = static_cast<std::size_t>(dataset.dim());
  std::vector<double> margins(n);
  simd::active().gemv_rows(dataset.features().data(), n, d, theta.data(), d, margins.data());
  double cost = 0.0;
  for (std::size_t k = 0; k < n; ++k) cost += loss_value(loss, dataset.label(k) * margins[k]);
  if (prior) cost += prior_penalty(*prior, theta);
  return cost;
}

ReferenceResult reference_newton_logistic(const Dataset& dataset, const PriorFactor& prior,
                                          double grad_tol, int max_iter) {
  const Index d = dataset.dim();
  const LossKind loss = LossKind::logistic();
  const Vector prior_mean = prior.mean.size() == 0 ? Vector::Zero(d) : prior.mean;
  auto objective = [&](const Vector& theta) { return total_cost(theta, dataset, loss, prior); };

  ReferenceResult out;
  out.theta = Vector::Zero(d);
  double value = objective(out.theta);
  for (int iter = 0; iter <= max_iter; ++iter) {
    Vector grad = (out.theta - prior_mean) / prior.variance;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Identity(d, d) / prior.variance;
    for (std::size_t k = 0; k < dataset.n_examples(); ++k) {
      const auto x = Eigen::Map<const Vector>(dataset.row(k).data(), d);
      const double y = dataset.label(k);
      const LossDerivatives der = loss_derivatives(loss, y * x.dot(out.theta));
      grad += der.first * y * x;
      hess.noalias() += der.second * x * x.transpose();
    }
    out.iterations = iter;
    if (grad.lpNorm<Eigen::Infinity>() <= grad_tol) {
      out.converged = true;
      break;
    }
    if (iter == max_iter) break;
    const Vector step = hess.llt().solve(-grad);
    double t = 1.0;
    Vector candidate = out.theta + step;
    double candidate_value = objective(candidate);
    for (int k = 0; k < 60 && !(candidate_value <= value); ++k) {
      t *= 0.5;
      candidate = out.theta + t * step;
      candidate_value = objective(candidate);
    }
    if (!(candidate_value <= value)) break;  // no further progress possible
    out.theta = std::move(candidate);
    value = candidate_value;
  }
  if (!out.converged) {
    throw SolverError("reference Newton did not reach gradient tolerance in " +
                      std::to_string(max_iter) + " iterations");
  }
  out.cost = total_cost(out.theta, dataset, loss);
  out.objective = out.cost + prior_penalty(prior, out.theta);
  return out;
}

namespace {

constexpr double kGolden = 1.618034;
constexpr double kGoldenSection = 0.3819660;

// Finds a < b < c (or reversed) with f(b) <= f(a), f(b) <= f(c).
struct Bracket {
  double a, b, c;
  double fa, fb, fc;
};

Bracket bracket_minimum(const std::function<double(double)>& phi, double fa) {
  Bracket br{0.0, 1.0, 0.0, fa, phi(1.0), 0.0};
  if (br.fb > br.fa) {
    std::swap(br.a, br.b);
    std::swap(br.fa, br.fb);
  }
  br.c = br.b + kGolden * (br.b - br.a);
  br.fc = phi(br.c);
  for (int iter = 0; iter < 200 && br.fb > br.fc; ++iter) {
    const double r = (br.b - br.a) * (br.fb - br.fc);
    const double q = (br.b - br.c) * (br.fb - br.fa);
    const double denom = 2.0 * std::copysign(std::max(std::abs(q - r), 1e-20), q - r);
    double u = br.b - ((br.b - br.c) * q - (br.b - br.a) * r) / denom;
    const double ulim = br.b + 100.0 * (br.c - br.b);
    double fu = 0.0;
    if ((br.b - u) * (u - br.c) > 0.0) {
      fu = phi(u);
      if (fu < br.fc) {
        br = {br.b, u, br.c, br.fb, fu, br.fc};
        return br;
      }
      if (fu > br.fb) {
        br.c = u;
        br.fc = fu;
        return br;
      }
      u = br.c + kGolden * (br.c - br.b);
      fu = phi(u);
    } else if ((br.c - u) * (u - ulim) > 0.0) {
      fu = phi(u);
      if (fu < br.fc) {
        br.b = br.c;
        br.fb = br.fc;
        br.c = u;
        br.fc = fu;
        u = br.c + kGolden * (br.c - br.b);
        fu = phi(u);
      }
    } else if ((u - ulim) * (ulim - br.c) >= 0.0) {
      u = ulim;
      fu = phi(u);
    } else {
      u = br.c + kGolden * (br.c - br.b);
      fu = phi(u);
    }
    br = {br.b, br.c, u, br.fb, br.fc, fu};
  }
  return br;
}

// Brent's parabolic-interpolation / golden-section search inside a bracket.
double brent(const std::function<double(double)>& phi, const Bracket& br, double tol,
             double& fmin) {
  constexpr double kTiny = 1e-12;
  double a = std::min(br.a, br.c);
  double b = std::max(br.a, br.c);
  double x = br.b, w = br.b, v = br.b;
  double fx = br.fb, fw = br.fb, fv = br.fb;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + kTiny;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (!(std::abs(p) >= std::abs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = kGoldenSection * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
    const double fu = phi(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  fmin = fx;
  return x;
}

}  // namespace

double line_minimize(const Objective& f, const Vector& x, const Vector& direction,
                     double& value_inout, double tol) {
  const auto phi = [&](double t) { return f(x + t * direction); };
  const Bracket br = bracket_minimum(phi, value_inout);
  double fmin = 0.0;
  const double t = brent(phi, br, tol, fmin);
  if (fmin <= value_inout) {
    value_inout = fmin;
    return t;
  }
  return 0.0;
}

PowellResult powell_minimize(const Objective& f, const Vector& x0, const PowellOptions& options) {
  const Index n = x0.size();
  const int cap = options.max_line_searches > 0 ? options.max_line_searches
                                                : 100 * static_cast<int>(n);
  PowellResult out;
  out.x = x0;
  out.value = f(out.x);
  Eigen::MatrixXd directions = Eigen::MatrixXd::Identity(n, n);

  while (out.line_searches < cap) {
    const Vector start = out.x;
    const double f_start = out.value;
    double biggest = 0.0;
    Index biggest_dir = 0;
    for (Index i = 0; i < n && out.line_searches < cap; ++i) {
      const double before = out.value;
      const double t = line_minimize(f, out.x, directions.col(i), out.value);
      out.x += t * directions.col(i);
      ++out.line_searches;
      if (before - out.value > biggest) {
        biggest = before - out.value;
        biggest_dir = i;
      }
    }
    if (2.0 * (f_start - out.value) <=
        options.ftol * (std::abs(f_start) + std::abs(out.value)) + 1e-25) {
      out.converged = true;
      break;
    }
    if (out.line_searches >= cap) break;

    const Vector displacement = out.x - start;
    const double f_extrapolated = f(out.x + displacement);
    if (f_extrapolated < f_start) {
      const double a = f_start - out.value - biggest;
      const double b = f_start - f_extrapolated;
      const double test = 2.0 * (f_start - 2.0 * out.value + f_extrapolated) * a * a - biggest * b * b;
      if (test < 0.0) {
        const double t = line_minimize(f, out.x, displacement, out.value);
        out.x += t * displacement;
        ++out.line_searches;
        directions.col(biggest_dir) = directions.col(n - 1);
        directions.col(n - 1) = displacement;
      }
    }
  }
  return out;
}

ReferenceResult reference_powell(const Dataset& dataset, const LossKind& loss,
                                 const PriorFactor& prior, const Vector& theta_init,
                                 const PowellOptions& options) {
  if (theta_init.size() != dataset.dim()) throw UsageError("reference_powell: bad initial point");
  const Objective objective = [&](const Vector& theta) {
    return total_cost(theta, dataset, loss, prior);
  };
  const PowellResult p = powell_minimize(objective, theta_init, options);
  ReferenceResult out;
  out.theta = p.x;
  out.iterations = p.line_searches;
  out.converged = p.converged;
  out.cost = total_cost(out.theta, dataset, loss);
  out.objective = p.value;
  return out;
}

}  // namespace ffep
