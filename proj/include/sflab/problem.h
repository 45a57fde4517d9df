#ifndef SFLAB_PROBLEM_H
#define SFLAB_PROBLEM_H

// L-smooth, lower-bounded test objectives with exact gradients and an
// optional additive-noise gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sflab/errors.h"

namespace sflab {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct Problem {
  std::string name;
  Eigen::Index dim = 1;
  // Gradient Lipschitz constant, certified on `box` when one is set.
  double L = 1.0;
  double f_star = 0.0;
  std::function<Scalar(const Vector<Scalar>&)> objective;
  std::function<Vector<Scalar>(const Vector<Scalar>&)> gradient;
  // Half-width r of the box [-r, r]^d on which L is certified; unset means
  // L holds globally.
  std::optional<double> box;
  // A nontrivial starting point (not a stationary point of the objective).
  Vector<Scalar> x0_hint;
};

// Iterates may exit the certified box by this relative margin before a run
// aborts; L is certified on the enlarged box.
inline constexpr double kBoxTolerance = 0.10;

template <typename Scalar>
void check_dimension(const Problem<Scalar>& p, const Vector<Scalar>& x) {
  if (x.size() != p.dim) {
    std::ostringstream os;
    os << p.name << ": point has dimension " << x.size() << ", expected "
       << p.dim;
    throw ConfigError(os.str());
  }
}

template <typename Scalar>
Scalar value(const Problem<Scalar>& p, const Vector<Scalar>& x) {
  check_dimension(p, x);
  return p.objective(x);
}

template <typename Scalar>
Vector<Scalar> grad(const Problem<Scalar>& p, const Vector<Scalar>& x) {
  check_dimension(p, x);
  return p.gradient(x);
}

// Throws DomainEscape if x lies outside the certified box enlarged by
// kBoxTolerance.
template <typename Scalar>
void check_domain(const Problem<Scalar>& p, const Vector<Scalar>& x,
                  std::int64_t t) {
  if (!p.box) return;
  const double limit = *p.box * (1.0 + kBoxTolerance);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    using std::abs;
    if (!(abs(x[i]) <= Scalar(limit))) {
      std::ostringstream os;
      os << p.name << ": iterate left the certified box [-" << *p.box << ", "
         << *p.box << "]^" << p.dim << " by more than "
         << kBoxTolerance * 100 << "% at step " << t << " (coordinate " << i
         << ")";
      throw DomainEscape(os.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Builtin problems.

// f(x) = (L/2)|x|^2.
template <typename Scalar = double>
Problem<Scalar> quad(Eigen::Index dim, double L) {
  Problem<Scalar> p;
  p.name = "quad";
  p.dim = dim;
  p.L = L;
  p.f_star = 0.0;
  const Scalar l(L);
  p.objective = [l](const Vector<Scalar>& x) {
    return l / Scalar(2) * x.squaredNorm();
  };
  p.gradient = [l](const Vector<Scalar>& x) -> Vector<Scalar> {
    return l * x;
  };
  p.x0_hint = Vector<Scalar>::Ones(dim);
  return p;
}

namespace internal {

inline constexpr double kRosenbrockA = -1.0;
inline constexpr double kRosenbrockB = 100.0;
inline constexpr double kRosenbrockBox = 2.0;

// Largest spectral norm of the unscaled Rosenbrock Hessian over a dense grid
// of the box enlarged by kBoxTolerance (the Hessian does not depend on a).
inline double rosenbrock_hessian_bound() {
  static const double bound = [] {
    const double r = kRosenbrockBox * (1.0 + kBoxTolerance);
    const int n = 881;
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = -r + 2.0 * r * i / (n - 1);
      for (int j = 0; j < n; ++j) {
        const double v = -r + 2.0 * r * j / (n - 1);
        const double h11 = 2.0 - 4.0 * kRosenbrockB * v +
                           12.0 * kRosenbrockB * u * u;
        const double h12 = -4.0 * kRosenbrockB * u;
        const double h22 = 2.0 * kRosenbrockB;
        const double mean = 0.5 * (h11 + h22);
        const double rad = std::hypot(0.5 * (h11 - h22), h12);
        best = std::max(best, std::max(std::abs(mean + rad),
                                       std::abs(mean - rad)));
      }
    }
    return best;
  }();
  return bound;
}

}  // namespace internal

// s * ((a - u)^2 + b (v - u^2)^2) with a = -1, b = 100, minimizer (-1, 1),
// and s chosen so the Hessian norm over the certified box is at most L.
template <typename Scalar = double>
Problem<Scalar> rosenbrock2d(double L) {
  constexpr double kMargin = 1.001;
  const double s_val = L / (internal::rosenbrock_hessian_bound() * kMargin);
  Problem<Scalar> p;
  p.name = "rosenbrock2d";
  p.dim = 2;
  p.L = L;
  p.f_star = 0.0;
  p.box = internal::kRosenbrockBox;
  const Scalar s(s_val), a(internal::kRosenbrockA), b(internal::kRosenbrockB);
  p.objective = [s, a, b](const Vector<Scalar>& x) {
    const Scalar r1 = a - x[0];
    const Scalar r2 = x[1] - x[0] * x[0];
    return s * (r1 * r1 + b * r2 * r2);
  };
  p.gradient = [s, a, b](const Vector<Scalar>& x) -> Vector<Scalar> {
    const Scalar r2 = x[1] - x[0] * x[0];
    Vector<Scalar> g(2);
    g[0] = s * (Scalar(-2) * (a - x[0]) - Scalar(4) * b * x[0] * r2);
    g[1] = s * (Scalar(2) * b * r2);
    return g;
  };
  p.x0_hint = Vector<Scalar>::Ones(2);
  return p;
}

namespace internal {

// min_u u^2/2 + cos(u), by a 1-D grid scan followed by Newton refinement on
// the derivative u - sin(u).
inline double cos_well_minimum() {
  static const double fmin = [] {
    auto h = [](double u) { return 0.5 * u * u + std::cos(u); };
    double best_u = -10.0;
    for (int i = 0; i <= 200000; ++i) {
      const double u = -10.0 + 20.0 * i / 200000.0;
      if (h(u) < h(best_u)) best_u = u;
    }
    double u = best_u;
    for (int k = 0; k < 200; ++k) {
      const double d1 = u - std::sin(u);
      const double d2 = 1.0 - std::cos(u);
      if (d2 <= 0.0 || d1 == 0.0) break;
      const double next = u - d1 / d2;
      if (!(h(next) <= h(u))) break;
      u = next;
    }
    return std::min(h(u), h(best_u));
  }();
  return fmin;
}

}  // namespace internal

// f(x) = sum_i x_i^2/2 + cos(x_i); |f''| = |1 - cos| <= 2 so L = 2 globally.
template <typename Scalar = double>
Problem<Scalar> nonconvex_cos(Eigen::Index dim) {
  Problem<Scalar> p;
  p.name = "nonconvex_cos";
  p.dim = dim;
  p.L = 2.0;
  p.f_star = static_cast<double>(dim) * internal::cos_well_minimum();
  p.objective = [](const Vector<Scalar>& x) {
    using std::cos;
    Scalar f(0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      f += x[i] * x[i] / Scalar(2) + cos(x[i]);
    }
    return f;
  };
  p.gradient = [](const Vector<Scalar>& x) -> Vector<Scalar> {
    using std::sin;
    Vector<Scalar> g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = x[i] - sin(x[i]);
    return g;
  };
  p.x0_hint = Vector<Scalar>::Ones(dim);
  return p;
}

// f(x) = sum_i x_i^4/4 - x_i^2/2 on the box [-2, 2]^d. f'' = 3u^2 - 1, so on
// the tolerance-enlarged box L = 3 (2.2)^2 - 1.
template <typename Scalar = double>
Problem<Scalar> quartic_well(Eigen::Index dim) {
  constexpr double kBox = 2.0;
  const double r = kBox * (1.0 + kBoxTolerance);
  Problem<Scalar> p;
  p.name = "quartic_well";
  p.dim = dim;
  p.L = 3.0 * r * r - 1.0;
  p.f_star = -0.25 * static_cast<double>(dim);
  p.box = kBox;
  p.objective = [](const Vector<Scalar>& x) {
    Scalar f(0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const Scalar u2 = x[i] * x[i];
      f += u2 * u2 / Scalar(4) - u2 / Scalar(2);
    }
    return f;
  };
  p.gradient = [](const Vector<Scalar>& x) -> Vector<Scalar> {
    Vector<Scalar> g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      g[i] = x[i] * x[i] * x[i] - x[i];
    }
    return g;
  };
  // The all-ones vector is a minimizer; start elsewhere.
  p.x0_hint = Vector<Scalar>(dim);
  const double pattern[] = {0.5, 1.5, -1.7};
  for (Eigen::Index i = 0; i < dim; ++i) p.x0_hint[i] = Scalar(pattern[i % 3]);
  return p;
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"quad", "rosenbrock2d",
                                                 "nonconvex_cos",
                                                 "quartic_well"};
  return names;
}

inline constexpr Eigen::Index kDefaultDim = 3;

// Looks up a builtin problem. `dim` is ignored by rosenbrock2d; `L` is used
// by quad and rosenbrock2d (the others have fixed certified constants).
template <typename Scalar = double>
Problem<Scalar> make_builtin(const std::string& name,
                             Eigen::Index dim = kDefaultDim, double L = 1.0) {
  if (dim < 1) throw ConfigError("problem: dim must be >= 1");
  if (!(std::isfinite(L) && L > 0)) throw ConfigError("problem: L must be > 0");
  if (name == "quad") return quad<Scalar>(dim, L);
  if (name == "rosenbrock2d") return rosenbrock2d<Scalar>(L);
  if (name == "nonconvex_cos") return nonconvex_cos<Scalar>(dim);
  if (name == "quartic_well") return quartic_well<Scalar>(dim);
  throw ConfigError("problem: unknown builtin '" + name + "'");
}

template <typename Scalar = double>
std::vector<Problem<Scalar>> builtin_suite(Eigen::Index dim = kDefaultDim) {
  std::vector<Problem<Scalar>> out;
  for (const auto& name : builtin_names()) {
    out.push_back(make_builtin<Scalar>(name, dim, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise.

enum class NoiseKind { None, IsotropicGaussian };

struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
};

inline NoiseModel no_noise() { return NoiseModel{}; }

inline NoiseModel gaussian_noise(double sigma2, std::uint64_t seed) {
  if (!(std::isfinite(sigma2) && sigma2 >= 0)) {
    throw ConfigError("noise: sigma2 must be >= 0");
  }
  if (sigma2 == 0.0) return NoiseModel{NoiseKind::None, 0.0, seed};
  return NoiseModel{NoiseKind::IsotropicGaussian, sigma2, seed};
}

namespace internal {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace internal

// The noise vector xi_t for step t: zero mean, per-coordinate variance
// sigma2 / dim. Depends only on (seed, t, dim), so any consumer of step t
// sees the same draw.
template <typename Scalar = double>
Vector<Scalar> noise_draw(const NoiseModel& noise, Eigen::Index dim,
                          std::int64_t t) {
  Vector<Scalar> xi = Vector<Scalar>::Zero(dim);
  if (noise.kind == NoiseKind::None || noise.sigma2 == 0.0) return xi;
  std::mt19937_64 rng(internal::splitmix64(
      internal::splitmix64(noise.seed) ^ static_cast<std::uint64_t>(t)));
  std::normal_distribution<double> normal(
      0.0, std::sqrt(noise.sigma2 / static_cast<double>(dim)));
  for (Eigen::Index i = 0; i < dim; ++i) xi[i] = Scalar(normal(rng));
  return xi;
}

template <typename Scalar>
Vector<Scalar> noisy_grad(const Problem<Scalar>& p, const NoiseModel& noise,
                          const Vector<Scalar>& x, std::int64_t t) {
  Vector<Scalar> g = grad(p, x);
  if (noise.kind == NoiseKind::None || noise.sigma2 == 0.0) return g;
  g += noise_draw<Scalar>(noise, p.dim, t);
  return g;
}

}  // namespace sflab

#endif  // SFLAB_PROBLEM_H
