#ifndef SFLAB_SCHEDULE_H
#define SFLAB_SCHEDULE_H

// Hyperparameter laws of the schedule-free iteration as total functions of
// the step index t >= 0.
//
// Indexing rule: c(s, t) is the averaging weight used when forming x_{t+1},
// i.e. x_{t+1} = (1 - c(s, t)) x_t + c(s, t) z_{t+1}. Code that needs the
// weight that produced x_t uses c(s, t - 1).

#include <cmath>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>

#include "sflab/errors.h"

namespace sflab {

// eta_t = eta.
struct ConstantStep {
  double eta = 1.0;
};

// eta_t = eta0 * (t + 1).
struct LinearGrowthStep {
  double eta0 = 1.0;
};

using StepLaw = std::variant<ConstantStep, LinearGrowthStep>;

// c_{t+1} = 1 / (t + 1).
struct Uniform {};

// c_{t+1} = (t + 1)^(-alpha).
struct PolyDecreasing {
  double alpha = 1.0;
};

// c_{t+1} = (t / (t + 1))^alpha.
struct PolyIncreasing {
  double alpha = 0.0;
};

using AvgLaw = std::variant<Uniform, PolyDecreasing, PolyIncreasing>;

// beta_t = beta.
struct ConstantBeta {
  double beta = 1.0;
};

struct Schedule {
  StepLaw step = ConstantStep{};
  AvgLaw avg = Uniform{};
  ConstantBeta beta_law{};
  // Smoothness constant the schedule was validated against.
  double L_bound = 1.0;
};

inline Schedule make_schedule(StepLaw step, AvgLaw avg, double beta,
                              double L_bound) {
  return Schedule{step, avg, ConstantBeta{beta}, L_bound};
}

template <typename Scalar = double>
Scalar eta(const Schedule& s, StepIndex t) {
  return std::visit(
      [t](const auto& law) -> Scalar {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, ConstantStep>) {
          return Scalar(law.eta);
        } else {
          return Scalar(law.eta0) * Scalar(t + 1);
        }
      },
      s.step);
}

template <typename Scalar = double>
Scalar c(const Schedule& s, StepIndex t) {
  using std::pow;
  return std::visit(
      [t](const auto& law) -> Scalar {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, Uniform>) {
          return Scalar(1) / Scalar(t + 1);
        } else if constexpr (std::is_same_v<Law, PolyDecreasing>) {
          return pow(Scalar(t + 1), -Scalar(law.alpha));
        } else {
          // pow(0, 0) == 1, so alpha = 0 gives the constant weight 1.
          return pow(Scalar(t) / Scalar(t + 1), Scalar(law.alpha));
        }
      },
      s.avg);
}

// 1 - c_{t+1}, evaluated without cancellation when the weight is close to 1.
template <typename Scalar = double>
Scalar one_minus_c(const Schedule& s, StepIndex t) {
  using std::expm1;
  using std::log;
  using std::log1p;
  return std::visit(
      [t](const auto& law) -> Scalar {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, Uniform>) {
          return Scalar(t) / Scalar(t + 1);
        } else if constexpr (std::is_same_v<Law, PolyDecreasing>) {
          return -expm1(-Scalar(law.alpha) * log(Scalar(t + 1)));
        } else {
          return -expm1(Scalar(law.alpha) * log1p(-Scalar(1) / Scalar(t + 1)));
        }
      },
      s.avg);
}

template <typename Scalar = double>
Scalar beta(const Schedule& s, StepIndex /*t*/) {
  return Scalar(s.beta_law.beta);
}

inline bool is_linear_growth(const Schedule& s) {
  return std::holds_alternative<LinearGrowthStep>(s.step);
}

inline bool is_constant_step(const Schedule& s) {
  return std::holds_alternative<ConstantStep>(s.step);
}

// Base stepsize: eta for ConstantStep, eta0 for LinearGrowthStep.
inline double base_eta(const Schedule& s) { return eta<double>(s, 0); }

// Power of the averaging law, with Uniform reported as decreasing alpha = 1.
inline double avg_alpha(const Schedule& s) {
  if (const auto* d = std::get_if<PolyDecreasing>(&s.avg)) return d->alpha;
  if (const auto* i = std::get_if<PolyIncreasing>(&s.avg)) return i->alpha;
  return 1.0;
}

inline bool is_uniform_averaging(const Schedule& s) {
  if (std::holds_alternative<Uniform>(s.avg)) return true;
  const auto* d = std::get_if<PolyDecreasing>(&s.avg);
  return d != nullptr && d->alpha == 1.0;
}

// Rejects parameters outside the admissible ranges. PolyIncreasing with
// alpha >= 1 has no descent guarantee and is only accepted when `unsafe`.
inline void validate(const Schedule& s, bool unsafe = false) {
  auto finite_positive = [](double v) { return std::isfinite(v) && v > 0; };
  if (!finite_positive(s.L_bound)) {
    throw ConfigError("schedule: L_bound must be positive and finite");
  }
  if (!finite_positive(base_eta(s))) {
    throw ConfigError("schedule: stepsize must be positive and finite");
  }
  const double b = s.beta_law.beta;
  if (!(b >= 0.0 && b <= 1.0)) {
    throw ConfigError("schedule: beta must lie in [0, 1]");
  }
  if (const auto* d = std::get_if<PolyDecreasing>(&s.avg)) {
    if (!(std::isfinite(d->alpha) && d->alpha >= 0.0)) {
      throw ConfigError("schedule: poly_dec alpha must be >= 0");
    }
  }
  if (const auto* i = std::get_if<PolyIncreasing>(&s.avg)) {
    if (!(std::isfinite(i->alpha) && i->alpha >= 0.0)) {
      throw ConfigError("schedule: poly_inc alpha must be >= 0");
    }
    if (i->alpha >= 1.0 && !unsafe) {
      throw ConfigError(
          "schedule: poly_inc requires alpha < 1 (no descent guarantee "
          "for alpha >= 1); pass --unsafe-schedule to override");
    }
  }
}

inline std::string describe(const Schedule& s) {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&os](const auto& law) {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, ConstantStep>) {
          os << "step=constant(" << law.eta << ")";
        } else {
          os << "step=linear(" << law.eta0 << ")";
        }
      },
      s.step);
  std::visit(
      [&os](const auto& law) {
        using Law = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<Law, Uniform>) {
          os << " avg=uniform";
        } else if constexpr (std::is_same_v<Law, PolyDecreasing>) {
          os << " avg=poly_dec(" << law.alpha << ")";
        } else {
          os << " avg=poly_inc(" << law.alpha << ")";
        }
      },
      s.avg);
  os << " beta=" << s.beta_law.beta << " L=" << s.L_bound;
  return os.str();
}

}  // namespace sflab

#endif  // SFLAB_SCHEDULE_H
