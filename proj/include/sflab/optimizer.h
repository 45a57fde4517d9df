#ifndef SFLAB_OPTIMIZER_H
#define SFLAB_OPTIMIZER_H

// The schedule-free three-sequence iteration
//
//   y_t     = (1 - beta_t) z_t + beta_t x_t
//   z_{t+1} = z_t - eta_t g(y_t)
//   x_{t+1} = (1 - c_{t+1}) x_t + c_{t+1} z_{t+1},      x_0 = z_0,
//
// and the momentum forms it is equivalent to when beta = 1:
//
//   SGD+M:  m_{t+1} = theta_t m_t + g(x_t),  x_{t+1} = x_t - lambda_t m_{t+1}
//   SHBM:   x_{t+1} = x_t - lambda_t g(x_t) + theta_t (x_t - x_{t-1}).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sflab/errors.h"
#include "sflab/problem.h"
#include "sflab/schedule.h"

namespace sflab {

template <typename Scalar = double>
struct SfState {
  StepIndex t = 0;
  Vector<Scalar> x;
  Vector<Scalar> z;
};

template <typename Scalar = double>
SfState<Scalar> initial_state(const Vector<Scalar>& x0) {
  return SfState<Scalar>{0, x0, x0};
}

// Full history of one run. States are indexed 0..T, oracle calls 0..T-1.
// Momentum-form runs leave `z` empty and record y_t = x_t.
template <typename Scalar = double>
struct Trajectory {
  Schedule schedule;
  StepIndex T = 0;
  std::vector<Vector<Scalar>> x;  // T + 1
  std::vector<Vector<Scalar>> z;  // T + 1 (SF runs only)
  std::vector<Vector<Scalar>> y;  // T
  std::vector<Vector<Scalar>> g;  // T, oracle output at y_t
  std::vector<Scalar> f_x;        // T + 1, f(x_t)
  std::vector<Scalar> grad_x_sq;  // T + 1, |grad f(x_t)|^2 (exact oracle)

  bool has_z() const { return !z.empty(); }
  Vector<Scalar> delta(StepIndex t) const { return z[t] - x[t]; }
  Scalar delta_norm_sq(StepIndex t) const {
    return has_z() ? (z[t] - x[t]).squaredNorm() : Scalar(0);
  }
};

struct RunOptions {
  // Skip the L eta_t c_{t+1} <= 1 precondition.
  bool unsafe = false;
};

namespace internal {

template <typename Scalar>
void require_finite(const Vector<Scalar>& v, const char* what, StepIndex t,
                    const std::string& context) {
  if (!v.allFinite()) {
    std::ostringstream os;
    os << "non-finite " << what << " at step " << t << " (" << context << ")";
    throw NumericalError(os.str());
  }
}

template <typename Scalar>
void require_finite(Scalar v, const char* what, StepIndex t,
                    const std::string& context) {
  using std::isfinite;
  if (!isfinite(v)) {
    std::ostringstream os;
    os << "non-finite " << what << " at step " << t << " (" << context << ")";
    throw NumericalError(os.str());
  }
}

inline void check_step_precondition(const Schedule& s, StepIndex t) {
  const double prod = s.L_bound * eta<double>(s, t) * c<double>(s, t);
  if (prod > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "L*eta_t*c_{t+1} = " << prod << " > 1 at t = " << t << " ("
       << describe(s) << "); pass unsafe to override";
    throw ConfigError(os.str());
  }
}

}  // namespace internal

// One SF step. `oracle(y, t)` returns the (possibly noisy) gradient at y.
// When `y_out` / `g_out` are given they receive y_t and the oracle output.
template <typename Scalar, typename Oracle>
SfState<Scalar> sf_step(const SfState<Scalar>& state, const Schedule& s,
                        Oracle&& oracle, const RunOptions& opts = {},
                        Vector<Scalar>* y_out = nullptr,
                        Vector<Scalar>* g_out = nullptr) {
  const StepIndex t = state.t;
  if (!opts.unsafe) internal::check_step_precondition(s, t);
  const Scalar b = beta<Scalar>(s, t);
  const Scalar e = eta<Scalar>(s, t);
  const Scalar ct = c<Scalar>(s, t);
  Vector<Scalar> y = (Scalar(1) - b) * state.z + b * state.x;
  Vector<Scalar> g = oracle(y, t);
  internal::require_finite(g, "gradient", t, describe(s));
  SfState<Scalar> next;
  next.t = t + 1;
  next.z = state.z - e * g;
  next.x = (Scalar(1) - ct) * state.x + ct * next.z;
  if (y_out) *y_out = std::move(y);
  if (g_out) *g_out = std::move(g);
  return next;
}

namespace internal {

template <typename Scalar>
void record_state(const Problem<Scalar>& p, Trajectory<Scalar>& tr,
                  const Vector<Scalar>& x, StepIndex t) {
  check_domain(p, x, t);
  require_finite(x, "iterate", t, p.name);
  tr.x.push_back(x);
  tr.f_x.push_back(value(p, x));
  tr.grad_x_sq.push_back(grad(p, x).squaredNorm());
}

inline void require_horizon(StepIndex T) {
  if (T < 1) throw ConfigError("run: horizon T must be >= 1");
}

}  // namespace internal

template <typename Scalar>
Trajectory<Scalar> run(const Problem<Scalar>& p, const NoiseModel& noise,
                       const Schedule& s, const Vector<Scalar>& x0,
                       StepIndex T, const RunOptions& opts = {}) {
  internal::require_horizon(T);
  check_dimension(p, x0);
  Trajectory<Scalar> tr;
  tr.schedule = s;
  tr.T = T;
  tr.x.reserve(T + 1);
  tr.z.reserve(T + 1);
  tr.y.reserve(T);
  tr.g.reserve(T);
  auto oracle = [&](const Vector<Scalar>& y, StepIndex t) {
    return noisy_grad(p, noise, y, t);
  };
  SfState<Scalar> state = initial_state(x0);
  internal::record_state(p, tr, state.x, 0);
  tr.z.push_back(state.z);
  for (StepIndex t = 0; t < T; ++t) {
    Vector<Scalar> y, g;
    state = sf_step(state, s, oracle, opts, &y, &g);
    tr.y.push_back(std::move(y));
    tr.g.push_back(std::move(g));
    internal::record_state(p, tr, state.x, t + 1);
    tr.z.push_back(state.z);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Momentum forms.

struct SgdmParams {
  std::vector<double> theta;   // momentum, theta_0 multiplies m_0 = 0
  std::vector<double> lambda;  // stepsize
};

struct ShbmParams {
  std::vector<double> lambda;  // stepsize
  std::vector<double> theta;   // momentum, theta_0 multiplies x_0 - x_{-1} = 0
};

namespace internal {

inline void require_momentum_in_range(double theta, StepIndex t,
                                      const char* form) {
  if (!(std::isfinite(theta) && theta >= 0.0 && theta <= 1.0)) {
    std::ostringstream os;
    os << form << " map infeasible: momentum theta_" << t << " = " << theta
       << " outside [0, 1]";
    throw MapInfeasible(os.str(), t);
  }
}

}  // namespace internal

// lambda_t = c_{t+1} eta_t and theta_t = eta_{t-1} (1 - c_t) / eta_t, which
// reduces to theta_t = 1 - c_t for a constant stepsize.
inline SgdmParams sgdm_params_from_spa(const Schedule& s, StepIndex T) {
  internal::require_horizon(T);
  SgdmParams out;
  out.theta.resize(T);
  out.lambda.resize(T);
  for (StepIndex t = 0; t < T; ++t) {
    out.lambda[t] = c<double>(s, t) * eta<double>(s, t);
    if (t == 0) {
      out.theta[t] = 0.0;
      continue;
    }
    const double theta =
        eta<double>(s, t - 1) * (1.0 - c<double>(s, t - 1)) / eta<double>(s, t);
    internal::require_momentum_in_range(theta, t, "SGD+M");
    out.theta[t] = theta;
  }
  return out;
}

// lambda_t = c_{t+1} eta_t and theta_t = c_{t+1} (1 - c_t) / c_t. Requires
// c_t > 0 for every t >= 1 in range.
inline ShbmParams shbm_params_from_spa(const Schedule& s, StepIndex T) {
  internal::require_horizon(T);
  ShbmParams out;
  out.theta.resize(T);
  out.lambda.resize(T);
  for (StepIndex t = 0; t < T; ++t) {
    out.lambda[t] = c<double>(s, t) * eta<double>(s, t);
    if (t == 0) {
      out.theta[t] = 0.0;
      continue;
    }
    const double ct = c<double>(s, t - 1);
    if (!(ct > 0.0)) {
      std::ostringstream os;
      os << "SHBM map infeasible: c_" << t << " = " << ct
         << " (the momentum coefficient divides by c_t)";
      throw MapInfeasible(os.str(), t);
    }
    const double theta = c<double>(s, t) * (1.0 - ct) / ct;
    internal::require_momentum_in_range(theta, t, "SHBM");
    out.theta[t] = theta;
  }
  return out;
}

template <typename Scalar>
Trajectory<Scalar> run_sgdm(const Problem<Scalar>& p, const NoiseModel& noise,
                            const SgdmParams& params,
                            const Vector<Scalar>& x0, StepIndex T) {
  internal::require_horizon(T);
  check_dimension(p, x0);
  if (static_cast<StepIndex>(params.theta.size()) < T ||
      static_cast<StepIndex>(params.lambda.size()) < T) {
    throw ConfigError("run_sgdm: parameter sequence shorter than horizon");
  }
  Trajectory<Scalar> tr;
  tr.T = T;
  Vector<Scalar> x = x0;
  Vector<Scalar> m = Vector<Scalar>::Zero(x0.size());
  internal::record_state(p, tr, x, 0);
  for (StepIndex t = 0; t < T; ++t) {
    Vector<Scalar> g = noisy_grad(p, noise, x, t);
    internal::require_finite(g, "gradient", t, "SGD+M");
    tr.y.push_back(x);
    m = Scalar(params.theta[t]) * m + g;
    x = x - Scalar(params.lambda[t]) * m;
    tr.g.push_back(std::move(g));
    internal::record_state(p, tr, x, t + 1);
  }
  return tr;
}

template <typename Scalar>
Trajectory<Scalar> run_shbm(const Problem<Scalar>& p, const NoiseModel& noise,
                            const ShbmParams& params,
                            const Vector<Scalar>& x0, StepIndex T) {
  internal::require_horizon(T);
  check_dimension(p, x0);
  if (static_cast<StepIndex>(params.theta.size()) < T ||
      static_cast<StepIndex>(params.lambda.size()) < T) {
    throw ConfigError("run_shbm: parameter sequence shorter than horizon");
  }
  Trajectory<Scalar> tr;
  tr.T = T;
  Vector<Scalar> x = x0;
  Vector<Scalar> x_prev = x0;
  internal::record_state(p, tr, x, 0);
  for (StepIndex t = 0; t < T; ++t) {
    Vector<Scalar> g = noisy_grad(p, noise, x, t);
    internal::require_finite(g, "gradient", t, "SHBM");
    tr.y.push_back(x);
    Vector<Scalar> next = x - Scalar(params.lambda[t]) * g +
                          Scalar(params.theta[t]) * (x - x_prev);
    x_prev = std::move(x);
    x = std::move(next);
    tr.g.push_back(std::move(g));
    internal::record_state(p, tr, x, t + 1);
  }
  return tr;
}

// max_t |a_t - b_t|_inf / max(1, |a_t|_inf) over the shared x-sequence.
template <typename Scalar>
Scalar max_relative_deviation(const Trajectory<Scalar>& a,
                              const Trajectory<Scalar>& b) {
  if (a.x.size() != b.x.size()) {
    throw ConfigError("trajectory comparison: horizons differ");
  }
  using std::max;
  Scalar worst(0);
  for (std::size_t t = 0; t < a.x.size(); ++t) {
    const Scalar scale = max(Scalar(1), a.x[t].template lpNorm<Eigen::Infinity>());
    worst = max(worst, (a.x[t] - b.x[t]).template lpNorm<Eigen::Infinity>() / scale);
  }
  return worst;
}

}  // namespace sflab

#endif  // SFLAB_OPTIMIZER_H
