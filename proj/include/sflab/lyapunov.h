#ifndef SFLAB_LYAPUNOV_H
#define SFLAB_LYAPUNOV_H

// Potential V_t = f(x_t) - f* + A_t |delta_t|^2 with delta_t = z_t - x_t,
//
//   A_t = c_{t+1} (1 - L eta_t c_{t+1}) / (2 eta_t (1 - c_{t+1})^2),
//
// its per-step descent residuals, and the closed-form rate bounds that
// telescoping the descent inequality yields.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sflab/errors.h"
#include "sflab/optimizer.h"
#include "sflab/problem.h"
#include "sflab/schedule.h"

namespace sflab {

template <typename Scalar = double>
Scalar A_coeff(const Schedule& s, StepIndex t, double L) {
  const Scalar ct = c<Scalar>(s, t);
  const Scalar e = eta<Scalar>(s, t);
  if (!(ct < Scalar(1))) {
    std::ostringstream os;
    os << "A_t undefined at t = " << t << ": c_{t+1} = 1";
    throw UndefinedCoefficient(os.str());
  }
  const Scalar one_minus = one_minus_c<Scalar>(s, t);
  return ct * (Scalar(1) - Scalar(L) * e * ct) /
         (Scalar(2) * e * one_minus * one_minus);
}

// Coefficient of |delta_t|^2 in the one-step descent inequality
//   V_{t+1} - V_t + (c_{t+1} eta_t / 4) |grad f(x_t)|^2
//       <= delta_coeff_t |delta_t|^2 + (c_{t+1} eta_t / 2) sigma^2.
template <typename Scalar = double>
Scalar delta_coeff(const Schedule& s, StepIndex t, double L, double beta_v) {
  if (t < 1) {
    throw UndefinedCoefficient("delta coefficient needs t >= 1 (uses c_t)");
  }
  const Scalar c_next = c<Scalar>(s, t);   // c_{t+1}
  const Scalar c_cur = c<Scalar>(s, t - 1);  // c_t
  if (!(c_cur < Scalar(1))) {
    std::ostringstream os;
    os << "delta coefficient undefined at t = " << t << ": c_t = 1";
    throw UndefinedCoefficient(os.str());
  }
  const Scalar e = eta<Scalar>(s, t);
  const Scalar l(L);
  const Scalar one_minus_beta = Scalar(1) - Scalar(beta_v);
  const Scalar pen = one_minus_beta * one_minus_beta;
  const Scalar om = one_minus_c<Scalar>(s, t - 1);
  return c_next / (Scalar(2) * e) -
         c_cur * (Scalar(1) - l * e * c_cur) /
             (Scalar(2) * e * om * om) -
         Scalar(3) * l * l * l * c_next * c_next * e * e / Scalar(2) * pen +
         Scalar(5) * l * l * c_next * e / Scalar(2) * pen;
}

// Per-step growth coefficient for the linearly growing stepsize analysis:
//   E(t) = (L (t^2 + t + 1) - (3t - 1)) / (2 (t+1)^2 (t-1)^2),   t >= 2.
template <typename Scalar = double>
Scalar E_coeff(StepIndex t, double L) {
  if (t < 2) throw UndefinedCoefficient("E(t) needs t >= 2");
  const Scalar tt(t);
  const Scalar num = Scalar(L) * (tt * tt + tt + Scalar(1)) -
                     (Scalar(3) * tt - Scalar(1));
  const Scalar a = tt + Scalar(1), b = tt - Scalar(1);
  return num / (Scalar(2) * a * a * b * b);
}

template <typename Scalar = double>
struct PotentialRecord {
  StepIndex t = 0;
  Scalar A = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar V = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar descent_residual = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar delta_coeff = std::numeric_limits<Scalar>::quiet_NaN();
};

template <typename Scalar = double>
struct PotentialTrace {
  std::vector<PotentialRecord<Scalar>> records;  // t = 0..T
  // First index with c_{t+1} < 1, where A_t is defined.
  StepIndex first_tracked = 0;
  // First index of the rate-bound window.
  StepIndex window_start = 2;
  Scalar V2 = std::numeric_limits<Scalar>::quiet_NaN();
  double sigma2 = 0.0;
};

// Evaluates the potential along an SF trajectory. Entries that are undefined
// (A_t at c_{t+1} = 1, delta_coeff at c_t = 1, residual at t = T) are NaN;
// where c_{t+1} = 1 and delta_t = 0 the potential reduces to f(x_t) - f*.
template <typename Scalar>
PotentialTrace<Scalar> potential(const Trajectory<Scalar>& tr,
                                 const Problem<Scalar>& p,
                                 double sigma2 = 0.0) {
  if (!std::isfinite(p.f_star)) {
    throw ConfigError("potential: problem has no finite f*");
  }
  if (!tr.has_z()) {
    throw ConfigError("potential: trajectory carries no z-sequence");
  }
  const Schedule& s = tr.schedule;
  const double L = p.L;
  PotentialTrace<Scalar> out;
  out.sigma2 = sigma2;
  out.records.resize(tr.T + 1);
  bool found_first = false;
  for (StepIndex t = 0; t <= tr.T; ++t) {
    auto& r = out.records[t];
    r.t = t;
    const Scalar gap = tr.f_x[t] - Scalar(p.f_star);
    const Scalar dsq = tr.delta_norm_sq(t);
    if (c<Scalar>(s, t) < Scalar(1)) {
      r.A = A_coeff<Scalar>(s, t, L);
      r.V = gap + r.A * dsq;
      if (!found_first) {
        out.first_tracked = t;
        found_first = true;
      }
    } else if (dsq == Scalar(0)) {
      r.V = gap;
    } else {
      std::ostringstream os;
      os << "potential undefined at t = " << t
         << ": c_{t+1} = 1 with nonzero delta_t";
      throw UndefinedCoefficient(os.str());
    }
    if (t >= 1 && c<Scalar>(s, t - 1) < Scalar(1)) {
      r.delta_coeff = delta_coeff<Scalar>(s, t, L, s.beta_law.beta);
    }
  }
  for (StepIndex t = 0; t < tr.T; ++t) {
    auto& r = out.records[t];
    const Scalar step = c<Scalar>(s, t) * eta<Scalar>(s, t);
    r.descent_residual = out.records[t + 1].V - r.V +
                         step / Scalar(4) * tr.grad_x_sq[t] -
                         step / Scalar(2) * Scalar(sigma2);
  }
  if (tr.T >= 2) out.V2 = out.records[2].V;
  return out;
}

// ---------------------------------------------------------------------------
// Rate bounds.

enum class Theorem { T3, T4, T5Dec, T5Inc };

inline std::string to_string(Theorem th) {
  switch (th) {
    case Theorem::T3: return "T3";
    case Theorem::T4: return "T4";
    case Theorem::T5Dec: return "T5dec";
    case Theorem::T5Inc: return "T5inc";
  }
  return "?";
}

struct RateBound {
  Theorem theorem = Theorem::T3;
  double alpha = 1.0;
  // True when the only available statement is qualitative (O(1)).
  bool qualitative = false;
  double bound_value = std::numeric_limits<double>::quiet_NaN();
  // min_{2 <= t <= T-1} |grad f(x_t)|^2, filled from a trajectory.
  double window_min = std::numeric_limits<double>::quiet_NaN();
  // Argmin of the window.
  StepIndex window_argmin = -1;
};

// Closed-form bound on min_{2 <= t <= T-1} |grad f(x_t)|^2 (natural log):
//   T3:         4 V2 / (eta ln T)
//   T5dec a<1:  4 V2 (1 - a) / (eta (T^{1-a} - 2^{1-a})); a = 1 as T3;
//               a > 1 qualitative only
//   T5inc:      4 V2 / (eta T - 2 eta - a eta ln T)
//   T4:         4 (V2 + sum_{t=2}^{T-1} E(t) D2 (t+1)) / (eta0 (T - 2)),
//               the exact telescoped sum with |delta_t|^2 <= D2 (t+1)
// plus 2 sigma^2 whenever sigma^2 > 0. `D2` is required for T4.
inline RateBound bound(Theorem th, double V2, const Schedule& s, StepIndex T,
                       double sigma2 = 0.0,
                       std::optional<double> D2 = std::nullopt) {
  if (T < 3) throw ConfigError("bound: horizon T must be >= 3");
  RateBound rb;
  rb.theorem = th;
  const double e = base_eta(s);
  const double TT = static_cast<double>(T);
  const double noise = sigma2 > 0.0 ? 2.0 * sigma2 : 0.0;
  switch (th) {
    case Theorem::T3:
      rb.alpha = 1.0;
      rb.bound_value = 4.0 * V2 / (e * std::log(TT));
      break;
    case Theorem::T5Dec: {
      const double a = avg_alpha(s);
      rb.alpha = a;
      if (a < 1.0) {
        rb.bound_value = 4.0 * V2 * (1.0 - a) /
                         (e * (std::pow(TT, 1.0 - a) - std::pow(2.0, 1.0 - a)));
      } else if (a == 1.0) {
        rb.bound_value = 4.0 * V2 / (e * std::log(TT));
      } else {
        rb.qualitative = true;
        return rb;
      }
      break;
    }
    case Theorem::T5Inc: {
      const double a = avg_alpha(s);
      rb.alpha = a;
      rb.bound_value =
          4.0 * V2 / (e * TT - 2.0 * e - a * e * std::log(TT));
      break;
    }
    case Theorem::T4: {
      if (!D2) throw ConfigError("bound: T4 requires a D^2 value");
      rb.alpha = 1.0;
      double sum = 0.0;
      for (StepIndex t = 2; t <= T - 1; ++t) {
        sum += E_coeff<double>(t, s.L_bound) * *D2 * static_cast<double>(t + 1);
      }
      rb.bound_value = 4.0 * (V2 + sum) / (e * (TT - 2.0));
      break;
    }
  }
  rb.bound_value += noise;
  return rb;
}

template <typename Scalar>
void fill_window(RateBound& rb, const Trajectory<Scalar>& tr) {
  double best = std::numeric_limits<double>::infinity();
  StepIndex arg = -1;
  for (StepIndex t = 2; t <= tr.T - 1; ++t) {
    const double v = static_cast<double>(tr.grad_x_sq[t]);
    if (v < best) {
      best = v;
      arg = t;
    }
  }
  rb.window_min = best;
  rb.window_argmin = arg;
}

}  // namespace sflab

#endif  // SFLAB_LYAPUNOV_H
