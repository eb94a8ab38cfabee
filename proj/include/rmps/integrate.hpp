#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "rmps/common.hpp"
#include "rmps/dynamics.hpp"

namespace rmps {

template <std::size_t N>
using StateVec = std::array<double, N>;

struct IntegratorConfig {
  double rtol = 1e-10;
  double atol = 1e-10;
  double h_init = 1e-3;
  double h_max = 0.5;
  std::int64_t max_steps = 50'000'000;
  double event_time_tol = 1e-10;

  void validate() const;
};

class StepBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class NonFiniteDerivative : public Error {
 public:
  using Error::Error;
};

struct IntegrationStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t field_evals = 0;
};

template <std::size_t N>
struct RkStep {
  StateVec<N> state;
  StateVec<N> error;  // 5th-order minus embedded 4th-order solution
};

/// Oriented section e(state) = 0 crossed with sign(de/dt) == direction.
/// `accept` filters crossings (e.g. to pick one branch of a periodic event
/// function); `record` projects the state onto section coordinates.
template <std::size_t N>
struct SectionSpec {
  std::function<double(const StateVec<N>&)> event;
  int direction = +1;
  std::function<bool(const StateVec<N>&)> accept;
  std::function<Point2(const StateVec<N>&)> record;
};

template <std::size_t N>
struct CrossingRecord {
  double time = 0.0;
  Point2 point;
  StateVec<N> full_state{};
};

enum class Termination { Completed, Singularity };

template <std::size_t N>
struct EventResult {
  std::vector<CrossingRecord<N>> crossings;
  Termination termination = Termination::Completed;
  double end_time = 0.0;
  IntegrationStats stats;

  bool truncated() const { return termination != Termination::Completed; }
};

template <std::size_t N>
struct AdaptiveResult {
  StateVec<N> state;
  IntegrationStats stats;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

template <std::size_t N, class Field>
StateVec<N> eval(Field& field, const StateVec<N>& y, IntegrationStats* stats) {
  StateVec<N> d = field(y);
  if (stats) ++stats->field_evals;
  for (double v : d)
    if (!std::isfinite(v)) throw NonFiniteDerivative("vector field returned a non-finite value");
  return d;
}

template <std::size_t N>
StateVec<N> axpy(const StateVec<N>& y, double h,
                 std::initializer_list<std::pair<double, const StateVec<N>*>> terms) {
  StateVec<N> out = y;
  for (std::size_t i = 0; i < N; ++i) {
    double acc = 0.0;
    for (const auto& [c, k] : terms) acc += c * (*k)[i];
    out[i] += h * acc;
  }
  return out;
}

/// One DP5 step from (y, k1 = f(y)); also returns k7 = f(y_new) for FSAL reuse.
template <std::size_t N, class Field>
RkStep<N> dp_step(Field& field, const StateVec<N>& y, const StateVec<N>& k1, double h,
                  StateVec<N>* k7_out, IntegrationStats* stats) {
  const auto k2 = eval<N>(field, axpy<N>(y, h, {{a21, &k1}}), stats);
  const auto k3 = eval<N>(field, axpy<N>(y, h, {{a31, &k1}, {a32, &k2}}), stats);
  const auto k4 = eval<N>(field, axpy<N>(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}), stats);
  const auto k5 =
      eval<N>(field, axpy<N>(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}), stats);
  const auto k6 = eval<N>(
      field, axpy<N>(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}), stats);
  RkStep<N> out;
  out.state = axpy<N>(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
  const auto k7 = eval<N>(field, out.state, stats);
  for (std::size_t i = 0; i < N; ++i)
    out.error[i] =
        h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
  if (k7_out) *k7_out = k7;
  return out;
}

// Max-norm of the error per unit step: local error <= h (rtol |y| + atol).
template <std::size_t N>
double error_norm(const StateVec<N>& y0, const StateVec<N>& y1, const StateVec<N>& err,
                  const IntegratorConfig& cfg, double h) {
  double worst = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double scale = cfg.atol + cfg.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    worst = std::max(worst, std::abs(err[i]) / scale);
  }
  return worst / std::min(std::abs(h), 1.0);
}

/// PI step-size controller (safety 0.9, growth clamp [0.2, 5]).
class StepController {
 public:
  explicit StepController(const IntegratorConfig& cfg) : cfg_(cfg) {}

  /// Returns true when the step is accepted; `h` is updated for the next attempt.
  bool update(double err, double& h) {
    constexpr double safety = 0.9, min_fac = 0.2, max_fac = 5.0;
    constexpr double alpha = 0.7 / 5.0, beta = 0.4 / 5.0;
    if (err <= 1.0) {
      double fac = max_fac;
      if (err > 0.0) fac = safety * std::pow(err, -alpha) * std::pow(prev_err_, beta);
      fac = std::clamp(fac, min_fac, max_fac);
      if (rejected_) fac = std::min(fac, 1.0);
      h = std::min(h * fac, cfg_.h_max);
      prev_err_ = std::max(err, 1e-4);
      rejected_ = false;
      return true;
    }
    const double fac = std::max(min_fac, safety * std::pow(err, -1.0 / 5.0));
    h *= fac;
    rejected_ = true;
    return false;
  }

 private:
  const IntegratorConfig& cfg_;
  double prev_err_ = 1e-4;
  bool rejected_ = false;
};

template <std::size_t N>
StateVec<N> hermite(const StateVec<N>& y0, const StateVec<N>& f0, const StateVec<N>& y1,
                    const StateVec<N>& f1, double h, double tau) {
  const double s = tau / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  StateVec<N> out;
  for (std::size_t i = 0; i < N; ++i)
    out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
  return out;
}

inline bool is_crossing(double e0, double e1, int direction) {
  const bool up = e0 < 0.0 && e1 >= 0.0;
  const bool down = e0 > 0.0 && e1 <= 0.0;
  if (direction > 0) return up;
  if (direction < 0) return down;
  return up || down;
}

}  // namespace detail

/// Single Dormand-Prince 5(4) step of an autonomous field.
template <std::size_t N, class Field>
RkStep<N> rk_step(Field&& field, const StateVec<N>& state, double h) {
  if (!(h > 0.0)) throw InvalidArgument("rk_step: h must be > 0");
  const auto k1 = detail::eval<N>(field, state, nullptr);
  return detail::dp_step<N>(field, state, k1, h, nullptr, nullptr);
}

/// Adaptive integration of y' = f(y) from t0 to t1.
template <std::size_t N, class Field>
AdaptiveResult<N> integrate_adaptive(Field&& field, const StateVec<N>& state, double t0, double t1,
                                     const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t1 > t0)) throw InvalidArgument("integrate_adaptive: t1 must be > t0");
  AdaptiveResult<N> res{state, {}};
  detail::StepController control(cfg);
  auto k1 = detail::eval<N>(field, state, &res.stats);
  double t = t0;
  double h = std::min(cfg.h_init, cfg.h_max);
  while (t < t1) {
    if (res.stats.accepted + res.stats.rejected >= cfg.max_steps)
      throw StepBudgetExceeded("integrate_adaptive: step budget exhausted");
    const bool last = t + h >= t1;
    const double step = last ? t1 - t : h;
    StateVec<N> k7;
    const auto trial = detail::dp_step<N>(field, res.state, k1, step, &k7, &res.stats);
    const double err = detail::error_norm<N>(res.state, trial.state, trial.error, cfg, step);
    double h_next = step;
    if (control.update(err, h_next)) {
      ++res.stats.accepted;
      t = last ? t1 : t + step;
      res.state = trial.state;
      k1 = k7;
    } else {
      ++res.stats.rejected;
    }
    h = h_next;
  }
  return res;
}

/// Integrates from t = 0 to t_end and returns every directional section
/// crossing in (0, t_end], in time order. A singular field (SingularityReached)
/// ends the run early with the crossings found so far.
template <std::size_t N, class Field>
EventResult<N> integrate_with_events(Field&& field, const SectionSpec<N>& section,
                                     const StateVec<N>& state, double t_end,
                                     const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > 0.0)) throw InvalidArgument("integrate_with_events: t_end must be > 0");
  EventResult<N> res;
  IntegrationStats& stats = res.stats;
  detail::StepController control(cfg);

  StateVec<N> y = state;
  double t = 0.0;
  double h = std::min(cfg.h_init, cfg.h_max);
  try {
    auto k1 = detail::eval<N>(field, y, &stats);
    double e0 = section.event(y);
    while (t < t_end) {
      if (stats.accepted + stats.rejected >= cfg.max_steps)
        throw StepBudgetExceeded("integrate_with_events: step budget exhausted");
      const bool last = t + h >= t_end;
      const double step = last ? t_end - t : h;
      StateVec<N> k7;
      const auto trial = detail::dp_step<N>(field, y, k1, step, &k7, &stats);
      const double err = detail::error_norm<N>(y, trial.state, trial.error, cfg, step);
      double h_next = step;
      if (!control.update(err, h_next)) {
        ++stats.rejected;
        h = h_next;
        continue;
      }
      ++stats.accepted;
      const double e1 = section.event(trial.state);
      if (detail::is_crossing(e0, e1, section.direction)) {
        // Coarse location on the cubic Hermite interpolant.
        double lo = 0.0, hi = step;
        while (hi - lo > cfg.event_time_tol) {
          const double mid = 0.5 * (lo + hi);
          const double em = section.event(detail::hermite<N>(y, k1, trial.state, k7, step, mid));
          if (detail::is_crossing(e0, em, section.direction) || em == 0.0)
            hi = mid;
          else
            lo = mid;
        }
        // Polish on true RK sub-steps from the step start (Illinois regula falsi).
        auto substep = [&](double tau) {
          if (tau <= 0.0) return y;
          if (tau >= step) return trial.state;
          return detail::dp_step<N>(field, y, k1, tau, nullptr, &stats).state;
        };
        double a = std::max(0.0, lo - 1e3 * cfg.event_time_tol);
        double b = std::min(step, hi + 1e3 * cfg.event_time_tol);
        StateVec<N> ya = substep(a), yb = substep(b);
        double ga = section.event(ya), gb = section.event(yb);
        if (!(detail::is_crossing(ga, gb, section.direction))) {
          a = 0.0, b = step, ya = y, yb = trial.state, ga = e0, gb = e1;
        }
        int stale = 0;
        for (int it = 0; it < 200 && b - a > cfg.event_time_tol && gb != 0.0; ++it) {
          double c = b - gb * (b - a) / (gb - ga);
          if (!(c > a && c < b)) c = 0.5 * (a + b);
          const StateVec<N> yc = substep(c);
          const double gc = section.event(yc);
          if (detail::is_crossing(ga, gc, section.direction) || gc == 0.0) {
            b = c, yb = yc, gb = gc;
            if (stale == -1) ga *= 0.5;
            stale = -1;
          } else {
            a = c, ya = yc, ga = gc;
            if (stale == 1) gb *= 0.5;
            stale = 1;
          }
        }
        // Illinois scaling perturbs ga/gb; compare true event values.
        const bool use_a = std::abs(section.event(ya)) < std::abs(section.event(yb)) && a > 0.0;
        const StateVec<N>& yc = use_a ? ya : yb;
        const double tc = t + (use_a ? a : b);
        if (!section.accept || section.accept(yc)) {
          CrossingRecord<N> rec;
          rec.time = tc;
          rec.full_state = yc;
          rec.point = section.record(yc);
          res.crossings.push_back(rec);
        }
      }
      t = last ? t_end : t + step;
      y = trial.state;
      k1 = k7;
      e0 = e1;
      h = h_next;
    }
  } catch (const SingularityReached&) {
    res.termination = Termination::Singularity;
  }
  res.end_time = t;
  return res;
}

// ---------------------------------------------------------------------------
// Swinging Atwood's machine section phi = 0 (mod 2 pi), phi' > 0, recorded as (r, p_r).
// ---------------------------------------------------------------------------

struct SamCrossing {
  double time = 0.0;
  Point2 point;  // (r, p_r)
  SamState state;
};

struct SamCrossingResult {
  std::vector<SamCrossing> crossings;
  bool truncated = false;
  double end_time = 0.0;
  IntegrationStats stats;
};

SectionSpec<4> sam_section();

/// Wraps an angle into (-pi, pi].
double wrap_angle(double phi);

SamCrossingResult sam_section_crossings(const SamState& init, SamParams p, double t_end,
                                        const IntegratorConfig& cfg,
                                        double r_min = kSamMinRadius);

/// Integrates a SAM state for `duration` time units (no events).
SamState sam_propagate(const SamState& init, SamParams p, double duration,
                       const IntegratorConfig& cfg, double r_min = kSamMinRadius);

}  // namespace rmps
