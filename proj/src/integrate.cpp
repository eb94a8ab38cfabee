#include "rmps/integrate.hpp"

#include <numbers>

namespace rmps {

void IntegratorConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0) || !(h_init > 0.0) || !(h_max > 0.0) ||
      !(event_time_tol > 0.0))
    throw InvalidArgument("IntegratorConfig: tolerances and step sizes must be > 0");
  if (max_steps < 1) throw InvalidArgument("IntegratorConfig: max_steps must be >= 1");
}

double wrap_angle(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::remainder(phi, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

SectionSpec<4> sam_section() {
  SectionSpec<4> s;
  // sin(phi) rises through zero at phi = 0 (mod 2 pi) with phi' > 0 and at
  // phi = pi with phi' < 0; the cos filter keeps the first branch only.
  s.event = [](const StateVec<4>& y) { return std::sin(y[1]); };
  s.direction = +1;
  s.accept = [](const StateVec<4>& y) { return std::cos(y[1]) > 0.0; };
  s.record = [](const StateVec<4>& y) { return Point2{y[0], y[2]}; };
  return s;
}

SamCrossingResult sam_section_crossings(const SamState& init, SamParams p, double t_end,
                                        const IntegratorConfig& cfg, double r_min) {
  auto field = [p, r_min](const StateVec<4>& y) {
    return sam_vector_field(SamState::from_array(y), p, r_min).to_array();
  };
  const auto raw = integrate_with_events<4>(field, sam_section(), init.to_array(), t_end, cfg);
  SamCrossingResult out;
  out.truncated = raw.truncated();
  out.end_time = raw.end_time;
  out.stats = raw.stats;
  out.crossings.reserve(raw.crossings.size());
  for (const auto& c : raw.crossings) {
    SamState s = SamState::from_array(c.full_state);
    s.phi = wrap_angle(s.phi);
    out.crossings.push_back({c.time, c.point, s});
  }
  return out;
}

SamState sam_propagate(const SamState& init, SamParams p, double duration,
                       const IntegratorConfig& cfg, double r_min) {
  auto field = [p, r_min](const StateVec<4>& y) {
    return sam_vector_field(SamState::from_array(y), p, r_min).to_array();
  };
  return SamState::from_array(
      integrate_adaptive<4>(field, init.to_array(), 0.0, duration, cfg).state);
}

}  // namespace rmps
