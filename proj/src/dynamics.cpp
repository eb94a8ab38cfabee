#include "rmps/dynamics.hpp"

#include <cmath>

namespace rmps {

Trajectory henon_trajectory(Point2 init, HenonParams p, int steps, double escape_radius) {
  if (steps < 1) throw InvalidArgument("henon_trajectory: steps must be >= 1");
  if (!(escape_radius > 0.0)) throw InvalidArgument("henon_trajectory: escape_radius must be > 0");

  auto inside = [escape_radius](Point2 q) {
    return std::isfinite(q.x) && std::isfinite(q.y) && std::abs(q.x) <= escape_radius &&
           std::abs(q.y) <= escape_radius;
  };

  Trajectory out;
  if (!inside(init)) return out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back(init);
  Point2 s = init;
  for (int k = 0; k < steps; ++k) {
    s = henon_step(s, p);
    if (!inside(s)) break;
    out.push_back(s);
  }
  return out;
}

SamState sam_vector_field(const SamState& s, SamParams p, double r_min) {
  if (!(s.r > r_min)) throw SingularityReached("SAM trajectory reached the pulley (r <= r_min)");
  const double r2 = s.r * s.r;
  return {
      s.p_r / (1.0 + p.mu),
      s.p_phi / r2,
      s.p_phi * s.p_phi / (r2 * s.r) - (p.mu - std::cos(s.phi)),
      -s.r * std::sin(s.phi),
  };
}

double sam_energy(const SamState& s, SamParams p) {
  return s.p_r * s.p_r / (2.0 * (1.0 + p.mu)) + s.p_phi * s.p_phi / (2.0 * s.r * s.r) +
         s.r * (p.mu - std::cos(s.phi));
}

SamState sam_sample_section_state(SamParams p, Rng& rng, double r_min) {
  if (!(p.mu > 1.0)) throw InvalidArgument("sam_sample_section_state: mu must be > 1");
  const double r_max = sam_section_r_max(p);
  const double pr_max = std::sqrt(2.0 * (1.0 + p.mu));
  std::uniform_real_distribution<double> r_dist(0.0, r_max);
  std::uniform_real_distribution<double> pr_dist(-pr_max, pr_max);
  for (;;) {
    const double r = r_dist(rng);
    const double p_r = pr_dist(rng);
    if (auto s = sam_section_state(r, p_r, p, r_min)) return *s;
  }
}

std::optional<SamState> sam_section_state(double r, double p_r, SamParams p, double r_min) {
  if (!(r > r_min)) return std::nullopt;
  // Energy left for the angular term on phi = 0.
  const double rest = kSamEnergy - p_r * p_r / (2.0 * (1.0 + p.mu)) - r * (p.mu - 1.0);
  if (!(rest > 0.0)) return std::nullopt;
  return SamState{r, 0.0, p_r, r * std::sqrt(2.0 * rest)};
}

}  // namespace rmps
