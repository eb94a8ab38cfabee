#pragma once

#include <array>
#include <optional>
#include <vector>

#include "rmps/common.hpp"

namespace rmps {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Ordered sequence of state-space points (map iterates or section crossings).
using Trajectory = std::vector<Point2>;
using TrajectorySet = std::vector<Trajectory>;

// ---------------------------------------------------------------------------
// Hénon map:  x' = 1 - a x^2 + y,  y' = b x
// ---------------------------------------------------------------------------

struct HenonParams {
  double a = 1.4;
  double b = 0.3;
};

inline constexpr double kHenonAMin = 0.05;
inline constexpr double kHenonAMax = 0.45;
inline constexpr double kHenonBMin = -1.1;
inline constexpr double kHenonBMax = 1.1;
inline constexpr double kDefaultEscapeRadius = 1e6;

inline Point2 henon_step(Point2 s, HenonParams p) {
  return {1.0 - p.a * s.x * s.x + s.y, p.b * s.x};
}

/// The initial point followed by up to `steps` iterates. Iteration stops
/// before the first point that is non-finite or leaves the box
/// |x|, |y| <= escape_radius, so every returned point is finite.
Trajectory henon_trajectory(Point2 init, HenonParams p, int steps,
                            double escape_radius = kDefaultEscapeRadius);

// ---------------------------------------------------------------------------
// Swinging Atwood's machine with m = g = 1, canonical coordinates
// (r, phi, p_r, p_phi) and Hamiltonian
//   H = p_r^2 / (2(1+mu)) + p_phi^2 / (2 r^2) + r (mu - cos phi).
// Datasets use the energy surface H = 1.
// ---------------------------------------------------------------------------

struct SamParams {
  double mu = 3.0;
};

inline constexpr double kSamMuMin = 1.5;
inline constexpr double kSamMuMax = 15.0;
inline constexpr double kSamEnergy = 1.0;
inline constexpr double kSamMinRadius = 1e-3;

struct SamState {
  double r = 1.0;
  double phi = 0.0;
  double p_r = 0.0;
  double p_phi = 0.0;

  std::array<double, 4> to_array() const { return {r, phi, p_r, p_phi}; }
  static SamState from_array(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }
};

/// Raised when the swinging bob reaches the pulley (r <= r_min).
class SingularityReached : public Error {
 public:
  using Error::Error;
};

/// Hamilton's equations (r', phi', p_r', p_phi'). Throws SingularityReached when r <= r_min.
SamState sam_vector_field(const SamState& s, SamParams p, double r_min = kSamMinRadius);

double sam_energy(const SamState& s, SamParams p);

/// Angular velocity phi' = p_phi / r^2.
inline double sam_phi_dot(const SamState& s) { return s.p_phi / (s.r * s.r); }

/// Draws a state on the section phi = 0 with p_phi > 0 and energy exactly 1,
/// with (r, p_r) uniform over the energetically allowed region. States with
/// r <= r_min are rejected along with points outside the region.
SamState sam_sample_section_state(SamParams p, Rng& rng, double r_min = kSamMinRadius);

/// The section state (r, 0, p_r, p_phi > 0) with energy 1, if one exists with r > r_min.
std::optional<SamState> sam_section_state(double r, double p_r, SamParams p, double r_min = kSamMinRadius);

/// Largest r reachable on the section: r (mu - 1) <= 1.
inline double sam_section_r_max(SamParams p) { return 1.0 / (p.mu - 1.0); }

}  // namespace rmps
