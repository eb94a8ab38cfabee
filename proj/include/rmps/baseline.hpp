#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "rmps/dataset.hpp"
#include "rmps/dynamics.hpp"

namespace rmps {

using PointSet = std::vector<Point2>;

PointSet flatten(const TrajectorySet& trajectories);

/// (1 / mn) sum_i sum_k |sim_k^i - obs_k^i|^2; requires matching counts and lengths.
double temporal_mse(const TrajectorySet& sim, const TrajectorySet& obs);

/// 0.5 * (mean over A of the distance to the nearest point of B + the same from B to A).
/// Uses a k-d tree; the result equals the O(|A||B|) double loop exactly.
double nn_state_space_loss(const PointSet& a, const PointSet& b);

enum class BaselineLoss { Temporal, NearestNeighbor };

BaselineLoss parse_baseline_loss(const std::string& name);

/// Simulated trajectories for a candidate theta, started from the observed
/// initial conditions. An empty set marks theta as infeasible.
using Simulator = std::function<TrajectorySet(const std::vector<double>& theta)>;

/// Iterates the map from the first point of every observed trajectory for as
/// many steps as that trajectory holds.
Simulator henon_simulator(const TrajectorySet& observed, double escape_radius = kDefaultEscapeRadius);

/// Starts at each observed (r, p_r) on the section, with p_phi fixed by the
/// candidate mu and E = 1, and records crossings up to `horizon`.
Simulator sam_simulator(const TrajectorySet& observed, double horizon, const IntegratorConfig& integrator = {});

struct NelderMeadConfig {
  int restarts = 10;
  int budget = 200;  // loss evaluations per restart
  double ftol = 1e-10;
  double xtol = 1e-8;  // simplex size relative to the box width
  double initial_step = 0.1;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct TraceRow {
  int restart = 0;
  int eval = 0;
  std::vector<double> theta;
  double loss = 0.0;
};

struct BaselineResult {
  std::vector<double> theta;
  double loss = 0.0;
  bool converged = false;
  int best_restart = 0;
  std::vector<TraceRow> trace;
};

/// Multi-start Nelder-Mead over the box [lo, hi]; every vertex is clamped
/// into the box. Restart starting points are seeded uniform draws.
BaselineResult nelder_mead(const std::function<double(const std::vector<double>&)>& loss,
                           const std::vector<double>& lo, const std::vector<double>& hi,
                           const NelderMeadConfig& cfg);

/// Scores `simulator(theta)` against `observed` with the chosen loss.
BaselineResult estimate_optimization(const TrajectorySet& observed, const Simulator& simulator, BaselineLoss loss,
                                     const std::vector<double>& lo, const std::vector<double>& hi,
                                     const NelderMeadConfig& cfg);

/// `restart,eval,<names...>,loss`
void write_trace_csv(const BaselineResult& result, const std::vector<std::string>& names,
                     const std::filesystem::path& path);

}  // namespace rmps
