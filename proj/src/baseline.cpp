#include "rmps/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace rmps {

PointSet flatten(const TrajectorySet& trajectories) {
  PointSet out;
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  out.reserve(n);
  for (const auto& t : trajectories) out.insert(out.end(), t.begin(), t.end());
  return out;
}

double temporal_mse(const TrajectorySet& sim, const TrajectorySet& obs) {
  if (sim.size() != obs.size()) throw InvalidArgument("temporal_mse: trajectory counts differ");
  if (obs.empty()) throw InvalidArgument("temporal_mse: empty collections");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (sim[i].size() != obs[i].size()) throw InvalidArgument("temporal_mse: trajectory lengths differ");
    for (std::size_t k = 0; k < obs[i].size(); ++k) {
      const double dx = sim[i][k].x - obs[i][k].x, dy = sim[i][k].y - obs[i][k].y;
      sum += dx * dx + dy * dy;
    }
    count += obs[i].size();
  }
  if (count == 0) throw InvalidArgument("temporal_mse: empty trajectories");
  return sum / static_cast<double>(count);
}

namespace {

// Static 2-d tree over a point set; leaves hold up to kLeaf points.
class KdTree {
 public:
  explicit KdTree(const PointSet& pts) : pts_(pts) {
    std::vector<std::uint32_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0u);
    nodes_.reserve(2 * pts.size() / kLeaf + 2);
    build(idx, 0, idx.size());
    order_.reserve(pts.size());
    for (auto i : idx) order_.push_back(pts[i]);
  }

  /// Smallest squared distance from q to an indexed point.
  double nearest_sq(Point2 q) const {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const Node& n = nodes_[stack[--top]];
      if (n.leaf) {
        for (std::uint32_t k = n.begin; k < n.end; ++k) {
          const double dx = q.x - order_[k].x, dy = q.y - order_[k].y;
          best = std::min(best, dx * dx + dy * dy);
        }
        if (best == 0.0) return best;
        continue;
      }
      // Every point beyond the split differs from q by at least |d| along the
      // axis, and rounding is monotone, so skipping when d^2 >= best is exact.
      const double d = (n.axis == 0 ? q.x : q.y) - n.split;
      const std::uint32_t near = d < 0.0 ? n.left : n.right, far = d < 0.0 ? n.right : n.left;
      if (d * d < best) stack[top++] = far;
      stack[top++] = near;
    }
    return best;
  }

 private:
  static constexpr std::size_t kLeaf = 8;

  struct Node {
    bool leaf = true;
    int axis = 0;
    double split = 0.0;
    std::uint32_t left = 0, right = 0;  // children, inner nodes
    std::uint32_t begin = 0, end = 0;   // range into order_, leaves
  };

  std::uint32_t build(std::vector<std::uint32_t>& idx, std::size_t lo, std::size_t hi) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (hi - lo <= kLeaf) {
      nodes_[id].begin = static_cast<std::uint32_t>(lo);
      nodes_[id].end = static_cast<std::uint32_t>(hi);
      return id;
    }
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (std::size_t k = lo; k < hi; ++k) {
      const Point2& p = pts_[idx[k]];
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    const int axis = (x1 - x0) >= (y1 - y0) ? 0 : 1;
    auto coord = [&](std::uint32_t i) { return axis == 0 ? pts_[i].x : pts_[i].y; };
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) { return coord(a) < coord(b); });
    // Left holds coordinates <= split, right holds coordinates >= split.
    const double split = coord(idx[mid]);
    const std::uint32_t l = build(idx, lo, mid);
    const std::uint32_t r = build(idx, mid, hi);
    Node& n = nodes_[id];
    n.leaf = false;
    n.axis = axis;
    n.split = split;
    n.left = l;
    n.right = r;
    return id;
  }

  const PointSet& pts_;
  std::vector<Node> nodes_;
  std::vector<Point2> order_;
};

double directed_mean(const PointSet& from, const KdTree& index) {
  double sum = 0.0;
  for (const auto& p : from) sum += std::sqrt(index.nearest_sq(p));
  return sum / static_cast<double>(from.size());
}

void check_points(const PointSet& s, const char* name) {
  if (s.empty()) throw InvalidArgument(std::string("nn_state_space_loss: empty set ") + name);
  for (const auto& p : s)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw InvalidArgument(std::string("nn_state_space_loss: non-finite point in ") + name);
}

}  // namespace

double nn_state_space_loss(const PointSet& a, const PointSet& b) {
  check_points(a, "A");
  check_points(b, "B");
  return 0.5 * (directed_mean(a, KdTree(b)) + directed_mean(b, KdTree(a)));
}

BaselineLoss parse_baseline_loss(const std::string& name) {
  if (name == "nn" || name == "nearest") return BaselineLoss::NearestNeighbor;
  if (name == "temporal" || name == "mse") return BaselineLoss::Temporal;
  throw InvalidArgument("unknown baseline loss '" + name + "' (nn, temporal)");
}

Simulator henon_simulator(const TrajectorySet& observed, double escape_radius) {
  return [observed, escape_radius](const std::vector<double>& theta) {
    const HenonParams p{theta.at(0), theta.at(1)};
    TrajectorySet out;
    out.reserve(observed.size());
    for (const auto& t : observed) {
      if (t.empty()) continue;
      out.push_back(t.size() == 1 ? Trajectory{t[0]} : henon_trajectory(t[0], p, static_cast<int>(t.size()) - 1, escape_radius));
    }
    return out;
  };
}

Simulator sam_simulator(const TrajectorySet& observed, double horizon, const IntegratorConfig& integrator) {
  return [observed, horizon, integrator](const std::vector<double>& theta) {
    const SamParams p{theta.at(0)};
    TrajectorySet out;
    if (!(p.mu > 1.0)) return out;
    out.reserve(observed.size());
    for (const auto& t : observed) {
      if (t.empty()) continue;
      const auto init = sam_section_state(t[0].x, t[0].y, p);
      if (!init) return TrajectorySet{};
      const auto res = sam_section_crossings(*init, p, horizon, integrator);
      Trajectory traj{t[0]};
      for (const auto& c : res.crossings) traj.push_back(c.point);
      out.push_back(std::move(traj));
    }
    return out;
  };
}

namespace {

struct BudgetExhausted {};

struct Vertex {
  std::vector<double> x;
  double f = 0.0;
};

class Restart {
 public:
  Restart(const std::function<double(const std::vector<double>&)>& loss, const std::vector<double>& lo,
          const std::vector<double>& hi, const NelderMeadConfig& cfg, int index)
      : loss_(loss), lo_(lo), hi_(hi), cfg_(cfg), index_(index) {}

  // Returns whether the simplex converged before the budget ran out.
  bool run(std::vector<double> start) {
    const std::size_t d = lo_.size();
    try {
      std::vector<Vertex> simplex;
      simplex.push_back(eval(std::move(start)));
      for (std::size_t j = 0; j < d; ++j) {
        std::vector<double> x = simplex[0].x;
        const double step = cfg_.initial_step * (hi_[j] - lo_[j]);
        x[j] = x[j] + step <= hi_[j] ? x[j] + step : x[j] - step;
        simplex.push_back(eval(std::move(x)));
      }
      for (;;) {
        std::stable_sort(simplex.begin(), simplex.end(), [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        if (converged(simplex)) return true;
        std::vector<double> c(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) c[j] += simplex[i].x[j] / static_cast<double>(d);
        const Vertex& worst = simplex[d];
        const Vertex r = eval(along(c, worst.x, -1.0));
        if (r.f < simplex[0].f) {
          Vertex e = eval(along(c, worst.x, -2.0));
          simplex[d] = e.f < r.f ? std::move(e) : r;
        } else if (r.f < simplex[d - 1].f) {
          simplex[d] = r;
        } else {
          const bool outside = r.f < worst.f;
          Vertex k = eval(outside ? along(c, r.x, 0.5) : along(c, worst.x, 0.5));
          if (outside ? k.f <= r.f : k.f < worst.f) {
            simplex[d] = std::move(k);
          } else {
            for (std::size_t i = 1; i <= d; ++i) simplex[i] = eval(along(simplex[0].x, simplex[i].x, 0.5));
          }
        }
      }
    } catch (const BudgetExhausted&) {
      return false;
    }
  }

  std::vector<TraceRow> trace;
  Vertex best{{}, std::numeric_limits<double>::infinity()};

 private:
  // base + t (to - base), clamped into the box.
  std::vector<double> along(const std::vector<double>& base, const std::vector<double>& to, double t) const {
    std::vector<double> x(base.size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = base[j] + t * (to[j] - base[j]);
    return x;
  }

  Vertex eval(std::vector<double> x) {
    if (static_cast<int>(trace.size()) >= cfg_.budget) throw BudgetExhausted{};
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], lo_[j], hi_[j]);
    double f = loss_(x);
    if (std::isnan(f)) f = std::numeric_limits<double>::infinity();
    trace.push_back({index_, static_cast<int>(trace.size()), x, f});
    if (f < best.f || best.x.empty()) best = {x, f};
    return {std::move(x), f};
  }

  bool converged(const std::vector<Vertex>& s) const {
    if (!std::isfinite(s.back().f) || s.back().f - s.front().f > cfg_.ftol) return false;
    for (const auto& v : s)
      for (std::size_t j = 0; j < v.x.size(); ++j)
        if (std::abs(v.x[j] - s.front().x[j]) > cfg_.xtol * (hi_[j] - lo_[j])) return false;
    return true;
  }

  const std::function<double(const std::vector<double>&)>& loss_;
  const std::vector<double>& lo_;
  const std::vector<double>& hi_;
  const NelderMeadConfig& cfg_;
  int index_;
};

}  // namespace

BaselineResult nelder_mead(const std::function<double(const std::vector<double>&)>& loss,
                           const std::vector<double>& lo, const std::vector<double>& hi,
                           const NelderMeadConfig& cfg) {
  if (lo.empty() || lo.size() != hi.size()) throw InvalidArgument("nelder_mead: bad box");
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (!(hi[j] > lo[j])) throw InvalidArgument("nelder_mead: empty box");
  if (cfg.restarts < 1 || cfg.budget < static_cast<int>(lo.size()) + 1)
    throw InvalidArgument("nelder_mead: need restarts >= 1 and budget >= d + 1");

  const auto n = static_cast<std::size_t>(cfg.restarts);
  std::vector<Restart> runs;
  std::vector<char> done(n, 0);
  runs.reserve(n);
  for (std::size_t k = 0; k < n; ++k) runs.emplace_back(loss, lo, hi, cfg, static_cast<int>(k));
  parallel_for(n, resolve_threads(cfg.threads), [&](std::size_t k) {
    Rng rng = make_rng({cfg.seed, k});
    std::vector<double> start(lo.size());
    for (std::size_t j = 0; j < lo.size(); ++j) start[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);
    done[k] = runs[k].run(std::move(start));
  });

  BaselineResult out;
  out.loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    if (runs[k].best.f < out.loss || out.theta.empty()) {
      out.theta = runs[k].best.x;
      out.loss = runs[k].best.f;
      out.converged = done[k];
      out.best_restart = static_cast<int>(k);
    }
    out.trace.insert(out.trace.end(), runs[k].trace.begin(), runs[k].trace.end());
  }
  return out;
}

BaselineResult estimate_optimization(const TrajectorySet& observed, const Simulator& simulator, BaselineLoss loss,
                                     const std::vector<double>& lo, const std::vector<double>& hi,
                                     const NelderMeadConfig& cfg) {
  if (observed.empty()) throw InvalidArgument("estimate_optimization: no observed trajectories");
  const PointSet obs_points = flatten(observed);
  if (loss == BaselineLoss::NearestNeighbor) check_points(obs_points, "B");
  const KdTree obs_index(obs_points);
  auto objective = [&](const std::vector<double>& theta) {
    const TrajectorySet sim = simulator(theta);
    if (sim.empty()) return std::numeric_limits<double>::infinity();
    if (loss == BaselineLoss::NearestNeighbor) {
      const PointSet pts = flatten(sim);
      check_points(pts, "A");
      return 0.5 * (directed_mean(pts, obs_index) + directed_mean(obs_points, KdTree(pts)));
    }
    if (sim.size() != observed.size()) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sim.size(); ++i)
      if (sim[i].size() != observed[i].size()) return std::numeric_limits<double>::infinity();
    return temporal_mse(sim, observed);
  };
  return nelder_mead(objective, lo, hi, cfg);
}

void write_trace_csv(const BaselineResult& result, const std::vector<std::string>& names,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("write_trace_csv: cannot write " + path.string());
  out << "restart,eval";
  for (const auto& n : names) out << ',' << n;
  out << ",loss\n";
  char buf[64];
  for (const auto& row : result.trace) {
    out << row.restart << ',' << row.eval;
    for (double v : row.theta) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", row.loss);
    out << buf;
  }
}

}  // namespace rmps
