#include "rmps/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"

namespace rmps {

namespace fs = std::filesystem;
using nlohmann::json;
using io::ByteReader;
using io::ByteWriter;
using io::read_file;
using io::write_file_atomic;

std::string to_string(SystemId id) { return id == SystemId::Henon ? "henon" : "sam"; }

SystemId parse_system(const std::string& name) {
  if (name == "henon") return SystemId::Henon;
  if (name == "sam") return SystemId::Sam;
  throw InvalidArgument("unknown system '" + name + "' (expected henon or sam)");
}

int parameter_dim(SystemId id) { return id == SystemId::Henon ? 2 : 1; }

// ---------------------------------------------------------------------------
// Sample files
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'M', 'P', 'S'};

}  // namespace

void save_sample(const Sample& sample, const fs::path& path) {
  if (sample.theta.empty()) throw InvalidArgument("save_sample: empty parameter vector");
  if (sample.trajectories.empty()) throw InvalidArgument("save_sample: empty trajectory list");
  ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kSampleFormatVersion);
  w.u32(static_cast<std::uint32_t>(sample.theta.size()));
  for (double t : sample.theta) w.f64(t);
  w.u32(static_cast<std::uint32_t>(sample.trajectories.size()));
  for (const auto& traj : sample.trajectories) {
    if (traj.empty()) throw InvalidArgument("save_sample: empty trajectory");
    w.u32(static_cast<std::uint32_t>(traj.size()));
    for (const auto& p : traj) {
      w.f32(static_cast<float>(p.x));
      w.f32(static_cast<float>(p.y));
    }
  }
  write_file_atomic(path, w.bytes());
}

Sample load_sample(const fs::path& path) {
  const std::string buf = read_file(path);
  ByteReader r(buf, path);
  r.expect_magic(kMagic);
  const auto version = r.u32();
  if (version != kSampleFormatVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  Sample s;
  const auto d = r.u32();
  r.need(static_cast<std::size_t>(d) * 8);
  s.theta.resize(d);
  for (auto& t : s.theta) t = r.f64();
  const auto n_traj = r.u32();
  s.trajectories.reserve(std::min<std::size_t>(n_traj, r.remaining() / 4));
  for (std::uint32_t i = 0; i < n_traj; ++i) {
    const auto len = r.u32();
    r.need(static_cast<std::size_t>(len) * 8);
    Trajectory traj(len);
    for (auto& p : traj) {
      p.x = r.f32();
      p.y = r.f32();
    }
    s.trajectories.push_back(std::move(traj));
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  return s;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

void GenerationConfig::validate() const {
  const auto d = static_cast<std::size_t>(parameter_dim(system));
  if (param_lo.size() != d || param_hi.size() != d)
    throw InvalidArgument("GenerationConfig: parameter bounds have wrong dimension");
  for (std::size_t j = 0; j < d; ++j)
    if (!(param_hi[j] >= param_lo[j])) throw InvalidArgument("GenerationConfig: bad bounds");
  if (n_params < 1) throw InvalidArgument("GenerationConfig: n_params must be >= 1");
  if (n_init < 1) throw InvalidArgument("GenerationConfig: n_init must be >= 1");
  if (system == SystemId::Henon) {
    const int k = static_cast<int>(std::lround(std::sqrt(n_init)));
    if (k * k != n_init) throw InvalidArgument("GenerationConfig: Hénon n_init must be a square");
    if (steps < 1) throw InvalidArgument("GenerationConfig: steps must be >= 1");
  } else {
    if (!(param_lo[0] > 1.0)) throw InvalidArgument("GenerationConfig: SAM requires mu > 1");
    if (!(horizon > 0.0)) throw InvalidArgument("GenerationConfig: horizon must be > 0");
    integrator.validate();
  }
}

GenerationConfig henon_generation_config(int n_params, std::uint64_t seed) {
  GenerationConfig cfg;
  cfg.n_params = n_params;
  cfg.seed = seed;
  return cfg;
}

GenerationConfig sam_generation_config(int n_params, std::uint64_t seed) {
  GenerationConfig cfg;
  cfg.system = SystemId::Sam;
  cfg.param_lo = {kSamMuMin};
  cfg.param_hi = {kSamMuMax};
  cfg.n_params = n_params;
  cfg.n_init = 256;
  cfg.horizon = 1000.0;
  cfg.seed = seed;
  return cfg;
}

std::vector<int> parameter_grid_shape(int n, int dim) {
  if (n < 1 || dim < 1 || dim > 2) throw InvalidArgument("parameter_grid_shape: need n >= 1, dim in {1, 2}");
  if (dim == 1) return {n};
  int p = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n))));
  while (n % p != 0) --p;
  return {p, n / p};
}

std::vector<std::vector<double>> parameter_grid(const GenerationConfig& cfg) {
  cfg.validate();
  const int d = parameter_dim(cfg.system);
  const auto shape = parameter_grid_shape(cfg.n_params, d);
  std::vector<std::vector<double>> axes;
  for (int j = 0; j < d; ++j)
    axes.push_back(linspace(cfg.param_lo[j], cfg.param_hi[j], static_cast<std::size_t>(shape[j])));
  std::vector<std::vector<double>> out;
  if (d == 1) {
    for (double v : axes[0]) out.push_back({v});
  } else {
    for (double a : axes[0])
      for (double b : axes[1]) out.push_back({a, b});
  }
  return out;
}

std::vector<Point2> henon_initial_grid(int n, double lo, double hi) {
  const int k = static_cast<int>(std::lround(std::sqrt(n)));
  if (k * k != n) throw InvalidArgument("henon_initial_grid: n must be a perfect square");
  const auto axis = linspace(lo, hi, static_cast<std::size_t>(k));
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(n));
  for (double x : axis)
    for (double y : axis) out.push_back({x, y});
  return out;
}

Sample make_henon_sample(const std::vector<double>& theta, const GenerationConfig& cfg) {
  const HenonParams p{theta.at(0), theta.at(1)};
  Sample s{theta, {}};
  for (const auto& init : henon_initial_grid(cfg.n_init, cfg.init_lo, cfg.init_hi)) {
    auto traj = henon_trajectory(init, p, cfg.steps, cfg.escape_radius);
    if (!traj.empty()) s.trajectories.push_back(std::move(traj));
  }
  return s;
}

Sample make_sam_sample(double mu, const GenerationConfig& cfg, std::uint64_t sample_index) {
  const SamParams p{mu};
  Rng rng = make_rng({cfg.seed, sample_index});
  Sample s{{mu}, {}};
  s.trajectories.reserve(static_cast<std::size_t>(cfg.n_init));
  for (int i = 0; i < cfg.n_init; ++i) {
    const SamState init = sam_sample_section_state(p, rng);
    const auto res = sam_section_crossings(init, p, cfg.horizon, cfg.integrator);
    // The initial state lies on the section, so it opens the trajectory.
    Trajectory traj;
    traj.reserve(res.crossings.size() + 1);
    traj.push_back({init.r, init.p_r});
    for (const auto& c : res.crossings) traj.push_back(c.point);
    s.trajectories.push_back(std::move(traj));
  }
  return s;
}

namespace {

json integrator_to_json(const IntegratorConfig& c) {
  return {{"rtol", c.rtol},         {"atol", c.atol},           {"h_init", c.h_init},
          {"h_max", c.h_max},       {"max_steps", c.max_steps}, {"event_time_tol", c.event_time_tol}};
}

IntegratorConfig integrator_from_json(const json& j) {
  IntegratorConfig c;
  c.rtol = j.at("rtol");
  c.atol = j.at("atol");
  c.h_init = j.at("h_init");
  c.h_max = j.at("h_max");
  c.max_steps = j.at("max_steps");
  c.event_time_tol = j.at("event_time_tol");
  return c;
}

std::string sample_file_name(std::size_t i) {
  std::ostringstream ss;
  ss << "samples/" << std::setw(6) << std::setfill('0') << i << ".rmps";
  return ss.str();
}

void write_manifest(const DatasetManifest& m, const fs::path& dir) {
  const auto& c = m.config;
  json j;
  j["system"] = to_string(m.system);
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["param_grid"] = {{"lo", c.param_lo},
                     {"hi", c.param_hi},
                     {"shape", parameter_grid_shape(c.n_params, parameter_dim(c.system))},
                     {"thetas", m.thetas}};
  j["n_init"] = c.n_init;
  j["horizon"] = c.system == SystemId::Henon ? json(c.steps) : json(c.horizon);
  j["integrator"] = c.system == SystemId::Sam ? integrator_to_json(c.integrator) : json(nullptr);
  j["henon"] = {{"init_lo", c.init_lo}, {"init_hi", c.init_hi}, {"escape_radius", c.escape_radius}};
  j["created"] = "rmps generate v1";
  j["samples"] = m.files;
  write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

DatasetManifest generate_impl(const GenerationConfig& cfg, const fs::path& out_dir,
                              SystemId expected) {
  if (cfg.system != expected) throw InvalidArgument("generate: config system mismatch");
  cfg.validate();
  fs::create_directories(out_dir / "samples");
  DatasetManifest m;
  m.system = cfg.system;
  m.seed = cfg.seed;
  m.config = cfg;
  m.thetas = parameter_grid(cfg);
  m.files.resize(m.thetas.size());
  for (std::size_t i = 0; i < m.files.size(); ++i) m.files[i] = sample_file_name(i);

  parallel_for(m.thetas.size(), resolve_threads(cfg.threads), [&](std::size_t i) {
    const Sample s = cfg.system == SystemId::Henon ? make_henon_sample(m.thetas[i], cfg)
                                                   : make_sam_sample(m.thetas[i][0], cfg, i);
    save_sample(s, out_dir / m.files[i]);
  });
  write_manifest(m, out_dir);
  return m;
}

}  // namespace

DatasetManifest generate_henon(const GenerationConfig& cfg, const fs::path& out_dir) {
  return generate_impl(cfg, out_dir, SystemId::Henon);
}

DatasetManifest generate_sam(const GenerationConfig& cfg, const fs::path& out_dir) {
  return generate_impl(cfg, out_dir, SystemId::Sam);
}

DatasetManifest generate_dataset(const GenerationConfig& cfg, const fs::path& out_dir) {
  return generate_impl(cfg, out_dir, cfg.system);
}

DatasetManifest read_manifest(const fs::path& dataset_dir) {
  json j;
  try {
    j = json::parse(read_file(dataset_dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  DatasetManifest m;
  try {
    m.system = parse_system(j.at("system"));
    m.version = j.at("version");
    m.seed = j.at("seed");
    const auto& grid = j.at("param_grid");
    m.thetas = grid.at("thetas").get<std::vector<std::vector<double>>>();
    m.files = j.at("samples").get<std::vector<std::string>>();
    auto& c = m.config;
    c.system = m.system;
    c.seed = m.seed;
    c.param_lo = grid.at("lo").get<std::vector<double>>();
    c.param_hi = grid.at("hi").get<std::vector<double>>();
    c.n_params = static_cast<int>(m.thetas.size());
    c.n_init = j.at("n_init");
    if (m.system == SystemId::Henon)
      c.steps = j.at("horizon");
    else
      c.horizon = j.at("horizon");
    if (!j.at("integrator").is_null()) c.integrator = integrator_from_json(j.at("integrator"));
    if (j.contains("henon")) {
      c.init_lo = j["henon"].at("init_lo");
      c.init_hi = j["henon"].at("init_hi");
      c.escape_radius = j["henon"].at("escape_radius");
    }
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  if (m.thetas.size() != m.files.size())
    throw FormatError("manifest.json: theta and file lists differ in length");
  return m;
}

Dataset::Dataset(fs::path dir) : dir_(std::move(dir)), manifest_(read_manifest(dir_)) {}

Sample Dataset::load(std::size_t index) const { return load_sample(dir_ / manifest_.files.at(index)); }

std::vector<Sample> Dataset::load_all(int threads) const {
  std::vector<Sample> out(size());
  parallel_for(size(), resolve_threads(threads), [&](std::size_t i) { out[i] = load(i); });
  return out;
}

// ---------------------------------------------------------------------------
// Split
// ---------------------------------------------------------------------------

namespace {

/// Largest-remainder apportionment of n items over the three fractions.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> frac{f.train, f.validation, f.test};
  std::array<std::size_t, 3> count{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = frac[k] * static_cast<double>(n);
    // Snap values within rounding noise of an integer (0.65 * 20 = 13.000000000000002).
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
    count[k] = static_cast<std::size_t>(std::floor(snapped));
    rem[k] = snapped - static_cast<double>(count[k]);
    used += count[k];
  }
  while (used < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (rem[k] > rem[best]) best = k;
    ++count[best];
    rem[best] = -1.0;
    ++used;
  }
  return count;
}

}  // namespace

SplitIndex split(const std::vector<std::vector<double>>& thetas, SplitFractions fractions,
                 std::uint64_t seed) {
  const double total = fractions.train + fractions.validation + fractions.test;
  if (std::abs(total - 1.0) > 1e-9 || fractions.train < 0 || fractions.validation < 0 ||
      fractions.test < 0)
    throw InvalidArgument("split: fractions must be nonnegative and sum to 1");

  std::vector<std::size_t> order(thetas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return thetas[i] < thetas[j]; });

  constexpr std::size_t kBlock = 20;
  SplitIndex out;
  for (std::size_t start = 0, block = 0; start < order.size(); start += kBlock, ++block) {
    const std::size_t end = std::min(order.size(), start + kBlock);
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
    Rng rng = make_rng({seed, block});
    std::shuffle(members.begin(), members.end(), rng);
    const auto counts = apportion(members.size(), fractions);
    std::size_t k = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) out.train.push_back(members[k++]);
    for (std::size_t i = 0; i < counts[1]; ++i) out.validation.push_back(members[k++]);
    for (std::size_t i = 0; i < counts[2]; ++i) out.test.push_back(members[k++]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace rmps
