#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rmps/common.hpp"
#include "rmps/dynamics.hpp"
#include "rmps/integrate.hpp"

namespace rmps {

enum class SystemId { Henon, Sam };

std::string to_string(SystemId id);
SystemId parse_system(const std::string& name);
/// Number of parameters: 2 for Hénon (a, b), 1 for SAM (mu).
int parameter_dim(SystemId id);

/// One (theta, trajectory collection) pair.
struct Sample {
  std::vector<double> theta;
  TrajectorySet trajectories;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint32_t kSampleFormatVersion = 1;

/// Little-endian: "RMPS", u32 version, u32 d, d x f64 theta, u32 n_traj,
/// then per trajectory u32 length and length x (f32 x, f32 y).
/// Written to a temporary file and renamed into place.
void save_sample(const Sample& sample, const std::filesystem::path& path);
Sample load_sample(const std::filesystem::path& path);

struct GenerationConfig {
  SystemId system = SystemId::Henon;
  std::vector<double> param_lo{kHenonAMin, kHenonBMin};
  std::vector<double> param_hi{kHenonAMax, kHenonBMax};
  int n_params = 64;
  /// Initial conditions per sample (Hénon: a perfect square, laid out as a grid).
  int n_init = 225;
  /// Hénon: iterations per trajectory.
  int steps = 250;
  /// Hénon: initial-condition grid covers [init_lo, init_hi]^2.
  double init_lo = -4.0;
  double init_hi = 4.0;
  double escape_radius = kDefaultEscapeRadius;
  /// SAM: integration horizon in system time units.
  double horizon = 1000.0;
  IntegratorConfig integrator;
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const;
};

GenerationConfig henon_generation_config(int n_params, std::uint64_t seed);
GenerationConfig sam_generation_config(int n_params, std::uint64_t seed);

/// Grid counts per parameter axis: the most-square factorisation of n for
/// two parameters (smaller factor on the first axis), n itself for one.
std::vector<int> parameter_grid_shape(int n, int dim);
/// Evenly spaced parameter points in lexicographic order.
std::vector<std::vector<double>> parameter_grid(const GenerationConfig& cfg);

/// k x k grid of initial conditions over [lo, hi]^2 (n must be k^2).
std::vector<Point2> henon_initial_grid(int n, double lo, double hi);

Sample make_henon_sample(const std::vector<double>& theta, const GenerationConfig& cfg);
Sample make_sam_sample(double mu, const GenerationConfig& cfg, std::uint64_t sample_index);

struct DatasetManifest {
  SystemId system = SystemId::Henon;
  int version = 1;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> thetas;
  std::vector<std::string> files;
  GenerationConfig config;
};

/// Writes `manifest.json` + `samples/NNNNNN.rmps` under `out_dir`.
DatasetManifest generate_henon(const GenerationConfig& cfg, const std::filesystem::path& out_dir);
DatasetManifest generate_sam(const GenerationConfig& cfg, const std::filesystem::path& out_dir);
DatasetManifest generate_dataset(const GenerationConfig& cfg, const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);

/// A dataset directory opened for reading.
class Dataset {
 public:
  explicit Dataset(std::filesystem::path dir);

  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.files.size(); }
  SystemId system() const { return manifest_.system; }
  const std::filesystem::path& dir() const { return dir_; }

  Sample load(std::size_t index) const;
  std::vector<Sample> load_all(int threads = 0) const;

 private:
  std::filesystem::path dir_;
  DatasetManifest manifest_;
};

struct SplitIndex {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct SplitFractions {
  double train = 0.65;
  double validation = 0.15;
  double test = 0.20;
};

/// Stratified split: samples sorted by theta, cut into blocks of 20 and each
/// block shuffled and dealt 13/3/4 (for the default fractions). A trailing
/// partial block is apportioned by largest remainder.
SplitIndex split(const std::vector<std::vector<double>>& thetas, SplitFractions fractions,
                 std::uint64_t seed);

}  // namespace rmps
