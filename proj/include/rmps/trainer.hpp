#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rmps/dataset.hpp"
#include "rmps/nn.hpp"
#include "rmps/raster.hpp"

namespace rmps {

struct TrainConfig {
  std::filesystem::path dataset;
  /// Receives best.rmck and metrics.csv.
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::uint64_t eval_seed = 1;
  bool augment = false;
  AugmentLimits limits = henon_augment_limits();
  RasterSpec raster = henon_raster_spec(64);
  /// Input size and output dimension are taken from `raster` and the dataset.
  NetConfig net;
  AdamConfig adam;
  int batch = 32;
  int steps = 2000;
  int val_interval = 100;
  int threads = 0;

  void validate() const;
};

/// Defaults for a system: window, augmentation limits and image size.
TrainConfig default_train_config(SystemId system, int image_size = 64);

struct Metrics {
  std::string split;
  std::uint64_t step = 0;
  std::size_t count = 0;
  double loss = 0.0;
  std::vector<double> rmse;  // per parameter, in parameter units
  double wall_s = 0.0;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  SplitIndex split;
  std::uint64_t best_step = 0;
  Metrics best_validation;
  Metrics final_validation;
  Metrics test_clean;
  Metrics test_augmented;
  std::filesystem::path checkpoint;
  std::filesystem::path log;
};

/// Everything needed to rebuild inputs for a checkpoint.
struct ModelMeta {
  SystemId system = SystemId::Henon;
  RasterSpec raster;
  AugmentLimits limits;
  LossWeights loss;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  bool augment = false;
  std::string dataset;
  std::uint64_t best_step = 0;
  double best_validation_loss = 0.0;

  std::string to_json() const;
  static ModelMeta from_json(const std::string& text);
};

LossWeights loss_weights_for(SystemId system);

/// Renders the network inputs a training run sees. Validation images are
/// fixed at construction; training images are re-augmented every epoch.
class TrainingImages {
 public:
  TrainingImages(const std::vector<Sample>& samples, const SplitIndex& split, const RasterSpec& raster,
                 const AugmentLimits& limits, bool augment, std::uint64_t seed, int threads = 0);

  /// Epochs count from 1; epoch 0 is reserved for the validation draw.
  std::vector<double> train_image(std::size_t index, std::uint64_t epoch) const;
  const std::vector<double>& validation_image(std::size_t index) const;

 private:
  const std::vector<Sample>& samples_;
  RasterSpec raster_;
  AugmentLimits limits_;
  bool augment_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> clean_;       // by sample index, when not augmenting
  std::vector<std::vector<double>> validation_;  // by sample index
};

/// Augmented rendering of one sample under (seed, index, tag).
std::vector<double> augmented_image(const Sample& sample, const RasterSpec& raster, const AugmentLimits& limits,
                                    std::uint64_t seed, std::uint64_t index, std::uint64_t tag);

TrainResult train(const TrainConfig& cfg);

enum class InputMode { Clean, Augmented, Fixed };

struct EvalOptions {
  std::string split = "test";  // train | validation | test | all
  InputMode mode = InputMode::Clean;
  /// Fixed mode: trajectory count and length; 0 keeps everything. Counts
  /// above the stored trajectories regenerate the sample with more initial
  /// conditions.
  int n_traj = 0;
  int n_steps = 0;
  std::uint64_t seed = 1;
  /// Overrides the dataset recorded in the checkpoint.
  std::filesystem::path dataset;
  int batch = 64;
  int threads = 0;
};

Metrics evaluate(const std::filesystem::path& checkpoint, const EvalOptions& opts);

struct SizeSweepConfig {
  GenerationConfig generation;
  std::vector<int> sizes{64, 128, 256, 512};
  std::vector<bool> modes{false, true};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  /// Template for every run; dataset, out_dir, seed and augment are set per cell.
  TrainConfig train;
  std::filesystem::path out_dir;
};

struct SizeSweepRow {
  int size = 0;
  bool augment = false;
  std::uint64_t seed = 0;
  /// Test loss on inputs matching the training mode (augmented or clean).
  double test_loss = 0.0;
  double test_loss_clean = 0.0;
  double test_loss_augmented = 0.0;
  double best_validation_loss = 0.0;
  std::uint64_t best_step = 0;
  double wall_s = 0.0;
};

/// One run per (size, mode, seed); rows are appended to sweep_size.csv as they
/// finish and cells already present are skipped on a rerun.
std::vector<SizeSweepRow> sweep_dataset_size(const SizeSweepConfig& cfg);

struct GenSweepRow {
  int length = 0;
  int count = 0;
  double loss = 0.0;
};

/// Fixed-input evaluation over the (length x count) grid, written as long-format CSV.
std::vector<GenSweepRow> sweep_generalization(const std::filesystem::path& checkpoint, const std::vector<int>& lengths,
                                              const std::vector<int>& counts, const EvalOptions& base,
                                              const std::filesystem::path& csv);

struct Prediction {
  std::vector<double> theta;
  double wall_ms = 0.0;
};

class Predictor {
 public:
  explicit Predictor(const std::filesystem::path& checkpoint);
  Prediction predict(const TrajectorySet& trajectories) const;
  const ModelMeta& meta() const { return meta_; }

 private:
  ResNet net_;
  ModelParams params_;
  ModelMeta meta_;
};

Prediction predict(const std::filesystem::path& checkpoint, const TrajectorySet& trajectories);

}  // namespace rmps
