#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rmps/common.hpp"

namespace rmps {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct StageSpec {
  int blocks = 2;
  int channels = 16;
  int stride = 2;

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

/// Residual CNN: 3x3 stem conv + BN + ReLU, stages of basic residual blocks,
/// global average pool and a linear head. Single-channel input.
struct NetConfig {
  int input_height = 64;
  int input_width = 64;
  int stem_channels = 16;
  std::vector<StageSpec> stages{{2, 16, 2}, {2, 32, 2}, {2, 64, 2}};
  int output_dim = 2;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  void validate() const;
  std::string to_json() const;
  static NetConfig from_json(const std::string& text);

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Learnable weights, batch-norm running statistics and Adam state, stored
/// as flat arrays whose layout is fixed by the NetConfig.
struct ModelParams {
  NetConfig config;
  std::vector<double> weights;
  std::vector<double> buffers;  // per BN layer: running mean block, then running var block
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  std::uint64_t step = 0;
};

/// Single-channel images, n x height x width, row-major.
struct ImageBatch {
  int n = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;
};

enum class Mode { Train, Eval };

/// Gradients in the ModelParams::weights layout, plus the batch statistics
/// (mean, unbiased variance) of the forward pass in the buffers layout.
struct Gradients {
  std::vector<double> weights;
  std::vector<double> batch_stats;
};

/// Activations kept by a train-mode forward for the backward pass.
struct ForwardCache {
  struct Tensor {
    int c = 0, n = 0, h = 0, w = 0;
    std::vector<double> data;  // channel-major: [c][n][h][w]
  };
  struct Bn {
    Tensor xhat;
    std::vector<double> inv_std;
    std::vector<double> mean;
    std::vector<double> var;  // biased
  };
  struct Block {
    Tensor input;
    Bn bn1;
    Tensor act1;  // relu(bn1), input of conv2
    Bn bn2;
    Bn bn_proj;
    Tensor output;  // relu(sum)
  };

  bool valid = false;
  std::uint64_t step = 0;
  int batch = 0;
  Tensor input;
  Bn stem_bn;
  Tensor stem_out;
  std::vector<Block> blocks;
  Matrix features;  // pooled, n x channels
};

class StaleCache : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class ResNet {
 public:
  explicit ResNet(NetConfig config);

  const NetConfig& config() const { return config_; }
  std::size_t num_weights() const { return num_weights_; }
  std::size_t num_buffers() const { return num_buffers_; }

  /// Kaiming-uniform convs, BN scale 1 / shift 0, zero head.
  ModelParams init_params(std::uint64_t seed) const;

  /// Predictions (n x output_dim). Eval mode uses running BN statistics; train
  /// mode uses batch statistics and, when `cache` is given, stores activations.
  /// Neither mode modifies `params`.
  Matrix forward(const ModelParams& params, const ImageBatch& batch, Mode mode,
                 ForwardCache* cache = nullptr) const;

  Gradients backward(const ModelParams& params, const ForwardCache& cache,
                     const Matrix& d_predictions) const;

  /// Offsets of the head weight matrix / bias within ModelParams::weights.
  std::size_t head_weight_offset() const { return head_w_; }
  std::size_t head_bias_offset() const { return head_b_; }

  struct Conv {
    int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
    std::size_t w = 0;
  };
  struct Bn {
    int channels = 0;
    std::size_t gamma = 0, beta = 0;  // into weights
    std::size_t mean = 0, var = 0;    // into buffers
  };
  struct Block {
    Conv conv1, conv2, proj;
    Bn bn1, bn2, bn_proj;
    bool has_proj = false;
  };

  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  NetConfig config_;
  Conv stem_;
  Bn stem_bn_;
  std::vector<Block> blocks_;
  std::size_t head_w_ = 0, head_b_ = 0;
  int feature_channels_ = 0;
  std::size_t num_weights_ = 0, num_buffers_ = 0;
};

struct LossWeights {
  std::vector<double> sigma;
  std::vector<double> mid;  // centre of the parameter region; documents the scaling only
};

/// sigma = (25, 50/11), centre (0.25, 0) for a in [0.05, 0.45], b in [-1.1, 1.1].
LossWeights henon_loss_weights();
/// sigma = 20/27, centre 8.25 for mu in [1.5, 15].
LossWeights sam_loss_weights();

struct LossResult {
  double loss = 0.0;
  Matrix grad;  // d loss / d predictions
};

/// Batch mean of 0.5 * sum_j sigma_j^2 (pred_j - target_j)^2.
LossResult weighted_mse(const Matrix& pred, const Matrix& target, const LossWeights& weights);

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled weight decay, then a bias-corrected Adam update. Also folds the
/// gradient's batch statistics into the BN running statistics.
void adam_step(ModelParams& params, const Gradients& grads, const AdamConfig& cfg);

/// "RMCK", u32 version, u32 length + JSON blob {"net": ..., "meta": ...},
/// u64 step, then weights / buffers / adam_m / adam_v as u64 count + raw f64.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::string& meta_json = "{}");

struct Checkpoint {
  ModelParams params;
  std::string meta_json;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rmps
