#include "rmps/nn.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "json.hpp"

namespace rmps {

using Tensor = ForwardCache::Tensor;
using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

// ---------------------------------------------------------------------------
// NetConfig
// ---------------------------------------------------------------------------

void NetConfig::validate() const {
  if (input_height < 1 || input_width < 1) throw InvalidArgument("NetConfig: bad input size");
  if (stem_channels < 1 || output_dim < 1) throw InvalidArgument("NetConfig: bad channel counts");
  for (const auto& s : stages) {
    if (s.blocks < 1 || s.channels < 1) throw InvalidArgument("NetConfig: bad stage");
    if (s.stride != 1 && s.stride != 2) throw InvalidArgument("NetConfig: stride must be 1 or 2");
  }
  if (!(bn_eps > 0.0) || !(bn_momentum > 0.0 && bn_momentum <= 1.0))
    throw InvalidArgument("NetConfig: bad batch-norm settings");
}

std::string NetConfig::to_json() const {
  nlohmann::json j;
  j["input_height"] = input_height;
  j["input_width"] = input_width;
  j["stem_channels"] = stem_channels;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages)
    j["stages"].push_back({{"blocks", s.blocks}, {"channels", s.channels}, {"stride", s.stride}});
  j["output_dim"] = output_dim;
  j["bn_momentum"] = bn_momentum;
  j["bn_eps"] = bn_eps;
  return j.dump();
}

NetConfig NetConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NetConfig c;
    c.input_height = j.at("input_height");
    c.input_width = j.at("input_width");
    c.stem_channels = j.at("stem_channels");
    c.stages.clear();
    for (const auto& s : j.at("stages")) c.stages.push_back({s.at("blocks"), s.at("channels"), s.at("stride")});
    c.output_dim = j.at("output_dim");
    c.bn_momentum = j.at("bn_momentum");
    c.bn_eps = j.at("bn_eps");
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("NetConfig JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

ResNet::ResNet(NetConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t w = 0, b = 0;
  auto conv = [&](int cin, int cout, int k, int stride) {
    Conv c{cin, cout, k, stride, k / 2, w};
    w += static_cast<std::size_t>(cin) * cout * k * k;
    return c;
  };
  auto bn = [&](int ch) {
    Bn n{ch, w, w + ch, b, b + ch};
    w += 2 * static_cast<std::size_t>(ch);
    b += 2 * static_cast<std::size_t>(ch);
    return n;
  };
  stem_ = conv(1, config_.stem_channels, 3, 1);
  stem_bn_ = bn(config_.stem_channels);
  int ch = config_.stem_channels;
  for (const auto& stage : config_.stages) {
    for (int i = 0; i < stage.blocks; ++i) {
      const int stride = i == 0 ? stage.stride : 1;
      Block blk;
      blk.conv1 = conv(ch, stage.channels, 3, stride);
      blk.bn1 = bn(stage.channels);
      blk.conv2 = conv(stage.channels, stage.channels, 3, 1);
      blk.bn2 = bn(stage.channels);
      blk.has_proj = stride != 1 || ch != stage.channels;
      if (blk.has_proj) {
        blk.proj = conv(ch, stage.channels, 1, stride);
        blk.bn_proj = bn(stage.channels);
      }
      blocks_.push_back(blk);
      ch = stage.channels;
    }
  }
  feature_channels_ = ch;
  head_w_ = w;
  w += static_cast<std::size_t>(config_.output_dim) * ch;
  head_b_ = w;
  w += static_cast<std::size_t>(config_.output_dim);
  num_weights_ = w;
  num_buffers_ = b;
}

ModelParams ResNet::init_params(std::uint64_t seed) const {
  ModelParams p;
  p.config = config_;
  p.weights.assign(num_weights_, 0.0);
  p.buffers.assign(num_buffers_, 0.0);
  p.adam_m.assign(num_weights_, 0.0);
  p.adam_v.assign(num_weights_, 0.0);
  Rng rng = make_rng({seed, 0x6e6eULL});
  auto init_conv = [&](const Conv& c) {
    const double fan_in = static_cast<double>(c.cin) * c.k * c.k;
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
    const std::size_t n = static_cast<std::size_t>(c.cout) * c.cin * c.k * c.k;
    for (std::size_t i = 0; i < n; ++i) p.weights[c.w + i] = dist(rng);
  };
  auto init_bn = [&](const Bn& n) {
    std::fill_n(p.weights.begin() + static_cast<std::ptrdiff_t>(n.gamma), n.channels, 1.0);
    std::fill_n(p.buffers.begin() + static_cast<std::ptrdiff_t>(n.var), n.channels, 1.0);
  };
  init_conv(stem_);
  init_bn(stem_bn_);
  for (const auto& blk : blocks_) {
    init_conv(blk.conv1);
    init_bn(blk.bn1);
    init_conv(blk.conv2);
    init_bn(blk.bn2);
    if (blk.has_proj) {
      init_conv(blk.proj);
      init_bn(blk.bn_proj);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

namespace {

Tensor make_tensor(int c, int n, int h, int w) {
  return {c, n, h, w, std::vector<double>(static_cast<std::size_t>(c) * n * h * w, 0.0)};
}

int out_extent(int in, const ResNet::Conv& cv) { return (in + 2 * cv.pad - cv.k) / cv.stride + 1; }

using StridedMap = Eigen::Map<Matrix, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

// Output columns [lo, hi) whose input index ox * s + off lies inside [0, extent).
std::pair<int, int> valid_range(int off, int s, int extent, int out) {
  const int lo = off >= 0 ? 0 : (-off + s - 1) / s;
  const int hi = extent - 1 - off < 0 ? 0 : std::min(out, (extent - 1 - off) / s + 1);
  return {std::min(lo, hi), hi};
}

// Patch matrix of one sample: (cin * k * k) x (ho * wo).
void im2col(const Tensor& x, int n, const ResNet::Conv& cv, int ho, int wo, double* col) {
  const int k = cv.k, s = cv.stride, p = cv.pad;
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < x.c; ++c) {
    const double* plane = x.data.data() + (static_cast<std::size_t>(c) * x.n + n) * x.h * x.w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        const auto [lo, hi] = valid_range(kx - p, s, x.w, wo);
        for (int oy = 0; oy < ho; ++oy) {
          double* dst = row + static_cast<std::size_t>(oy) * wo;
          const int iy = oy * s + ky - p;
          if (iy < 0 || iy >= x.h) {
            std::fill_n(dst, wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * x.w;
          const int off = kx - p;
          std::fill(dst, dst + lo, 0.0);
          if (s == 1) {
            std::copy(src + lo + off, src + hi + off, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * s + off];
          }
          std::fill(dst + hi, dst + wo, 0.0);
        }
      }
  }
}

void col2im(const double* col, int n, const ResNet::Conv& cv, int ho, int wo, Tensor& dx) {
  const int k = cv.k, s = cv.stride, p = cv.pad;
  const std::size_t cols = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < dx.c; ++c) {
    double* plane = dx.data.data() + (static_cast<std::size_t>(c) * dx.n + n) * dx.h * dx.w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * cols;
        const auto [lo, hi] = valid_range(kx - p, s, dx.w, wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s + ky - p;
          if (iy < 0 || iy >= dx.h) continue;
          const double* src = row + static_cast<std::size_t>(oy) * wo;
          double* dst = plane + static_cast<std::size_t>(iy) * dx.w;
          const int off = kx - p;
          for (int ox = lo; ox < hi; ++ox) dst[ox * s + off] += src[ox];
        }
      }
  }
}

std::vector<double>& workspace(int slot, std::size_t size) {
  thread_local std::vector<double> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < size) b.resize(size);
  return b;
}

bool is_pointwise(const ResNet::Conv& cv) { return cv.k == 1 && cv.stride == 1; }

Tensor conv_forward(const std::vector<double>& weights, const ResNet::Conv& cv, const Tensor& x) {
  const int ho = out_extent(x.h, cv), wo = out_extent(x.w, cv);
  Tensor y = make_tensor(cv.cout, x.n, ho, wo);
  const Eigen::Index k = static_cast<Eigen::Index>(cv.cin) * cv.k * cv.k;
  const Eigen::Index hw = static_cast<Eigen::Index>(ho) * wo;
  const Eigen::Index in_stride = static_cast<Eigen::Index>(x.n) * x.h * x.w;
  const Eigen::Index out_stride = static_cast<Eigen::Index>(x.n) * hw;
  ConstMap w(weights.data() + cv.w, cv.cout, k);
  double* col = workspace(0, static_cast<std::size_t>(k * hw)).data();
  for (int n = 0; n < x.n; ++n) {
    StridedMap out(y.data.data() + n * hw, cv.cout, hw, Eigen::OuterStride<>(out_stride));
    if (is_pointwise(cv)) {
      out.noalias() = w * ConstStridedMap(x.data.data() + n * hw, x.c, hw, Eigen::OuterStride<>(in_stride));
    } else {
      im2col(x, n, cv, ho, wo, col);
      out.noalias() = w * ConstMap(col, k, hw);
    }
  }
  return y;
}

/// Accumulates dL/dW into `dw`; writes dL/dx into `dx` when given.
void conv_backward(const std::vector<double>& weights, const ResNet::Conv& cv, const Tensor& x,
                   const Tensor& dy, double* dw, Tensor* dx) {
  const Eigen::Index k = static_cast<Eigen::Index>(cv.cin) * cv.k * cv.k;
  const Eigen::Index hw = static_cast<Eigen::Index>(dy.h) * dy.w;
  const Eigen::Index in_stride = static_cast<Eigen::Index>(x.n) * x.h * x.w;
  const Eigen::Index out_stride = static_cast<Eigen::Index>(dy.n) * hw;
  ConstMap w(weights.data() + cv.w, cv.cout, k);
  MutMap gw(dw + cv.w, cv.cout, k);
  double* col = workspace(0, static_cast<std::size_t>(k * hw)).data();
  double* dcol = workspace(1, static_cast<std::size_t>(k * hw)).data();
  if (dx) *dx = make_tensor(x.c, x.n, x.h, x.w);
  for (int n = 0; n < dy.n; ++n) {
    ConstStridedMap g(dy.data.data() + n * hw, cv.cout, hw, Eigen::OuterStride<>(out_stride));
    if (is_pointwise(cv)) {
      gw.noalias() += g * ConstStridedMap(x.data.data() + n * hw, x.c, hw, Eigen::OuterStride<>(in_stride)).transpose();
      if (dx)
        StridedMap(dx->data.data() + n * hw, x.c, hw, Eigen::OuterStride<>(in_stride)).noalias() = w.transpose() * g;
      continue;
    }
    im2col(x, n, cv, dy.h, dy.w, col);
    gw.noalias() += g * ConstMap(col, k, hw).transpose();
    if (dx) {
      MutMap(dcol, k, hw).noalias() = w.transpose() * g;
      col2im(dcol, n, cv, dy.h, dy.w, *dx);
    }
  }
}

void bn_forward(const ModelParams& params, const ResNet::Bn& bn, double eps, Mode mode, Tensor& x,
                ForwardCache::Bn* cache) {
  const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
  const double* gamma = params.weights.data() + bn.gamma;
  const double* beta = params.weights.data() + bn.beta;
  if (cache) {
    cache->xhat = make_tensor(x.c, x.n, x.h, x.w);
    cache->inv_std.assign(x.c, 0.0);
    cache->mean.assign(x.c, 0.0);
    cache->var.assign(x.c, 0.0);
  }
  for (int c = 0; c < x.c; ++c) {
    double* v = x.data.data() + c * m;
    double mean = 0.0, var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t i = 0; i < m; ++i) mean += v[i];
      mean /= static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) var += (v[i] - mean) * (v[i] - mean);
      var /= static_cast<double>(m);
    } else {
      mean = params.buffers[bn.mean + c];
      var = params.buffers[bn.var + c];
    }
    const double inv = 1.0 / std::sqrt(var + eps);
    if (cache) {
      double* xh = cache->xhat.data.data() + c * m;
      for (std::size_t i = 0; i < m; ++i) xh[i] = (v[i] - mean) * inv;
      cache->inv_std[c] = inv;
      cache->mean[c] = mean;
      cache->var[c] = var;
    }
    for (std::size_t i = 0; i < m; ++i) v[i] = gamma[c] * ((v[i] - mean) * inv) + beta[c];
  }
}

/// In place: dy -> dx. Accumulates d gamma / d beta.
void bn_backward(const ModelParams& params, const ResNet::Bn& bn, const ForwardCache::Bn& cache,
                 Tensor& d, double* grads) {
  const std::size_t m = static_cast<std::size_t>(d.n) * d.h * d.w;
  const double md = static_cast<double>(m);
  for (int c = 0; c < d.c; ++c) {
    double* g = d.data.data() + c * m;
    const double* xh = cache.xhat.data.data() + c * m;
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum_g += g[i];
      sum_gx += g[i] * xh[i];
    }
    grads[bn.gamma + c] += sum_gx;
    grads[bn.beta + c] += sum_g;
    const double scale = params.weights[bn.gamma + c] * cache.inv_std[c] / md;
    for (std::size_t i = 0; i < m; ++i) g[i] = scale * (md * g[i] - sum_g - xh[i] * sum_gx);
  }
}

void relu(Tensor& x) {
  for (double& v : x.data) v = v > 0.0 ? v : 0.0;
}

void relu_mask(Tensor& d, const Tensor& activated) {
  for (std::size_t i = 0; i < d.data.size(); ++i)
    if (!(activated.data[i] > 0.0)) d.data[i] = 0.0;
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

Matrix ResNet::forward(const ModelParams& params, const ImageBatch& batch, Mode mode,
                       ForwardCache* cache) const {
  if (params.weights.size() != num_weights_ || params.buffers.size() != num_buffers_)
    throw ShapeMismatch("forward: parameters do not match the network layout");
  if (batch.n < 1 || batch.height != config_.input_height || batch.width != config_.input_width ||
      batch.data.size() != static_cast<std::size_t>(batch.n) * batch.height * batch.width)
    throw ShapeMismatch("forward: image batch does not match the configured input size");
  if (mode == Mode::Eval) cache = nullptr;
  const double eps = config_.bn_eps;

  Tensor x{1, batch.n, batch.height, batch.width, batch.data};
  Tensor s = conv_forward(params.weights, stem_, x);
  bn_forward(params, stem_bn_, eps, mode, s, cache ? &cache->stem_bn : nullptr);
  relu(s);
  if (cache) {
    cache->valid = false;
    cache->batch = batch.n;
    cache->input = std::move(x);
    cache->stem_out = s;
    cache->blocks.assign(blocks_.size(), {});
  }

  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const Block& blk = blocks_[bi];
    ForwardCache::Block* bc = cache ? &cache->blocks[bi] : nullptr;
    Tensor t = conv_forward(params.weights, blk.conv1, s);
    bn_forward(params, blk.bn1, eps, mode, t, bc ? &bc->bn1 : nullptr);
    relu(t);
    Tensor u = conv_forward(params.weights, blk.conv2, t);
    bn_forward(params, blk.bn2, eps, mode, u, bc ? &bc->bn2 : nullptr);
    if (blk.has_proj) {
      Tensor sc = conv_forward(params.weights, blk.proj, s);
      bn_forward(params, blk.bn_proj, eps, mode, sc, bc ? &bc->bn_proj : nullptr);
      add_into(u, sc);
    } else {
      add_into(u, s);
    }
    relu(u);
    if (bc) {
      bc->input = std::move(s);
      bc->act1 = std::move(t);
      bc->output = u;
    }
    s = std::move(u);
  }

  // Global average pool -> (n x channels).
  const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
  Matrix features(s.n, s.c);
  for (int c = 0; c < s.c; ++c)
    for (int n = 0; n < s.n; ++n) {
      const double* v = s.data.data() + (static_cast<std::size_t>(c) * s.n + n) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += v[i];
      features(n, c) = acc / static_cast<double>(hw);
    }

  ConstMap head(params.weights.data() + head_w_, config_.output_dim, feature_channels_);
  Eigen::Map<const Eigen::RowVectorXd> bias(params.weights.data() + head_b_, config_.output_dim);
  Matrix pred = features * head.transpose();
  pred.rowwise() += bias;

  if (cache) {
    cache->features = std::move(features);
    cache->step = params.step;
    cache->valid = true;
  }
  return pred;
}

Gradients ResNet::backward(const ModelParams& params, const ForwardCache& cache,
                           const Matrix& d_pred) const {
  if (!cache.valid || cache.step != params.step)
    throw StaleCache("backward: cache does not come from a train-mode forward of these parameters");
  if (d_pred.rows() != cache.batch || d_pred.cols() != config_.output_dim)
    throw ShapeMismatch("backward: prediction gradient has the wrong shape");

  Gradients g;
  g.weights.assign(num_weights_, 0.0);
  double* gw = g.weights.data();

  MutMap(gw + head_w_, config_.output_dim, feature_channels_).noalias() =
      d_pred.transpose() * cache.features;
  Eigen::Map<Eigen::RowVectorXd>(gw + head_b_, config_.output_dim) = d_pred.colwise().sum();
  ConstMap head(params.weights.data() + head_w_, config_.output_dim, feature_channels_);
  const Matrix d_feat = d_pred * head;

  const Tensor& last = cache.blocks.empty() ? cache.stem_out : cache.blocks.back().output;
  Tensor ds = make_tensor(last.c, last.n, last.h, last.w);
  const std::size_t hw = static_cast<std::size_t>(last.h) * last.w;
  for (int c = 0; c < last.c; ++c)
    for (int n = 0; n < last.n; ++n) {
      double* v = ds.data.data() + (static_cast<std::size_t>(c) * last.n + n) * hw;
      std::fill_n(v, hw, d_feat(n, c) / static_cast<double>(hw));
    }

  for (std::size_t bi = blocks_.size(); bi-- > 0;) {
    const Block& blk = blocks_[bi];
    const ForwardCache::Block& bc = cache.blocks[bi];
    relu_mask(ds, bc.output);

    Tensor du = ds;
    bn_backward(params, blk.bn2, bc.bn2, du, gw);
    Tensor da1;
    conv_backward(params.weights, blk.conv2, bc.act1, du, gw, &da1);
    relu_mask(da1, bc.act1);
    bn_backward(params, blk.bn1, bc.bn1, da1, gw);
    Tensor dx;
    conv_backward(params.weights, blk.conv1, bc.input, da1, gw, &dx);

    if (blk.has_proj) {
      Tensor dp = std::move(ds);
      bn_backward(params, blk.bn_proj, bc.bn_proj, dp, gw);
      Tensor dxp;
      conv_backward(params.weights, blk.proj, bc.input, dp, gw, &dxp);
      add_into(dx, dxp);
    } else {
      add_into(dx, ds);
    }
    ds = std::move(dx);
  }

  relu_mask(ds, cache.stem_out);
  bn_backward(params, stem_bn_, cache.stem_bn, ds, gw);
  conv_backward(params.weights, stem_, cache.input, ds, gw, nullptr);

  // Batch statistics for the running-average update (unbiased variance).
  g.batch_stats.assign(num_buffers_, 0.0);
  auto put = [&](const Bn& bn, const ForwardCache::Bn& bc, const Tensor& shape) {
    const double m = static_cast<double>(shape.n) * shape.h * shape.w;
    const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
    for (int c = 0; c < bn.channels; ++c) {
      g.batch_stats[bn.mean + c] = bc.mean[c];
      g.batch_stats[bn.var + c] = bc.var[c] * unbias;
    }
  };
  put(stem_bn_, cache.stem_bn, cache.stem_out);
  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    const Block& blk = blocks_[bi];
    const auto& bc = cache.blocks[bi];
    put(blk.bn1, bc.bn1, bc.act1);
    put(blk.bn2, bc.bn2, bc.output);
    if (blk.has_proj) put(blk.bn_proj, bc.bn_proj, bc.output);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Loss and optimiser
// ---------------------------------------------------------------------------

LossWeights henon_loss_weights() { return {{25.0, 50.0 / 11.0}, {0.25, 0.0}}; }

LossWeights sam_loss_weights() { return {{20.0 / 27.0}, {8.25}}; }

LossResult weighted_mse(const Matrix& pred, const Matrix& target, const LossWeights& weights) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      static_cast<std::size_t>(pred.cols()) != weights.sigma.size())
    throw ShapeMismatch("weighted_mse: shape mismatch");
  LossResult r;
  r.grad.resize(pred.rows(), pred.cols());
  const double inv_n = 1.0 / static_cast<double>(pred.rows());
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      const double s2 = weights.sigma[j] * weights.sigma[j];
      const double e = pred(i, j) - target(i, j);
      r.loss += 0.5 * s2 * e * e;
      r.grad(i, j) = s2 * e * inv_n;
    }
  r.loss *= inv_n;
  return r;
}

void adam_step(ModelParams& params, const Gradients& grads, const AdamConfig& cfg) {
  if (grads.weights.size() != params.weights.size() || params.adam_m.size() != params.weights.size() ||
      params.adam_v.size() != params.weights.size())
    throw ShapeMismatch("adam_step: gradient / moment buffers do not match parameters");
  const auto t = static_cast<double>(++params.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    const double g = grads.weights[i];
    double& m = params.adam_m[i];
    double& v = params.adam_v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    params.weights[i] *= decay;
    params.weights[i] -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
  }
  if (!grads.batch_stats.empty()) {
    if (grads.batch_stats.size() != params.buffers.size())
      throw ShapeMismatch("adam_step: batch statistics do not match buffers");
    const double mom = params.config.bn_momentum;
    for (std::size_t i = 0; i < params.buffers.size(); ++i)
      params.buffers[i] = (1.0 - mom) * params.buffers[i] + mom * grads.batch_stats[i];
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr char kCkptMagic[4] = {'R', 'M', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::string& meta_json) {
  nlohmann::json blob;
  blob["net"] = nlohmann::json::parse(params.config.to_json());
  blob["meta"] = nlohmann::json::parse(meta_json);
  const std::string text = blob.dump();
  io::ByteWriter w;
  w.raw(kCkptMagic, 4);
  w.u32(kCkptVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.raw(text.data(), text.size());
  w.u64(params.step);
  for (const auto* arr : {&params.weights, &params.buffers, &params.adam_m, &params.adam_v}) {
    w.u64(arr->size());
    for (double v : *arr) w.f64(v);
  }
  io::write_file_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string buf = io::read_file(path);
  io::ByteReader r(buf, path);
  r.expect_magic(kCkptMagic);
  if (r.u32() != kCkptVersion) throw FormatError(path.string() + ": unsupported checkpoint version");
  const auto len = r.u32();
  const std::string text = r.bytes(len);
  Checkpoint ck;
  nlohmann::json blob;
  try {
    blob = nlohmann::json::parse(text);
    ck.params.config = NetConfig::from_json(blob.at("net").dump());
    ck.meta_json = blob.at("meta").dump();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
  ck.params.step = r.u64();
  for (auto* arr : {&ck.params.weights, &ck.params.buffers, &ck.params.adam_m, &ck.params.adam_v}) {
    const auto n = r.u64();
    r.need(n * 8);
    arr->resize(n);
    for (auto& v : *arr) v = r.f64();
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
  const ResNet net(ck.params.config);
  if (ck.params.weights.size() != net.num_weights() || ck.params.buffers.size() != net.num_buffers() ||
      ck.params.adam_m.size() != net.num_weights() || ck.params.adam_v.size() != net.num_weights())
    throw FormatError(path.string() + ": array sizes do not match the network layout");
  return ck;
}

}  // namespace rmps
