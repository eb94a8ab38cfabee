#include "rmps/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace rmps {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json raster_to_json(const RasterSpec& r) {
  return {{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min}, {"y_max", r.y_max},
          {"width", r.width}, {"height", r.height}, {"alpha", r.alpha}};
}

RasterSpec raster_from_json(const json& j) {
  RasterSpec r;
  r.x_min = j.at("x_min");
  r.x_max = j.at("x_max");
  r.y_min = j.at("y_min");
  r.y_max = j.at("y_max");
  r.width = j.at("width");
  r.height = j.at("height");
  r.alpha = j.at("alpha");
  return r;
}

std::vector<double> render(const TrajectorySet& t, const RasterSpec& spec) { return rasterize(t, spec).pixels; }

std::string param_name(SystemId system, std::size_t j) {
  if (system == SystemId::Sam) return "mu";
  return j == 0 ? "a" : "b";
}

void write_metrics_header(std::ofstream& out, SystemId system) {
  out << "step,split,loss";
  for (int j = 0; j < parameter_dim(system); ++j) out << ",rmse_" << param_name(system, std::size_t(j));
  out << ",wall_s\n";
}

void write_metrics_row(std::ofstream& out, const Metrics& m) {
  char buf[64];
  out << m.step << ',' << m.split;
  std::snprintf(buf, sizeof buf, ",%.17g", m.loss);
  out << buf;
  for (double r : m.rmse) {
    std::snprintf(buf, sizeof buf, ",%.17g", r);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, ",%.3f\n", m.wall_s);
  out << buf;
  out.flush();
}

// Accumulates squared errors so a split's loss equals weighted_mse over all of it.
struct ErrorAccumulator {
  LossWeights weights;
  double loss_sum = 0.0;
  std::vector<double> sq;
  std::size_t count = 0;

  explicit ErrorAccumulator(LossWeights w) : weights(std::move(w)), sq(weights.sigma.size(), 0.0) {}

  void add(const Matrix& pred, const Matrix& target) {
    loss_sum += weighted_mse(pred, target, weights).loss * static_cast<double>(pred.rows());
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
      for (Eigen::Index j = 0; j < pred.cols(); ++j) sq[j] += (pred(i, j) - target(i, j)) * (pred(i, j) - target(i, j));
    count += static_cast<std::size_t>(pred.rows());
  }

  Metrics finish(std::string split) const {
    Metrics m;
    m.split = std::move(split);
    m.count = count;
    if (count == 0) return m;
    m.loss = loss_sum / static_cast<double>(count);
    for (double s : sq) m.rmse.push_back(std::sqrt(s / static_cast<double>(count)));
    return m;
  }
};

// Eval-mode pass over `indices`, rendering inputs with `image(i)`.
template <class ImageFn>
Metrics evaluate_indices(const ResNet& net, const ModelParams& params, const std::vector<std::size_t>& indices,
                         const std::vector<std::vector<double>>& thetas, const LossWeights& weights, int batch,
                         int threads, std::string split, ImageFn image) {
  ErrorAccumulator acc(weights);
  const int h = net.config().input_height, w = net.config().input_width, d = net.config().output_dim;
  const std::size_t px = static_cast<std::size_t>(h) * w;
  const unsigned workers = resolve_threads(threads);
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(batch), indices.size() - start);
    ImageBatch b{static_cast<int>(n), h, w, std::vector<double>(n * px)};
    Matrix target(static_cast<Eigen::Index>(n), d);
    parallel_for(n, workers, [&](std::size_t i) {
      const std::vector<double> img = image(indices[start + i]);
      std::copy(img.begin(), img.end(), b.data.begin() + static_cast<std::ptrdiff_t>(i * px));
    });
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) target(static_cast<Eigen::Index>(i), j) = thetas[indices[start + i]][j];
    acc.add(net.forward(params, b, Mode::Eval), target);
  }
  return acc.finish(std::move(split));
}

const std::vector<std::size_t>& split_part(const SplitIndex& s, const std::string& name,
                                           std::vector<std::size_t>& all, std::size_t total) {
  if (name == "train") return s.train;
  if (name == "validation") return s.validation;
  if (name == "test") return s.test;
  if (name == "all") {
    all.resize(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  throw InvalidArgument("unknown split '" + name + "' (train, validation, test, all)");
}

NetConfig net_for(const TrainConfig& cfg, SystemId system) {
  NetConfig n = cfg.net;
  n.input_height = cfg.raster.height;
  n.input_width = cfg.raster.width;
  n.output_dim = parameter_dim(system);
  return n;
}

constexpr std::uint64_t kOrderTag = 0x6f72646572ULL;

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw InvalidArgument("TrainConfig: steps must be >= 1");
  if (batch < 1) throw InvalidArgument("TrainConfig: batch must be >= 1");
  if (val_interval < 1) throw InvalidArgument("TrainConfig: val_interval must be >= 1");
  if (!(adam.lr > 0.0) || adam.weight_decay < 0.0) throw InvalidArgument("TrainConfig: bad optimiser settings");
  raster.validate();
  limits.validate();
  net.validate();
}

TrainConfig default_train_config(SystemId system, int image_size) {
  TrainConfig c;
  c.raster = system == SystemId::Henon ? henon_raster_spec(image_size) : sam_raster_spec(image_size);
  c.limits = system == SystemId::Henon ? henon_augment_limits() : sam_augment_limits();
  c.net.input_height = image_size;
  c.net.input_width = image_size;
  c.net.output_dim = parameter_dim(system);
  return c;
}

LossWeights loss_weights_for(SystemId system) {
  return system == SystemId::Henon ? henon_loss_weights() : sam_loss_weights();
}

std::string ModelMeta::to_json() const {
  json j;
  j["system"] = to_string(system);
  j["raster"] = raster_to_json(raster);
  j["limits"] = {{"min_traj", limits.min_traj}, {"max_traj", limits.max_traj},
                 {"min_steps", limits.min_steps}, {"max_steps", limits.max_steps}};
  j["loss"] = {{"sigma", loss.sigma}, {"mid", loss.mid}};
  j["seed"] = seed;
  j["split_seed"] = split_seed;
  j["augment"] = augment;
  j["dataset"] = dataset;
  j["best_step"] = best_step;
  j["best_validation_loss"] = best_validation_loss;
  return j.dump();
}

ModelMeta ModelMeta::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ModelMeta m;
    m.system = parse_system(j.at("system"));
    m.raster = raster_from_json(j.at("raster"));
    const auto& l = j.at("limits");
    m.limits = {l.at("min_traj"), l.at("max_traj"), l.at("min_steps"), l.at("max_steps")};
    m.loss.sigma = j.at("loss").at("sigma").get<std::vector<double>>();
    m.loss.mid = j.at("loss").at("mid").get<std::vector<double>>();
    m.seed = j.at("seed");
    m.split_seed = j.at("split_seed");
    m.augment = j.at("augment");
    m.dataset = j.at("dataset");
    m.best_step = j.at("best_step");
    m.best_validation_loss = j.at("best_validation_loss");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
}

std::vector<double> augmented_image(const Sample& sample, const RasterSpec& raster, const AugmentLimits& limits,
                                    std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  Rng rng = make_rng({seed, index, tag});
  return render(augment(sample.trajectories, limits, rng), raster);
}

TrainingImages::TrainingImages(const std::vector<Sample>& samples, const SplitIndex& split, const RasterSpec& raster,
                               const AugmentLimits& limits, bool augment, std::uint64_t seed, int threads)
    : samples_(samples), raster_(raster), limits_(limits), augment_(augment), seed_(seed) {
  const unsigned workers = resolve_threads(threads);
  validation_.resize(samples.size());
  parallel_for(split.validation.size(), workers, [&](std::size_t k) {
    const std::size_t i = split.validation[k];
    validation_[i] = augment_ ? augmented_image(samples_[i], raster_, limits_, seed_, i, 0)
                              : render(samples_[i].trajectories, raster_);
  });
  if (!augment_) {
    clean_.resize(samples.size());
    parallel_for(split.train.size(), workers, [&](std::size_t k) {
      const std::size_t i = split.train[k];
      clean_[i] = render(samples_[i].trajectories, raster_);
    });
  }
}

std::vector<double> TrainingImages::train_image(std::size_t index, std::uint64_t epoch) const {
  if (epoch == 0) throw InvalidArgument("train_image: epochs count from 1");
  if (!augment_) {
    if (clean_.at(index).empty()) throw InvalidArgument("train_image: sample is not in the training split");
    return clean_[index];
  }
  return augmented_image(samples_.at(index), raster_, limits_, seed_, index, epoch);
}

const std::vector<double>& TrainingImages::validation_image(std::size_t index) const {
  const auto& v = validation_.at(index);
  if (v.empty()) throw InvalidArgument("validation_image: sample is not in the validation split");
  return v;
}

TrainResult train(const TrainConfig& cfg_in) {
  const auto t0 = Clock::now();
  const Dataset ds(cfg_in.dataset);
  const SystemId system = ds.system();
  TrainConfig cfg = cfg_in;
  cfg.net = net_for(cfg_in, system);
  cfg.validate();
  const int d = parameter_dim(system);
  const LossWeights weights = loss_weights_for(system);

  const std::vector<Sample> samples = ds.load_all(cfg.threads);
  const auto& thetas = ds.manifest().thetas;
  TrainResult result;
  result.split = split(thetas, {}, cfg.split_seed);
  if (result.split.train.empty() || result.split.validation.empty())
    throw InvalidArgument("train: dataset too small for a training and a validation split");

  const TrainingImages images(samples, result.split, cfg.raster, cfg.limits, cfg.augment, cfg.seed, cfg.threads);
  const ResNet net(cfg.net);
  ModelParams params = net.init_params(derive_seed({cfg.seed, 0x696e6974ULL}));
  ModelParams best = params;

  fs::create_directories(cfg.out_dir);
  result.checkpoint = cfg.out_dir / "best.rmck";
  result.log = cfg.out_dir / "metrics.csv";
  std::ofstream log(result.log, std::ios::trunc);
  if (!log) throw Error("train: cannot write " + result.log.string());
  write_metrics_header(log, system);

  ModelMeta meta;
  meta.system = system;
  meta.raster = cfg.raster;
  meta.limits = cfg.limits;
  meta.loss = weights;
  meta.seed = cfg.seed;
  meta.split_seed = cfg.split_seed;
  meta.augment = cfg.augment;
  meta.dataset = fs::absolute(cfg.dataset).lexically_normal().string();

  const int h = cfg.raster.height, w = cfg.raster.width;
  const std::size_t px = static_cast<std::size_t>(h) * w;
  const unsigned workers = resolve_threads(cfg.threads);

  std::vector<std::size_t> order = result.split.train;
  std::uint64_t epoch = 0;
  std::size_t cursor = order.size();
  double best_loss = std::numeric_limits<double>::infinity();
  double train_sum = 0.0;
  int train_batches = 0;
  ForwardCache cache;

  auto validate_now = [&](std::uint64_t step) {
    Metrics m = evaluate_indices(net, params, result.split.validation, thetas, weights, 64, cfg.threads,
                                 "validation", [&](std::size_t i) { return images.validation_image(i); });
    m.step = step;
    m.wall_s = seconds_since(t0);
    Metrics tr;
    tr.split = "train";
    tr.step = step;
    tr.count = static_cast<std::size_t>(train_batches);
    tr.loss = train_batches ? train_sum / train_batches : 0.0;
    tr.rmse.assign(static_cast<std::size_t>(d), std::nan(""));
    tr.wall_s = m.wall_s;
    write_metrics_row(log, tr);
    write_metrics_row(log, m);
    train_sum = 0.0;
    train_batches = 0;
    if (m.loss < best_loss) {
      best_loss = m.loss;
      best = params;
      result.best_step = step;
      result.best_validation = m;
      meta.best_step = step;
      meta.best_validation_loss = m.loss;
      save_checkpoint(params, result.checkpoint, meta.to_json());
    }
    result.final_validation = m;
  };

  for (int step = 1; step <= cfg.steps; ++step) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), order.size());
    std::vector<std::pair<std::size_t, std::uint64_t>> picks;
    while (picks.size() < n) {
      if (cursor == order.size()) {
        ++epoch;
        Rng shuffle = make_rng({cfg.seed, kOrderTag, epoch});
        std::shuffle(order.begin(), order.end(), shuffle);
        cursor = 0;
      }
      picks.emplace_back(order[cursor++], epoch);
    }
    ImageBatch batch{static_cast<int>(n), h, w, std::vector<double>(n * px)};
    Matrix target(static_cast<Eigen::Index>(n), d);
    parallel_for(n, workers, [&](std::size_t i) {
      const auto img = images.train_image(picks[i].first, picks[i].second);
      std::copy(img.begin(), img.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * px));
    });
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) target(static_cast<Eigen::Index>(i), j) = thetas[picks[i].first][j];

    const Matrix pred = net.forward(params, batch, Mode::Train, &cache);
    const LossResult loss = weighted_mse(pred, target, weights);
    if (!std::isfinite(loss.loss)) {
      log.flush();
      throw TrainingDiverged("train: non-finite loss at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch) + "); lower the learning rate or check the dataset");
    }
    train_sum += loss.loss;
    ++train_batches;
    adam_step(params, net.backward(params, cache, loss.grad), cfg.adam);

    if (step % cfg.val_interval == 0 || step == cfg.steps) validate_now(static_cast<std::uint64_t>(step));
  }

  auto clean = [&](std::size_t i) { return render(samples[i].trajectories, cfg.raster); };
  auto aug = [&](std::size_t i) { return augmented_image(samples[i], cfg.raster, cfg.limits, cfg.eval_seed, i, 0); };
  result.test_clean = evaluate_indices(net, best, result.split.test, thetas, weights, 64, cfg.threads, "test", clean);
  result.test_augmented =
      evaluate_indices(net, best, result.split.test, thetas, weights, 64, cfg.threads, "test_aug", aug);
  for (Metrics* m : {&result.test_clean, &result.test_augmented}) {
    m->step = result.best_step;
    m->wall_s = seconds_since(t0);
    if (m->count) write_metrics_row(log, *m);
  }
  return result;
}

namespace {

struct LoadedModel {
  ResNet net;
  ModelParams params;
  ModelMeta meta;
};

LoadedModel load_model(const fs::path& checkpoint) {
  Checkpoint c = load_checkpoint(checkpoint);
  ModelMeta meta = ModelMeta::from_json(c.meta_json);
  ResNet net(c.params.config);
  if (net.config().input_height != meta.raster.height || net.config().input_width != meta.raster.width ||
      net.config().output_dim != parameter_dim(meta.system))
    throw FormatError("checkpoint: network shape disagrees with its metadata");
  return {std::move(net), std::move(c.params), std::move(meta)};
}

}  // namespace

Metrics evaluate(const fs::path& checkpoint, const EvalOptions& opts) {
  const auto t0 = Clock::now();
  const LoadedModel model = load_model(checkpoint);
  const fs::path dir = opts.dataset.empty() ? fs::path(model.meta.dataset) : opts.dataset;
  const Dataset ds(dir);
  if (ds.system() != model.meta.system) throw InvalidArgument("evaluate: dataset system differs from the checkpoint");
  const auto& thetas = ds.manifest().thetas;
  const SplitIndex s = split(thetas, {}, model.meta.split_seed);
  std::vector<std::size_t> all;
  const auto& indices = split_part(s, opts.split, all, ds.size());
  if (opts.mode == InputMode::Fixed && (opts.n_traj < 0 || opts.n_steps < 0))
    throw InvalidArgument("evaluate: fixed trajectory count and length must be >= 0");

  const GenerationConfig& gen = ds.manifest().config;
  auto image = [&](std::size_t i) -> std::vector<double> {
    Sample sample = ds.load(i);
    switch (opts.mode) {
      case InputMode::Clean:
        return render(sample.trajectories, model.meta.raster);
      case InputMode::Augmented:
        return augmented_image(sample, model.meta.raster, model.meta.limits, opts.seed, i, 0);
      case InputMode::Fixed:
        break;
    }
    const int stored = static_cast<int>(sample.trajectories.size());
    if (opts.n_traj > stored) {
      GenerationConfig more = gen;
      if (gen.system == SystemId::Henon) {
        const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(opts.n_traj))));
        more.n_init = k * k;
        sample = make_henon_sample(sample.theta, more);
      } else {
        more.n_init = opts.n_traj;
        sample = make_sam_sample(sample.theta[0], more, i);
      }
    }
    const int count = opts.n_traj > 0 ? std::min<int>(opts.n_traj, static_cast<int>(sample.trajectories.size()))
                                      : static_cast<int>(sample.trajectories.size());
    std::size_t longest = 0;
    for (const auto& t : sample.trajectories) longest = std::max(longest, t.size());
    const int length = opts.n_steps > 0 ? opts.n_steps : static_cast<int>(longest);
    Rng rng = make_rng({opts.seed, i, 0});
    return render(augment(sample.trajectories, {count, count, length, length}, rng), model.meta.raster);
  };
  Metrics m = evaluate_indices(model.net, model.params, indices, thetas, model.meta.loss, opts.batch, opts.threads,
                               opts.split, image);
  m.step = model.params.step;
  m.wall_s = seconds_since(t0);
  return m;
}

namespace {

std::string mode_name(bool augment) { return augment ? "augmented" : "clean"; }

std::map<std::tuple<int, bool, std::uint64_t>, SizeSweepRow> read_sweep(const fs::path& csv) {
  std::map<std::tuple<int, bool, std::uint64_t>, SizeSweepRow> rows;
  std::ifstream in(csv);
  std::string line;
  if (!std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    // A run interrupted mid-write can leave a torn final line.
    if (std::count(line.begin(), line.end(), ',') != 8) continue;
    std::stringstream ss(line);
    std::string f[9];
    for (auto& x : f) std::getline(ss, x, ',');
    SizeSweepRow r;
    r.size = std::stoi(f[0]);
    r.augment = f[1] == "augmented";
    r.seed = std::stoull(f[2]);
    r.test_loss = std::stod(f[3]);
    r.test_loss_clean = std::stod(f[4]);
    r.test_loss_augmented = std::stod(f[5]);
    r.best_validation_loss = std::stod(f[6]);
    r.best_step = std::stoull(f[7]);
    r.wall_s = std::stod(f[8]);
    rows[{r.size, r.augment, r.seed}] = r;
  }
  return rows;
}

}  // namespace

std::vector<SizeSweepRow> sweep_dataset_size(const SizeSweepConfig& cfg) {
  if (cfg.sizes.empty() || cfg.modes.empty() || cfg.seeds.empty()) throw InvalidArgument("sweep: empty grid");
  if (!std::is_sorted(cfg.sizes.begin(), cfg.sizes.end())) throw InvalidArgument("sweep: sizes must be ascending");
  fs::create_directories(cfg.out_dir);
  const fs::path csv = cfg.out_dir / "sweep_size.csv";
  auto done = read_sweep(csv);
  if (!fs::exists(csv) || fs::file_size(csv) == 0) {
    std::ofstream(csv) << "size,mode,seed,test_loss,test_loss_clean,test_loss_augmented,best_val_loss,best_step,wall_s\n";
  } else {
    std::ofstream out(csv, std::ios::trunc);
    out << "size,mode,seed,test_loss,test_loss_clean,test_loss_augmented,best_val_loss,best_step,wall_s\n";
    char buf[256];
    for (const auto& [key, r] : done) {
      std::snprintf(buf, sizeof buf, "%d,%s,%llu,%.17g,%.17g,%.17g,%.17g,%llu,%.3f\n", r.size,
                    mode_name(r.augment).c_str(), static_cast<unsigned long long>(r.seed), r.test_loss,
                    r.test_loss_clean, r.test_loss_augmented, r.best_validation_loss,
                    static_cast<unsigned long long>(r.best_step), r.wall_s);
      out << buf;
    }
  }

  std::vector<SizeSweepRow> rows;
  for (int size : cfg.sizes) {
    GenerationConfig gen = cfg.generation;
    gen.n_params = size;
    const fs::path data = cfg.out_dir / "data" / ("n" + std::to_string(size));
    if (!fs::exists(data / "manifest.json")) generate_dataset(gen, data);
    for (bool augment : cfg.modes)
      for (std::uint64_t seed : cfg.seeds) {
        if (auto it = done.find({size, augment, seed}); it != done.end()) {
          rows.push_back(it->second);
          continue;
        }
        TrainConfig t = cfg.train;
        t.dataset = data;
        t.augment = augment;
        t.seed = seed;
        t.out_dir = cfg.out_dir / "runs" / ("n" + std::to_string(size) + "_" + mode_name(augment) + "_s" +
                                            std::to_string(seed));
        const TrainResult res = train(t);
        SizeSweepRow r;
        r.size = size;
        r.augment = augment;
        r.seed = seed;
        r.test_loss_clean = res.test_clean.loss;
        r.test_loss_augmented = res.test_augmented.loss;
        r.test_loss = augment ? r.test_loss_augmented : r.test_loss_clean;
        r.best_validation_loss = res.best_validation.loss;
        r.best_step = res.best_step;
        r.wall_s = res.test_augmented.wall_s;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%s,%llu,%.17g,%.17g,%.17g,%.17g,%llu,%.3f\n", r.size,
                      mode_name(r.augment).c_str(), static_cast<unsigned long long>(r.seed), r.test_loss,
                      r.test_loss_clean, r.test_loss_augmented, r.best_validation_loss,
                      static_cast<unsigned long long>(r.best_step), r.wall_s);
        std::ofstream(csv, std::ios::app) << buf;
        rows.push_back(r);
      }
  }
  return rows;
}

std::vector<GenSweepRow> sweep_generalization(const fs::path& checkpoint, const std::vector<int>& lengths,
                                              const std::vector<int>& counts, const EvalOptions& base,
                                              const fs::path& csv) {
  if (lengths.empty() || counts.empty()) throw InvalidArgument("sweep_generalization: empty grid");
  for (int v : lengths)
    if (v < 1) throw InvalidArgument("sweep_generalization: lengths must be >= 1");
  for (int v : counts)
    if (v < 1) throw InvalidArgument("sweep_generalization: counts must be >= 1");
  if (!csv.parent_path().empty()) fs::create_directories(csv.parent_path());
  std::ofstream out(csv, std::ios::trunc);
  if (!out) throw Error("sweep_generalization: cannot write " + csv.string());
  out << "length,count,loss\n";
  std::vector<GenSweepRow> rows;
  for (int length : lengths)
    for (int count : counts) {
      EvalOptions o = base;
      o.mode = InputMode::Fixed;
      o.n_steps = length;
      o.n_traj = count;
      const Metrics m = evaluate(checkpoint, o);
      rows.push_back({length, count, m.loss});
      char buf[96];
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", length, count, m.loss);
      out << buf;
      out.flush();
    }
  return rows;
}

Predictor::Predictor(const fs::path& checkpoint) : net_(NetConfig{}) {
  LoadedModel m = load_model(checkpoint);
  net_ = std::move(m.net);
  params_ = std::move(m.params);
  meta_ = std::move(m.meta);
}

Prediction Predictor::predict(const TrajectorySet& trajectories) const {
  const auto t0 = Clock::now();
  const std::vector<double> img = render(trajectories, meta_.raster);
  ImageBatch b{1, meta_.raster.height, meta_.raster.width, img};
  const Matrix y = net_.forward(params_, b, Mode::Eval);
  Prediction p;
  p.theta.assign(y.data(), y.data() + y.cols());
  p.wall_ms = 1e3 * seconds_since(t0);
  return p;
}

Prediction predict(const fs::path& checkpoint, const TrajectorySet& trajectories) {
  return Predictor(checkpoint).predict(trajectories);
}

}  // namespace rmps
