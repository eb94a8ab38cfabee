#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rmps/trainer.hpp"

using namespace rmps;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "rmps_test_trainer";
    fs::remove_all(d);
    GenerationConfig g = henon_generation_config(40, 3);
    g.n_init = 25;
    g.steps = 120;
    generate_dataset(g, d / "data");
    return d;
  }();
  return dir;
}

TrainConfig small_config(const std::string& run) {
  TrainConfig c = default_train_config(SystemId::Henon, 16);
  c.dataset = scratch() / "data";
  c.out_dir = scratch() / run;
  c.limits = {5, 25, 10, 120};
  c.net.stem_channels = 4;
  c.net.stages = {{1, 4, 1}, {1, 8, 2}};
  c.batch = 8;
  c.steps = 30;
  c.val_interval = 10;
  c.seed = 5;
  c.split_seed = 2;
  return c;
}

std::vector<std::string> lines_without_wall_time(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line.substr(0, line.rfind(',')));
  return out;
}

std::size_t hash_of(const std::vector<double>& v) {
  std::size_t h = 0;
  for (double x : v) h = h * 1000003u ^ std::hash<double>{}(x);
  return h;
}

}  // namespace

TEST_CASE("train: log format, determinism and best-checkpoint selection") {
  TrainConfig ca = small_config("det_a"), cb = small_config("det_b");
  ca.threads = 1;
  cb.threads = 3;
  const TrainResult a = train(ca);
  const TrainResult b = train(cb);

  std::ifstream log(a.log);
  std::string header;
  std::getline(log, header);
  CHECK(header == "step,split,loss,rmse_a,rmse_b,wall_s");
  const auto la = lines_without_wall_time(a.log), lb = lines_without_wall_time(b.log);
  CHECK(la.size() == 1 + 3 * 2 + 2);
  CHECK(la == lb);

  CHECK(a.best_validation.loss <= a.final_validation.loss);
  CHECK(a.best_step >= 10);
  CHECK(a.best_step <= 30);
  CHECK(a.best_step % 10 == 0);
  CHECK(std::isfinite(a.test_clean.loss));
  CHECK(a.test_clean.rmse.size() == 2);

  std::set<std::size_t> seen;
  for (const auto* part : {&a.split.train, &a.split.validation, &a.split.test})
    for (std::size_t i : *part) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 40);

  EvalOptions o;
  o.split = "validation";
  const Metrics re = evaluate(a.checkpoint, o);
  CHECK(std::abs(re.loss - a.best_validation.loss) < 1e-9);
  CHECK(re.count == a.split.validation.size());

  o.split = "test";
  const Metrics t1 = evaluate(a.checkpoint, o);
  CHECK(std::abs(t1.loss - a.test_clean.loss) < 1e-12);

  SUBCASE("augmented evaluation is reproducible for a fixed seed") {
    o.mode = InputMode::Augmented;
    o.seed = 9;
    const Metrics x = evaluate(a.checkpoint, o), y = evaluate(a.checkpoint, o);
    CHECK(x.loss == y.loss);
    CHECK(x.rmse == y.rmse);
    o.seed = 10;
    CHECK(evaluate(a.checkpoint, o).loss != x.loss);
  }
  SUBCASE("unknown split") {
    o.split = "holdout";
    CHECK_THROWS_AS(evaluate(a.checkpoint, o), InvalidArgument);
  }
}

TEST_CASE("train with augmentation reproduces its validation loss from the checkpoint") {
  TrainConfig c = small_config("aug");
  c.augment = true;
  const TrainResult r = train(c);
  EvalOptions o;
  o.split = "validation";
  o.mode = InputMode::Augmented;
  o.seed = c.seed;
  CHECK(std::abs(evaluate(r.checkpoint, o).loss - r.best_validation.loss) < 1e-9);
}

TEST_CASE("fresh augmentation per epoch, fixed validation draw") {
  const Dataset ds(scratch() / "data");
  const auto samples = ds.load_all();
  const SplitIndex s = split(ds.manifest().thetas, {}, 2);
  const RasterSpec spec = henon_raster_spec(16);
  const AugmentLimits lim{5, 25, 10, 120};
  const TrainingImages imgs(samples, s, spec, lim, true, 77);
  for (std::size_t i : s.train) {
    CHECK(hash_of(imgs.train_image(i, 1)) != hash_of(imgs.train_image(i, 2)));
    CHECK(imgs.train_image(i, 3) == imgs.train_image(i, 3));
  }
  const TrainingImages again(samples, s, spec, lim, true, 77);
  for (std::size_t i : s.validation) {
    CHECK(hash_of(imgs.validation_image(i)) == hash_of(again.validation_image(i)));
    CHECK(imgs.validation_image(i) == augmented_image(samples[i], spec, lim, 77, i, 0));
  }
  CHECK_THROWS_AS(imgs.train_image(s.train[0], 0), InvalidArgument);
  CHECK_THROWS_AS(imgs.validation_image(s.train[0]), InvalidArgument);

  const TrainingImages plain(samples, s, spec, lim, false, 77);
  const std::size_t i = s.train[0];
  CHECK(plain.train_image(i, 1) == plain.train_image(i, 2));
  CHECK(plain.train_image(i, 1) == rasterize(samples[i].trajectories, spec).pixels);
}

TEST_CASE("training aborts on a non-finite loss") {
  TrainConfig c = small_config("diverge");
  c.adam.lr = 1e300;
  c.adam.weight_decay = 0.0;
  CHECK_THROWS_AS(train(c), TrainingDiverged);
  TrainConfig bad = small_config("bad");
  bad.steps = 0;
  CHECK_THROWS_AS(train(bad), InvalidArgument);
}

TEST_CASE("memorisation run fits the training split") {
  TrainConfig c = small_config("memo");
  c.steps = 1500;
  c.val_interval = 1500;
  c.adam = {3e-3, 0.0};
  const TrainResult r = train(c);
  EvalOptions o;
  o.split = "train";
  const Metrics m = evaluate(r.checkpoint, o);
  CAPTURE(m.loss);
  // Midpoint predictor scores about 8.33 on this region.
  CHECK(m.loss < 0.05);
}

TEST_CASE("dataset-size sweep is complete and resumable") {
  SizeSweepConfig s;
  s.generation = henon_generation_config(1, 4);
  s.generation.n_init = 16;
  s.generation.steps = 60;
  s.sizes = {20, 40};
  s.modes = {false, true};
  s.seeds = {0, 1};
  s.train = small_config("unused");
  s.train.steps = 4;
  s.train.val_interval = 2;
  s.out_dir = scratch() / "sweep";
  const auto rows = sweep_dataset_size(s);
  CHECK(rows.size() == 2 * 2 * 2);
  const fs::path csv = s.out_dir / "sweep_size.csv";
  CHECK(lines_without_wall_time(csv).size() == 1 + 8);

  // Drop the last row and tear the one before; the rerun restores exactly those cells.
  std::vector<std::string> lines;
  {
    std::ifstream in(csv);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  {
    std::ofstream out(csv, std::ios::trunc);
    for (std::size_t k = 0; k + 2 < lines.size(); ++k) out << lines[k] << '\n';
    out << lines[lines.size() - 2].substr(0, 12);
  }
  const auto before = fs::last_write_time(s.out_dir / "runs" / "n20_clean_s0" / "metrics.csv");
  const auto again = sweep_dataset_size(s);
  CHECK(again.size() == 8);
  CHECK(fs::last_write_time(s.out_dir / "runs" / "n20_clean_s0" / "metrics.csv") == before);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(again[k].size == rows[k].size);
    CHECK(again[k].test_loss == rows[k].test_loss);
  }
  CHECK(lines_without_wall_time(csv).size() == 1 + 8);
  s.sizes = {40, 20};
  CHECK_THROWS_AS(sweep_dataset_size(s), InvalidArgument);
}

TEST_CASE("generalisation sweep and prediction") {
  TrainConfig c = small_config("gen");
  c.augment = true;
  c.steps = 60;
  const TrainResult r = train(c);
  EvalOptions o;
  const auto rows = sweep_generalization(r.checkpoint, {10, 120}, {5, 36}, o, scratch() / "gen.csv");
  REQUIRE(rows.size() == 4);
  for (const auto& row : rows) {
    CHECK(std::isfinite(row.loss));
    CHECK(row.loss > 0.0);
  }
  CHECK(rows[3].count == 36);  // more than the 25 stored trajectories
  std::ifstream in(scratch() / "gen.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "length,count,loss");

  const Dataset ds(scratch() / "data");
  const Sample s = ds.load(r.split.train[0]);
  const Predictor p(r.checkpoint);
  const Prediction a = p.predict(s.trajectories), b = p.predict(s.trajectories);
  REQUIRE(a.theta.size() == 2);
  CHECK(a.theta == b.theta);
  CHECK(predict(r.checkpoint, s.trajectories).theta == a.theta);
}

TEST_CASE("desk-scale single prediction latency") {
  TrainConfig c = small_config("latency");
  c.raster = henon_raster_spec(64);
  c.net = NetConfig{};
  c.steps = 1;
  c.val_interval = 1;
  const TrainResult r = train(c);
  const Predictor p(r.checkpoint);
  const Sample s = Dataset(scratch() / "data").load(0);
  p.predict(s.trajectories);
  double best = 1e9;
  for (int i = 0; i < 5; ++i) best = std::min(best, p.predict(s.trajectories).wall_ms);
  CAPTURE(best);
  CHECK(best < 100.0);
}
