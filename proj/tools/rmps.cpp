#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmps/baseline.hpp"
#include "rmps/trainer.hpp"

using namespace rmps;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Passes on only the table of the subcommand being run, so one file can hold several.
class SubcommandTables : public CLI::ConfigTOML {
 public:
  explicit SubcommandTables(const CLI::App& app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    std::vector<CLI::ConfigItem> keep;
    for (auto& item : CLI::ConfigTOML::from_config(in))
      if (item.parents.empty() || wanted(item.parents.front())) keep.push_back(std::move(item));
    return keep;
  }

 private:
  bool wanted(const std::string& table) const {
    if (app_.get_subcommand_no_throw(table) == nullptr) return true;  // unknown tables stay errors
    for (const auto* sub : app_.get_subcommands())
      if (sub->get_name() == table) return true;
    return false;
  }

  const CLI::App& app_;
};

struct GenerateArgs {
  std::string system = "henon";
  int n = 64;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  int n_init = 0;
  int steps = 0;
  double horizon = 0.0;
  double rtol = 0.0, atol = 0.0;
};

struct TrainArgs {
  std::string data, out;
  std::uint64_t seed = 0, split_seed = 0, eval_seed = 1;
  bool augment = false;
  int image_size = 64;
  int batch = 32, steps = 2000, val_interval = 100;
  double lr = 1e-3, weight_decay = 1e-4;
  int stem = 16;
  std::vector<int> stage_channels{16, 32, 64};
  int blocks = 2;
  std::vector<int> limits;
  int threads = 0;
};

struct EvaluateArgs {
  std::string ckpt, split = "test", mode = "clean", data, out;
  int n_traj = 0, n_steps = 0;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct SweepSizeArgs {
  TrainArgs train;
  std::string system = "henon";
  std::vector<int> sizes{64, 128, 256, 512};
  std::vector<std::string> modes{"clean", "augmented"};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int n_init = 0, gen_steps = 0;
};

struct SweepGenArgs {
  std::string ckpt, out, split = "test", data;
  std::vector<int> lengths{10, 25, 50, 100, 250};
  std::vector<int> counts{10, 25, 50, 100, 225};
  std::uint64_t seed = 1;
  int threads = 0;
};

struct PredictArgs {
  std::string ckpt, sample;
};

struct BaselineArgs {
  std::string sample, out, loss = "nn";
  int restarts = 10, budget = 200;
  double horizon = 1000.0;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct RenderArgs {
  std::string sample, out, system;
  int size = 128;
  double alpha = 0.7;
  bool augment = false;
  std::uint64_t seed = 0;
};

SystemId system_of(const Sample& s) {
  if (s.theta.size() == 2) return SystemId::Henon;
  if (s.theta.size() == 1) return SystemId::Sam;
  throw InvalidArgument("sample has an unexpected parameter dimension");
}

std::vector<std::string> param_names(SystemId id) {
  return id == SystemId::Henon ? std::vector<std::string>{"a", "b"} : std::vector<std::string>{"mu"};
}

void write_resolved(const CLI::App& sub, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream(dir / "config.resolved.toml") << "[" << sub.get_name() << "]\n" << sub.config_to_str(true, false);
}

void add_threads(CLI::App* sub, int& threads) {
  sub->add_option("--threads", threads, "Worker threads (0: RMPS_THREADS or all cores)")->check(CLI::NonNegativeNumber);
}

void add_train_options(CLI::App* sub, TrainArgs& a) {
  sub->add_option("--split-seed", a.split_seed, "Seed of the train/validation/test split");
  sub->add_option("--eval-seed", a.eval_seed, "Seed of the augmented test draw");
  sub->add_option("--image-size", a.image_size, "Image height and width")->check(CLI::PositiveNumber);
  sub->add_option("--batch", a.batch, "Minibatch size")->check(CLI::PositiveNumber);
  sub->add_option("--steps", a.steps, "Optimizer steps")->check(CLI::PositiveNumber);
  sub->add_option("--val-interval", a.val_interval, "Steps between validations")->check(CLI::PositiveNumber);
  sub->add_option("--lr", a.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--weight-decay", a.weight_decay, "Decoupled weight decay")->check(CLI::NonNegativeNumber);
  sub->add_option("--stem-channels", a.stem, "Stem convolution channels")->check(CLI::PositiveNumber);
  sub->add_option("--stage-channels", a.stage_channels, "Channels of each residual stage")->check(CLI::PositiveNumber);
  sub->add_option("--blocks", a.blocks, "Residual blocks per stage")->check(CLI::PositiveNumber);
  sub->add_option("--limits", a.limits, "Augmentation min_traj max_traj min_steps max_steps")->expected(4);
}

TrainConfig make_train_config(const TrainArgs& a, SystemId system) {
  TrainConfig c = default_train_config(system, a.image_size);
  c.dataset = a.data;
  c.out_dir = a.out;
  c.seed = a.seed;
  c.split_seed = a.split_seed;
  c.eval_seed = a.eval_seed;
  c.augment = a.augment;
  c.batch = a.batch;
  c.steps = a.steps;
  c.val_interval = a.val_interval;
  c.adam.lr = a.lr;
  c.adam.weight_decay = a.weight_decay;
  c.net.stem_channels = a.stem;
  c.net.stages.clear();
  for (int ch : a.stage_channels) c.net.stages.push_back({a.blocks, ch, 2});
  if (!a.limits.empty()) c.limits = {a.limits[0], a.limits[1], a.limits[2], a.limits[3]};
  c.threads = a.threads;
  return c;
}

json metrics_json(const Metrics& m, SystemId system) {
  json j{{"split", m.split}, {"count", m.count}, {"loss", m.loss}};
  const auto names = param_names(system);
  for (std::size_t k = 0; k < m.rmse.size() && k < names.size(); ++k) j["rmse_" + names[k]] = m.rmse[k];
  return j;
}

InputMode parse_mode(const std::string& s) {
  if (s == "clean") return InputMode::Clean;
  if (s == "augmented") return InputMode::Augmented;
  return InputMode::Fixed;
}

GenerationConfig generation_config(const std::string& system, int n, std::uint64_t seed) {
  return parse_system(system) == SystemId::Henon ? henon_generation_config(n, seed) : sam_generation_config(n, seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric system identification from return-map images"};
  app.require_subcommand(1, 1);
  app.failure_message(CLI::FailureMessage::help);
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML file; options go under a [subcommand] table");
  app.config_formatter(std::make_shared<SubcommandTables>(app));
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.fallthrough();
  const auto systems = CLI::IsMember({"henon", "sam"});

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Simulate a dataset of (theta, trajectories) samples");
  generate->add_option("--system", gen.system, "henon or sam")->check(systems);
  generate->add_option("--n", gen.n, "Number of parameter points")->check(CLI::PositiveNumber);
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Generation seed");
  generate->add_option("--n-init", gen.n_init, "Initial conditions per sample (0: system default)")->check(CLI::NonNegativeNumber);
  generate->add_option("--steps", gen.steps, "Henon iterations per trajectory (0: default)")->check(CLI::NonNegativeNumber);
  generate->add_option("--horizon", gen.horizon, "SAM integration horizon (0: default)")->check(CLI::NonNegativeNumber);
  generate->add_option("--rtol", gen.rtol, "SAM integrator relative tolerance (0: default)")->check(CLI::NonNegativeNumber);
  generate->add_option("--atol", gen.atol, "SAM integrator absolute tolerance (0: default)")->check(CLI::NonNegativeNumber);
  add_threads(generate, gen.threads);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the parameter regression network");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", tr.out, "Run directory")->required();
  train_cmd->add_option("--seed", tr.seed, "Initialization, ordering and augmentation seed");
  train_cmd->add_flag("--augment", tr.augment, "Re-augment training inputs every epoch");
  add_train_options(train_cmd, tr);
  add_threads(train_cmd, tr.threads);

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  evaluate_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--split", ev.split, "train, validation, test or all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  evaluate_cmd->add_option("--mode", ev.mode, "clean, augmented or fixed")
      ->check(CLI::IsMember({"clean", "augmented", "fixed"}));
  evaluate_cmd->add_option("--n-traj", ev.n_traj, "Fixed mode: trajectories per input (0: all)")->check(CLI::NonNegativeNumber);
  evaluate_cmd->add_option("--n-steps", ev.n_steps, "Fixed mode: points per trajectory (0: all)")->check(CLI::NonNegativeNumber);
  evaluate_cmd->add_option("--seed", ev.seed, "Augmentation seed");
  evaluate_cmd->add_option("--data", ev.data, "Dataset directory overriding the checkpoint's");
  evaluate_cmd->add_option("--out", ev.out, "Also write the metrics JSON to this file");
  add_threads(evaluate_cmd, ev.threads);

  SweepSizeArgs ss;
  auto* sweep_size = app.add_subcommand("sweep-size", "Test loss against dataset size, with and without augmentation");
  sweep_size->add_option("--system", ss.system, "henon or sam")->check(systems);
  sweep_size->add_option("--sizes", ss.sizes, "Dataset sizes, ascending")->check(CLI::PositiveNumber);
  sweep_size->add_option("--modes", ss.modes, "Training modes")->check(CLI::IsMember({"clean", "augmented"}));
  sweep_size->add_option("--seeds", ss.seeds, "Training seeds");
  sweep_size->add_option("--seed", ss.train.seed, "Generation seed");
  sweep_size->add_option("--out", ss.train.out, "Sweep directory")->required();
  sweep_size->add_option("--n-init", ss.n_init, "Initial conditions per sample (0: system default)")->check(CLI::NonNegativeNumber);
  sweep_size->add_option("--gen-steps", ss.gen_steps, "Henon iterations per trajectory (0: default)")->check(CLI::NonNegativeNumber);
  add_train_options(sweep_size, ss.train);
  add_threads(sweep_size, ss.train.threads);

  SweepGenArgs sg;
  auto* sweep_gen = app.add_subcommand("sweep-gen", "Fixed-input test loss over trajectory length and count");
  sweep_gen->add_option("--ckpt", sg.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sweep_gen->add_option("--out", sg.out, "Output CSV")->required();
  sweep_gen->add_option("--lengths", sg.lengths, "Points per trajectory")->check(CLI::PositiveNumber);
  sweep_gen->add_option("--counts", sg.counts, "Trajectories per input")->check(CLI::PositiveNumber);
  sweep_gen->add_option("--split", sg.split, "Dataset split")->check(CLI::IsMember({"train", "validation", "test", "all"}));
  sweep_gen->add_option("--data", sg.data, "Dataset directory overriding the checkpoint's");
  sweep_gen->add_option("--seed", sg.seed, "Seed");
  add_threads(sweep_gen, sg.threads);

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Estimate theta for one sample; prints JSON");
  predict_cmd->add_option("--ckpt", pr.ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--sample", pr.sample, "Sample file (.rmps)")->required()->check(CLI::ExistingFile);

  BaselineArgs bl;
  auto* baseline = app.add_subcommand("baseline", "Estimate theta by multi-start Nelder-Mead on a state-space loss");
  baseline->add_option("--sample", bl.sample, "Observed sample (.rmps)")->required()->check(CLI::ExistingFile);
  baseline->add_option("--out", bl.out, "Output directory")->required();
  baseline->add_option("--loss", bl.loss, "nn or temporal")->check(CLI::IsMember({"nn", "temporal"}));
  baseline->add_option("--restarts", bl.restarts, "Nelder-Mead restarts")->check(CLI::PositiveNumber);
  baseline->add_option("--budget", bl.budget, "Loss evaluations per restart")->check(CLI::PositiveNumber);
  baseline->add_option("--horizon", bl.horizon, "SAM simulation horizon")->check(CLI::PositiveNumber);
  baseline->add_option("--seed", bl.seed, "Seed of the restart points");
  add_threads(baseline, bl.threads);

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "Rasterize a sample into an 8-bit grayscale PNG");
  render->add_option("--sample", rd.sample, "Sample file (.rmps)")->required()->check(CLI::ExistingFile);
  render->add_option("--out", rd.out, "PNG path")->required();
  render->add_option("--system", rd.system, "Window: henon or sam (default: from the sample)")->check(systems);
  render->add_option("--size", rd.size, "Image height and width")->check(CLI::PositiveNumber);
  render->add_option("--alpha", rd.alpha, "Shading base")->check(CLI::Range(0.0, 1.0));
  render->add_flag("--augment", rd.augment, "Render a random subset of the trajectories");
  render->add_option("--seed", rd.seed, "Augmentation seed");

  for (auto* sub : app.get_subcommands({}))
    sub->footer("  --config FILE               TOML file; options go under a [" + sub->get_name() + "] table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (generate->parsed()) {
      GenerationConfig g = generation_config(gen.system, gen.n, gen.seed);
      if (gen.n_init > 0) g.n_init = gen.n_init;
      if (gen.steps > 0) g.steps = gen.steps;
      if (gen.horizon > 0) g.horizon = gen.horizon;
      if (gen.rtol > 0) g.integrator.rtol = gen.rtol;
      if (gen.atol > 0) g.integrator.atol = gen.atol;
      g.threads = gen.threads;
      const DatasetManifest m = generate_dataset(g, gen.out);
      write_resolved(*generate, gen.out);
      std::cerr << "wrote " << m.files.size() << " samples to " << gen.out << "\n";
    } else if (train_cmd->parsed()) {
      const SystemId system = read_manifest(tr.data).system;
      const TrainResult r = train(make_train_config(tr, system));
      write_resolved(*train_cmd, tr.out);
      const json j{{"best_step", r.best_step},
                   {"best_validation", metrics_json(r.best_validation, system)},
                   {"final_validation", metrics_json(r.final_validation, system)},
                   {"test_clean", metrics_json(r.test_clean, system)},
                   {"test_augmented", metrics_json(r.test_augmented, system)},
                   {"checkpoint", r.checkpoint.string()}};
      std::ofstream(fs::path(tr.out) / "result.json") << j.dump(2) << "\n";
      std::cout << j.dump(2) << "\n";
    } else if (evaluate_cmd->parsed()) {
      EvalOptions o;
      o.split = ev.split;
      o.mode = parse_mode(ev.mode);
      o.n_traj = ev.n_traj;
      o.n_steps = ev.n_steps;
      o.seed = ev.seed;
      o.dataset = ev.data;
      o.threads = ev.threads;
      const Metrics m = evaluate(ev.ckpt, o);
      const SystemId system = m.rmse.size() == 2 ? SystemId::Henon : SystemId::Sam;
      const std::string text = metrics_json(m, system).dump(2);
      if (!ev.out.empty()) std::ofstream(ev.out) << text << "\n";
      std::cout << text << "\n";
    } else if (sweep_size->parsed()) {
      SizeSweepConfig s;
      const SystemId system = parse_system(ss.system);
      s.generation = generation_config(ss.system, 1, ss.train.seed);
      if (ss.n_init > 0) s.generation.n_init = ss.n_init;
      if (ss.gen_steps > 0) s.generation.steps = ss.gen_steps;
      s.generation.threads = ss.train.threads;
      s.sizes = ss.sizes;
      s.modes.clear();
      for (const auto& m : ss.modes) s.modes.push_back(m == "augmented");
      s.seeds = ss.seeds;
      s.train = make_train_config(ss.train, system);
      s.out_dir = ss.train.out;
      write_resolved(*sweep_size, s.out_dir);
      const auto rows = sweep_dataset_size(s);
      std::cerr << rows.size() << " runs in " << (s.out_dir / "sweep_size.csv").string() << "\n";
    } else if (sweep_gen->parsed()) {
      EvalOptions o;
      o.split = sg.split;
      o.seed = sg.seed;
      o.dataset = sg.data;
      o.threads = sg.threads;
      const fs::path csv(sg.out);
      if (csv.has_parent_path()) write_resolved(*sweep_gen, csv.parent_path());
      sweep_generalization(sg.ckpt, sg.lengths, sg.counts, o, csv);
    } else if (predict_cmd->parsed()) {
      const Predictor p(pr.ckpt);
      const Sample s = load_sample(pr.sample);
      const Prediction out = p.predict(s.trajectories);
      json j{{"system", to_string(p.meta().system)}, {"theta", out.theta}, {"wall_ms", out.wall_ms}};
      const auto names = param_names(p.meta().system);
      for (std::size_t k = 0; k < names.size() && k < out.theta.size(); ++k) j[names[k]] = out.theta[k];
      std::cout << j.dump() << "\n";
    } else if (baseline->parsed()) {
      const Sample s = load_sample(bl.sample);
      const SystemId system = system_of(s);
      const GenerationConfig g = generation_config(to_string(system), 1, 0);
      const Simulator sim = system == SystemId::Henon ? henon_simulator(s.trajectories, g.escape_radius)
                                                      : sam_simulator(s.trajectories, bl.horizon, g.integrator);
      NelderMeadConfig nm;
      nm.restarts = bl.restarts;
      nm.budget = bl.budget;
      nm.seed = bl.seed;
      nm.threads = bl.threads;
      const BaselineResult r =
          estimate_optimization(s.trajectories, sim, parse_baseline_loss(bl.loss), g.param_lo, g.param_hi, nm);
      write_resolved(*baseline, bl.out);
      write_trace_csv(r, param_names(system), fs::path(bl.out) / "trace.csv");
      const json j{{"theta", r.theta},       {"loss", r.loss},
                   {"converged", r.converged}, {"best_restart", r.best_restart},
                   {"evaluations", r.trace.size()}, {"true_theta", s.theta}};
      std::ofstream(fs::path(bl.out) / "result.json") << j.dump(2) << "\n";
      std::cout << j.dump(2) << "\n";
    } else if (render->parsed()) {
      const Sample s = load_sample(rd.sample);
      const SystemId system = rd.system.empty() ? system_of(s) : parse_system(rd.system);
      RasterSpec spec = system == SystemId::Henon ? henon_raster_spec(rd.size) : sam_raster_spec(rd.size);
      spec.alpha = rd.alpha;
      TrajectorySet t = s.trajectories;
      if (rd.augment) {
        Rng rng = make_rng({rd.seed});
        t = augment(t, system == SystemId::Henon ? henon_augment_limits() : sam_augment_limits(), rng);
      }
      write_png(rasterize(t, spec), rd.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
