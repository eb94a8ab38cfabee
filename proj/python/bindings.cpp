#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "rmps/baseline.hpp"
#include "rmps/trainer.hpp"

namespace py = pybind11;
using namespace rmps;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const Trajectory& t) {
  Array out({static_cast<py::ssize_t>(t.size()), py::ssize_t{2}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t k = 0; k < t.size(); ++k) {
    v(k, 0) = t[k].x;
    v(k, 1) = t[k].y;
  }
  return out;
}

py::list to_list(const TrajectorySet& set) {
  py::list out;
  for (const auto& t : set) out.append(to_array(t));
  return out;
}

Trajectory from_array(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw InvalidArgument("trajectory must be an (n, 2) array");
  auto v = a.unchecked<2>();
  Trajectory t(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t k = 0; k < a.shape(0); ++k) t[k] = {v(k, 0), v(k, 1)};
  return t;
}

TrajectorySet from_list(const std::vector<Array>& list) {
  TrajectorySet out;
  out.reserve(list.size());
  for (const auto& a : list) out.push_back(from_array(a));
  return out;
}

Array image_array(const Image& img) {
  Array out({img.height, img.width});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

RasterSpec raster_for(const std::string& system, int size, double alpha) {
  RasterSpec s = parse_system(system) == SystemId::Henon ? henon_raster_spec(size) : sam_raster_spec(size);
  s.alpha = alpha;
  return s;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["split"] = m.split;
  d["count"] = m.count;
  d["loss"] = m.loss;
  d["rmse"] = m.rmse;
  return d;
}

InputMode parse_mode(const std::string& s) {
  if (s == "clean") return InputMode::Clean;
  if (s == "augmented") return InputMode::Augmented;
  if (s == "fixed") return InputMode::Fixed;
  throw InvalidArgument("mode must be clean, augmented or fixed");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Return-map rendering, chaotic-system datasets and CNN parameter regression";

  // Translators run newest first, so the base class goes in before its subclasses.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  m.def(
      "henon_trajectory",
      [](double x, double y, double a, double b, int steps, double escape_radius) {
        return to_array(henon_trajectory({x, y}, {a, b}, steps, escape_radius));
      },
      py::arg("x"), py::arg("y"), py::arg("a"), py::arg("b"), py::arg("steps"),
      py::arg("escape_radius") = kDefaultEscapeRadius);

  m.def(
      "sam_section_crossings",
      [](double r, double p_r, double mu, double t_end, double rtol, double atol) {
        const auto init = sam_section_state(r, p_r, {mu});
        if (!init) throw InvalidArgument("(r, p_r) is outside the energetically allowed region");
        IntegratorConfig cfg;
        cfg.rtol = rtol;
        cfg.atol = atol;
        const auto res = sam_section_crossings(*init, {mu}, t_end, cfg);
        Trajectory t;
        std::vector<double> times;
        for (const auto& c : res.crossings) {
          t.push_back(c.point);
          times.push_back(c.time);
        }
        return py::make_tuple(to_array(t), py::array(py::cast(times)), res.truncated);
      },
      py::arg("r"), py::arg("p_r"), py::arg("mu"), py::arg("t_end"), py::arg("rtol") = 1e-10,
      py::arg("atol") = 1e-10, "Section points (r, p_r), crossing times and whether the run was cut short.");

  m.def(
      "sam_energy",
      [](double r, double phi, double p_r, double p_phi, double mu) { return sam_energy({r, phi, p_r, p_phi}, {mu}); },
      py::arg("r"), py::arg("phi"), py::arg("p_r"), py::arg("p_phi"), py::arg("mu"));

  m.def(
      "rasterize",
      [](const std::vector<Array>& trajectories, const std::string& system, int size, double alpha) {
        return image_array(rasterize(from_list(trajectories), raster_for(system, size, alpha)));
      },
      py::arg("trajectories"), py::arg("system") = "henon", py::arg("size") = 64, py::arg("alpha") = 0.7);

  m.def(
      "count_grid",
      [](const std::vector<Array>& trajectories, const std::string& system, int size) {
        const CountGrid g = count_grid(from_list(trajectories), raster_for(system, size, 0.7));
        py::array_t<std::uint32_t> out({g.height, g.width});
        std::copy(g.counts.begin(), g.counts.end(), out.mutable_data());
        return out;
      },
      py::arg("trajectories"), py::arg("system") = "henon", py::arg("size") = 64);

  m.def(
      "augment",
      [](const std::vector<Array>& trajectories, const std::string& system, std::uint64_t seed) {
        Rng rng = make_rng({seed});
        const AugmentLimits lim = parse_system(system) == SystemId::Henon ? henon_augment_limits() : sam_augment_limits();
        return to_list(augment(from_list(trajectories), lim, rng));
      },
      py::arg("trajectories"), py::arg("system") = "henon", py::arg("seed") = 0);

  m.def(
      "generate",
      [](const std::string& system, int n, const std::filesystem::path& out, std::uint64_t seed, int n_init, int steps,
         double horizon, int threads) {
        GenerationConfig g = parse_system(system) == SystemId::Henon ? henon_generation_config(n, seed)
                                                                      : sam_generation_config(n, seed);
        if (n_init > 0) g.n_init = n_init;
        if (steps > 0) g.steps = steps;
        if (horizon > 0) g.horizon = horizon;
        g.threads = threads;
        py::gil_scoped_release release;
        return generate_dataset(g, out).files.size();
      },
      py::arg("system"), py::arg("n"), py::arg("out"), py::arg("seed") = 0, py::arg("n_init") = 0,
      py::arg("steps") = 0, py::arg("horizon") = 0.0, py::arg("threads") = 0,
      "Writes a dataset directory and returns the number of samples.");

  m.def(
      "load_sample",
      [](const std::filesystem::path& path) {
        const Sample s = load_sample(path);
        return py::make_tuple(s.theta, to_list(s.trajectories));
      },
      py::arg("path"), "Returns (theta, trajectories).");

  m.def(
      "dataset_thetas", [](const std::filesystem::path& dir) { return read_manifest(dir).thetas; }, py::arg("dir"));

  m.def(
      "split",
      [](const std::vector<std::vector<double>>& thetas, std::uint64_t seed) {
        const SplitIndex s = split(thetas, {}, seed);
        return py::make_tuple(s.train, s.validation, s.test);
      },
      py::arg("thetas"), py::arg("seed") = 0);

  m.def(
      "temporal_mse",
      [](const std::vector<Array>& sim, const std::vector<Array>& obs) {
        return temporal_mse(from_list(sim), from_list(obs));
      },
      py::arg("sim"), py::arg("obs"));

  m.def(
      "nn_state_space_loss",
      [](const Array& a, const Array& b) { return nn_state_space_loss(from_array(a), from_array(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "estimate_baseline",
      [](const std::vector<Array>& observed, const std::string& loss, int restarts, int budget, std::uint64_t seed,
         double horizon, int threads) {
        const TrajectorySet obs = from_list(observed);
        NelderMeadConfig cfg;
        cfg.restarts = restarts;
        cfg.budget = budget;
        cfg.seed = seed;
        cfg.threads = threads;
        BaselineResult r;
        {
          py::gil_scoped_release release;
          if (horizon > 0.0) {
            r = estimate_optimization(obs, sam_simulator(obs, horizon), parse_baseline_loss(loss), {kSamMuMin},
                                      {kSamMuMax}, cfg);
          } else {
            r = estimate_optimization(obs, henon_simulator(obs), parse_baseline_loss(loss), {kHenonAMin, kHenonBMin},
                                      {kHenonAMax, kHenonBMax}, cfg);
          }
        }
        py::dict d;
        d["theta"] = r.theta;
        d["loss"] = r.loss;
        d["converged"] = r.converged;
        d["evaluations"] = r.trace.size();
        return d;
      },
      py::arg("observed"), py::arg("loss") = "nn", py::arg("restarts") = 10, py::arg("budget") = 200,
      py::arg("seed") = 0, py::arg("horizon") = 0.0, py::arg("threads") = 0,
      "Henon fit by default; a positive SAM horizon fits mu instead.");

  m.def(
      "train",
      [](const std::filesystem::path& dataset, const std::filesystem::path& out, std::uint64_t seed, bool augment,
         int image_size, int steps, int batch, double lr, double weight_decay, int val_interval, int stem_channels,
         std::vector<int> stage_channels, int blocks, std::uint64_t split_seed, int threads) {
        TrainConfig c = default_train_config(read_manifest(dataset).system, image_size);
        c.dataset = dataset;
        c.out_dir = out;
        c.seed = seed;
        c.split_seed = split_seed;
        c.augment = augment;
        c.steps = steps;
        c.batch = batch;
        c.adam.lr = lr;
        c.adam.weight_decay = weight_decay;
        c.val_interval = val_interval;
        c.net.stem_channels = stem_channels;
        c.net.stages.clear();
        for (int ch : stage_channels) c.net.stages.push_back({blocks, ch, 2});
        c.threads = threads;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(c);
        }
        py::dict d;
        d["best_step"] = r.best_step;
        d["best_validation"] = metrics_dict(r.best_validation);
        d["test_clean"] = metrics_dict(r.test_clean);
        d["test_augmented"] = metrics_dict(r.test_augmented);
        d["checkpoint"] = r.checkpoint;
        d["log"] = r.log;
        return d;
      },
      py::arg("dataset"), py::arg("out"), py::arg("seed") = 0, py::arg("augment") = false, py::arg("image_size") = 64,
      py::arg("steps") = 2000, py::arg("batch") = 32, py::arg("lr") = 1e-3, py::arg("weight_decay") = 1e-4,
      py::arg("val_interval") = 100, py::arg("stem_channels") = 16,
      py::arg("stage_channels") = std::vector<int>{16, 32, 64}, py::arg("blocks") = 2, py::arg("split_seed") = 0,
      py::arg("threads") = 0);

  m.def(
      "evaluate",
      [](const std::filesystem::path& ckpt, const std::string& split, const std::string& mode, int n_traj, int n_steps,
         std::uint64_t seed) {
        EvalOptions o;
        o.split = split;
        o.mode = parse_mode(mode);
        o.n_traj = n_traj;
        o.n_steps = n_steps;
        o.seed = seed;
        Metrics m;
        {
          py::gil_scoped_release release;
          m = evaluate(ckpt, o);
        }
        return metrics_dict(m);
      },
      py::arg("checkpoint"), py::arg("split") = "test", py::arg("mode") = "clean", py::arg("n_traj") = 0,
      py::arg("n_steps") = 0, py::arg("seed") = 1);

  py::class_<Predictor>(m, "Predictor")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def(
          "predict",
          [](const Predictor& p, const std::vector<Array>& trajectories) {
            return p.predict(from_list(trajectories)).theta;
          },
          py::arg("trajectories"))
      .def_property_readonly("system", [](const Predictor& p) { return to_string(p.meta().system); })
      .def_property_readonly("image_size", [](const Predictor& p) { return p.meta().raster.width; });
}
