// Command-line front end: ingest, synth, label, train, predict, eval,
// ablate, gradcheck. Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "mlstm/config.hpp"
#include "mlstm/error.hpp"
#include "mlstm/eval.hpp"
#include "mlstm/gradcheck.hpp"
#include "mlstm/kernels.hpp"
#include "mlstm/sample_io.hpp"
#include "mlstm/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mlstm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  bool quiet = false;
};

void log(const Common& c, const std::string& msg) {
  if (!c.quiet) std::cerr << msg << '\n';
}

Config resolve(const Common& c, const std::string& command) {
  Config cfg;
  if (!c.config_path.empty()) cfg.load(c.config_path);
  for (const auto& o : c.overrides) cfg.set_assignment(o);
  const auto workers = cfg.get_int("workers");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (workers > 0) kernels::set_num_workers(static_cast<int>(workers));
  if (!c.quiet) {
    std::cerr << "# mlstm " << command << "\n# config: "
              << (c.config_path.empty() ? "<defaults>" : c.config_path) << '\n';
    std::ostringstream dump;
    cfg.dump(dump);
    std::string line;
    std::istringstream lines(dump.str());
    while (std::getline(lines, line)) std::cerr << "#   " << line << '\n';
    std::cerr << "# seed: " << cfg.get("seed") << "  workers: " << kernels::num_workers() << '\n';
  }
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ArgumentError("cannot write " + p.string());
  return os;
}

// Writes to `path`, or stdout for "-" / empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
  } else {
    auto os = open_out(path);
    fn(os);
  }
}

json step_json(int k, const GaussianStep& g) {
  return {{"t", 0.2 * (k + 1)}, {"mux", g.mux}, {"muy", g.muy},
          {"sx", g.sx},         {"sy", g.sy},   {"rho", g.rho}};
}

json distribution_json(const Sample& s, const ManeuverDistribution& d) {
  json modes = json::array();
  for (const Mode& m : d.modes) {
    json traj = json::array();
    for (std::size_t k = 0; k < m.trajectory.size(); ++k)
      traj.push_back(step_json(static_cast<int>(k), m.trajectory[k]));
    json entry = {{"probability", m.probability}, {"trajectory", std::move(traj)}};
    if (m.maneuver) {
      entry["lateral"] = to_string(m.maneuver->lateral);
      entry["longitudinal"] = to_string(m.maneuver->longitudinal);
    } else {
      entry["lateral"] = nullptr;
      entry["longitudinal"] = nullptr;
    }
    modes.push_back(std::move(entry));
  }
  return {{"vehicle_id", s.vehicle_id}, {"frame", s.frame}, {"modes", std::move(modes)}};
}

json accuracy_json(const ManeuverAccuracy& a) {
  return {{"lateral", a.lateral}, {"longitudinal", a.longitudinal}, {"joint", a.joint}};
}

json rmse_json(const RmseRow& r) { return json(std::vector<double>(r.begin(), r.end())); }

// ---------------------------------------------------------------- commands

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string out_dir = "data";
  std::string format = "bin";
};

int run_ingest(const Common& c, const IngestArgs& a) {
  const Config cfg = resolve(c, "ingest");
  const UnitMode unit = config_units(cfg);
  const auto stride = static_cast<int>(cfg.get_int("stride"));
  if (stride < 1) throw ConfigError("stride must be >= 1");
  std::vector<TrackStore> subsets;
  for (const auto& in : a.inputs) {
    subsets.push_back(load_trajectories(in, unit));
    log(c, "loaded " + in + ": " + std::to_string(subsets.back().size()) + " vehicles");
  }
  const TrainTestSplit split = split_train_test(subsets, config_seed(cfg));
  for (const auto& w : split.warnings) log(c, "warning: " + w);

  auto [train, test, skipped] = build_split_samples(subsets, split, stride);
  const std::string ext = a.format == "jsonl" ? ".jsonl" : ".bin";
  fs::create_directories(a.out_dir);
  save_samples(fs::path(a.out_dir) / ("train" + ext), train);
  save_samples(fs::path(a.out_dir) / ("test" + ext), test);
  json split_json = {{"seed", config_seed(cfg)}, {"train", json::array()}, {"test", json::array()}};
  for (auto [name, refs] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}})
    for (const auto& r : *refs)
      split_json[name].push_back({{"subset", a.inputs[r.subset]}, {"vehicle_id", r.vehicle_id}});
  open_out(fs::path(a.out_dir) / "split.json") << split_json.dump(1) << '\n';
  log(c, "samples: " + std::to_string(train.size()) + " train, " + std::to_string(test.size()) +
             " test, " + std::to_string(skipped) + " skipped (short window)");
  return kExitOk;
}

struct SynthArgs {
  std::string out = "synth.csv";
  std::string log_path;
  std::optional<std::uint64_t> seed;
};

int run_synth(const Common& c, const SynthArgs& a) {
  Common cc = c;
  if (a.seed) cc.overrides.push_back("seed=" + std::to_string(*a.seed));
  const Config cfg = resolve(cc, "synth");
  const auto res = synth::generate(config_synth(cfg), config_seed(cfg));
  emit(a.out, [&](std::ostream& os) { write_trajectories(os, res.store); });
  if (!a.log_path.empty()) {
    auto os = open_out(a.log_path);
    synth::write_script_log(os, res.events);
  }
  log(c, "generated " + std::to_string(res.store.size()) + " vehicles, " +
             std::to_string(res.events.size()) + " scripted events");
  return kExitOk;
}

struct LabelArgs {
  std::string input;
  std::string out = "-";
  int every = 1;
};

int run_label(const Common& c, const LabelArgs& a) {
  const Config cfg = resolve(c, "label");
  const TrackStore store = load_trajectories(a.input, config_units(cfg));
  emit(a.out, [&](std::ostream& os) {
    for (const auto& [id, track] : store.tracks()) {
      for (std::int64_t f = track.first_frame(); f <= track.last_frame(); f += a.every) {
        const ManeuverLabel m = label_maneuver(track, f);
        os << json{{"vehicle_id", id},
                   {"frame", f},
                   {"lateral", to_string(m.lateral)},
                   {"longitudinal", to_string(m.longitudinal)}}
                  .dump()
           << '\n';
      }
    }
  });
  return kExitOk;
}

struct TrainArgs {
  std::string samples;
  std::string out = "model.ckpt";
};

int run_train(const Common& c, const TrainArgs& a) {
  const Config cfg = resolve(c, "train");
  const std::vector<Sample> samples = load_samples(a.samples);
  ModelWeights w;
  w.config = config_model(cfg);
  if (w.config.variant == Variant::MLstmGt) w.config.variant = Variant::MLstm;
  auto with_log = [&](TrainOptions t, const char* what) {
    t.on_epoch = [&c, what](int epoch, double loss) {
      std::ostringstream msg;
      msg << what << " epoch " << epoch << " mean_loss " << std::setprecision(8) << loss;
      log(c, msg.str());
    };
    return t;
  };
  log(c, "training " + std::string(to_string(w.config.variant)) + " on " +
             std::to_string(samples.size()) + " samples");
  w.trajectory =
      train_trajectory(samples, w.config, with_log(config_trajectory_train(cfg), "trajectory")).params;
  if (w.config.uses_maneuvers()) {
    w.classifier =
        train_classifier(samples, w.config, with_log(config_classifier_train(cfg), "classifier"))
            .params;
  }
  save_checkpoint(a.out, to_checkpoint(w));
  log(c, "wrote " + a.out);
  return kExitOk;
}

ModelWeights load_model(const std::string& path, const Config& cfg, bool use_config_variant) {
  ModelWeights w = from_checkpoint(load_checkpoint(path));
  if (use_config_variant) {
    const Variant v = variant_from_string(cfg.get("variant"));
    if (v == Variant::MLstmGt && w.config.variant == Variant::MLstm) w.config.variant = v;
  }
  return w;
}

struct PredictArgs {
  std::string model;
  std::string samples;
  std::string out = "-";
  std::string grid;
  std::string grid_out = "grid.csv";
  std::size_t index = 0;
};

int run_predict(const Common& c, const PredictArgs& a) {
  const Config cfg = resolve(c, "predict");
  const ModelWeights w = load_model(a.model, cfg, true);
  const std::vector<Sample> samples = load_samples(a.samples);
  const auto dists = predict_batch(samples, w);
  emit(a.out, [&](std::ostream& os) {
    os << std::setprecision(10);
    for (std::size_t i = 0; i < samples.size(); ++i)
      os << distribution_json(samples[i], dists[i]).dump() << '\n';
  });
  if (!a.grid.empty()) {
    if (a.index >= samples.size()) throw ArgumentError("--index beyond the sample count");
    const GridSpec spec = parse_grid_spec(a.grid);
    auto os = open_out(a.grid_out);
    write_density_grid(os, dists[a.index], spec);
    log(c, "wrote density grid for sample " + std::to_string(a.index) + " to " + a.grid_out);
  }
  return kExitOk;
}

struct EvalArgs {
  std::string model;
  std::string samples;
  std::string out = "-";
  std::string summary;
  bool cv = false;
};

int run_eval(const Common& c, const EvalArgs& a) {
  const Config cfg = resolve(c, "eval");
  if (a.cv == !a.model.empty()) throw ArgumentError("eval needs exactly one of --model or --cv");
  const std::vector<Sample> samples = load_samples(a.samples);
  std::vector<Tensor2> truths;
  for (const Sample& s : samples) truths.push_back(s.future);
  std::string name = "CV";
  std::vector<Tensor2> preds;
  json summary = {{"samples", samples.size()}};
  if (a.cv) {
    preds = cv_predictions(samples, config_cv(cfg));
  } else {
    const ModelWeights w = load_model(a.model, cfg, true);
    name = std::string(to_string(w.config.variant));
    preds = point_predictions(predict_batch(samples, w));
    if (w.config.uses_maneuvers()) {
      std::vector<ManeuverLabel> pred, truth;
      for (const ClassProbs& p : classify_batch(samples, w)) pred.push_back(most_likely(p));
      for (const Sample& s : samples) truth.push_back(s.label);
      summary["maneuver_accuracy"] = accuracy_json(maneuver_accuracy(pred, truth));
    }
  }
  const RmseRow r = rmse_table(preds, truths);
  summary["predictor"] = name;
  summary["rmse_m"] = rmse_json(r);
  emit(a.out, [&](std::ostream& os) { write_rmse_csv(os, {name}, {r}); });
  if (!a.summary.empty()) open_out(a.summary) << summary.dump(1) << '\n';
  return kExitOk;
}

struct AblateArgs {
  std::string train;
  std::string test;
  std::vector<std::string> trajectories;
  std::string out = "-";
  std::string summary;
  std::string model_dir;
};

int run_ablate(const Common& c, const AblateArgs& a) {
  const Config cfg = resolve(c, "ablate");
  std::vector<Sample> train, test;
  if (a.train.empty()) {
    if (!a.test.empty()) throw ArgumentError("--test needs --train");
    std::vector<TrackStore> subsets;
    if (a.trajectories.empty()) {
      log(c, "no data given: generating the synthetic benchmark from the synth.* keys");
      subsets.push_back(synth::generate(config_synth(cfg), config_seed(cfg)).store);
    }
    for (const auto& p : a.trajectories) subsets.push_back(load_trajectories(p, config_units(cfg)));
    const TrainTestSplit split = split_train_test(subsets, config_seed(cfg));
    for (const auto& w : split.warnings) log(c, "warning: " + w);
    SplitSamples built = build_split_samples(subsets, split, static_cast<int>(cfg.get_int("stride")));
    train = std::move(built.train);
    test = std::move(built.test);
  } else {
    train = load_samples(a.train);
    if (a.test.empty()) throw ArgumentError("--train needs --test");
    if (!a.trajectories.empty()) {
      throw ArgumentError("use either --train/--test or --trajectories, not both");
    }
    test = load_samples(a.test);
  }
  log(c, "ablation on " + std::to_string(train.size()) + " train / " +
             std::to_string(test.size()) + " test samples");

  AblationOptions opts;
  opts.model = config_model(cfg);
  opts.trajectory_train = config_trajectory_train(cfg);
  opts.classifier_train = config_classifier_train(cfg);
  opts.seeds = cfg.get_seeds("ablation.seeds");
  opts.cv = config_cv(cfg);
  opts.log = [&c](const std::string& m) { log(c, m); };
  const AblationResult res = run_ablation(train, test, opts);

  emit(a.out, [&](std::ostream& os) { write_rmse_csv(os, res.columns, res.rmse); });
  json summary = {{"train_samples", train.size()},
                  {"test_samples", test.size()},
                  {"seeds", opts.seeds},
                  {"seconds", res.seconds},
                  {"rmse_m", json::object()}};
  for (std::size_t i = 0; i < res.columns.size(); ++i)
    summary["rmse_m"][res.columns[i]] = rmse_json(res.rmse[i]);
  if (res.classifier_accuracy) summary["maneuver_accuracy"] = accuracy_json(*res.classifier_accuracy);
  if (!a.summary.empty()) open_out(a.summary) << summary.dump(1) << '\n';
  if (!a.model_dir.empty()) {
    for (const auto& [name, w] : res.weights)
      save_checkpoint(fs::path(a.model_dir) / (name + ".ckpt"), to_checkpoint(w));
  }
  log(c, "ablation finished in " + std::to_string(res.seconds) + " s");
  return kExitOk;
}

struct GradcheckArgs {
  int samples = 5;
  std::size_t max_coords = 300;
  double tolerance = 1e-4;
};

int run_gradcheck(const Common& c, const GradcheckArgs& a) {
  const Config cfg = resolve(c, "gradcheck");
  ModelConfig mc = config_model(cfg);
  if (mc.variant == Variant::MLstmGt) mc.variant = Variant::MLstm;
  const std::uint64_t seed = config_seed(cfg);
  if (a.samples < 1) throw ArgumentError("--samples must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-20.0, 20.0);
  std::uniform_int_distribution<int> joint(0, kNumManeuvers - 1);
  std::vector<Sample> samples(static_cast<std::size_t>(a.samples));
  for (Sample& s : samples) {
    for (double& v : s.history.flat()) v = pos(rng);
    for (double& v : s.future.flat()) v = pos(rng);
    s.label = ManeuverLabel::from_joint(joint(rng));
  }
  std::vector<const Sample*> batch;
  for (const Sample& s : samples) batch.push_back(&s);

  GradCheckOptions go;
  go.max_coords = a.max_coords;
  go.seed = seed;
  double worst = 0.0;
  auto check = [&](const char* what, ParamSet ps, auto loss_fn) {
    const GradCheckReport r = grad_check(
        [&](ParamSet& p, bool grads) { return loss_fn(p, mc, batch, grads); }, ps, go);
    std::cout << what << ": max_rel_error " << std::scientific << std::setprecision(3)
              << r.max_rel_error << " over " << r.coords_checked << " coords (worst "
              << r.worst_param << '[' << r.worst_index << "])\n";
    worst = std::max(worst, r.max_rel_error);
  };
  check("trajectory_nll", init_trajectory_params(mc, seed), trajectory_loss);
  if (mc.uses_maneuvers()) {
    check("classifier_xent", init_classifier_params(mc, seed), classifier_loss);
  }
  const bool ok = worst < a.tolerance;
  std::cout << (ok ? "PASS" : "FAIL") << " max_rel_error " << worst << " (tolerance "
            << a.tolerance << ")\n";
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maneuver-conditioned LSTM trajectory prediction"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "override a config key (key=value), repeatable");
  app.add_flag("-q,--quiet", common.quiet, "suppress the config log and progress messages");

  IngestArgs ingest;
  auto* ci = app.add_subcommand("ingest", "parse NGSIM-style tracks, split, and build samples");
  ci->add_option("inputs", ingest.inputs, "trajectory files, one subset each")->required();
  ci->add_option("-o,--out-dir", ingest.out_dir, "output directory");
  ci->add_option("--format", ingest.format, "sample format")->check(CLI::IsMember({"bin", "jsonl"}));

  SynthArgs synth_args;
  auto* cs = app.add_subcommand("synth", "generate scripted synthetic traffic");
  cs->add_option("-o,--out", synth_args.out, "trajectory CSV (meters)");
  cs->add_option("--log", synth_args.log_path, "scripted maneuver log CSV");
  cs->add_option("--seed", synth_args.seed, "shorthand for --set seed=N");

  LabelArgs label;
  auto* cl = app.add_subcommand("label", "emit maneuver labels as JSON lines");
  cl->add_option("input", label.input, "trajectory file")->required();
  cl->add_option("-o,--out", label.out, "output path, - for stdout");
  cl->add_option("--every", label.every, "label every n-th frame")->check(CLI::PositiveNumber);

  TrainArgs train;
  auto* ct = app.add_subcommand("train", "train a model variant");
  ct->add_option("samples", train.samples, "training samples")->required();
  ct->add_option("-o,--out", train.out, "checkpoint path");

  PredictArgs predict;
  auto* cp = app.add_subcommand("predict", "multi-modal predictions as JSON lines");
  cp->add_option("-m,--model", predict.model, "checkpoint")->required();
  cp->add_option("samples", predict.samples, "samples to predict")->required();
  cp->add_option("-o,--out", predict.out, "output path, - for stdout");
  cp->add_option("--grid", predict.grid, "xmin,xmax,ymin,ymax,res mixture density mesh");
  cp->add_option("--grid-out", predict.grid_out, "density grid CSV");
  cp->add_option("--index", predict.index, "sample index for --grid");

  EvalArgs eval;
  auto* ce = app.add_subcommand("eval", "RMSE by horizon for a model or the CV baseline");
  ce->add_option("samples", eval.samples, "test samples")->required();
  ce->add_option("-m,--model", eval.model, "checkpoint");
  ce->add_flag("--cv", eval.cv, "evaluate the constant-velocity Kalman baseline");
  ce->add_option("-o,--out", eval.out, "RMSE CSV, - for stdout");
  ce->add_option("--summary", eval.summary, "JSON summary path");

  AblateArgs ablate;
  auto* ca = app.add_subcommand("ablate", "CV / V / S / M / M-GT comparison table");
  ca->add_option("--train", ablate.train, "training samples");
  ca->add_option("--test", ablate.test, "test samples");
  ca->add_option("--trajectories", ablate.trajectories, "trajectory files to ingest instead");
  ca->add_option("-o,--out", ablate.out, "RMSE CSV, - for stdout");
  ca->add_option("--summary", ablate.summary, "JSON summary path");
  ca->add_option("--model-dir", ablate.model_dir, "save trained checkpoints here");

  GradcheckArgs gc;
  auto* cg = app.add_subcommand("gradcheck", "finite-difference check of the model gradients");
  cg->add_option("--samples", gc.samples, "random samples in the batch");
  cg->add_option("--max-coords", gc.max_coords, "coordinates checked per parameter set");
  cg->add_option("--tolerance", gc.tolerance, "pass threshold on max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ci) return run_ingest(common, ingest);
    if (*cs) return run_synth(common, synth_args);
    if (*cl) return run_label(common, label);
    if (*ct) return run_train(common, train);
    if (*cp) return run_predict(common, predict);
    if (*ce) return run_eval(common, eval);
    if (*ca) return run_ablate(common, ablate);
    if (*cg) return run_gradcheck(common, gc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
