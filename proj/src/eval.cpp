#include "mlstm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mlstm/error.hpp"

namespace mlstm {

RmseRow rmse_table(std::span<const Tensor2> predictions, std::span<const Tensor2> truths) {
  if (predictions.empty()) throw ArgumentError("rmse_table: empty sample set");
  if (predictions.size() != truths.size()) {
    throw ArgumentError("rmse_table: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(truths.size()) + " truths");
  }
  const std::size_t need = static_cast<std::size_t>(kHorizonSeconds * kStepsPerSecond);
  RmseRow sums{};
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const Tensor2& p = predictions[i];
    const Tensor2& y = truths[i];
    if (p.rows() < need || y.rows() < need || p.cols() != 2 || y.cols() != 2) {
      throw DimensionError("rmse_table: sample " + std::to_string(i) + " has shape " +
                           p.shape_string() + " / " + y.shape_string());
    }
    for (int k = 0; k < kHorizonSeconds; ++k) {
      const std::size_t r = static_cast<std::size_t>((k + 1) * kStepsPerSecond - 1);
      const double dx = p(r, 0) - y(r, 0);
      const double dy = p(r, 1) - y(r, 1);
      sums[static_cast<std::size_t>(k)] += dx * dx + dy * dy;
    }
  }
  RmseRow out{};
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = std::sqrt(sums[k] / static_cast<double>(predictions.size()));
  return out;
}

Tensor2 point_prediction(const ManeuverDistribution& dist) {
  if (dist.modes.empty()) throw ArgumentError("point_prediction: empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.modes.size(); ++i)
    if (dist.modes[i].probability > dist.modes[best].probability) best = i;
  const auto& traj = dist.modes[best].trajectory;
  Tensor2 out(traj.size(), 2);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out(k, 0) = traj[k].mux;
    out(k, 1) = traj[k].muy;
  }
  return out;
}

std::vector<Tensor2> point_predictions(std::span<const ManeuverDistribution> dists) {
  std::vector<Tensor2> out;
  out.reserve(dists.size());
  for (const auto& d : dists) out.push_back(point_prediction(d));
  return out;
}

ManeuverAccuracy maneuver_accuracy(std::span<const ManeuverLabel> predicted,
                                   std::span<const ManeuverLabel> truth) {
  if (predicted.size() != truth.size()) {
    throw ArgumentError("maneuver_accuracy: " + std::to_string(predicted.size()) +
                        " predictions vs " + std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw ArgumentError("maneuver_accuracy: empty label set");
  std::size_t lat = 0, lon = 0, joint = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool a = predicted[i].lateral == truth[i].lateral;
    const bool b = predicted[i].longitudinal == truth[i].longitudinal;
    lat += a;
    lon += b;
    joint += a && b;
  }
  const double n = static_cast<double>(truth.size());
  return {static_cast<double>(lat) / n, static_cast<double>(lon) / n,
          static_cast<double>(joint) / n};
}

ManeuverLabel most_likely(const ClassProbs& p) {
  const auto lat = std::max_element(p.lateral.begin(), p.lateral.end()) - p.lateral.begin();
  const auto lon =
      std::max_element(p.longitudinal.begin(), p.longitudinal.end()) - p.longitudinal.begin();
  return {static_cast<Lateral>(lat), static_cast<Longitudinal>(lon)};
}

std::vector<Tensor2> cv_predictions(std::span<const Sample> samples, const CvFilterOptions& opts) {
  std::vector<Tensor2> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Tensor2& h = samples[static_cast<std::size_t>(i)].history;
    Tensor2 ego(h.rows(), 2);
    for (std::size_t r = 0; r < h.rows(); ++r) {
      ego(r, 0) = h(r, 0);
      ego(r, 1) = h(r, 1);
    }
    out[static_cast<std::size_t>(i)] = cv_filter_predict(ego, kFutureLen, opts);
  }
  return out;
}

GridSpec parse_grid_spec(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ArgumentError("grid: '" + item + "' is not a number");
    }
  }
  if (v.size() != 5) throw ArgumentError("grid: expected xmin,xmax,ymin,ymax,res");
  GridSpec g{v[0], v[1], v[2], v[3], v[4]};
  if (!(g.xmax > g.xmin) || !(g.ymax > g.ymin) || !(g.res > 0.0)) {
    throw ArgumentError("grid: need xmin < xmax, ymin < ymax, res > 0");
  }
  if ((g.xmax - g.xmin) / g.res * (g.ymax - g.ymin) / g.res > 1e7) {
    throw ArgumentError("grid: more than 1e7 cells");
  }
  return g;
}

double mixture_density(const ManeuverDistribution& dist, std::size_t step, double x, double y) {
  double p = 0.0;
  for (const Mode& m : dist.modes) {
    if (step >= m.trajectory.size()) throw ArgumentError("mixture_density: step out of range");
    p += m.probability * gaussian_density(m.trajectory[step], x, y);
  }
  return p;
}

void write_density_grid(std::ostream& os, const ManeuverDistribution& dist, const GridSpec& spec) {
  if (dist.modes.empty()) throw ArgumentError("write_density_grid: empty distribution");
  const std::size_t steps = dist.modes.front().trajectory.size();
  const auto nx = static_cast<std::size_t>(std::floor((spec.xmax - spec.xmin) / spec.res)) + 1;
  const auto ny = static_cast<std::size_t>(std::floor((spec.ymax - spec.ymin) / spec.res)) + 1;
  os << "x,y,density\n" << std::setprecision(10);
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = spec.ymin + static_cast<double>(j) * spec.res;
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = spec.xmin + static_cast<double>(i) * spec.res;
      double p = 0.0;
      for (std::size_t k = 0; k < steps; ++k) p += mixture_density(dist, k, x, y);
      os << x << ',' << y << ',' << p << '\n';
    }
  }
}

const RmseRow& AblationResult::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return rmse[i];
  throw ArgumentError("ablation has no column " + name);
}

namespace {

std::vector<Tensor2> futures_of(std::span<const Sample> samples) {
  std::vector<Tensor2> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.future);
  return out;
}

ModelWeights train_variant(std::span<const Sample> train, const AblationOptions& opts,
                           Variant variant, std::uint64_t seed) {
  ModelWeights w;
  w.config = opts.model;
  w.config.variant = variant;
  const std::string name(to_string(variant));
  auto logged = [&](TrainOptions t, const std::string& what) {
    t.seed = seed;
    if (opts.log) {
      t.on_epoch = [&, what](int epoch, double loss) {
        std::ostringstream msg;
        msg << name << ' ' << what << " epoch " << epoch << " loss " << loss;
        opts.log(msg.str());
      };
    }
    return t;
  };
  w.trajectory = train_trajectory(train, w.config, logged(opts.trajectory_train, "trajectory")).params;
  if (w.config.uses_maneuvers()) {
    w.classifier = train_classifier(train, w.config, logged(opts.classifier_train, "classifier")).params;
  }
  return w;
}

}  // namespace

AblationResult run_ablation(std::span<const Sample> train, std::span<const Sample> test,
                            const AblationOptions& opts) {
  if (test.empty()) throw ArgumentError("run_ablation: empty test set");
  if (opts.seeds.empty()) throw ArgumentError("run_ablation: no seeds");
  const auto start = std::chrono::steady_clock::now();
  AblationResult res;
  res.columns = {"CV"};
  for (Variant v : kAblationVariants) res.columns.emplace_back(to_string(v));
  res.rmse.assign(res.columns.size(), RmseRow{});

  const std::vector<Tensor2> truths = futures_of(test);
  const RmseRow cv = rmse_table(cv_predictions(test, opts.cv), truths);
  res.rmse[0] = cv;

  std::vector<ManeuverLabel> truth_labels;
  for (const Sample& s : test) truth_labels.push_back(s.label);
  ManeuverAccuracy acc_sum;
  const double n_seeds = static_cast<double>(opts.seeds.size());

  for (std::uint64_t seed : opts.seeds) {
    for (std::size_t c = 0; c < kAblationVariants.size(); ++c) {
      const Variant v = kAblationVariants[c];
      const std::string name(to_string(v));
      const std::string source = v == Variant::MLstmGt ? "M_LSTM" : name;
      if (!res.weights.contains(source) || v != Variant::MLstmGt) {
        if (auto it = opts.pretrained.find(source); it != opts.pretrained.end()) {
          res.weights[source] = it->second;
        } else {
          if (train.empty()) throw ArgumentError("run_ablation: no training samples for " + source);
          if (opts.log) opts.log("training " + source + " (seed " + std::to_string(seed) + ")");
          res.weights[source] = train_variant(train, opts, v, seed);
        }
      }
      ModelWeights w = res.weights[source];
      w.config.variant = v;
      const RmseRow r = rmse_table(point_predictions(predict_batch(test, w)), truths);
      for (std::size_t k = 0; k < r.size(); ++k) res.rmse[c + 1][k] += r[k] / n_seeds;
      if (opts.log) {
        std::ostringstream msg;
        msg << name << " seed " << seed << " RMSE at " << kHorizonSeconds << " s: " << r.back();
        opts.log(msg.str());
      }
      if (v == Variant::MLstm) {
        std::vector<ManeuverLabel> pred;
        for (const ClassProbs& p : classify_batch(test, w)) pred.push_back(most_likely(p));
        const ManeuverAccuracy a = maneuver_accuracy(pred, truth_labels);
        acc_sum.lateral += a.lateral / n_seeds;
        acc_sum.longitudinal += a.longitudinal / n_seeds;
        acc_sum.joint += a.joint / n_seeds;
      }
    }
  }
  res.classifier_accuracy = acc_sum;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

void write_rmse_csv(std::ostream& os, const std::vector<std::string>& columns,
                    const std::vector<RmseRow>& values) {
  if (columns.size() != values.size()) throw ArgumentError("write_rmse_csv: column mismatch");
  os << "horizon_s";
  for (const auto& c : columns) os << ',' << c;
  os << '\n' << std::setprecision(6) << std::fixed;
  for (int k = 0; k < kHorizonSeconds; ++k) {
    os << (k + 1);
    for (const auto& v : values) os << ',' << v[static_cast<std::size_t>(k)];
    os << '\n';
  }
  os.unsetf(std::ios::floatfield);
}

}  // namespace mlstm
