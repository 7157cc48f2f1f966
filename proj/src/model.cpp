#include "mlstm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mlstm/error.hpp"

namespace mlstm {
namespace {

// Parameter names; also the checkpoint keys.
constexpr const char* kEncEmbedW = "enc.embed.w";
constexpr const char* kEncEmbedB = "enc.embed.b";
constexpr const char* kEncWx = "enc.lstm.w_x";
constexpr const char* kEncWh = "enc.lstm.w_h";
constexpr const char* kEncB = "enc.lstm.b";
constexpr const char* kDecWx = "dec.lstm.w_x";
constexpr const char* kDecWh = "dec.lstm.w_h";
constexpr const char* kDecB = "dec.lstm.b";
constexpr const char* kOutW = "dec.out.w";
constexpr const char* kOutB = "dec.out.b";
constexpr const char* kClsEmbedW = "cls.embed.w";
constexpr const char* kClsEmbedB = "cls.embed.b";
constexpr const char* kClsWx = "cls.lstm.w_x";
constexpr const char* kClsWh = "cls.lstm.w_h";
constexpr const char* kClsB = "cls.lstm.b";
constexpr const char* kLatW = "cls.lat.w";
constexpr const char* kLatB = "cls.lat.b";
constexpr const char* kLonW = "cls.lon.w";
constexpr const char* kLonB = "cls.lon.b";

constexpr int kManeuverWidth = kNumLateral + kNumLongitudinal;

Tensor2 uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in,
                     std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor2 t(rows, cols);
  for (double& v : t.flat()) v = u(rng);
  return t;
}

void add_linear(ParamSet& ps, const char* w, const char* b, std::size_t out, std::size_t in,
                std::mt19937_64& rng) {
  ps.add(w, uniform_init(out, in, in, rng));
  ps.add(b, uniform_init(1, out, in, rng));
}

void add_lstm(ParamSet& ps, const char* wx, const char* wh, const char* b, std::size_t in,
              std::size_t hidden, std::mt19937_64& rng) {
  ps.add(wx, uniform_init(4 * hidden, in, in, rng));
  ps.add(wh, uniform_init(4 * hidden, hidden, hidden, rng));
  Tensor2 bias = uniform_init(1, 4 * hidden, in + hidden, rng);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0;  // forget gate
  ps.add(b, std::move(bias));
}

void check_config(const ModelConfig& cfg) {
  if (cfg.hidden < 1 || cfg.embed < 1 || cfg.history_len < 1 || cfg.future_len < 1) {
    throw ArgumentError("model config: sizes must be positive");
  }
  if (!(cfg.position_scale > 0.0)) throw ArgumentError("model config: position_scale <= 0");
  if (!(cfg.lateral_scale > 0.0)) throw ArgumentError("model config: lateral_scale <= 0");
}

// Binds a parameter either as trainable (gradients flow into the ParamSet)
// or as a read-only view.
class Binder {
 public:
  Binder(Tape& t, ParamSet* mut, const ParamSet& ps) : t_(t), mut_(mut), ps_(ps) {}
  Var operator()(const char* name) const {
    return mut_ != nullptr ? t_.parameter(mut_->at(name)) : t_.view(ps_.at(name).value);
  }

 private:
  Tape& t_;
  ParamSet* mut_;
  const ParamSet& ps_;
};

struct TrajectoryVars {
  Var embed_w, embed_b;
  LstmVars enc, dec;
  Var out_w, out_b;
};

struct ClassifierVars {
  Var embed_w, embed_b;
  LstmVars lstm;
  Var lat_w, lat_b, lon_w, lon_b;
};

TrajectoryVars bind_trajectory(const Binder& bind) {
  return {bind(kEncEmbedW), bind(kEncEmbedB),
          {bind(kEncWx), bind(kEncWh), bind(kEncB)},
          {bind(kDecWx), bind(kDecWh), bind(kDecB)},
          bind(kOutW), bind(kOutB)};
}

ClassifierVars bind_classifier(const Binder& bind) {
  return {bind(kClsEmbedW), bind(kClsEmbedB), {bind(kClsWx), bind(kClsWh), bind(kClsB)},
          bind(kLatW), bind(kLatB), bind(kLonW), bind(kLonB)};
}

// Per time step, a (batch x channels) matrix of scaled positions. The tape
// only views these, so callers keep them alive until the tape is done.
std::vector<Tensor2> history_steps(std::span<const Tensor2* const> histories,
                                   const ModelConfig& cfg) {
  const std::size_t channels = static_cast<std::size_t>(cfg.input_channels());
  const auto len = static_cast<std::size_t>(cfg.history_len);
  std::vector<Tensor2> steps(len, Tensor2(histories.size(), channels));
  // Even channels are lateral (x), odd ones longitudinal (y).
  const double inv[2] = {1.0 / cfg.lateral_scale, 1.0 / cfg.position_scale};
  for (std::size_t b = 0; b < histories.size(); ++b) {
    const Tensor2& h = *histories[b];
    if (h.rows() != len || h.cols() < channels) {
      throw DimensionError("history " + h.shape_string() + " does not match model (" +
                           std::to_string(len) + " steps, " + std::to_string(channels) +
                           " channels)");
    }
    for (std::size_t k = 0; k < len; ++k)
      for (std::size_t c = 0; c < channels; ++c) steps[k](b, c) = h(k, c) * inv[c % 2];
  }
  return steps;
}

Var run_encoder(Tape& t, Var embed_w, Var embed_b, const LstmVars& lstm,
                const std::vector<Tensor2>& steps, const ModelConfig& cfg) {
  const std::size_t batch = steps.front().rows();
  const auto hidden = static_cast<std::size_t>(cfg.hidden);
  Var h = t.constant(Tensor2(batch, hidden));
  Var c = t.constant(Tensor2(batch, hidden));
  for (const Tensor2& x : steps) {
    const Var e = ops::leaky_relu(t, ops::linear(t, t.view(x), embed_w, embed_b), cfg.leaky_alpha);
    std::tie(h, c) = lstm_cell(t, e, h, c, lstm);
  }
  return h;
}

// Raw (batch x 5) head outputs per future step. `maneuvers` is
// (batch x 5) for maneuver variants and ignored otherwise.
std::vector<Var> run_decoder(Tape& t, const TrajectoryVars& v, Var context,
                             const Tensor2* maneuvers, const ModelConfig& cfg) {
  const std::size_t batch = t.value(context).rows();
  const auto hidden = static_cast<std::size_t>(cfg.hidden);
  Var input = context;
  if (cfg.uses_maneuvers()) {
    if (maneuvers == nullptr) throw ArgumentError("maneuver variant needs maneuver one-hots");
    input = ops::concat_cols(t, context, t.view(*maneuvers));
  }
  // The decoder input repeats every step, so project it once.
  const Var x_proj = ops::linear(t, input, v.dec.w_x, v.dec.b);
  Var h = t.constant(Tensor2(batch, hidden));
  Var c = t.constant(Tensor2(batch, hidden));
  std::vector<Var> raw;
  raw.reserve(static_cast<std::size_t>(cfg.future_len));
  for (int k = 0; k < cfg.future_len; ++k) {
    std::tie(h, c) = lstm_cell(t, Var{}, h, c, v.dec, x_proj);
    raw.push_back(ops::linear(t, h, v.out_w, v.out_b));
  }
  return raw;
}

std::pair<Var, Var> run_classifier(Tape& t, const ClassifierVars& v,
                                   const std::vector<Tensor2>& steps, const ModelConfig& cfg) {
  const Var h = run_encoder(t, v.embed_w, v.embed_b, v.lstm, steps, cfg);
  return {ops::linear(t, h, v.lat_w, v.lat_b), ops::linear(t, h, v.lon_w, v.lon_b)};
}

void check_onehot(std::span<const double> m) {
  auto valid_group = [](std::span<const double> g) {
    int ones = 0;
    for (double v : g) {
      if (v == 1.0) ++ones;
      else if (v != 0.0) return false;
    }
    return ones == 1;
  };
  if (m.size() != kManeuverWidth || !valid_group(m.subspan(0, kNumLateral)) ||
      !valid_group(m.subspan(kNumLateral))) {
    throw ArgumentError("maneuver must be a lateral one-hot(3) followed by a longitudinal one-hot(2)");
  }
}

Tensor2 onehot_rows(std::span<const ManeuverLabel> labels) {
  Tensor2 out(labels.size(), kManeuverWidth);
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const auto oh = maneuver_onehot(labels[b]);
    std::copy(oh.begin(), oh.end(), out.row_span(b).begin());
  }
  return out;
}

std::vector<GaussianStep> steps_of_row(const Tape& t, const std::vector<Var>& raw, std::size_t row,
                                       const ModelConfig& cfg) {
  std::vector<GaussianStep> out;
  out.reserve(raw.size());
  for (const Var r : raw) {
    out.push_back(
        gaussian_from_raw(t.value(r).row_span(row), cfg.lateral_scale, cfg.position_scale));
  }
  return out;
}

ClassProbs probs_of_row(const Tape& t, Var lat, Var lon, std::size_t row) {
  ClassProbs p;
  const auto pl = softmax(t.value(lat).row_span(row));
  const auto po = softmax(t.value(lon).row_span(row));
  std::copy(pl.begin(), pl.end(), p.lateral.begin());
  std::copy(po.begin(), po.end(), p.longitudinal.begin());
  return p;
}

void require_classifier(const ModelWeights& w) {
  if (w.classifier.size() == 0) throw ArgumentError("model has no classifier weights");
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::VLstm: return "V_LSTM";
    case Variant::SLstm: return "S_LSTM";
    case Variant::MLstm: return "M_LSTM";
    case Variant::MLstmGt: return "M_LSTM_GT";
  }
  return "?";
}

Variant variant_from_string(std::string_view s) {
  for (Variant v : {Variant::VLstm, Variant::SLstm, Variant::MLstm, Variant::MLstmGt})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown model variant '" + std::string(s) +
                    "' (expected V_LSTM, S_LSTM, M_LSTM or M_LSTM_GT)");
}

ParamSet init_trajectory_params(const ModelConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  std::mt19937_64 rng(seed);
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto e = static_cast<std::size_t>(cfg.embed);
  const auto c = static_cast<std::size_t>(cfg.input_channels());
  const std::size_t dec_in = h + (cfg.uses_maneuvers() ? kManeuverWidth : 0);
  ParamSet ps;
  add_linear(ps, kEncEmbedW, kEncEmbedB, e, c, rng);
  add_lstm(ps, kEncWx, kEncWh, kEncB, e, h, rng);
  add_lstm(ps, kDecWx, kDecWh, kDecB, dec_in, h, rng);
  add_linear(ps, kOutW, kOutB, 5, h, rng);
  return ps;
}

ParamSet init_classifier_params(const ModelConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto e = static_cast<std::size_t>(cfg.embed);
  const auto c = static_cast<std::size_t>(cfg.input_channels());
  ParamSet ps;
  add_linear(ps, kClsEmbedW, kClsEmbedB, e, c, rng);
  add_lstm(ps, kClsWx, kClsWh, kClsB, e, h, rng);
  add_linear(ps, kLatW, kLatB, kNumLateral, h, rng);
  add_linear(ps, kLonW, kLonB, kNumLongitudinal, h, rng);
  return ps;
}

ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w;
  w.config = cfg;
  w.trajectory = init_trajectory_params(cfg, seed);
  if (cfg.uses_maneuvers()) w.classifier = init_classifier_params(cfg, seed);
  return w;
}

Checkpoint to_checkpoint(const ModelWeights& w) {
  Checkpoint ck;
  const ModelConfig& c = w.config;
  ck.hyper = {{"variant", static_cast<double>(c.variant)},
              {"hidden", c.hidden},
              {"embed", c.embed},
              {"history_len", c.history_len},
              {"future_len", c.future_len},
              {"input_channels", c.input_channels()},
              {"leaky_alpha", c.leaky_alpha},
              {"position_scale", c.position_scale},
              {"lateral_scale", c.lateral_scale}};
  for (const ParamSet* ps : {&w.trajectory, &w.classifier})
    for (const Param& p : ps->entries()) ck.params.add(p.name, p.value);
  return ck;
}

ModelWeights from_checkpoint(const Checkpoint& ck) {
  auto get = [&](const char* key) {
    auto it = ck.hyper.find(key);
    if (it == ck.hyper.end()) throw SchemaError(std::string("checkpoint lacks ") + key);
    return it->second;
  };
  ModelWeights w;
  const double variant = get("variant");
  if (variant < 0 || variant > 3 || variant != std::floor(variant)) {
    throw SchemaError("checkpoint variant code out of range");
  }
  w.config.variant = static_cast<Variant>(static_cast<int>(variant));
  w.config.hidden = static_cast<int>(get("hidden"));
  w.config.embed = static_cast<int>(get("embed"));
  w.config.history_len = static_cast<int>(get("history_len"));
  w.config.future_len = static_cast<int>(get("future_len"));
  w.config.leaky_alpha = get("leaky_alpha");
  w.config.position_scale = get("position_scale");
  w.config.lateral_scale = get("lateral_scale");
  if (static_cast<int>(get("input_channels")) != w.config.input_channels()) {
    throw SchemaError("checkpoint input_channels disagrees with its variant");
  }
  // Shapes must match a freshly initialized model of the same config.
  const ParamSet ref_traj = init_trajectory_params(w.config, 0);
  const ParamSet ref_cls =
      w.config.uses_maneuvers() ? init_classifier_params(w.config, 0) : ParamSet{};
  for (const Param& p : ck.params.entries()) {
    const bool cls = p.name.rfind("cls.", 0) == 0;
    const Param* ref = (cls ? ref_cls : ref_traj).find(p.name);
    if (ref == nullptr || !ref->value.same_shape(p.value)) {
      throw SchemaError("checkpoint parameter " + p.name + " does not fit the model");
    }
    (cls ? w.classifier : w.trajectory).add(p.name, p.value);
  }
  if (w.trajectory.size() != ref_traj.size() || w.classifier.size() != ref_cls.size()) {
    throw SchemaError("checkpoint is missing parameters");
  }
  return w;
}

std::array<double, 5> maneuver_onehot(const ManeuverLabel& m) {
  std::array<double, 5> oh{};
  oh[static_cast<std::size_t>(m.lateral)] = 1.0;
  oh[kNumLateral + static_cast<std::size_t>(m.longitudinal)] = 1.0;
  return oh;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) z += (v = std::exp(v - m));
  for (double& v : p) v /= z;
  return p;
}

Tensor2 encode(const Tensor2& history, const ModelWeights& w) {
  Tape t;
  const Binder bind(t, nullptr, w.trajectory);
  const Tensor2* h = &history;
  const auto steps = history_steps(std::span(&h, 1), w.config);
  const Var ctx = run_encoder(t, bind(kEncEmbedW), bind(kEncEmbedB),
                              {bind(kEncWx), bind(kEncWh), bind(kEncB)}, steps, w.config);
  return t.value(ctx);
}

std::vector<GaussianStep> decode(const Tensor2& context, std::span<const double> maneuver,
                                 const ModelWeights& w) {
  if (context.rows() != 1 || context.cols() != static_cast<std::size_t>(w.config.hidden)) {
    throw DimensionError("context " + context.shape_string() + " does not match hidden size");
  }
  Tensor2 onehot;
  if (w.config.uses_maneuvers()) {
    check_onehot(maneuver);
    onehot = Tensor2::row(maneuver);
  }
  Tape t;
  const TrajectoryVars v = bind_trajectory(Binder(t, nullptr, w.trajectory));
  const auto raw = run_decoder(t, v, t.view(context), &onehot, w.config);
  return steps_of_row(t, raw, 0, w.config);
}

ClassProbs classify(const Tensor2& history, const ModelWeights& w) {
  require_classifier(w);
  Tape t;
  const ClassifierVars v = bind_classifier(Binder(t, nullptr, w.classifier));
  const Tensor2* h = &history;
  const auto steps = history_steps(std::span(&h, 1), w.config);
  auto [lat, lon] = run_classifier(t, v, steps, w.config);
  return probs_of_row(t, lat, lon, 0);
}

ManeuverDistribution predict_multimodal(const Tensor2& history, const ModelWeights& w) {
  ManeuverDistribution dist;
  const Tensor2 ctx = encode(history, w);
  if (!w.config.uses_maneuvers()) {
    dist.modes.push_back({std::nullopt, 1.0, decode(ctx, {}, w)});
    return dist;
  }
  const ClassProbs p = classify(history, w);
  for (int j = 0; j < kNumManeuvers; ++j) {
    const ManeuverLabel m = ManeuverLabel::from_joint(j);
    const auto oh = maneuver_onehot(m);
    dist.modes.push_back({m,
                          p.lateral[static_cast<std::size_t>(m.lateral)] *
                              p.longitudinal[static_cast<std::size_t>(m.longitudinal)],
                          decode(ctx, oh, w)});
  }
  return dist;
}

std::vector<ClassProbs> classify_batch(std::span<const Sample> samples, const ModelWeights& w,
                                       std::size_t chunk) {
  require_classifier(w);
  std::vector<ClassProbs> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - start);
    std::vector<const Tensor2*> hist(n);
    for (std::size_t i = 0; i < n; ++i) hist[i] = &samples[start + i].history;
    Tape t;
    const ClassifierVars v = bind_classifier(Binder(t, nullptr, w.classifier));
    const auto steps = history_steps(hist, w.config);
    auto [lat, lon] = run_classifier(t, v, steps, w.config);
    for (std::size_t i = 0; i < n; ++i) out.push_back(probs_of_row(t, lat, lon, i));
  }
  return out;
}

std::vector<ManeuverDistribution> predict_batch(std::span<const Sample> samples,
                                                const ModelWeights& w, std::size_t chunk) {
  const ModelConfig& cfg = w.config;
  std::vector<ManeuverDistribution> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - start);
    const auto part = samples.subspan(start, n);
    std::vector<const Tensor2*> hist(n);
    for (std::size_t i = 0; i < n; ++i) hist[i] = &part[i].history;
    const auto steps = history_steps(hist, cfg);

    Tape t;
    const TrajectoryVars v = bind_trajectory(Binder(t, nullptr, w.trajectory));
    const Var ctx = run_encoder(t, v.embed_w, v.embed_b, v.enc, steps, cfg);
    std::vector<ManeuverDistribution> dists(n);

    if (!cfg.uses_maneuvers()) {
      const auto raw = run_decoder(t, v, ctx, nullptr, cfg);
      for (std::size_t i = 0; i < n; ++i)
        dists[i].modes.push_back({std::nullopt, 1.0, steps_of_row(t, raw, i, cfg)});
    } else if (cfg.variant == Variant::MLstmGt) {
      std::vector<ManeuverLabel> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = part[i].label;
      const Tensor2 oh = onehot_rows(labels);
      const auto raw = run_decoder(t, v, ctx, &oh, cfg);
      for (std::size_t i = 0; i < n; ++i)
        dists[i].modes.push_back({labels[i], 1.0, steps_of_row(t, raw, i, cfg)});
    } else {
      const auto probs = classify_batch(part, w, n);
      for (int j = 0; j < kNumManeuvers; ++j) {
        const ManeuverLabel m = ManeuverLabel::from_joint(j);
        const std::vector<ManeuverLabel> labels(n, m);
        const Tensor2 oh = onehot_rows(labels);
        const auto raw = run_decoder(t, v, ctx, &oh, cfg);
        for (std::size_t i = 0; i < n; ++i) {
          const double p = probs[i].lateral[static_cast<std::size_t>(m.lateral)] *
                           probs[i].longitudinal[static_cast<std::size_t>(m.longitudinal)];
          dists[i].modes.push_back({m, p, steps_of_row(t, raw, i, cfg)});
        }
      }
    }
    std::move(dists.begin(), dists.end(), std::back_inserter(out));
  }
  return out;
}

double nll_loss(std::span<const GaussianStep> steps, const Tensor2& truth) {
  if (steps.size() != truth.rows() || truth.cols() != 2) {
    throw DimensionError("nll_loss: " + std::to_string(steps.size()) + " steps vs truth " +
                         truth.shape_string());
  }
  if (steps.empty()) throw DimensionError("nll_loss: empty trajectory");
  double sum = 0.0;
  for (std::size_t k = 0; k < steps.size(); ++k) sum += gaussian_nll(steps[k], truth(k, 0), truth(k, 1));
  const double loss = sum / static_cast<double>(steps.size());
  if (!std::isfinite(loss)) throw NumericError("nll_loss: non-finite loss");
  return loss;
}

double trajectory_loss(ParamSet& params, const ModelConfig& cfg,
                       std::span<const Sample* const> batch, bool backward) {
  if (batch.empty()) throw ArgumentError("trajectory_loss: empty batch");
  const std::size_t n = batch.size();
  std::vector<const Tensor2*> hist(n);
  std::vector<ManeuverLabel> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    hist[i] = &batch[i]->history;
    labels[i] = batch[i]->label;
  }
  Tape t;
  const TrajectoryVars v = bind_trajectory(Binder(t, &params, params));
  const auto steps = history_steps(hist, cfg);
  const Var ctx = run_encoder(t, v.embed_w, v.embed_b, v.enc, steps, cfg);
  const Tensor2 oh = onehot_rows(labels);
  const auto raw = run_decoder(t, v, ctx, &oh, cfg);
  Var total;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    Tensor2 truth(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      truth(i, 0) = batch[i]->future(k, 0);
      truth(i, 1) = batch[i]->future(k, 1);
    }
    const Var step = ops::sum_all(
        t, ops::bivariate_nll(t, raw[k], truth, cfg.lateral_scale, cfg.position_scale));
    total = total.valid() ? ops::add(t, total, step) : step;
  }
  const Var loss = ops::scale(t, total, 1.0 / static_cast<double>(n * raw.size()));
  if (backward) t.backward(loss);
  return t.value(loss)[0];
}

double classifier_loss(ParamSet& params, const ModelConfig& cfg,
                       std::span<const Sample* const> batch, bool backward) {
  if (batch.empty()) throw ArgumentError("classifier_loss: empty batch");
  const std::size_t n = batch.size();
  std::vector<const Tensor2*> hist(n);
  std::vector<int> lat(n), lon(n);
  for (std::size_t i = 0; i < n; ++i) {
    hist[i] = &batch[i]->history;
    lat[i] = static_cast<int>(batch[i]->label.lateral);
    lon[i] = static_cast<int>(batch[i]->label.longitudinal);
  }
  Tape t;
  const ClassifierVars v = bind_classifier(Binder(t, &params, params));
  const auto steps = history_steps(hist, cfg);
  auto [lat_logits, lon_logits] = run_classifier(t, v, steps, cfg);
  const Var loss = ops::add(t, ops::mean_all(t, ops::softmax_xent(t, lat_logits, lat)),
                            ops::mean_all(t, ops::softmax_xent(t, lon_logits, lon)));
  if (backward) t.backward(loss);
  return t.value(loss)[0];
}

namespace {

void clip_grad_norm(ParamSet& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params.entries()) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) sq += p.grad[i] * p.grad[i];
  }
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double k = max_norm / norm;
  for (auto& p : params.entries()) {
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] *= k;
  }
}

using LossFn = double (*)(ParamSet&, const ModelConfig&, std::span<const Sample* const>, bool);

TrainResult train_loop(std::span<const Sample> samples, const ModelConfig& cfg,
                       const TrainOptions& opts, ParamSet params, LossFn loss_fn) {
  if (samples.empty()) throw ArgumentError("training set is empty");
  if (opts.epochs < 1 || opts.batch < 1) throw ArgumentError("epochs and batch must be >= 1");
  TrainResult result;
  result.params = std::move(params);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);
  const AdamOptions adam{opts.lr};
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
    }
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opts.batch));
      std::vector<const Sample*> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[order[i]]);
      result.params.zero_grad();
      const double loss = loss_fn(result.params, cfg, batch, true);
      if (!std::isfinite(loss)) throw NumericError("training loss became non-finite");
      if (opts.clip_norm > 0.0) clip_grad_norm(result.params, opts.clip_norm);
      adam_step(result.params, adam);
      weighted += loss * static_cast<double>(batch.size());
    }
    const double mean = weighted / static_cast<double>(order.size());
    result.epoch_losses.push_back(mean);
    if (opts.on_epoch) opts.on_epoch(epoch, mean);
  }
  return result;
}

}  // namespace

TrainResult train_trajectory(std::span<const Sample> samples, const ModelConfig& cfg,
                             const TrainOptions& opts) {
  return train_loop(samples, cfg, opts, init_trajectory_params(cfg, opts.seed), trajectory_loss);
}

TrainResult train_classifier(std::span<const Sample> samples, const ModelConfig& cfg,
                             const TrainOptions& opts) {
  if (!cfg.uses_maneuvers()) throw ArgumentError("variant has no maneuver classifier");
  return train_loop(samples, cfg, opts, init_classifier_params(cfg, opts.seed), classifier_loss);
}

}  // namespace mlstm
