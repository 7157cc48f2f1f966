#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mlstm/checkpoint.hpp"
#include "mlstm/gaussian.hpp"
#include "mlstm/maneuvers.hpp"
#include "mlstm/params.hpp"
#include "mlstm/tape.hpp"
#include "mlstm/trackstore.hpp"

namespace mlstm {

// V_LSTM: ego history only. S_LSTM: ego plus six neighbors. M_LSTM: S_LSTM
// with maneuver-conditioned decoding and a maneuver classifier. M_LSTM_GT:
// M_LSTM weights decoded with ground-truth maneuvers.
enum class Variant : int { VLstm = 0, SLstm = 1, MLstm = 2, MLstmGt = 3 };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view s);

struct ModelConfig {
  Variant variant = Variant::MLstm;
  int hidden = 128;
  int embed = 64;
  int history_len = kHistoryLen;
  int future_len = kFutureLen;
  double leaky_alpha = 0.1;
  // Positions enter the network divided by these and head means/sigmas are
  // multiplied by them: position_scale for the longitudinal (y) axis,
  // lateral_scale for x. Lane offsets span a few meters while longitudinal
  // offsets span a hundred or more.
  double position_scale = 10.0;
  double lateral_scale = 1.0;

  int input_channels() const { return variant == Variant::VLstm ? 2 : kChannels; }
  bool uses_maneuvers() const {
    return variant == Variant::MLstm || variant == Variant::MLstmGt;
  }
};

// Trajectory encoder-decoder parameters plus, for maneuver variants, the
// separately trained classifier.
struct ModelWeights {
  ModelConfig config;
  ParamSet trajectory;
  ParamSet classifier;
};

ParamSet init_trajectory_params(const ModelConfig& cfg, std::uint64_t seed);
ParamSet init_classifier_params(const ModelConfig& cfg, std::uint64_t seed);
ModelWeights init_weights(const ModelConfig& cfg, std::uint64_t seed);

Checkpoint to_checkpoint(const ModelWeights& w);
ModelWeights from_checkpoint(const Checkpoint& ck);

struct ClassProbs {
  std::array<double, kNumLateral> lateral{};
  std::array<double, kNumLongitudinal> longitudinal{};
};

struct Mode {
  std::optional<ManeuverLabel> maneuver;  // empty for unimodal predictors
  double probability = 1.0;
  std::vector<GaussianStep> trajectory;
};

// For maneuver variants: six modes in joint-index order with probabilities
// p_lat[a] * p_lon[b]. Otherwise a single mode with probability 1.
struct ManeuverDistribution {
  std::vector<Mode> modes;
};

// One-hot of the lateral class followed by one-hot of the longitudinal class.
std::array<double, 5> maneuver_onehot(const ManeuverLabel& m);
std::vector<double> softmax(std::span<const double> logits);

// Single-sample inference on a (history_len x 14) local-frame history.
Tensor2 encode(const Tensor2& history, const ModelWeights& w);
// `maneuver` is the 5-element one-hot pair, empty for V/S variants.
std::vector<GaussianStep> decode(const Tensor2& context, std::span<const double> maneuver,
                                 const ModelWeights& w);
ClassProbs classify(const Tensor2& history, const ModelWeights& w);
ManeuverDistribution predict_multimodal(const Tensor2& history, const ModelWeights& w);

// Batched inference. For MLstmGt the ground-truth label of each sample
// selects a single decoded mode.
std::vector<ManeuverDistribution> predict_batch(std::span<const Sample> samples,
                                                const ModelWeights& w,
                                                std::size_t chunk = 128);
std::vector<ClassProbs> classify_batch(std::span<const Sample> samples, const ModelWeights& w,
                                       std::size_t chunk = 256);

// Mean over steps of -log N2(truth_t; step_t).
double nll_loss(std::span<const GaussianStep> steps, const Tensor2& truth);

// Mean trajectory NLL of a batch (ground-truth maneuvers on the decoder
// input for maneuver variants). Runs backward into `params` when asked.
double trajectory_loss(ParamSet& params, const ModelConfig& cfg,
                       std::span<const Sample* const> batch, bool backward);
// Sum of the lateral and longitudinal cross-entropies, each a batch mean.
double classifier_loss(ParamSet& params, const ModelConfig& cfg,
                       std::span<const Sample* const> batch, bool backward);

struct TrainOptions {
  int epochs = 30;
  int batch = 128;
  double lr = 1e-3;
  // Rescale the minibatch gradient to this global L2 norm when it exceeds it; 0 disables.
  double clip_norm = 0.0;
  std::uint64_t seed = 0;
  std::function<void(int epoch, double mean_loss)> on_epoch;
};

struct TrainResult {
  ParamSet params;
  std::vector<double> epoch_losses;
};

// Seeded init and shuffling; identical inputs give bitwise-identical weights.
TrainResult train_trajectory(std::span<const Sample> samples, const ModelConfig& cfg,
                             const TrainOptions& opts);
TrainResult train_classifier(std::span<const Sample> samples, const ModelConfig& cfg,
                             const TrainOptions& opts);

}  // namespace mlstm
