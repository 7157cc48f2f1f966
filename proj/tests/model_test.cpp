#include "mlstm/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mlstm/error.hpp"
#include "mlstm/gradcheck.hpp"
#include "test_util.hpp"

namespace mlstm {
namespace {

using testing::random_sample;
using testing::random_tensor;

ModelConfig small_config(Variant v, int hidden = 16, int embed = 8) {
  ModelConfig c;
  c.variant = v;
  c.hidden = hidden;
  c.embed = embed;
  return c;
}

ModelWeights zero_weights(ModelConfig cfg) {
  ModelWeights w = init_weights(cfg, 1);
  for (ParamSet* ps : {&w.trajectory, &w.classifier})
    for (Param& p : ps->entries()) p.value.fill(0.0);
  return w;
}

std::vector<Sample> random_samples(std::size_t n, std::uint64_t seed, double span = 20.0) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(rng, span));
  return out;
}

std::vector<const Sample*> pointers(const std::vector<Sample>& s) {
  std::vector<const Sample*> out;
  for (const Sample& x : s) out.push_back(&x);
  return out;
}

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::VLstm, Variant::SLstm, Variant::MLstm, Variant::MLstmGt})
    EXPECT_EQ(variant_from_string(to_string(v)), v);
  EXPECT_THROW(variant_from_string("X_LSTM"), ConfigError);
}

TEST(ModelConfig, InputArityFollowsVariant) {
  EXPECT_EQ(small_config(Variant::VLstm).input_channels(), 2);
  EXPECT_EQ(small_config(Variant::SLstm).input_channels(), 14);
  EXPECT_FALSE(small_config(Variant::SLstm).uses_maneuvers());
  EXPECT_TRUE(small_config(Variant::MLstmGt).uses_maneuvers());
  EXPECT_EQ(init_weights(small_config(Variant::SLstm), 1).classifier.size(), 0u);
}

TEST(Encode, ZeroHistoryZeroWeightsGivesZeroContext) {
  const ModelWeights w = zero_weights(small_config(Variant::MLstm));
  const Tensor2 ctx = encode(Tensor2(kHistoryLen, kChannels), w);
  ASSERT_EQ(ctx.cols(), 16u);
  for (double v : ctx.flat()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, OrderSensitiveAndDeterministic) {
  const ModelWeights w = init_weights(small_config(Variant::SLstm), 3);
  std::mt19937_64 rng(4);
  const Tensor2 h = random_tensor(kHistoryLen, kChannels, rng, -10, 10);
  Tensor2 permuted = h;
  for (std::size_t c = 0; c < kChannels; ++c) std::swap(permuted(0, c), permuted(kHistoryLen - 1, c));
  EXPECT_EQ(encode(h, w), encode(h, w));
  EXPECT_NE(encode(h, w), encode(permuted, w));
}

TEST(Encode, WrongLengthThrows) {
  const ModelWeights w = init_weights(small_config(Variant::SLstm), 3);
  EXPECT_THROW(encode(Tensor2(kHistoryLen - 1, kChannels), w), DimensionError);
  EXPECT_THROW(encode(Tensor2(kHistoryLen, 3), w), DimensionError);
}

TEST(Decode, AxisScalesApplyPerAxis) {
  ModelConfig cfg = small_config(Variant::VLstm);
  cfg.position_scale = 30.0;
  cfg.lateral_scale = 2.0;
  ModelWeights w = zero_weights(cfg);
  w.trajectory.at("dec.out.b").value = Tensor2(1, 5, {1.0, 1.0, 0.0, 0.0, 0.0});
  for (const auto& g : decode(Tensor2(1, 16), {}, w)) {
    EXPECT_DOUBLE_EQ(g.mux, 2.0);
    EXPECT_DOUBLE_EQ(g.muy, 30.0);
    EXPECT_DOUBLE_EQ(g.sx, 2.0);
    EXPECT_DOUBLE_EQ(g.sy, 30.0);
  }
}

TEST(Encode, LateralAndLongitudinalChannelsScaleSeparately) {
  ModelConfig a = small_config(Variant::SLstm);
  ModelConfig b = a;
  b.position_scale *= 2.0;
  b.lateral_scale *= 3.0;
  const ModelWeights wa = init_weights(a, 4);
  ModelWeights wb = wa;
  wb.config = b;
  std::mt19937_64 rng(4);
  const Sample s = testing::random_sample(rng);
  Tensor2 h2 = s.history;
  for (std::size_t k = 0; k < h2.rows(); ++k)
    for (std::size_t c = 0; c < h2.cols(); ++c) h2(k, c) *= c % 2 == 0 ? 3.0 : 2.0;
  const Tensor2 ea = encode(s.history, wa), eb = encode(h2, wb);
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_NEAR(ea.flat()[i], eb.flat()[i], 1e-12);
}

TEST(Decode, ZeroHeadGivesStandardStep) {
  ModelConfig cfg = small_config(Variant::MLstm);
  cfg.position_scale = 1.0;
  const ModelWeights w = zero_weights(cfg);
  const auto oh = maneuver_onehot({});
  const auto steps = decode(Tensor2(1, 16), oh, w);
  ASSERT_EQ(steps.size(), 25u);
  for (const auto& g : steps) {
    EXPECT_EQ(g.mux, 0.0);
    EXPECT_EQ(g.muy, 0.0);
    EXPECT_EQ(g.sx, 1.0);
    EXPECT_EQ(g.sy, 1.0);
    EXPECT_EQ(g.rho, 0.0);
  }
}

TEST(Decode, LateralOneHotChangesOutput) {
  const ModelWeights w = init_weights(small_config(Variant::MLstm), 5);
  std::mt19937_64 rng(6);
  const Tensor2 ctx = random_tensor(1, 16, rng);
  const auto a = decode(ctx, maneuver_onehot({Lateral::KeepLane, Longitudinal::Normal}), w);
  const auto b = decode(ctx, maneuver_onehot({Lateral::ChangeLeft, Longitudinal::Normal}), w);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) differs |= a[k].mux != b[k].mux || a[k].muy != b[k].muy;
  EXPECT_TRUE(differs);
}

TEST(Decode, InvalidOneHotThrows) {
  const ModelWeights w = init_weights(small_config(Variant::MLstm), 5);
  const Tensor2 ctx(1, 16);
  const std::vector<double> two_lateral = {1, 1, 0, 1, 0};
  const std::vector<double> no_lon = {1, 0, 0, 0, 0};
  const std::vector<double> fractional = {0.5, 0.5, 0, 1, 0};
  const std::vector<double> short_vec = {1, 0, 0, 1};
  for (const auto* v : {&two_lateral, &no_lon, &fractional, &short_vec})
    EXPECT_THROW(decode(ctx, *v, w), ArgumentError);
}

TEST(Decode, HeadValidAtRawExtremes) {
  ModelWeights w = init_weights(small_config(Variant::SLstm), 2);
  for (double extreme : {-50.0, 50.0}) {
    w.trajectory.at("dec.out.w").value.fill(0.0);
    w.trajectory.at("dec.out.b").value.fill(extreme);
    for (const auto& g : decode(Tensor2(1, 16), {}, w)) {
      EXPECT_TRUE(is_valid(g)) << extreme;
      EXPECT_GT(g.sx, 0.0);
      EXPECT_LT(std::abs(g.rho), 1.0);
    }
  }
}

TEST(Classify, ZeroWeightsAreUniform) {
  const ModelWeights w = zero_weights(small_config(Variant::MLstm));
  std::mt19937_64 rng(1);
  const ClassProbs p = classify(random_tensor(kHistoryLen, kChannels, rng), w);
  for (double v : p.lateral) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  for (double v : p.longitudinal) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Classify, RequiresClassifierWeights) {
  const ModelWeights w = init_weights(small_config(Variant::SLstm), 1);
  EXPECT_THROW(classify(Tensor2(kHistoryLen, kChannels), w), ArgumentError);
}

TEST(Softmax, ShiftInvariant) {
  const std::vector<double> a = {0.3, -1.2, 2.0};
  const std::vector<double> b = {100.3, 98.8, 102.0};
  const auto pa = softmax(a), pb = softmax(b);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(pa[i], pb[i], 1e-12);
}

TEST(PredictMultimodal, MixtureNormalizedOverRandomDraws) {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const ModelWeights w = init_weights(small_config(Variant::MLstm, 8, 4), rng());
    const Tensor2 h = random_tensor(kHistoryLen, kChannels, rng, -30, 30);
    const auto d = predict_multimodal(h, w);
    ASSERT_EQ(d.modes.size(), 6u);
    double sum = 0.0;
    for (const auto& m : d.modes) {
      EXPECT_GE(m.probability, 0.0);
      EXPECT_LE(m.probability, 1.0);
      EXPECT_EQ(m.trajectory.size(), 25u);
      sum += m.probability;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(PredictMultimodal, ProbabilitiesAreProductOfHeads) {
  const ModelWeights w = init_weights(small_config(Variant::MLstm), 12);
  std::mt19937_64 rng(13);
  const Tensor2 h = random_tensor(kHistoryLen, kChannels, rng, -10, 10);
  const ClassProbs p = classify(h, w);
  const auto d = predict_multimodal(h, w);
  for (int j = 0; j < kNumManeuvers; ++j) {
    const auto m = ManeuverLabel::from_joint(j);
    ASSERT_TRUE(d.modes[j].maneuver.has_value());
    EXPECT_EQ(*d.modes[j].maneuver, m);
    EXPECT_DOUBLE_EQ(d.modes[j].probability,
                     p.lateral[static_cast<int>(m.lateral)] *
                         p.longitudinal[static_cast<int>(m.longitudinal)]);
  }
}

TEST(PredictBatch, MatchesSingleSampleInference) {
  const ModelWeights w = init_weights(small_config(Variant::MLstm), 14);
  const auto samples = random_samples(7, 15);
  const auto batched = predict_batch(samples, w, 3);
  ASSERT_EQ(batched.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto single = predict_multimodal(samples[i].history, w);
    for (std::size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(batched[i].modes[j].probability, single.modes[j].probability, 1e-12);
      EXPECT_NEAR(batched[i].modes[j].trajectory[24].muy, single.modes[j].trajectory[24].muy, 1e-9);
    }
  }
}

TEST(PredictBatch, GroundTruthVariantUsesLabel) {
  ModelWeights w = init_weights(small_config(Variant::MLstm), 16);
  w.config.variant = Variant::MLstmGt;
  const auto samples = random_samples(6, 17);
  const auto d = predict_batch(samples, w);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ASSERT_EQ(d[i].modes.size(), 1u);
    EXPECT_EQ(*d[i].modes[0].maneuver, samples[i].label);
    EXPECT_EQ(d[i].modes[0].probability, 1.0);
    const auto oh = maneuver_onehot(samples[i].label);
    const auto direct = decode(encode(samples[i].history, w), oh, w);
    EXPECT_NEAR(d[i].modes[0].trajectory[10].mux, direct[10].mux, 1e-9);
  }
}

TEST(VariantContract, VanillaIgnoresNeighborChannels) {
  for (Variant v : {Variant::VLstm, Variant::SLstm}) {
    const ModelWeights w = init_weights(small_config(v), 21);
    std::mt19937_64 rng(22);
    Tensor2 h = random_tensor(kHistoryLen, kChannels, rng, -10, 10);
    const auto base = predict_multimodal(h, w).modes[0].trajectory;
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t c = 2; c < kChannels; ++c) h(r, c) += 5.0;
    const auto moved = predict_multimodal(h, w).modes[0].trajectory;
    const bool same = base[24].mux == moved[24].mux && base[24].muy == moved[24].muy;
    EXPECT_EQ(same, v == Variant::VLstm) << to_string(v);
  }
}

TEST(NllLoss, ClosedForms) {
  const Tensor2 truth(1, 2);
  const GaussianStep standard{0, 0, 1, 1, 0};
  EXPECT_NEAR(nll_loss(std::span(&standard, 1), truth), std::log(2 * std::numbers::pi), 1e-12);
  const GaussianStep corr{0, 0, 1, 1, 0.5};
  EXPECT_NEAR(nll_loss(std::span(&corr, 1), truth),
              std::log(2 * std::numbers::pi * std::sqrt(0.75)), 1e-12);
}

TEST(NllLoss, ErrorsOnMismatchAndNonFinite) {
  const GaussianStep g{0, 0, 1, 1, 0};
  EXPECT_THROW(nll_loss(std::span(&g, 1), Tensor2(2, 2)), DimensionError);
  const GaussianStep tiny{0, 0, 1e-300, 1e-300, 0};
  Tensor2 far(1, 2);
  far(0, 0) = 1e10;
  EXPECT_THROW(nll_loss(std::span(&tiny, 1), far), NumericError);
}

TEST(Losses, MatchBatchedInference) {
  const ModelConfig cfg = small_config(Variant::MLstm);
  ModelWeights w = init_weights(cfg, 31);
  const auto samples = random_samples(4, 32);
  double expected = 0.0;
  for (const Sample& s : samples) {
    const auto steps = decode(encode(s.history, w), maneuver_onehot(s.label), w);
    expected += nll_loss(steps, s.future);
  }
  expected /= 4.0;
  EXPECT_NEAR(trajectory_loss(w.trajectory, cfg, pointers(samples), false), expected, 1e-10);
}

TEST(Losses, EndToEndGradientsMatchFiniteDifferences) {
  for (Variant v : {Variant::VLstm, Variant::SLstm, Variant::MLstm}) {
    const ModelConfig cfg = small_config(v, 12, 6);
    const auto samples = random_samples(5, 40 + static_cast<int>(v));
    const auto batch = pointers(samples);
    ParamSet traj = init_trajectory_params(cfg, 41);
    const GradCheckReport r = grad_check(
        [&](ParamSet& p, bool g) { return trajectory_loss(p, cfg, batch, g); }, traj,
        {.eps = 1e-5, .max_coords = 400, .seed = 42});
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(v) << " worst " << r.worst_param << "["
                                     << r.worst_index << "] " << r.worst_analytic << " vs "
                                     << r.worst_numeric;
    if (cfg.uses_maneuvers()) {
      ParamSet cls = init_classifier_params(cfg, 43);
      const GradCheckReport rc = grad_check(
          [&](ParamSet& p, bool g) { return classifier_loss(p, cfg, batch, g); }, cls,
          {.eps = 1e-5, .max_coords = 400, .seed = 44});
      EXPECT_LT(rc.max_rel_error, 1e-4) << "classifier worst " << rc.worst_param;
    }
  }
}

TEST(Training, DeterministicGivenSeed) {
  const ModelConfig cfg = small_config(Variant::MLstm, 8, 4);
  const auto samples = random_samples(20, 50);
  TrainOptions opts;
  opts.epochs = 3;
  opts.batch = 6;
  opts.seed = 9;
  const auto a = train_trajectory(samples, cfg, opts);
  const auto b = train_trajectory(samples, cfg, opts);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  for (std::size_t i = 0; i < a.params.size(); ++i)
    EXPECT_EQ(a.params.entries()[i].value, b.params.entries()[i].value);
  opts.seed = 10;
  EXPECT_NE(train_trajectory(samples, cfg, opts).epoch_losses, a.epoch_losses);
}

TEST(Training, ReducesLossAndReportsEveryEpoch) {
  const ModelConfig cfg = small_config(Variant::SLstm, 16, 8);
  const auto samples = random_samples(30, 51, 5.0);
  TrainOptions opts;
  opts.epochs = 40;
  opts.batch = 10;
  int calls = 0;
  opts.on_epoch = [&](int epoch, double) { EXPECT_EQ(epoch, ++calls); };
  const auto r = train_trajectory(samples, cfg, opts);
  EXPECT_EQ(calls, 40);
  ASSERT_EQ(r.epoch_losses.size(), 40u);
  EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front());
}

TEST(Training, GradientClippingOnlyActsAboveTheLimit) {
  const ModelConfig cfg = small_config(Variant::SLstm, 8, 4);
  const auto samples = random_samples(12, 53, 5.0);
  TrainOptions opts;
  opts.epochs = 3;
  opts.batch = 4;
  const auto plain = train_trajectory(samples, cfg, opts);
  opts.clip_norm = 1e12;
  EXPECT_EQ(train_trajectory(samples, cfg, opts).epoch_losses, plain.epoch_losses);
  opts.clip_norm = 1e-3;
  const auto clipped = train_trajectory(samples, cfg, opts);
  EXPECT_NE(clipped.epoch_losses, plain.epoch_losses);
  for (double l : clipped.epoch_losses) EXPECT_TRUE(std::isfinite(l));
}

TEST(Training, ClassifierOnOneClassApproachesZero) {
  const ModelConfig cfg = small_config(Variant::MLstm, 8, 4);
  auto samples = random_samples(16, 52);
  for (Sample& s : samples) s.label = {Lateral::ChangeRight, Longitudinal::Brake};
  TrainOptions opts;
  opts.epochs = 150;
  opts.batch = 16;
  opts.lr = 1e-2;
  const auto r = train_classifier(samples, cfg, opts);
  EXPECT_LT(r.epoch_losses.back(), 0.05);
  EXPECT_GT(r.epoch_losses.back(), 0.0);
}

TEST(Training, RejectsEmptySetsAndBadOptions) {
  const ModelConfig cfg = small_config(Variant::MLstm);
  EXPECT_THROW(train_trajectory({}, cfg, {}), ArgumentError);
  const auto samples = random_samples(2, 1);
  TrainOptions bad;
  bad.batch = 0;
  EXPECT_THROW(train_trajectory(samples, cfg, bad), ArgumentError);
  EXPECT_THROW(train_classifier(samples, small_config(Variant::SLstm), {}), ArgumentError);
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
  const ModelWeights w = init_weights(small_config(Variant::MLstm), 60);
  std::stringstream buf;
  write_checkpoint(buf, to_checkpoint(w));
  const ModelWeights back = from_checkpoint(read_checkpoint(buf));
  EXPECT_EQ(back.config.variant, Variant::MLstm);
  EXPECT_EQ(back.config.hidden, 16);
  const auto samples = random_samples(3, 61);
  const auto a = predict_batch(samples, w);
  const auto b = predict_batch(samples, back);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      EXPECT_EQ(a[i].modes[j].trajectory[24].muy, b[i].modes[j].trajectory[24].muy);
}

TEST(Checkpoint, RejectsMismatchedShapes) {
  Checkpoint ck = to_checkpoint(init_weights(small_config(Variant::SLstm), 60));
  ck.hyper["hidden"] = 17;
  EXPECT_THROW(from_checkpoint(ck), SchemaError);
  ck.hyper.erase("hidden");
  EXPECT_THROW(from_checkpoint(ck), SchemaError);
}

}  // namespace
}  // namespace mlstm
