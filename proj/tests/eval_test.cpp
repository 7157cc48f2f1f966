#include "mlstm/eval.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <sstream>

#include "mlstm/error.hpp"
#include "test_util.hpp"

namespace mlstm {
namespace {

Tensor2 constant_path(double x, double y) {
  Tensor2 t(kFutureLen, 2);
  for (std::size_t k = 0; k < t.rows(); ++k) {
    t(k, 0) = x + 0.1 * static_cast<double>(k);
    t(k, 1) = y + 5.0 * static_cast<double>(k);
  }
  return t;
}

Tensor2 shifted(const Tensor2& t, double dx, double dy) {
  Tensor2 out = t;
  for (std::size_t k = 0; k < t.rows(); ++k) {
    out(k, 0) += dx;
    out(k, 1) += dy;
  }
  return out;
}

Mode mode_at(double p, double y, std::optional<ManeuverLabel> m = std::nullopt) {
  Mode out;
  out.maneuver = m;
  out.probability = p;
  for (int k = 0; k < kFutureLen; ++k) out.trajectory.push_back({0.0, y + k, 1.0, 1.0, 0.0});
  return out;
}

TEST(RmseTable, PerfectAndConstantOffset) {
  std::vector<Tensor2> truth = {constant_path(0, 0), constant_path(1, 2), constant_path(-3, 7)};
  const RmseRow zero = rmse_table(truth, truth);
  for (double v : zero) EXPECT_EQ(v, 0.0);
  std::vector<Tensor2> off;
  for (const auto& t : truth) off.push_back(shifted(t, 0.3, 0.4));
  for (double v : rmse_table(off, truth)) EXPECT_NEAR(v, 0.5, 1e-12);
}

TEST(RmseTable, UsesStepFiveKAndEuclideanError) {
  const Tensor2 truth = constant_path(0, 0);
  Tensor2 pred = truth;
  pred(4, 0) += 3.0;   // 1 s
  pred(9, 1) += 4.0;   // 2 s
  pred(5, 0) += 99.0;  // not an evaluated step
  std::vector<Tensor2> p{pred}, t{truth};
  const RmseRow r = rmse_table(p, t);
  EXPECT_DOUBLE_EQ(r[0], 3.0);
  EXPECT_DOUBLE_EQ(r[1], 4.0);
  EXPECT_DOUBLE_EQ(r[2], 0.0);
}

TEST(RmseTable, OrderInvariantAndMonotone) {
  std::mt19937_64 rng(2);
  std::vector<Tensor2> truth, pred;
  for (int i = 0; i < 20; ++i) {
    truth.push_back(testing::random_tensor(kFutureLen, 2, rng, -5, 5));
    pred.push_back(testing::random_tensor(kFutureLen, 2, rng, -5, 5));
  }
  const RmseRow base = rmse_table(pred, truth);
  std::vector<Tensor2> rt(truth.rbegin(), truth.rend()), rp(pred.rbegin(), pred.rend());
  const RmseRow rev = rmse_table(rp, rt);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(rev[k], base[k], 1e-12);
  truth.push_back(constant_path(0, 0));
  pred.push_back(shifted(constant_path(0, 0), 50, 50));
  const RmseRow worse = rmse_table(pred, truth);
  for (int k = 0; k < 5; ++k) EXPECT_GT(worse[k], base[k]);
}

TEST(RmseTable, Errors) {
  EXPECT_THROW(rmse_table({}, {}), ArgumentError);
  std::vector<Tensor2> one{constant_path(0, 0)}, two{constant_path(0, 0), constant_path(0, 0)};
  EXPECT_THROW(rmse_table(one, two), ArgumentError);
  std::vector<Tensor2> short_path{Tensor2(10, 2)};
  EXPECT_THROW(rmse_table(short_path, short_path), DimensionError);
}

TEST(PointPrediction, ArgmaxWithLowestIndexTie) {
  ManeuverDistribution single;
  single.modes.push_back(mode_at(1.0, 7.0));
  EXPECT_EQ(point_prediction(single)(3, 1), 10.0);

  ManeuverDistribution d;
  const double p[6] = {0.4, 0.4, 0.2, 0, 0, 0};
  for (int j = 0; j < 6; ++j) d.modes.push_back(mode_at(p[j], 100.0 * j, ManeuverLabel::from_joint(j)));
  EXPECT_EQ(point_prediction(d)(0, 1), 0.0);
  d.modes[1].probability = 0.41;
  EXPECT_EQ(point_prediction(d)(0, 1), 100.0);
  EXPECT_THROW(point_prediction(ManeuverDistribution{}), ArgumentError);
}

TEST(PointPrediction, InvariantToLogitShift) {
  const std::vector<double> lat = {0.2, 1.3, -0.7}, lon = {0.4, -0.1};
  auto dist_for = [](const std::vector<double>& la, const std::vector<double>& lo) {
    const auto pl = softmax(la), po = softmax(lo);
    ManeuverDistribution d;
    for (int j = 0; j < 6; ++j) {
      const auto m = ManeuverLabel::from_joint(j);
      d.modes.push_back(mode_at(pl[static_cast<int>(m.lateral)] * po[static_cast<int>(m.longitudinal)],
                                10.0 * j, m));
    }
    return d;
  };
  std::vector<double> lat_shift = lat;
  for (double& v : lat_shift) v += 37.5;
  EXPECT_EQ(point_prediction(dist_for(lat, lon)), point_prediction(dist_for(lat_shift, lon)));
}

TEST(ManeuverAccuracy, Examples) {
  std::vector<ManeuverLabel> truth, same, lat_only;
  for (int j = 0; j < 6; ++j) {
    const auto m = ManeuverLabel::from_joint(j);
    truth.push_back(m);
    same.push_back(m);
    lat_only.push_back({m.lateral, m.longitudinal == Longitudinal::Brake ? Longitudinal::Normal
                                                                         : Longitudinal::Brake});
  }
  const auto a = maneuver_accuracy(same, truth);
  EXPECT_EQ(a.lateral, 1.0);
  EXPECT_EQ(a.joint, 1.0);
  const auto b = maneuver_accuracy(lat_only, truth);
  EXPECT_EQ(b.lateral, 1.0);
  EXPECT_EQ(b.longitudinal, 0.0);
  EXPECT_EQ(b.joint, 0.0);
  truth.pop_back();
  EXPECT_THROW(maneuver_accuracy(same, truth), ArgumentError);
}

TEST(ManeuverAccuracy, RandomGuessingNearOneSixth) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> j(0, 5);
  std::vector<ManeuverLabel> truth, pred;
  for (int i = 0; i < 10000; ++i) {
    truth.push_back(ManeuverLabel::from_joint(i % 6));
    pred.push_back(ManeuverLabel::from_joint(j(rng)));
  }
  EXPECT_NEAR(maneuver_accuracy(pred, truth).joint, 1.0 / 6.0, 0.05);
}

TEST(MostLikely, PicksArgmaxPerAxis) {
  ClassProbs p;
  p.lateral = {0.2, 0.3, 0.5};
  p.longitudinal = {0.6, 0.4};
  EXPECT_EQ(most_likely(p), (ManeuverLabel{Lateral::ChangeRight, Longitudinal::Normal}));
}

TEST(CvPredictions, ExactOnConstantVelocitySamples) {
  Sample s;
  for (int r = 0; r < kHistoryLen; ++r) s.history(r, 1) = 4.0 * (r - 15);
  for (int k = 0; k < kFutureLen; ++k) s.future(k, 1) = 4.0 * (k + 1);
  const std::vector<Sample> v{s, s};
  std::vector<Tensor2> truth{s.future, s.future};
  for (double e : rmse_table(cv_predictions(v), truth)) EXPECT_LT(e, 1e-6);
}

TEST(Grid, ParseAndDensity) {
  const GridSpec g = parse_grid_spec("-2,2,0,10,0.5");
  EXPECT_EQ(g.xmin, -2.0);
  EXPECT_EQ(g.res, 0.5);
  EXPECT_THROW(parse_grid_spec("1,0,0,1,1"), ArgumentError);
  EXPECT_THROW(parse_grid_spec("0,1,0,1"), ArgumentError);
  EXPECT_THROW(parse_grid_spec("0,1,0,1,x"), ArgumentError);

  ManeuverDistribution d;
  d.modes.push_back(mode_at(0.25, 0.0));
  d.modes.push_back(mode_at(0.75, 50.0));
  const double at_mode = mixture_density(d, 0, 0.0, 0.0);
  EXPECT_NEAR(at_mode, 0.25 / (2 * std::numbers::pi), 1e-12);

  std::ostringstream os;
  write_density_grid(os, d, parse_grid_spec("-1,1,0,1,1"));
  std::istringstream in(os.str());
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "x,y,density");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3 * 2);
}

TEST(Grid, MixtureDensityIntegratesToOnePerStep) {
  ManeuverDistribution d;
  d.modes.push_back(mode_at(0.3, 0.0));
  d.modes.push_back(mode_at(0.7, 8.0));
  double mass = 0.0;
  const double h = 0.05;
  for (double x = -8; x <= 8; x += h)
    for (double y = -8; y <= 18; y += h) mass += mixture_density(d, 2, x, y) * h * h;
  EXPECT_NEAR(mass, 1.0, 1e-3);
}

TEST(RmseCsv, TableOneLayout) {
  std::ostringstream os;
  write_rmse_csv(os, {"CV", "M_LSTM"}, {RmseRow{1, 2, 3, 4, 5}, RmseRow{0.5, 1, 1.5, 2, 2.5}});
  EXPECT_EQ(os.str(),
            "horizon_s,CV,M_LSTM\n1,1.000000,0.500000\n2,2.000000,1.000000\n"
            "3,3.000000,1.500000\n4,4.000000,2.000000\n5,5.000000,2.500000\n");
}

TEST(Ablation, ShapeContractOnTinyData) {
  std::mt19937_64 rng(4);
  std::vector<Sample> train, test;
  for (int i = 0; i < 12; ++i) train.push_back(testing::random_sample(rng, 3.0));
  for (int i = 0; i < 6; ++i) test.push_back(testing::random_sample(rng, 3.0));
  AblationOptions o;
  o.model.hidden = 8;
  o.model.embed = 4;
  o.trajectory_train.epochs = 2;
  o.trajectory_train.batch = 6;
  o.classifier_train = o.trajectory_train;
  const AblationResult r = run_ablation(train, test, o);
  EXPECT_EQ(r.columns, (std::vector<std::string>{"CV", "V_LSTM", "S_LSTM", "M_LSTM", "M_LSTM_GT"}));
  ASSERT_EQ(r.rmse.size(), 5u);
  for (const auto& row : r.rmse)
    for (double v : row) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GT(v, 0.0);
    }
  ASSERT_TRUE(r.classifier_accuracy.has_value());
  EXPECT_EQ(r.weights.size(), 3u);
  EXPECT_EQ(r.column("CV"), r.rmse[0]);

  // Pre-trained weights are reused instead of retrained.
  AblationOptions again = o;
  again.pretrained = r.weights;
  const AblationResult r2 = run_ablation({}, test, again);
  EXPECT_EQ(r2.rmse, r.rmse);
}

}  // namespace
}  // namespace mlstm
