#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlstm/baseline.hpp"
#include "mlstm/model.hpp"

namespace mlstm {

inline constexpr int kHorizonSeconds = 5;
inline constexpr int kStepsPerSecond = 5;

using RmseRow = std::array<double, kHorizonSeconds>;

// RMSE of Euclidean displacement at 1..5 s, i.e. future rows 4, 9, ..., 24.
RmseRow rmse_table(std::span<const Tensor2> predictions, std::span<const Tensor2> truths);

// Means of the most probable mode; ties go to the lowest joint index.
Tensor2 point_prediction(const ManeuverDistribution& dist);
std::vector<Tensor2> point_predictions(std::span<const ManeuverDistribution> dists);

struct ManeuverAccuracy {
  double lateral = 0.0;
  double longitudinal = 0.0;
  double joint = 0.0;
};

ManeuverAccuracy maneuver_accuracy(std::span<const ManeuverLabel> predicted,
                                   std::span<const ManeuverLabel> truth);
ManeuverLabel most_likely(const ClassProbs& p);

// Constant-velocity Kalman predictions from the ego history columns.
std::vector<Tensor2> cv_predictions(std::span<const Sample> samples,
                                    const CvFilterOptions& opts = {});

// Mixture density over an (x, y) mesh in the sample's local frame. `res` is
// the mesh spacing in meters; each cell holds the sum over future steps of
// the per-step mixture density.
struct GridSpec {
  double xmin = -10.0;
  double xmax = 10.0;
  double ymin = -10.0;
  double ymax = 150.0;
  double res = 0.5;
};
GridSpec parse_grid_spec(const std::string& text);
double mixture_density(const ManeuverDistribution& dist, std::size_t step, double x, double y);
// CSV with header x,y,density.
void write_density_grid(std::ostream& os, const ManeuverDistribution& dist, const GridSpec& spec);

inline constexpr std::array<Variant, 4> kAblationVariants = {
    Variant::VLstm, Variant::SLstm, Variant::MLstm, Variant::MLstmGt};

struct AblationOptions {
  ModelConfig model;  // variant is ignored
  TrainOptions trajectory_train;
  TrainOptions classifier_train;
  std::vector<std::uint64_t> seeds = {1};
  CvFilterOptions cv;
  // Pre-trained weights by variant name; missing entries are trained.
  // M_LSTM_GT reuses the M_LSTM weights.
  std::map<std::string, ModelWeights> pretrained;
  std::function<void(const std::string&)> log;
};

// Columns in order: CV, V_LSTM, S_LSTM, M_LSTM, M_LSTM_GT. Values are the
// mean over seeds.
struct AblationResult {
  std::vector<std::string> columns;
  std::vector<RmseRow> rmse;
  std::optional<ManeuverAccuracy> classifier_accuracy;  // M_LSTM, mean over seeds
  std::map<std::string, ModelWeights> weights;          // from the last seed
  double seconds = 0.0;

  const RmseRow& column(const std::string& name) const;
};

AblationResult run_ablation(std::span<const Sample> train, std::span<const Sample> test,
                            const AblationOptions& opts);

// Table-I layout: header "horizon_s,<col>...", one row per horizon.
void write_rmse_csv(std::ostream& os, const std::vector<std::string>& columns,
                    const std::vector<RmseRow>& values);

}  // namespace mlstm
