#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcmix/dataset.hpp"
#include "mcmix/fairpen.hpp"
#include "mcmix/groups.hpp"
#include "mcmix/mixup.hpp"
#include "mcmix/nn.hpp"
#include "mcmix/postprocess.hpp"

namespace mcmix {

enum class MethodName {
  base,
  fair_base,
  mixup,
  mixup_eo,
  mixup_ma,
  mixup_mc,
  fm_dp,
  fm_eo,
  fm_ma,
  fm_mc,
  enforce_ma,
  enforce_mc,
  mixup_enforce_mc,
};

std::string to_string(MethodName name);
MethodName parse_method(const std::string& text);
std::span<const MethodName> all_methods();

bool uses_enforcement(MethodName name);
bool uses_groups(MethodName name);

/// Which hyperparameter table row to start from.
enum class TaskKind { employment, income };

std::string to_string(TaskKind kind);
TaskKind parse_task(const std::string& text);

struct MethodSpec {
  MethodName name = MethodName::base;
  double lambda = 0.0;
  std::size_t k = 1;
  int d = 10;
  double p = 0.0;  // post-processing fraction of the training split
  int epochs = 10;
  std::size_t n = 100;
  std::size_t b = 500;
  double eps = kDefaultMixupEps;
  double enforce_alpha = 0.01;
  int enforce_d = 10;
  std::size_t enforce_max_draws = 1'000'000;
  std::optional<double> replacement_threshold;  // rows; default 0.025 * |train|
  double max_skip_fraction = 0.5;  // interval cells empty on the group side are exempt
  Eigen::Index hidden = nn::kHiddenWidth;
  std::optional<double> forced_t;  // fixes the interpolation coefficient
};

/// Defaults for a method, including its tuned (d, k, lambda) row.
MethodSpec default_spec(MethodName name, TaskKind task = TaskKind::employment);

struct EpochStats {
  int epoch = 0;
  double val_balanced_accuracy = 0.0;
  double mean_loss = 0.0;
  std::size_t iterations = 0;
  std::size_t skipped = 0;
  std::size_t empty_cells = 0;  // skipped interval cells with no group members
  std::size_t circuit_rules = 0;
  std::size_t enforcement_draws = 0;
};

struct TrainingRecord {
  MethodSpec spec;
  std::uint64_t seed = 0;
  std::vector<EpochStats> epochs;
  int selected_epoch = 0;  // 1-based
  nn::MlpModel model;      // weights of the selected epoch
  EncodedMatrix encoder;   // fitted layout and statistics; data left empty
  std::optional<RuleCircuit> circuit;
  std::size_t enforcement_draws = 0;
  std::vector<double> loss_trace;  // one entry per applied update
  std::size_t iterations = 0;
  std::size_t skipped = 0;
  std::size_t empty_cells = 0;
  double seconds = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Called after every applied update with the running update count.
using UpdateObserver = std::function<void(std::size_t, const nn::MlpModel&)>;

/// Runs one method end to end. Rows in splits.postproc are held out of
/// training only for enforcement methods.
TrainingRecord train(const MethodSpec& spec, const Dataset& ds, const Splits& splits, const GroupCollection& C,
                     std::uint64_t seed, const UpdateObserver& observer = {});

/// Predictions for rows idx, in idx order: the selected model's output with
/// the recorded circuit (if any) replayed on top.
Eigen::VectorXd predict(const TrainingRecord& record, const Dataset& ds, std::span<const std::size_t> idx);

/// Full-length variant; rows outside idx are zero.
Predictions predict_rows(const TrainingRecord& record, const Dataset& ds, std::span<const std::size_t> idx);

}  // namespace mcmix
