#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcmix/dataset.hpp"
#include "mcmix/eval.hpp"
#include "mcmix/groups.hpp"
#include "mcmix/trainer.hpp"

namespace mcmix {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // [data]
  std::optional<std::filesystem::path> csv, schema;  // both or neither
  SyntheticOptions synthetic;
  TaskKind task = TaskKind::employment;
  // [split]
  double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
  // [groups]
  Setting setting = Setting::all;
  double size_threshold = kDefaultSizeThreshold;
  DemographicColumns columns;
  // [run]
  std::vector<MethodName> methods;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output;
  int audit_d = 10;
  std::map<MethodName, MethodSpec> specs;  // resolved per method
};

/// INI-style: [data], [split], [groups], [run], and optional [method.NAME]
/// sections overriding that method's hyperparameters. Unknown sections and
/// keys are rejected. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

Dataset load_dataset(const ExperimentConfig& config);

/// Seed-averaged metrics of one method.
struct MethodResult {
  MethodName method;
  double test_balanced_accuracy = 0.0;  // percent
  double test_worst_mc_alpha = 0.0;
};

/// Runs every (method, seed) job, writes <output>/<method>/<seed>/ and the
/// summary files, and returns the summary rows. `workers` > 1 runs jobs in
/// parallel threads.
std::vector<SummaryRow> run_experiment(const ExperimentConfig& config, unsigned workers = 1);

/// Worker count from MCMIX_WORKERS, default 1.
unsigned workers_from_env();

/// "row,prediction" CSV restricted to idx.
void write_predictions(std::ostream& out, const Predictions& p, std::span<const std::size_t> idx);
void save_predictions(const std::filesystem::path& path, const Predictions& p, std::span<const std::size_t> idx);

struct PredictionFile {
  Predictions values;  // full-length, zero outside rows
  IndexList rows;      // in file order
};

PredictionFile read_predictions(std::istream& in, std::size_t dataset_rows);
PredictionFile load_predictions(const std::filesystem::path& path, std::size_t dataset_rows);

void write_record(std::ostream& out, const TrainingRecord& record);

}  // namespace mcmix
