// mcmix command-line front end. Exit codes: 0 success, 1 runtime failure,
// 2 usage or input parse error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mcmix/audit.hpp"
#include "mcmix/dataset.hpp"
#include "mcmix/experiment.hpp"
#include "mcmix/groups.hpp"
#include "mcmix/postprocess.hpp"

namespace fs = std::filesystem;
using namespace mcmix;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

Dataset load_data(const fs::path& data, const fs::path& schema) { return load_csv(data, load_schema(schema)); }

RuleCircuit load_circuit(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open circuit file " + path.string());
  try {
    return read_circuit(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Surfaces unknown columns before any rule is applied.
void check_columns(const RuleCircuit& circuit, const Dataset& ds) {
  for (const auto& rule : circuit.rules) {
    for (const auto& clause : rule.group.clauses) {
      if (!ds.schema().index_of(clause.column)) {
        throw DataError("circuit rule '" + rule.group.label + "' references unknown column '" + clause.column + "'");
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multicalibration audit, post-processing and training toolkit"};
  app.require_subcommand(1);

  std::string data, schema, preds, groups, circuit, out, out_preds, out_circuit, out_schema, kind = "mc";
  std::string config;
  int d = 10;
  double alpha = 0.01;
  std::uint64_t seed = 0;
  std::size_t max_draws = 1'000'000;
  SyntheticOptions synth;

  auto* audit = app.add_subcommand("audit", "Per-group, per-interval calibration violations");
  audit->add_option("--data", data, "Dataset CSV")->required();
  audit->add_option("--schema", schema, "Schema file")->required();
  audit->add_option("--preds", preds, "Predictions CSV (row,prediction)")->required();
  audit->add_option("--groups", groups, "Group collection file")->required();
  audit->add_option("-d", d, "Number of prediction intervals minus one")->check(CLI::PositiveNumber);
  audit->add_option("-o,--out", out, "Report path (default stdout)");

  auto* run = app.add_subcommand("run", "Run an experiment config; MCMIX_WORKERS sets parallel jobs");
  run->add_option("config", config, "Experiment config file")->required();

  auto* post = app.add_subcommand("postprocess", "Enforce multicalibration or multiaccuracy on predictions");
  post->add_option("--data", data, "Dataset CSV holding the outcomes")->required();
  post->add_option("--schema", schema, "Schema file")->required();
  post->add_option("--preds", preds, "Predictions CSV for the post-processing rows")->required();
  post->add_option("--groups", groups, "Group collection file")->required();
  post->add_option("--kind", kind, "mc or ma")->check(CLI::IsMember({"mc", "ma"}));
  post->add_option("--alpha", alpha, "Violation tolerance");
  post->add_option("-d", d, "Number of prediction intervals minus one")->check(CLI::PositiveNumber);
  post->add_option("--seed", seed, "Group-draw seed");
  post->add_option("--max-draws", max_draws, "Group-draw budget");
  post->add_option("--out-preds", out_preds, "Adjusted predictions output")->required();
  post->add_option("--out-circuit", out_circuit, "Rule circuit output")->required();

  auto* apply = app.add_subcommand("apply", "Replay a rule circuit on predictions");
  apply->add_option("--data", data, "Dataset CSV")->required();
  apply->add_option("--schema", schema, "Schema file")->required();
  apply->add_option("--preds", preds, "Predictions CSV")->required();
  apply->add_option("--circuit", circuit, "Rule circuit file")->required();
  apply->add_option("-o,--out", out, "Adjusted predictions output")->required();

  auto* gen = app.add_subcommand("synth", "Generate a synthetic census-like dataset");
  gen->add_option("--rows", synth.rows, "Row count")->check(CLI::PositiveNumber);
  gen->add_option("--race-codes", synth.race_codes, "Number of race categories");
  gen->add_option("--seed", synth.seed, "Generator seed");
  gen->add_option("--disability-rate", synth.disability_rate, "Fraction with dis=1")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--race-exponent", synth.race_exponent, "Power-law exponent of race frequencies");
  gen->add_option("-o,--out", out, "Dataset CSV output")->required();
  gen->add_option("--out-schema", out_schema, "Schema output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (audit->parsed()) {
      const auto ds = load_data(data, schema);
      const auto p = load_predictions(preds, ds.rows());
      const auto C = load_groups(groups);
      if (out.empty()) {
        write_audit_report(std::cout, p.values, ds.outcomes(), ds, p.rows, C, d);
      } else {
        auto f = open_out(out);
        write_audit_report(f, p.values, ds.outcomes(), ds, p.rows, C, d);
      }
    } else if (run->parsed()) {
      const auto cfg = load_config(config);
      const auto rows = run_experiment(cfg, workers_from_env());
      write_summary_text(std::cout, rows);
    } else if (post->parsed()) {
      if (!(alpha > 0.0)) throw UsageError("--alpha must be positive");
      const auto ds = load_data(data, schema);
      const auto p = load_predictions(preds, ds.rows());
      const auto C = load_groups(groups);
      EnforceOptions opts{alpha, d, seed, max_draws};
      IndexList rows = p.rows;
      std::sort(rows.begin(), rows.end());
      const auto result = kind == "mc" ? enforce_mc(ds, rows, p.values, C, ds.outcomes(), opts)
                                       : enforce_ma(ds, rows, p.values, C, ds.outcomes(), opts);
      auto fp = open_out(out_preds);
      write_predictions(fp, result.predictions, p.rows);
      auto fc = open_out(out_circuit);
      write_circuit(fc, result.circuit);
      std::cerr << result.circuit.rules.size() << " rules after " << result.draws << " group draws\n";
    } else if (apply->parsed()) {
      const auto ds = load_data(data, schema);
      const auto p = load_predictions(preds, ds.rows());
      const auto c = load_circuit(circuit);
      check_columns(c, ds);
      const auto adjusted = apply_circuit(ds, p.rows, p.values, c);
      auto f = open_out(out);
      write_predictions(f, adjusted, p.rows);
    } else if (gen->parsed()) {
      const auto ds = generate_synthetic(synth);
      save_csv(out, ds);
      auto f = open_out(out_schema);
      write_schema(f, ds.schema());
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
