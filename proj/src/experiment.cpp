#include "mcmix/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mcmix/audit.hpp"

namespace mcmix {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

double number(const std::string& where, const std::string& text) {
  try {
    return parse_real(boost::trim_copy(text));
  } catch (const DataError&) {
    throw ConfigError(where + ": expected a number, got '" + text + "'");
  }
}

std::uint64_t count(const std::string& where, const std::string& text) {
  const double v = number(where, text);
  if (v < 0 || v != std::floor(v) || v > 9.0e15) throw ConfigError(where + ": expected a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

double fraction(const std::string& where, const std::string& text) {
  const double v = number(where, text);
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(where + ": expected a value in [0, 1]");
  return v;
}

std::vector<std::uint64_t> parse_seeds(const std::string& where, const std::string& text) {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  std::vector<std::uint64_t> seeds;
  for (auto part : parts) {
    boost::trim(part);
    if (part.empty()) continue;
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(count(where, part));
      continue;
    }
    const auto lo = count(where, part.substr(0, dash)), hi = count(where, part.substr(dash + 1));
    if (hi < lo) throw ConfigError(where + ": empty seed range '" + part + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError(where + ": no seeds given");
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw ConfigError(where + ": repeated seed");
  return seeds;
}

using Setter = std::function<void(MethodSpec&, const std::string& where, const std::string& value)>;

const std::map<std::string, Setter>& spec_keys() {
  static const std::map<std::string, Setter> keys{
      {"lambda", [](MethodSpec& s, auto& w, auto& v) { s.lambda = number(w, v); }},
      {"k", [](MethodSpec& s, auto& w, auto& v) { s.k = count(w, v); }},
      {"d", [](MethodSpec& s, auto& w, auto& v) { s.d = static_cast<int>(count(w, v)); }},
      {"p", [](MethodSpec& s, auto& w, auto& v) { s.p = fraction(w, v); }},
      {"epochs", [](MethodSpec& s, auto& w, auto& v) { s.epochs = static_cast<int>(count(w, v)); }},
      {"n", [](MethodSpec& s, auto& w, auto& v) { s.n = count(w, v); }},
      {"b", [](MethodSpec& s, auto& w, auto& v) { s.b = count(w, v); }},
      {"eps", [](MethodSpec& s, auto& w, auto& v) { s.eps = number(w, v); }},
      {"hidden", [](MethodSpec& s, auto& w, auto& v) { s.hidden = static_cast<Eigen::Index>(count(w, v)); }},
      {"enforce_alpha", [](MethodSpec& s, auto& w, auto& v) { s.enforce_alpha = number(w, v); }},
      {"enforce_d", [](MethodSpec& s, auto& w, auto& v) { s.enforce_d = static_cast<int>(count(w, v)); }},
      {"enforce_max_draws", [](MethodSpec& s, auto& w, auto& v) { s.enforce_max_draws = count(w, v); }},
      {"replacement_threshold", [](MethodSpec& s, auto& w, auto& v) { s.replacement_threshold = number(w, v); }},
      {"max_skip_fraction", [](MethodSpec& s, auto& w, auto& v) { s.max_skip_fraction = fraction(w, v); }},
  };
  return keys;
}

// Keys of [run] that apply to every method before per-method overrides.
const std::set<std::string> kSharedSpecKeys{"epochs", "n", "b", "eps", "hidden", "enforce_alpha", "enforce_d",
                                            "enforce_max_draws", "max_skip_fraction"};

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(boost::trim_copy(text));
  return p.is_absolute() || base.empty() ? p : base / p;
}

void check_spec(const MethodSpec& s) {
  const auto name = to_string(s.name);
  if (uses_enforcement(s.name) && !(s.p > 0.0 && s.p < 1.0)) {
    throw ConfigError("[method." + name + "] p must lie in (0, 1) for enforcement methods");
  }
  if (!uses_enforcement(s.name) && s.p != 0.0) throw ConfigError("[method." + name + "] p applies to enforcement methods only");
  if (s.epochs < 1 || s.n < 1 || s.k < 1 || s.d < 1 || s.enforce_d < 1 || s.hidden < 1) {
    throw ConfigError("[method." + name + "] epochs, n, k, d, enforce_d and hidden must be positive");
  }
  if (s.b < 2 || s.b % 2 != 0) throw ConfigError("[method." + name + "] b must be even and >= 2");
  if (!(s.eps > 0.0)) throw ConfigError("[method." + name + "] eps must be positive");
  if (!(s.enforce_alpha > 0.0)) throw ConfigError("[method." + name + "] enforce_alpha must be positive");
  if (!(s.lambda >= 0.0)) throw ConfigError("[method." + name + "] lambda must be >= 0");
}

struct Job {
  MethodName method;
  std::uint64_t seed;
};

struct JobResult {
  double balanced_accuracy = 0.0;
  double worst_alpha = 0.0;
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

JobResult run_job(const ExperimentConfig& config, const Dataset& ds, const GroupCollection& C, const Job& job,
                  std::mutex& log_mutex) {
  const auto& spec = config.specs.at(job.method);
  const auto splits = split(ds, {config.train_frac, config.val_frac, config.test_frac, spec.p, job.seed});
  const auto record = train(spec, ds, splits, C, job.seed);
  const auto& y = ds.outcomes();
  const auto val = predict_rows(record, ds, splits.val);
  const auto test = predict_rows(record, ds, splits.test);

  JobResult result;
  result.balanced_accuracy = 100.0 * balanced_accuracy(test, y, splits.test);
  result.worst_alpha = mc_alpha(test, y, ds, splits.test, C, config.audit_d).alpha;

  const auto dir = config.output / to_string(job.method) / std::to_string(job.seed);
  fs::create_directories(dir);
  write_file(dir / "record.txt", [&](std::ostream& out) {
    write_record(out, record);
    out << "test_balanced_accuracy " << format_real(result.balanced_accuracy) << '\n';
    out << "test_worst_mc_alpha " << format_real(result.worst_alpha) << '\n';
  });
  save_checkpoint(dir / "model.txt", record.model);
  if (record.circuit) write_file(dir / "circuit.txt", [&](std::ostream& out) { write_circuit(out, *record.circuit); });
  save_predictions(dir / "predictions_val.csv", val, splits.val);
  save_predictions(dir / "predictions_test.csv", test, splits.test);
  write_file(dir / "audit_test.tsv",
             [&](std::ostream& out) { write_audit_report(out, test, y, ds, splits.test, C, config.audit_d); });

  std::lock_guard lock(log_mutex);
  std::cerr << to_string(job.method) << " seed " << job.seed << ": test bacc " << result.balanced_accuracy
            << "% worst MC alpha " << result.worst_alpha << " (" << record.seconds << " s)\n";
  return result;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentConfig c;
  std::map<std::string, std::string> shared;
  std::map<MethodName, std::vector<std::pair<std::string, std::string>>> overrides;
  bool have_methods = false, have_seeds = false, have_output = false;

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const auto where = "[" + section + "] " + key;
      const auto value = node.data();
      if (section == "data") {
        if (key == "csv") c.csv = resolve(base_dir, value);
        else if (key == "schema") c.schema = resolve(base_dir, value);
        else if (key == "task") c.task = parse_task(value);
        else if (key == "rows") c.synthetic.rows = count(where, value);
        else if (key == "race_codes") c.synthetic.race_codes = static_cast<int>(count(where, value));
        else if (key == "seed") c.synthetic.seed = count(where, value);
        else if (key == "disability_rate") c.synthetic.disability_rate = fraction(where, value);
        else if (key == "race_exponent") c.synthetic.race_exponent = number(where, value);
        else throw ConfigError("unknown key " + where);
      } else if (section == "split") {
        if (key == "train") c.train_frac = fraction(where, value);
        else if (key == "val") c.val_frac = fraction(where, value);
        else if (key == "test") c.test_frac = fraction(where, value);
        else throw ConfigError("unknown key " + where);
      } else if (section == "groups") {
        if (key == "setting") c.setting = parse_setting(value);
        else if (key == "size_threshold") c.size_threshold = fraction(where, value);
        else if (key == "race_column") c.columns.race = boost::trim_copy(value);
        else if (key == "disability_column") c.columns.disability = boost::trim_copy(value);
        else throw ConfigError("unknown key " + where);
      } else if (section == "run") {
        if (key == "methods") {
          std::vector<std::string> names;
          boost::split(names, value, boost::is_any_of(","));
          for (auto& n : names) {
            boost::trim(n);
            if (n.empty()) continue;
            const auto m = parse_method(n);
            if (std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end()) {
              throw ConfigError(where + ": method " + n + " listed twice");
            }
            c.methods.push_back(m);
          }
          have_methods = true;
        } else if (key == "seeds") {
          c.seeds = parse_seeds(where, value);
          have_seeds = true;
        } else if (key == "output") {
          c.output = resolve(base_dir, value);
          have_output = true;
        } else if (key == "audit_d") {
          c.audit_d = static_cast<int>(count(where, value));
        } else if (kSharedSpecKeys.contains(key)) {
          shared[key] = value;
        } else {
          throw ConfigError("unknown key " + where);
        }
      } else if (boost::starts_with(section, "method.")) {
        if (!spec_keys().contains(key)) throw ConfigError("unknown key " + where);
        overrides[parse_method(section.substr(7))].emplace_back(key, value);
      } else {
        throw ConfigError("unknown section [" + section + "]");
      }
    }
  }

  if (!have_methods || c.methods.empty()) throw ConfigError("[run] methods is required");
  if (!have_seeds) throw ConfigError("[run] seeds is required");
  if (!have_output) throw ConfigError("[run] output is required");
  if (std::find(c.methods.begin(), c.methods.end(), MethodName::base) == c.methods.end()) {
    throw ConfigError("[run] methods must include Base, which the summary compares against");
  }
  if (c.csv.has_value() != c.schema.has_value()) throw ConfigError("[data] csv and schema must be given together");
  if (std::abs(c.train_frac + c.val_frac + c.test_frac - 1.0) > 1e-9) throw ConfigError("[split] fractions must sum to 1");
  if (c.audit_d < 1) throw ConfigError("[run] audit_d must be >= 1");
  for (const auto& [m, _] : overrides) {
    if (std::find(c.methods.begin(), c.methods.end(), m) == c.methods.end()) {
      throw ConfigError("[method." + to_string(m) + "] given but the method is not in [run] methods");
    }
  }

  for (auto m : c.methods) {
    auto spec = default_spec(m, c.task);
    for (const auto& [key, value] : shared) spec_keys().at(key)(spec, "[run] " + key, value);
    if (auto it = overrides.find(m); it != overrides.end()) {
      for (const auto& [key, value] : it->second) spec_keys().at(key)(spec, "[method." + to_string(m) + "] " + key, value);
    }
    check_spec(spec);
    c.specs[m] = spec;
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.parent_path());
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.csv) return load_csv(*config.csv, load_schema(*config.schema));
  return generate_synthetic(config.synthetic);
}

std::vector<SummaryRow> run_experiment(const ExperimentConfig& config, unsigned workers) {
  const auto ds = load_dataset(config);
  std::vector<Splits> seed_splits;
  for (auto s : config.seeds) seed_splits.push_back(split(ds, {config.train_frac, config.val_frac, config.test_frac, 0.0, s}));
  const auto C = build_collection(ds, seed_splits, config.setting, config.columns, config.size_threshold);

  fs::create_directories(config.output);
  write_file(config.output / "groups.txt", [&](std::ostream& out) { write_groups(out, C); });

  std::vector<Job> jobs;
  for (auto m : config.methods) {
    for (auto s : config.seeds) jobs.push_back({m, s});
  }
  std::vector<JobResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (auto j = next++; j < jobs.size(); j = next++) {
      try {
        results[j] = run_job(config, ds, C, jobs[j], log_mutex);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<MethodScore> scores;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    MethodScore score{to_string(config.methods[mi]), 0.0, 0.0};
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      const auto& r = results[mi * config.seeds.size() + si];
      score.balanced_accuracy += r.balanced_accuracy;
      score.worst_alpha += r.worst_alpha;
    }
    score.balanced_accuracy /= static_cast<double>(config.seeds.size());
    score.worst_alpha /= static_cast<double>(config.seeds.size());
    scores.push_back(score);
  }
  const auto base_at = static_cast<std::size_t>(
      std::find(config.methods.begin(), config.methods.end(), MethodName::base) - config.methods.begin());
  std::vector<SummaryRow> rows;
  for (const auto& s : scores) rows.push_back(summarize(scores[base_at], s));
  write_file(config.output / "summary.txt", [&](std::ostream& out) { write_summary_text(out, rows); });
  write_file(config.output / "summary.tsv", [&](std::ostream& out) { write_summary_tsv(out, rows); });
  return rows;
}

unsigned workers_from_env() {
  const char* text = std::getenv("MCMIX_WORKERS");
  if (text == nullptr || *text == '\0') return 1;
  try {
    const auto v = count("MCMIX_WORKERS", text);
    return v == 0 ? 1u : static_cast<unsigned>(std::min<std::uint64_t>(v, 256));
  } catch (const ConfigError&) {
    throw ConfigError(std::string("MCMIX_WORKERS must be a positive integer, got '") + text + "'");
  }
}

void write_predictions(std::ostream& out, const Predictions& p, std::span<const std::size_t> idx) {
  out << "row,prediction\n";
  for (auto i : idx) out << i << ',' << format_real(p(static_cast<Eigen::Index>(i))) << '\n';
}

void save_predictions(const fs::path& path, const Predictions& p, std::span<const std::size_t> idx) {
  write_file(path, [&](std::ostream& out) { write_predictions(out, p, idx); });
}

PredictionFile read_predictions(std::istream& in, std::size_t dataset_rows) {
  PredictionFile f;
  f.values = Predictions::Zero(static_cast<Eigen::Index>(dataset_rows));
  std::vector<char> seen(dataset_rows, 0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    boost::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (lineno == 1 && line == "row,prediction") continue;
    const auto where = "predictions line " + std::to_string(lineno) + ": ";
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(where + "expected 'row,prediction'");
    double row = 0.0, value = 0.0;
    try {
      row = parse_real(boost::trim_copy(line.substr(0, comma)));
      value = parse_real(boost::trim_copy(line.substr(comma + 1)));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (row < 0 || row != std::floor(row) || row >= static_cast<double>(dataset_rows)) {
      throw DataError(where + "row " + line.substr(0, comma) + " is not a dataset row");
    }
    if (!(value >= 0.0 && value <= 1.0)) throw DataError(where + "prediction outside [0, 1]");
    const auto r = static_cast<std::size_t>(row);
    if (seen[r]) throw DataError(where + "row " + std::to_string(r) + " listed twice");
    seen[r] = 1;
    f.rows.push_back(r);
    f.values(static_cast<Eigen::Index>(r)) = value;
  }
  return f;
}

PredictionFile load_predictions(const fs::path& path, std::size_t dataset_rows) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file " + path.string());
  try {
    return read_predictions(in, dataset_rows);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_record(std::ostream& out, const TrainingRecord& r) {
  const auto& s = r.spec;
  out << "method " << to_string(s.name) << '\n'
      << "seed " << r.seed << '\n'
      << "lambda " << format_real(s.lambda) << '\n'
      << "k " << s.k << '\n'
      << "d " << s.d << '\n'
      << "p " << format_real(s.p) << '\n'
      << "epochs " << s.epochs << '\n'
      << "n " << s.n << '\n'
      << "b " << s.b << '\n'
      << "eps " << format_real(s.eps) << '\n'
      << "hidden " << s.hidden << '\n';
  if (uses_enforcement(s.name)) {
    out << "enforce_alpha " << format_real(s.enforce_alpha) << '\n' << "enforce_d " << s.enforce_d << '\n';
  }
  out << "# epoch val_balanced_accuracy mean_loss iterations skipped empty_cells circuit_rules enforcement_draws\n";
  for (const auto& e : r.epochs) {
    out << "epoch " << e.epoch << ' ' << format_real(e.val_balanced_accuracy) << ' ' << format_real(e.mean_loss) << ' '
        << e.iterations << ' ' << e.skipped << ' ' << e.empty_cells << ' ' << e.circuit_rules << ' '
        << e.enforcement_draws << '\n';
  }
  out << "selected_epoch " << r.selected_epoch << '\n'
      << "iterations " << r.iterations << '\n'
      << "skipped " << r.skipped << '\n'
      << "empty_cells " << r.empty_cells << '\n'
      << "updates " << r.loss_trace.size() << '\n';
  if (r.circuit) {
    out << "circuit circuit.txt\n"
        << "circuit_rules " << r.circuit->rules.size() << '\n'
        << "enforcement_draws " << r.enforcement_draws << '\n';
  }
}

}  // namespace mcmix
