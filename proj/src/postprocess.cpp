#include "mcmix/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include <boost/algorithm/string.hpp>

#include "mcmix/rng.hpp"

namespace mcmix {

namespace {

inline double nudge(double value, double delta) {
  value += delta;
  value = std::min(value, 1.0);
  return std::max(value, 0.0);
}

struct Verdict {
  std::optional<int> interval;
  double delta;
};

template <typename Check>
EnforceResult enforce(const Dataset& ds, std::span<const std::size_t> postproc_idx, const Predictions& p,
                      const GroupCollection& C, const EnforceOptions& options, CircuitKind kind, Check&& check) {
  if (!(options.alpha > 0.0)) throw std::invalid_argument("enforce: alpha must be positive");
  if (kind == CircuitKind::mc && options.d < 1) throw std::invalid_argument("enforce: d must be >= 1");

  EnforceResult out;
  out.predictions = p;
  out.circuit.kind = kind;
  out.circuit.d = options.d;
  out.circuit.alpha = options.alpha;
  if (C.groups.empty()) return out;

  std::vector<IndexList> group_rows;
  group_rows.reserve(C.size());
  for (const auto& g : C.groups) group_rows.push_back(members(g, ds, postproc_idx));

  Rng rng = make_rng(options.seed, Stream::enforce);
  std::vector<char> seen(C.size(), 0);
  std::size_t seen_count = 0;
  while (seen_count < C.size()) {
    if (out.draws == options.max_draws) {
      double worst = 0.0;
      for (const auto& S : group_rows) {
        if (!S.empty()) worst = std::max(worst, std::abs(check(out.predictions, S).delta));
      }
      throw EnforcementBudgetExceeded("enforcement did not converge within " + std::to_string(options.max_draws) +
                                          " group draws; worst violation " + format_real(worst),
                                      worst);
    }
    ++out.draws;
    const auto ind = uniform_index(rng, C.size());
    const auto& S = group_rows[ind];
    if (!S.empty()) {
      const auto verdict = check(out.predictions, S);
      if (std::abs(verdict.delta) > options.alpha) {
        std::fill(seen.begin(), seen.end(), 0);
        seen_count = 0;
        out.circuit.rules.push_back({C.groups[ind], verdict.interval, verdict.delta});
        for (auto i : S) {
          auto& value = out.predictions(static_cast<Eigen::Index>(i));
          if (!verdict.interval || interval_of(value, options.d) == *verdict.interval) {
            value = nudge(value, verdict.delta);
          }
        }
        // The corrected group must be drawn again and pass.
        continue;
      }
    }
    if (!seen[ind]) {
      seen[ind] = 1;
      ++seen_count;
    }
  }
  return out;
}

const char* kind_tag(CircuitKind kind) { return kind == CircuitKind::mc ? "MC" : "MA"; }

}  // namespace

EnforceResult enforce_mc(const Dataset& ds, std::span<const std::size_t> postproc_idx, const Predictions& p,
                         const GroupCollection& C, const Eigen::VectorXd& y, const EnforceOptions& options) {
  return enforce(ds, postproc_idx, p, C, options, CircuitKind::mc, [&](const Predictions& cur, const IndexList& S) {
    const auto r = calibration_report(cur, y, S, options.d);
    return Verdict{r.argmax_interval, r.violations[static_cast<std::size_t>(r.argmax_interval)]};
  });
}

EnforceResult enforce_ma(const Dataset& ds, std::span<const std::size_t> postproc_idx, const Predictions& p,
                         const GroupCollection& C, const Eigen::VectorXd& y, const EnforceOptions& options) {
  return enforce(ds, postproc_idx, p, C, options, CircuitKind::ma, [&](const Predictions& cur, const IndexList& S) {
    return Verdict{std::nullopt, ma_violation(cur, y, S)};
  });
}

Predictions apply_circuit(const Dataset& ds, std::span<const std::size_t> idx, const Predictions& p,
                          const RuleCircuit& circuit) {
  Predictions out = p;
  std::map<std::string, IndexList> rows_of;
  for (const auto& rule : circuit.rules) {
    if (rule.interval && circuit.kind != CircuitKind::mc) throw DataError("MA circuit contains an interval rule");
    const auto key = format_group(rule.group);
    auto it = rows_of.find(key);
    if (it == rows_of.end()) it = rows_of.emplace(key, members(rule.group, ds, idx)).first;
    for (auto i : it->second) {
      auto& value = out(static_cast<Eigen::Index>(i));
      if (!rule.interval || interval_of(value, circuit.d) == *rule.interval) value = nudge(value, rule.delta);
    }
  }
  return out;
}

void write_circuit(std::ostream& out, const RuleCircuit& circuit) {
  out << kind_tag(circuit.kind);
  if (circuit.kind == CircuitKind::mc) out << " d=" << circuit.d;
  out << " alpha=" << format_real(circuit.alpha) << '\n';
  for (const auto& r : circuit.rules) {
    out << format_group(r.group) << " | " << (r.interval ? std::to_string(*r.interval) : std::string("-"))
        << " | " << format_real(r.delta) << '\n';
  }
}

RuleCircuit read_circuit(std::istream& in) {
  RuleCircuit c;
  std::string line;
  if (!std::getline(in, line)) throw DataError("circuit: missing header");
  std::vector<std::string> head;
  boost::split(head, boost::trim_copy(line), boost::is_space(), boost::token_compress_on);
  if (head.empty() || (head[0] != "MC" && head[0] != "MA")) throw DataError("circuit: header must start with MC or MA");
  c.kind = head[0] == "MC" ? CircuitKind::mc : CircuitKind::ma;
  bool have_d = false;
  for (std::size_t i = 1; i < head.size(); ++i) {
    if (boost::starts_with(head[i], "d=")) {
      c.d = static_cast<int>(parse_real(head[i].substr(2)));
      have_d = true;
    } else if (boost::starts_with(head[i], "alpha=")) {
      c.alpha = parse_real(head[i].substr(6));
    } else {
      throw DataError("circuit: unexpected header field '" + head[i] + "'");
    }
  }
  if (c.kind == CircuitKind::mc && (!have_d || c.d < 1)) throw DataError("circuit: MC header needs d >= 1");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    boost::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto where = "circuit line " + std::to_string(lineno) + ": ";
    const auto last = line.rfind('|');
    const auto mid = last == std::string::npos || last == 0 ? std::string::npos : line.rfind('|', last - 1);
    if (mid == std::string::npos) throw DataError(where + "expected 'group | v | delta'");
    try {
      UpdateRule r;
      r.group = parse_group(boost::trim_copy(line.substr(0, mid)));
      const auto v = boost::trim_copy(line.substr(mid + 1, last - mid - 1));
      if (v != "-") {
        const double iv = parse_real(v);
        if (c.kind != CircuitKind::mc || iv < 0 || iv > c.d || iv != std::floor(iv)) {
          throw DataError("invalid interval '" + v + "'");
        }
        r.interval = static_cast<int>(iv);
      } else if (c.kind == CircuitKind::mc) {
        throw DataError("MC rule needs an interval");
      }
      r.delta = parse_real(boost::trim_copy(line.substr(last + 1)));
      if (!(std::abs(r.delta) <= 1.0)) throw DataError("delta outside [-1, 1]");
      c.rules.push_back(std::move(r));
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return c;
}

}  // namespace mcmix
