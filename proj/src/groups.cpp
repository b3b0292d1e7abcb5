#include "mcmix/groups.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <boost/algorithm/string.hpp>

namespace mcmix {

namespace {

std::string format_value(double v) {
  if (v == static_cast<double>(static_cast<long long>(v))) return std::to_string(static_cast<long long>(v));
  return format_real(v);
}

struct ResolvedClause {
  std::size_t column;
  double value;
};

std::vector<ResolvedClause> resolve(const GroupSpec& group, const FeatureSchema& schema) {
  std::vector<ResolvedClause> out;
  for (const auto& c : group.clauses) {
    auto col = schema.index_of(c.column);
    if (!col) throw DataError("group '" + group.label + "': unknown column '" + c.column + "'");
    out.push_back({*col, c.value});
  }
  return out;
}

bool satisfies(const Dataset& ds, std::size_t row, const std::vector<ResolvedClause>& clauses) {
  return std::all_of(clauses.begin(), clauses.end(),
                     [&](const ResolvedClause& c) { return ds.cell(row, c.column) == c.value; });
}

bool has_member(const Dataset& ds, const IndexList& idx, std::size_t race_col, int race, std::size_t dis_col) {
  return std::any_of(idx.begin(), idx.end(), [&](std::size_t i) {
    return ds.cell(i, race_col) == race && ds.cell(i, dis_col) == 1.0;
  });
}

}  // namespace

std::string canonical_label(const std::vector<Clause>& clauses) {
  if (clauses.empty()) return "all";
  std::string out;
  for (const auto& c : clauses) {
    if (!out.empty()) out += '&';
    out += c.column + "=" + format_value(c.value);
  }
  return out;
}

GroupSpec make_group(std::vector<Clause> clauses, std::string label) {
  std::set<std::string> cols;
  for (const auto& c : clauses) {
    if (!cols.insert(c.column).second) throw DataError("group: column '" + c.column + "' appears twice");
  }
  if (label.empty()) label = canonical_label(clauses);
  return GroupSpec{std::move(clauses), std::move(label)};
}

std::string to_string(Setting setting) {
  switch (setting) {
    case Setting::all: return "All";
    case Setting::big: return "Big";
    case Setting::small: return "Small";
    case Setting::dis: return "Dis";
    case Setting::dlfr: return "DLFR";
  }
  return "?";
}

Setting parse_setting(const std::string& name) {
  for (auto s : {Setting::all, Setting::big, Setting::small, Setting::dis, Setting::dlfr}) {
    if (boost::iequals(name, to_string(s))) return s;
  }
  throw DataError("unknown setting '" + name + "' (expected All, Big, Small, Dis or DLFR)");
}

IndexList members(const GroupSpec& group, const Dataset& ds, std::span<const std::size_t> idx) {
  const auto clauses = resolve(group, ds.schema());
  IndexList out;
  for (auto i : idx) {
    if (satisfies(ds, i, clauses)) out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<char> membership_mask(const GroupSpec& group, const Dataset& ds) {
  const auto clauses = resolve(group, ds.schema());
  std::vector<char> mask(ds.rows());
  for (std::size_t i = 0; i < ds.rows(); ++i) mask[i] = satisfies(ds, i, clauses) ? 1 : 0;
  return mask;
}

std::vector<int> possible_races(const Dataset& ds, std::span<const Splits> splits,
                                const DemographicColumns& columns) {
  const auto& schema = ds.schema();
  const auto race_col = schema.require(columns.race);
  const auto dis_col = schema.require(columns.disability);
  if (schema[race_col].kind != ColumnKind::categorical) {
    throw DataError("race column '" + columns.race + "' must be categorical");
  }
  std::vector<int> out;
  for (int r = 0; r < schema[race_col].cardinality; ++r) {
    bool ok = !splits.empty();
    for (const auto& s : splits) {
      ok = ok && has_member(ds, s.training_pool(), race_col, r, dis_col) &&
           has_member(ds, s.val, race_col, r, dis_col) && has_member(ds, s.test, race_col, r, dis_col);
      if (!ok) break;
    }
    if (ok) out.push_back(r);
  }
  return out;
}

GroupCollection build_collection(const Dataset& ds, std::span<const Splits> splits, Setting setting,
                                 const DemographicColumns& columns, double size_threshold_frac) {
  const auto race_col = ds.schema().require(columns.race);
  GroupCollection out;
  out.setting = setting;

  const auto disabled = make_group({{columns.disability, 1.0}});
  out.groups.push_back(disabled);
  if (setting == Setting::dis) return out;

  const auto races = possible_races(ds, splits, columns);
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < ds.rows(); ++i) ++counts[static_cast<int>(ds.cell(i, race_col))];

  auto add_race = [&](int r) {
    out.groups.push_back(make_group({{columns.race, static_cast<double>(r)}}));
    out.groups.push_back(make_group({{columns.race, static_cast<double>(r)}, {columns.disability, 1.0}}));
  };
  const double total = static_cast<double>(ds.rows());
  switch (setting) {
    case Setting::all:
      if (races.empty()) throw DataError("setting All: no computationally possible racial group");
      for (int r : races) add_race(r);
      break;
    case Setting::big:
      for (int r : races) {
        if (static_cast<double>(counts[r]) / total > size_threshold_frac) add_race(r);
      }
      break;
    case Setting::small:
      for (int r : races) {
        if (static_cast<double>(counts[r]) / total <= size_threshold_frac) add_race(r);
      }
      break;
    case Setting::dlfr: {
      if (races.empty()) throw DataError("setting DLFR: no computationally possible racial group");
      int lfr = races.front();
      for (int r : races) {
        if (counts[r] < counts[lfr]) lfr = r;
      }
      add_race(lfr);
      break;
    }
    case Setting::dis:
      break;
  }
  return out;
}

std::string format_group(const GroupSpec& group) {
  std::string out = group.label + ":";
  for (std::size_t i = 0; i < group.clauses.size(); ++i) {
    out += i == 0 ? " " : " & ";
    out += group.clauses[i].column + "=" + format_value(group.clauses[i].value);
  }
  return out;
}

GroupSpec parse_group(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw DataError("group '" + text + "': expected 'label: col=val & ...'");
  auto label = boost::trim_copy(text.substr(0, colon));
  if (label.empty()) throw DataError("group '" + text + "': empty label");
  const auto rhs = boost::trim_copy(text.substr(colon + 1));
  std::vector<Clause> clauses;
  if (!rhs.empty()) {
    std::vector<std::string> parts;
    boost::split(parts, rhs, boost::is_any_of("&"));
    for (auto& p : parts) {
      boost::trim(p);
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw DataError("group '" + label + "': clause '" + p + "' lacks '='");
      auto col = boost::trim_copy(p.substr(0, eq));
      auto val = boost::trim_copy(p.substr(eq + 1));
      if (col.empty()) throw DataError("group '" + label + "': empty column in clause '" + p + "'");
      clauses.push_back({col, parse_real(val)});
    }
  }
  return make_group(std::move(clauses), std::move(label));
}

void write_groups(std::ostream& out, const GroupCollection& collection) {
  out << "# setting " << to_string(collection.setting) << '\n';
  for (const auto& g : collection.groups) out << format_group(g) << '\n';
}

GroupCollection read_groups(std::istream& in) {
  GroupCollection out;
  std::set<std::string> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    boost::trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (boost::starts_with(line, "# setting ")) out.setting = parse_setting(boost::trim_copy(line.substr(10)));
      continue;
    }
    try {
      auto g = parse_group(line);
      if (!labels.insert(g.label).second) throw DataError("duplicate label '" + g.label + "'");
      out.groups.push_back(std::move(g));
    } catch (const DataError& e) {
      throw DataError("groups line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

GroupCollection load_groups(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open groups file " + path.string());
  return read_groups(in);
}

}  // namespace mcmix
