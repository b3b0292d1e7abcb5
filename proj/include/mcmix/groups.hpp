#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mcmix/dataset.hpp"

namespace mcmix {

struct Clause {
  std::string column;
  double value = 0.0;

  bool operator==(const Clause&) const = default;
};

/// Conjunction of column == value tests on raw cells. No clauses means the
/// whole population.
struct GroupSpec {
  std::vector<Clause> clauses;
  std::string label;

  bool operator==(const GroupSpec&) const = default;
};

/// Builds a group, rejecting repeated columns. An empty label is replaced by
/// the canonical clause text ("race=3&dis=1", or "all").
GroupSpec make_group(std::vector<Clause> clauses, std::string label = {});
std::string canonical_label(const std::vector<Clause>& clauses);

enum class Setting { all, big, small, dis, dlfr };

std::string to_string(Setting setting);
Setting parse_setting(const std::string& name);

struct GroupCollection {
  std::vector<GroupSpec> groups;
  Setting setting = Setting::dis;

  std::size_t size() const { return groups.size(); }
};

/// Ascending subset of idx whose raw cells satisfy every clause.
IndexList members(const GroupSpec& group, const Dataset& ds, std::span<const std::size_t> idx);

/// Membership flag for every dataset row.
std::vector<char> membership_mask(const GroupSpec& group, const Dataset& ds);

struct DemographicColumns {
  std::string race = kRaceColumn;
  std::string disability = kDisabilityColumn;
};

inline constexpr double kDefaultSizeThreshold = 0.0025;

/// Builds one of the five experimental collections. A race r is
/// computationally possible when {race=r, dis=1} has a member in the training
/// pool, validation, and test split of every supplied split set.
GroupCollection build_collection(const Dataset& ds, std::span<const Splits> splits, Setting setting,
                                 const DemographicColumns& columns = {},
                                 double size_threshold_frac = kDefaultSizeThreshold);

/// Race codes that are computationally possible, ascending.
std::vector<int> possible_races(const Dataset& ds, std::span<const Splits> splits,
                                const DemographicColumns& columns = {});

/// "label: col=val & col=val" (empty right-hand side for the full population).
std::string format_group(const GroupSpec& group);
GroupSpec parse_group(const std::string& text);

void write_groups(std::ostream& out, const GroupCollection& collection);
GroupCollection read_groups(std::istream& in);
GroupCollection load_groups(const std::filesystem::path& path);

}  // namespace mcmix
