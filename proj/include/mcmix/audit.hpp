#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcmix/dataset.hpp"
#include "mcmix/groups.hpp"

namespace mcmix {

/// Probabilities indexed like dataset rows. Only the rows named by an index
/// list are ever read, so a vector covering the whole dataset can carry the
/// predictions of a single split.
using Predictions = Eigen::VectorXd;

/// The unique v in [0, d] with v/d <= p < (v+1)/d, using exactly those
/// comparisons. p = 1 lands in v = d. Values outside [0, 1] are clamped to the
/// end intervals.
int interval_of(double p, int d);

/// Partition of S into d+1 lists by interval, each in S's order.
std::vector<IndexList> interval_membership(const Predictions& p, std::span<const std::size_t> S, int d);

struct IntervalReport {
  std::vector<std::size_t> counts;   // d+1 entries
  std::vector<double> violations;    // signed mean(y - p); 0 for empty intervals
  int argmax_interval = 0;
  double max_abs_violation = 0.0;
};

/// Observable calibration of p on S over the d-discretization. The worst
/// interval is picked by comparing the first most-positive against the first
/// most-negative entry; the positive one wins only if strictly larger in
/// magnitude.
IntervalReport calibration_report(const Predictions& p, const Eigen::VectorXd& y,
                                  std::span<const std::size_t> S, int d);

/// Signed mean of (y - p) over S. S must be nonempty.
double ma_violation(const Predictions& p, const Eigen::VectorXd& y, std::span<const std::size_t> S);

struct GroupAlpha {
  double alpha = 0.0;
  std::vector<double> per_group;  // max |violation| per group, collection order
  std::vector<char> empty;        // group had no members in idx
};

GroupAlpha mc_alpha(const Predictions& p, const Eigen::VectorXd& y, const Dataset& ds,
                    std::span<const std::size_t> idx, const GroupCollection& C, int d);
GroupAlpha ma_alpha(const Predictions& p, const Eigen::VectorXd& y, const Dataset& ds,
                    std::span<const std::size_t> idx, const GroupCollection& C);

/// Tab-separated audit table: one row per (group, interval) with count and
/// signed violation, a summary row per group, and a final worst-group row.
void write_audit_report(std::ostream& out, const Predictions& p, const Eigen::VectorXd& y, const Dataset& ds,
                        std::span<const std::size_t> idx, const GroupCollection& C, int d);

}  // namespace mcmix
