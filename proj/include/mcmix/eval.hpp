#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcmix {

inline constexpr double kDefaultThreshold = 0.5;

/// (TPR + TNR) / 2 with predicted class 1{p >= threshold}. Throws when y lacks
/// either class.
double balanced_accuracy(const Eigen::VectorXd& p, const Eigen::VectorXd& y, double threshold = kDefaultThreshold);

/// Same, restricted to rows idx of full-length vectors.
double balanced_accuracy(const Eigen::VectorXd& p, const Eigen::VectorXd& y, std::span<const std::size_t> idx,
                         double threshold = kDefaultThreshold);

/// Seed-averaged scores of one method. Balanced accuracy is in percent.
struct MethodScore {
  std::string method;
  double balanced_accuracy = 0.0;
  double worst_alpha = 0.0;
};

struct SummaryRow {
  std::string method;
  double balanced_accuracy = 0.0;
  double worst_alpha = 0.0;
  double combined = 0.0;  // positive means better than the base method
};

/// Mean of the percent increase in balanced accuracy and the percent
/// decrease in worst-group alpha, both relative to base.
SummaryRow summarize(const MethodScore& base, const MethodScore& method);

void write_summary_text(std::ostream& out, std::span<const SummaryRow> rows);
void write_summary_tsv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace mcmix
