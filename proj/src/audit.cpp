#include "mcmix/audit.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace mcmix {

int interval_of(double p, int d) {
  if (d < 1) throw std::invalid_argument("interval_of: d must be >= 1");
  if (!(p > 0.0)) return 0;
  if (p >= 1.0) return d;
  const double dd = static_cast<double>(d);
  int v = std::clamp(static_cast<int>(std::floor(p * dd)), 0, d);
  // p * d can round across an integer; settle on the comparisons themselves.
  while (v > 0 && !(static_cast<double>(v) / dd <= p)) --v;
  while (v < d && !(p < static_cast<double>(v + 1) / dd)) ++v;
  return v;
}

std::vector<IndexList> interval_membership(const Predictions& p, std::span<const std::size_t> S, int d) {
  std::vector<IndexList> out(static_cast<std::size_t>(d) + 1);
  for (auto i : S) out[static_cast<std::size_t>(interval_of(p(static_cast<Eigen::Index>(i)), d))].push_back(i);
  return out;
}

IntervalReport calibration_report(const Predictions& p, const Eigen::VectorXd& y,
                                  std::span<const std::size_t> S, int d) {
  const auto buckets = static_cast<std::size_t>(d) + 1;
  IntervalReport r;
  r.counts.assign(buckets, 0);
  r.violations.assign(buckets, 0.0);
  std::vector<double> p_sum(buckets, 0.0), y_sum(buckets, 0.0);
  for (auto i : S) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto v = static_cast<std::size_t>(interval_of(p(row), d));
    ++r.counts[v];
    p_sum[v] += p(row);
    y_sum[v] += y(row);
  }
  for (std::size_t v = 0; v < buckets; ++v) {
    if (r.counts[v] != 0) r.violations[v] = (y_sum[v] - p_sum[v]) / static_cast<double>(r.counts[v]);
  }
  const auto& a = r.violations;
  const auto v_max = static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
  const auto v_min = static_cast<int>(std::min_element(a.begin(), a.end()) - a.begin());
  r.argmax_interval = std::abs(a[static_cast<std::size_t>(v_max)]) > std::abs(a[static_cast<std::size_t>(v_min)])
                          ? v_max
                          : v_min;
  r.max_abs_violation = std::abs(a[static_cast<std::size_t>(r.argmax_interval)]);
  return r;
}

double ma_violation(const Predictions& p, const Eigen::VectorXd& y, std::span<const std::size_t> S) {
  if (S.empty()) throw std::invalid_argument("ma_violation: empty group");
  double p_sum = 0.0;
  double y_sum = 0.0;
  for (auto i : S) {
    p_sum += p(static_cast<Eigen::Index>(i));
    y_sum += y(static_cast<Eigen::Index>(i));
  }
  return (y_sum - p_sum) / static_cast<double>(S.size());
}

GroupAlpha mc_alpha(const Predictions& p, const Eigen::VectorXd& y, const Dataset& ds,
                    std::span<const std::size_t> idx, const GroupCollection& C, int d) {
  GroupAlpha out;
  for (const auto& g : C.groups) {
    const auto S = members(g, ds, idx);
    out.empty.push_back(S.empty() ? 1 : 0);
    const double a = S.empty() ? 0.0 : calibration_report(p, y, S, d).max_abs_violation;
    out.per_group.push_back(a);
    out.alpha = std::max(out.alpha, a);
  }
  return out;
}

GroupAlpha ma_alpha(const Predictions& p, const Eigen::VectorXd& y, const Dataset& ds,
                    std::span<const std::size_t> idx, const GroupCollection& C) {
  GroupAlpha out;
  for (const auto& g : C.groups) {
    const auto S = members(g, ds, idx);
    out.empty.push_back(S.empty() ? 1 : 0);
    const double a = S.empty() ? 0.0 : std::abs(ma_violation(p, y, S));
    out.per_group.push_back(a);
    out.alpha = std::max(out.alpha, a);
  }
  return out;
}

void write_audit_report(std::ostream& out, const Predictions& p, const Eigen::VectorXd& y, const Dataset& ds,
                        std::span<const std::size_t> idx, const GroupCollection& C, int d) {
  out << "group\tinterval\tcount\tviolation\n";
  double worst = 0.0;
  std::string worst_label = "-";
  for (const auto& g : C.groups) {
    const auto S = members(g, ds, idx);
    const auto r = calibration_report(p, y, S, d);
    for (std::size_t v = 0; v < r.counts.size(); ++v) {
      out << g.label << '\t' << v << '\t' << r.counts[v] << '\t' << format_real(r.violations[v]) << '\n';
    }
    out << g.label << "\tmax\t" << S.size() << '\t' << format_real(r.max_abs_violation) << '\n';
    if (S.empty()) out << "# warning: group " << g.label << " has no members\n";
    if (worst_label == "-" || r.max_abs_violation > worst) {
      worst = r.max_abs_violation;
      worst_label = g.label;
    }
  }
  out << "worst\t" << worst_label << '\t' << idx.size() << '\t' << format_real(worst) << '\n';
}

}  // namespace mcmix
