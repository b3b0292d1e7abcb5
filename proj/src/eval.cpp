#include "mcmix/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "mcmix/dataset.hpp"

namespace mcmix {

namespace {

double from_counts(std::size_t tp, std::size_t fn, std::size_t tn, std::size_t fp) {
  if (tp + fn == 0) throw std::invalid_argument("balanced_accuracy: no rows with label 1");
  if (tn + fp == 0) throw std::invalid_argument("balanced_accuracy: no rows with label 0");
  const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return (tpr + tnr) / 2.0;
}

template <typename Rows>
double count_and_score(const Eigen::VectorXd& p, const Eigen::VectorXd& y, const Rows& rows, double threshold) {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (Eigen::Index i : rows) {
    const bool predicted = p(i) >= threshold;
    if (y(i) == 1.0) {
      predicted ? ++tp : ++fn;
    } else if (y(i) == 0.0) {
      predicted ? ++fp : ++tn;
    } else {
      throw std::invalid_argument("balanced_accuracy: labels must be 0 or 1");
    }
  }
  return from_counts(tp, fn, tn, fp);
}

}  // namespace

double balanced_accuracy(const Eigen::VectorXd& p, const Eigen::VectorXd& y, double threshold) {
  if (p.size() != y.size()) throw std::invalid_argument("balanced_accuracy: length mismatch");
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return count_and_score(p, y, rows, threshold);
}

double balanced_accuracy(const Eigen::VectorXd& p, const Eigen::VectorXd& y, std::span<const std::size_t> idx,
                         double threshold) {
  if (p.size() != y.size()) throw std::invalid_argument("balanced_accuracy: length mismatch");
  std::vector<Eigen::Index> rows;
  rows.reserve(idx.size());
  for (auto i : idx) {
    if (static_cast<Eigen::Index>(i) >= p.size()) throw std::out_of_range("balanced_accuracy: row index out of range");
    rows.push_back(static_cast<Eigen::Index>(i));
  }
  return count_and_score(p, y, rows, threshold);
}

SummaryRow summarize(const MethodScore& base, const MethodScore& method) {
  if (!(base.balanced_accuracy > 0.0)) throw std::invalid_argument("summarize: base balanced accuracy must be positive");
  if (!(base.worst_alpha > 0.0)) throw std::invalid_argument("summarize: base worst-group alpha must be positive");
  const double acc_gain = 100.0 * (method.balanced_accuracy - base.balanced_accuracy) / base.balanced_accuracy;
  const double alpha_drop = 100.0 * (base.worst_alpha - method.worst_alpha) / base.worst_alpha;
  return {method.method, method.balanced_accuracy, method.worst_alpha, (acc_gain + alpha_drop) / 2.0};
}

void write_summary_text(std::ostream& out, std::span<const SummaryRow> rows) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::left << std::setw(static_cast<int>(width)) << "method" << std::right << std::setw(12) << "bacc%"
      << std::setw(12) << "worst_mc" << std::setw(12) << "combined" << '\n';
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.method << std::right << std::setprecision(2)
        << std::setw(12) << r.balanced_accuracy << std::setprecision(4) << std::setw(12) << r.worst_alpha
        << std::setprecision(2) << std::setw(12) << r.combined << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

void write_summary_tsv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "method\tbalanced_accuracy\tworst_mc_alpha\tcombined\n";
  for (const auto& r : rows) {
    out << r.method << '\t' << format_real(r.balanced_accuracy) << '\t' << format_real(r.worst_alpha) << '\t'
        << format_real(r.combined) << '\n';
  }
}

}  // namespace mcmix
