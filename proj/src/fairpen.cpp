#include "mcmix/fairpen.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mcmix {

std::string to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::dp: return "DP";
    case PenaltyKind::eo: return "EO";
    case PenaltyKind::ma: return "MA";
    case PenaltyKind::mc: return "MC";
  }
  return "?";
}

namespace {

int bucket_count(PenaltyKind kind, int d) {
  switch (kind) {
    case PenaltyKind::eo: return 2;
    case PenaltyKind::mc:
      if (d < 1) throw std::invalid_argument("MC penalty needs d >= 1");
      return d + 1;
    default: return 1;
  }
}

bool uses_labels(PenaltyKind kind) { return kind == PenaltyKind::ma || kind == PenaltyKind::mc; }

std::optional<GroupPenalty> from_model(PenaltyKind kind, const nn::MlpModel& m, const PenaltyPairs& pairs, double t,
                                       int d) {
  if (pairs.size() == 0) return std::nullopt;
  Eigen::MatrixXd x_mix = t * pairs.x_left + (1.0 - t) * pairs.x_right;
  Eigen::MatrixXd direction = pairs.x_left - pairs.x_right;
  const Eigen::VectorXd jvp = nn::input_jvp(m, x_mix, direction);
  auto out = penalty_from_terms(kind, jvp, pairs.y_left, pairs.y_right, pairs.bucket, d);
  if (out) {
    out->x_mix = std::move(x_mix);
    out->direction = std::move(direction);
  }
  return out;
}

}  // namespace

std::optional<GroupPenalty> penalty_on_subset(PenaltyKind kind, const Eigen::VectorXd& jvp,
                                              const Eigen::VectorXd& y_left, const Eigen::VectorXd& y_right,
                                              std::span<const int> bucket, std::span<const Eigen::Index> subset,
                                              int d) {
  const int nb = bucket_count(kind, d);
  const bool labelled = uses_labels(kind);
  if (labelled && (y_left.size() != jvp.size() || y_right.size() != jvp.size())) {
    throw std::invalid_argument("penalty: label vectors differ in length from the tangent terms");
  }
  if (nb > 1 && bucket.size() != static_cast<std::size_t>(jvp.size())) {
    throw std::invalid_argument("penalty: bucket list differs in length from the tangent terms");
  }

  auto bucket_of = [&](Eigen::Index i) {
    if (nb == 1) return 0;
    const int b = bucket[static_cast<std::size_t>(i)];
    if (b < 0 || b >= nb) throw std::invalid_argument("penalty: bucket out of range");
    return b;
  };
  std::vector<double> sum(static_cast<std::size_t>(nb), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(nb), 0);
  for (auto i : subset) {
    const auto b = static_cast<std::size_t>(bucket_of(i));
    sum[b] += labelled ? jvp(i) - (y_left(i) - y_right(i)) : jvp(i);
    ++count[b];
  }
  if (std::accumulate(count.begin(), count.end(), std::size_t{0}) == 0) return std::nullopt;

  GroupPenalty out;
  out.weights = Eigen::VectorXd::Zero(jvp.size());
  std::vector<double> slope(static_cast<std::size_t>(nb), 0.0);
  for (std::size_t b = 0; b < sum.size(); ++b) {
    if (count[b] == 0) continue;
    const double mean = sum[b] / static_cast<double>(count[b]);
    out.value += std::abs(mean);
    const double sign = mean > 0.0 ? 1.0 : (mean < 0.0 ? -1.0 : 0.0);
    slope[b] = sign / static_cast<double>(count[b]);
  }
  for (auto i : subset) out.weights(i) += slope[static_cast<std::size_t>(bucket_of(i))];
  return out;
}

std::optional<GroupPenalty> penalty_from_terms(PenaltyKind kind, const Eigen::VectorXd& jvp,
                                               const Eigen::VectorXd& y_left, const Eigen::VectorXd& y_right,
                                               std::span<const int> bucket, int d) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(jvp.size()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  return penalty_on_subset(kind, jvp, y_left, y_right, bucket, all, d);
}

std::optional<GroupPenalty> penalty_dp(const nn::MlpModel& m, const PenaltyPairs& pairs, double t) {
  return from_model(PenaltyKind::dp, m, pairs, t, 10);
}

std::optional<GroupPenalty> penalty_eo(const nn::MlpModel& m, const PenaltyPairs& pairs, double t) {
  return from_model(PenaltyKind::eo, m, pairs, t, 10);
}

std::optional<GroupPenalty> penalty_ma(const nn::MlpModel& m, const PenaltyPairs& pairs, double t) {
  return from_model(PenaltyKind::ma, m, pairs, t, 10);
}

std::optional<GroupPenalty> penalty_mc(const nn::MlpModel& m, const PenaltyPairs& pairs, double t, int d) {
  return from_model(PenaltyKind::mc, m, pairs, t, d);
}

TopK aggregate_topk(std::span<const double> values, std::size_t k) {
  if (k < 1) throw std::invalid_argument("aggregate_topk: k must be >= 1");
  TopK out;
  if (values.empty()) return out;
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(std::min(k, order.size()));
  for (auto i : order) out.value += values[i];
  out.value /= static_cast<double>(order.size());
  out.active = std::move(order);
  return out;
}

TopK aggregate_topk(std::span<const GroupPenalty> penalties, std::size_t k) {
  std::vector<double> values;
  values.reserve(penalties.size());
  for (const auto& p : penalties) values.push_back(p.value);
  return aggregate_topk(values, k);
}

nn::MlpParams<double> topk_backward(const nn::MlpModel& m, std::span<const GroupPenalty> penalties, const TopK& topk) {
  if (topk.active.empty()) return nn::MlpParams<double>::zeros_like(m.params());
  Eigen::Index rows = 0;
  for (auto i : topk.active) rows += penalties[i].x_mix.rows();
  const auto width = static_cast<Eigen::Index>(m.input_width());
  Eigen::MatrixXd X(rows, width), D(rows, width);
  Eigen::VectorXd w(rows);
  const double scale = 1.0 / static_cast<double>(topk.active.size());
  Eigen::Index at = 0;
  for (auto i : topk.active) {
    const auto& p = penalties[i];
    const auto n = p.x_mix.rows();
    if (p.direction.rows() != n || p.weights.size() != n) {
      throw std::invalid_argument("topk_backward: penalty lacks its interpolation inputs");
    }
    X.middleRows(at, n) = p.x_mix;
    D.middleRows(at, n) = p.direction;
    w.segment(at, n) = scale * p.weights;
    at += n;
  }
  return nn::penalty_backward(m, X, D, w);
}

}  // namespace mcmix
