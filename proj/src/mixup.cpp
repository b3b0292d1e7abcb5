#include "mcmix/mixup.hpp"

#include <algorithm>
#include <stdexcept>

namespace mcmix {

double sample_t(double eps, Rng& rng) {
  if (!(eps > 0.0)) throw std::invalid_argument("sample_t: eps must be positive");
  return beta_variate(rng, eps, eps);
}

MixedBatch interpolate(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& ya, const Eigen::MatrixXd& Xb,
                       const Eigen::VectorXd& yb, double t) {
  if (Xa.rows() != Xb.rows() || Xa.cols() != Xb.cols() || ya.size() != Xa.rows() || yb.size() != Xb.rows()) {
    throw std::invalid_argument("interpolate: batch shapes differ");
  }
  // Endpoints are returned verbatim so t = 0 and t = 1 are exact.
  if (t == 1.0) return {Xa, ya};
  if (t == 0.0) return {Xb, yb};
  return {t * Xa + (1.0 - t) * Xb, t * ya + (1.0 - t) * yb};
}

IndexList sample_without_replacement(const IndexList& pool, std::size_t k, Rng& rng) {
  if (k > pool.size()) throw std::invalid_argument("sample_without_replacement: k exceeds pool size");
  IndexList work(pool);
  for (std::size_t i = 0; i < k; ++i) std::swap(work[i], work[i + uniform_index(rng, work.size() - i)]);
  work.resize(k);
  return work;
}

IndexList sample_with_replacement(const IndexList& pool, std::size_t k, Rng& rng) {
  IndexList out(k);
  for (auto& v : out) v = pool[uniform_index(rng, pool.size())];
  return out;
}

std::optional<PairedBatch> draw_uniform(const IndexList& pool, std::size_t batch_size, Rng& rng) {
  const std::size_t m = std::min(batch_size, pool.size()) / 2 * 2;
  if (m < 2) return std::nullopt;
  auto rows = sample_without_replacement(pool, m, rng);
  PairedBatch out;
  out.left.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(m / 2));
  out.right.assign(rows.begin() + static_cast<std::ptrdiff_t>(m / 2), rows.end());
  return out;
}

std::optional<PairedBatch> draw_balanced(const IndexList& left_pool, const IndexList& right_pool,
                                         const BatchStrategy& strategy, Rng& rng) {
  if (strategy.batch_size < 2 || strategy.batch_size % 2 != 0) {
    throw std::invalid_argument("balanced batches need an even batch size >= 2");
  }
  if (left_pool.empty() || right_pool.empty()) return std::nullopt;
  const std::size_t half = strategy.batch_size / 2;
  PairedBatch out;
  const auto& policy = strategy.replacement;
  if (policy.small_group_with_replacement && static_cast<double>(left_pool.size()) < policy.threshold) {
    auto side = [&](const IndexList& pool) {
      return pool.size() < half ? sample_with_replacement(pool, half, rng) : sample_without_replacement(pool, half, rng);
    };
    out.left = side(left_pool);
    out.right = side(right_pool);
  } else {
    const std::size_t m = std::min({left_pool.size(), right_pool.size(), half});
    out.left = sample_without_replacement(left_pool, m, rng);
    out.right = sample_without_replacement(right_pool, m, rng);
  }
  return out;
}

std::pair<IndexList, IndexList> focus_pools(const BatchStrategy& strategy, const BatchFocus& focus, const Dataset& ds,
                                            const IndexList& train_idx, const Predictions* current_preds) {
  if (focus.group == nullptr) throw std::invalid_argument("balanced batch needs a focus group");
  const bool by_label = strategy.kind == BatchKind::balance_by_group_and_label;
  const bool by_interval = strategy.kind == BatchKind::balance_by_group_and_interval;
  if (by_label && !focus.label) throw std::invalid_argument("label-balanced batch needs a focus label");
  if (by_interval && (!focus.interval || current_preds == nullptr)) {
    throw std::invalid_argument("interval-balanced batch needs a focus interval and current predictions");
  }
  const auto mask = membership_mask(*focus.group, ds);
  std::pair<IndexList, IndexList> pools;
  for (auto i : train_idx) {
    const auto row = static_cast<Eigen::Index>(i);
    if (by_label && ds.outcomes()(row) != static_cast<double>(*focus.label)) continue;
    if (by_interval && interval_of((*current_preds)(row), strategy.d) != *focus.interval) continue;
    (mask[i] ? pools.first : pools.second).push_back(i);
  }
  return pools;
}

std::optional<PairedBatch> select_batch(const BatchStrategy& strategy, const BatchFocus& focus, const Dataset& ds,
                                        const IndexList& train_idx, const Predictions* current_preds, Rng& rng) {
  if (strategy.kind == BatchKind::uniform) return draw_uniform(train_idx, strategy.batch_size, rng);
  const auto [left, right] = focus_pools(strategy, focus, ds, train_idx, current_preds);
  return draw_balanced(left, right, strategy, rng);
}

}  // namespace mcmix
