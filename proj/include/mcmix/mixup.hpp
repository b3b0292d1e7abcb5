#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "mcmix/audit.hpp"
#include "mcmix/dataset.hpp"
#include "mcmix/groups.hpp"
#include "mcmix/rng.hpp"

namespace mcmix {

enum class BatchKind { uniform, balance_by_group, balance_by_group_and_label, balance_by_group_and_interval };

/// When enabled, a focus side smaller than `threshold` rows is sampled at the
/// full half-batch size, with replacement if it has fewer rows than that.
/// Otherwise both sides take min(|left|, |right|, b/2) rows without
/// replacement.
struct ReplacementPolicy {
  bool small_group_with_replacement = false;
  double threshold = 0.0;
};

struct BatchStrategy {
  BatchKind kind = BatchKind::uniform;
  std::size_t batch_size = 500;
  int d = 10;  // interval strategies only
  ReplacementPolicy replacement;
};

struct BatchFocus {
  const GroupSpec* group = nullptr;
  std::optional<int> label;
  std::optional<int> interval;
};

/// Position-wise pairs: left[i] is interpolated with right[i].
struct PairedBatch {
  IndexList left;
  IndexList right;
};

struct MixedBatch {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

inline constexpr double kDefaultMixupEps = 1.0;

/// t ~ Beta(eps, eps).
double sample_t(double eps, Rng& rng);

/// Row-wise convex combination t * a + (1 - t) * b of features and labels.
MixedBatch interpolate(const Eigen::MatrixXd& Xa, const Eigen::VectorXd& ya, const Eigen::MatrixXd& Xb,
                       const Eigen::VectorXd& yb, double t);

/// k distinct elements of pool in random order. k <= pool.size().
IndexList sample_without_replacement(const IndexList& pool, std::size_t k, Rng& rng);
IndexList sample_with_replacement(const IndexList& pool, std::size_t k, Rng& rng);

/// min(b, |pool|) rows (rounded down to even) split into two halves. Returns
/// nullopt when fewer than two rows are available.
std::optional<PairedBatch> draw_uniform(const IndexList& pool, std::size_t batch_size, Rng& rng);

/// Balanced draw from two candidate pools; nullopt when either is empty.
std::optional<PairedBatch> draw_balanced(const IndexList& left_pool, const IndexList& right_pool,
                                         const BatchStrategy& strategy, Rng& rng);

/// Candidate pools for a focus: members of the focus group (optionally with
/// label y or prediction interval v) against non-members with the same label
/// or interval.
std::pair<IndexList, IndexList> focus_pools(const BatchStrategy& strategy, const BatchFocus& focus, const Dataset& ds,
                                            const IndexList& train_idx, const Predictions* current_preds);

/// Draws one batch for the strategy. Uniform ignores the focus. nullopt means
/// skip this iteration.
std::optional<PairedBatch> select_batch(const BatchStrategy& strategy, const BatchFocus& focus, const Dataset& ds,
                                        const IndexList& train_idx, const Predictions* current_preds, Rng& rng);

}  // namespace mcmix
