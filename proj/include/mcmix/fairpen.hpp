#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcmix/nn.hpp"

namespace mcmix {

enum class PenaltyKind { dp, eo, ma, mc };

std::string to_string(PenaltyKind kind);

/// Interpolation pairs in encoded space. Left rows come from the group, right
/// rows from its complement. `bucket` holds the shared label (EO) or
/// prediction interval (MC) of each pair and is ignored for DP and MA.
struct PenaltyPairs {
  Eigen::MatrixXd x_left, x_right;
  Eigen::VectorXd y_left, y_right;
  std::vector<int> bucket;

  Eigen::Index size() const { return x_left.rows(); }
};

/// A penalty value together with its derivative with respect to each pair's
/// tangent term, which is all penalty_backward needs.
struct GroupPenalty {
  std::string label;
  double value = 0.0;
  Eigen::VectorXd weights;  // d value / d jvp_i
  Eigen::MatrixXd x_mix, direction;  // filled by the model-level functions
};

/// Sum over buckets of |mean over the bucket of (jvp_i - offset_i)|. The
/// offset is y_left - y_right for MA and MC and zero otherwise. nullopt when
/// no pair contributes.
std::optional<GroupPenalty> penalty_from_terms(PenaltyKind kind, const Eigen::VectorXd& jvp,
                                               const Eigen::VectorXd& y_left, const Eigen::VectorXd& y_right,
                                               std::span<const int> bucket, int d = 10);

/// Same as penalty_from_terms restricted to the pairs listed in `subset`.
/// Weights are returned for all pairs (zero outside the subset).
std::optional<GroupPenalty> penalty_on_subset(PenaltyKind kind, const Eigen::VectorXd& jvp,
                                              const Eigen::VectorXd& y_left, const Eigen::VectorXd& y_right,
                                              std::span<const int> bucket, std::span<const Eigen::Index> subset,
                                              int d = 10);

std::optional<GroupPenalty> penalty_dp(const nn::MlpModel& m, const PenaltyPairs& pairs, double t);
std::optional<GroupPenalty> penalty_eo(const nn::MlpModel& m, const PenaltyPairs& pairs, double t);
std::optional<GroupPenalty> penalty_ma(const nn::MlpModel& m, const PenaltyPairs& pairs, double t);
std::optional<GroupPenalty> penalty_mc(const nn::MlpModel& m, const PenaltyPairs& pairs, double t, int d);

struct TopK {
  double value = 0.0;
  std::vector<std::size_t> active;  // positions in the input list, largest first
};

/// Mean of the min(k, count) largest values; earlier entries win ties.
TopK aggregate_topk(std::span<const GroupPenalty> penalties, std::size_t k);
TopK aggregate_topk(std::span<const double> values, std::size_t k);

/// Parameter gradient of the aggregated value for penalties produced by the
/// model-level functions.
nn::MlpParams<double> topk_backward(const nn::MlpModel& m, std::span<const GroupPenalty> penalties, const TopK& topk);

}  // namespace mcmix
