#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mcmix/audit.hpp"
#include "mcmix/groups.hpp"

namespace mcmix {

/// One additive correction. MC rules carry the interval whose members (by
/// their current prediction) receive delta; MA rules apply to the whole group.
struct UpdateRule {
  GroupSpec group;
  std::optional<int> interval;
  double delta = 0.0;

  bool operator==(const UpdateRule&) const = default;
};

enum class CircuitKind { mc, ma };

struct RuleCircuit {
  CircuitKind kind = CircuitKind::mc;
  int d = 10;  // meaningful for MC only
  double alpha = 0.01;
  std::vector<UpdateRule> rules;

  bool operator==(const RuleCircuit&) const = default;
};

struct EnforceOptions {
  double alpha = 0.01;
  int d = 10;
  std::uint64_t seed = 0;
  std::size_t max_draws = 1'000'000;
};

struct EnforceResult {
  Predictions predictions;  // full-length; rows outside postproc_idx untouched
  RuleCircuit circuit;
  std::size_t draws = 0;
};

/// Thrown when enforcement exhausts its draw budget.
class EnforcementBudgetExceeded : public std::runtime_error {
 public:
  EnforcementBudgetExceeded(const std::string& what, double worst_violation)
      : std::runtime_error(what), worst_violation_(worst_violation) {}
  double worst_violation() const { return worst_violation_; }

 private:
  double worst_violation_;
};

/// Multicalibration by repeated random group draws. A group whose worst
/// interval exceeds alpha gets that interval's signed violation added to its
/// members there, clamped to [0, 1]. Stops once every group has passed since
/// the last correction.
EnforceResult enforce_mc(const Dataset& ds, std::span<const std::size_t> postproc_idx, const Predictions& p,
                         const GroupCollection& C, const Eigen::VectorXd& y, const EnforceOptions& options);

/// Multiaccuracy analogue of enforce_mc: the whole group is nudged by its mean
/// error.
EnforceResult enforce_ma(const Dataset& ds, std::span<const std::size_t> postproc_idx, const Predictions& p,
                         const GroupCollection& C, const Eigen::VectorXd& y, const EnforceOptions& options);

/// Replays the rules in order on the rows in idx, clamping after every rule.
/// MC rules test interval membership against the partially updated value.
Predictions apply_circuit(const Dataset& ds, std::span<const std::size_t> idx, const Predictions& p,
                          const RuleCircuit& circuit);

/// Header "MC d=10 alpha=0.01" (or "MA alpha=0.01"), then one
/// "label: col=val & ... | v | delta" line per rule ("-" for MA intervals).
void write_circuit(std::ostream& out, const RuleCircuit& circuit);
RuleCircuit read_circuit(std::istream& in);

}  // namespace mcmix
