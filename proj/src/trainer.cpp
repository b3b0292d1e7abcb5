#include "mcmix/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include <boost/algorithm/string.hpp>

#include "mcmix/eval.hpp"

namespace mcmix {

namespace {

struct MethodInfo {
  MethodName name;
  const char* label;
};

constexpr std::array<MethodInfo, 13> kMethods{{
    {MethodName::base, "Base"},
    {MethodName::fair_base, "FairBase"},
    {MethodName::mixup, "Mixup"},
    {MethodName::mixup_eo, "Mixup_EO"},
    {MethodName::mixup_ma, "Mixup_MA"},
    {MethodName::mixup_mc, "Mixup_MC"},
    {MethodName::fm_dp, "FM_DP"},
    {MethodName::fm_eo, "FM_EO"},
    {MethodName::fm_ma, "FM_MA"},
    {MethodName::fm_mc, "FM_MC"},
    {MethodName::enforce_ma, "Enforce_MA"},
    {MethodName::enforce_mc, "Enforce_MC"},
    {MethodName::mixup_enforce_mc, "Mixup_EnforceMC"},
}};

constexpr std::array<MethodName, 13> kMethodOrder{
    MethodName::base,     MethodName::fair_base, MethodName::mixup,      MethodName::mixup_eo, MethodName::mixup_ma,
    MethodName::mixup_mc, MethodName::fm_dp,     MethodName::fm_eo,      MethodName::fm_ma,    MethodName::fm_mc,
    MethodName::enforce_ma, MethodName::enforce_mc, MethodName::mixup_enforce_mc,
};

enum class LossKind { original, mixed_only, mixup_control, fair_mixup };

BatchKind batch_kind(MethodName m) {
  switch (m) {
    case MethodName::fair_base:
    case MethodName::mixup_ma:
    case MethodName::fm_dp:
    case MethodName::fm_ma:
      return BatchKind::balance_by_group;
    case MethodName::mixup_eo:
    case MethodName::fm_eo:
      return BatchKind::balance_by_group_and_label;
    case MethodName::mixup_mc:
    case MethodName::fm_mc:
      return BatchKind::balance_by_group_and_interval;
    default:
      return BatchKind::uniform;
  }
}

LossKind loss_kind(MethodName m) {
  switch (m) {
    case MethodName::mixup:
    case MethodName::mixup_enforce_mc:
      return LossKind::mixed_only;
    case MethodName::mixup_eo:
    case MethodName::mixup_ma:
    case MethodName::mixup_mc:
      return LossKind::mixup_control;
    case MethodName::fm_dp:
    case MethodName::fm_eo:
    case MethodName::fm_ma:
    case MethodName::fm_mc:
      return LossKind::fair_mixup;
    default:
      return LossKind::original;
  }
}

PenaltyKind penalty_kind(MethodName m) {
  switch (m) {
    case MethodName::fm_eo: return PenaltyKind::eo;
    case MethodName::fm_ma: return PenaltyKind::ma;
    case MethodName::fm_mc: return PenaltyKind::mc;
    default: return PenaltyKind::dp;
  }
}

bool small_group_replacement(MethodName m) {
  return m == MethodName::fair_base || m == MethodName::mixup_ma || m == MethodName::fm_dp || m == MethodName::fm_ma;
}

struct TunedRow {
  MethodName name;
  int d;
  std::size_t k;
  double lambda;
};

// (d, k, lambda) per task for the interpolation methods.
constexpr std::array<TunedRow, 8> kEmploymentRows{{
    {MethodName::mixup, 10, 3, 0.25},
    {MethodName::mixup_eo, 10, 100, 0.25},
    {MethodName::mixup_ma, 10, 3, 0.25},
    {MethodName::mixup_mc, 10, 40, 0.25},
    {MethodName::fm_dp, 10, 100, 0.5},
    {MethodName::fm_eo, 10, 100, 0.25},
    {MethodName::fm_ma, 10, 100, 0.25},
    {MethodName::fm_mc, 10, 100, 0.5},
}};

constexpr std::array<TunedRow, 8> kIncomeRows{{
    {MethodName::mixup, 10, 40, 0.25},
    {MethodName::mixup_eo, 10, 40, 0.5},
    {MethodName::mixup_ma, 10, 40, 0.25},
    {MethodName::mixup_mc, 10, 40, 0.5},
    {MethodName::fm_dp, 10, 3, 0.25},
    {MethodName::fm_eo, 10, 3, 0.5},
    {MethodName::fm_ma, 10, 3, 0.5},
    {MethodName::fm_mc, 10, 3, 0.25},
}};

Predictions forward_rows(const nn::MlpModel& m, const EncodedMatrix& enc, std::span<const std::size_t> idx,
                         Eigen::Index n) {
  Predictions out = Predictions::Zero(n);
  if (idx.empty()) return out;
  const IndexList rows(idx.begin(), idx.end());
  const Eigen::VectorXd p = nn::forward(m, Eigen::MatrixXd(enc.rows(rows)));
  for (std::size_t j = 0; j < rows.size(); ++j) out(static_cast<Eigen::Index>(rows[j])) = p(static_cast<Eigen::Index>(j));
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const IndexList& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = v(static_cast<Eigen::Index>(idx[j]));
  return out;
}

double clamped_bce(double p, double y) {
  const double q = std::clamp(p, nn::kProbabilityClamp, 1.0 - nn::kProbabilityClamp);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

/// Pools and per-group state shared by every iteration of one run.
class Run {
 public:
  Run(const MethodSpec& spec, const Dataset& ds, const GroupCollection& C, const IndexList& train_rows,
      const EncodedMatrix& enc, std::uint64_t seed, const UpdateObserver& observer)
      : spec_(spec),
        ds_(ds),
        C_(C),
        train_rows_(train_rows),
        enc_(enc),
        y_(ds.outcomes()),
        model_(nn::MlpModel::initialized(static_cast<Eigen::Index>(enc.width()), seed, spec.hidden)),
        adam_(model_),
        batch_rng_(make_rng(seed, Stream::batch)),
        mix_rng_(make_rng(seed, Stream::mix)),
        observer_(observer) {
    strategy_.kind = batch_kind(spec.name);
    strategy_.batch_size = spec.b;
    strategy_.d = spec.d;
    if (small_group_replacement(spec.name)) {
      strategy_.replacement.small_group_with_replacement = true;
      strategy_.replacement.threshold =
          spec.replacement_threshold.value_or(0.025 * static_cast<double>(train_rows.size()));
    }
    for (const auto& g : C.groups) masks_.push_back(membership_mask(g, ds));
    if (strategy_.kind == BatchKind::balance_by_group) build_static_pools(false);
    if (strategy_.kind == BatchKind::balance_by_group_and_label) build_static_pools(true);
  }

  nn::MlpModel& model() { return model_; }

  /// One epoch of updates; returns (iterations, skipped, summed loss).
  EpochStats epoch() {
    EpochStats stats;
    double loss_sum = 0.0;
    std::size_t updates = 0;
    auto visit = [&](const IndexList* left, const IndexList* right) {
      ++stats.iterations;
      std::optional<PairedBatch> batch;
      if (left == nullptr) {
        batch = draw_uniform(train_rows_, spec_.b, batch_rng_);
      } else {
        batch = draw_balanced(*left, *right, strategy_, batch_rng_);
      }
      if (!batch) {
        ++stats.skipped;
        return;
      }
      loss_sum += update(*batch);
      ++updates;
    };

    switch (strategy_.kind) {
      case BatchKind::uniform:
        for (std::size_t it = 0; it < spec_.n; ++it) visit(nullptr, nullptr);
        break;
      case BatchKind::balance_by_group:
      case BatchKind::balance_by_group_and_label:
        for (std::size_t it = 0; it < spec_.n; ++it) {
          for (const auto& cells : pools_) {
            for (const auto& [left, right] : cells) visit(&left, &right);
          }
        }
        break;
      case BatchKind::balance_by_group_and_interval:
        refresh_intervals();
        for (std::size_t it = 0; it < spec_.n; ++it) {
          for (const auto& cells : pools_) {
            for (const auto& [left, right] : cells) {
              if (left.empty()) ++stats.empty_cells;
              visit(&left, &right);
            }
          }
        }
        break;
    }
    stats.mean_loss = updates > 0 ? loss_sum / static_cast<double>(updates) : 0.0;
    return stats;
  }

  std::vector<double> loss_trace;

 private:
  using Cell = std::pair<IndexList, IndexList>;

  void build_static_pools(bool by_label) {
    pools_.assign(C_.size(), std::vector<Cell>(by_label ? 2 : 1));
    for (std::size_t g = 0; g < C_.size(); ++g) {
      for (auto i : train_rows_) {
        const std::size_t cell = by_label ? static_cast<std::size_t>(y_(static_cast<Eigen::Index>(i))) : 0;
        auto& pool = pools_[g][cell];
        (masks_[g][i] ? pool.first : pool.second).push_back(i);
      }
    }
  }

  // Interval cells come from a snapshot of the model at the start of the epoch.
  void refresh_intervals() {
    const auto p = forward_rows(model_, enc_, train_rows_, static_cast<Eigen::Index>(ds_.rows()));
    interval_.assign(ds_.rows(), -1);
    for (auto i : train_rows_) interval_[i] = interval_of(p(static_cast<Eigen::Index>(i)), spec_.d);
    pools_.assign(C_.size(), std::vector<Cell>(static_cast<std::size_t>(spec_.d) + 1));
    for (std::size_t g = 0; g < C_.size(); ++g) {
      for (auto i : train_rows_) {
        auto& pool = pools_[g][static_cast<std::size_t>(interval_[i])];
        (masks_[g][i] ? pool.first : pool.second).push_back(i);
      }
    }
  }

  double draw_t() { return spec_.forced_t ? *spec_.forced_t : sample_t(spec_.eps, mix_rng_); }

  // Pairs whose left member is in group g and whose right member is not.
  std::vector<Eigen::Index> pair_subset(std::size_t g, const PairedBatch& batch, bool same_cell) const {
    std::vector<Eigen::Index> out;
    const auto& mask = masks_[g];
    for (std::size_t j = 0; j < batch.left.size(); ++j) {
      const auto l = batch.left[j], r = batch.right[j];
      if (!mask[l] || mask[r]) continue;
      if (same_cell && !same_bucket(l, r)) continue;
      out.push_back(static_cast<Eigen::Index>(j));
    }
    return out;
  }

  bool same_bucket(std::size_t l, std::size_t r) const {
    if (penalty_kind(spec_.name) == PenaltyKind::eo) return y_(static_cast<Eigen::Index>(l)) == y_(static_cast<Eigen::Index>(r));
    if (penalty_kind(spec_.name) == PenaltyKind::mc) return interval_[l] == interval_[r];
    return true;
  }

  double update(const PairedBatch& batch) {
    const Eigen::MatrixXd Xl = enc_.rows(batch.left), Xr = enc_.rows(batch.right);
    const Eigen::VectorXd yl = gather(y_, batch.left), yr = gather(y_, batch.right);
    const auto kind = loss_kind(spec_.name);

    nn::LossGradient<double> main;
    double loss = 0.0;
    if (kind == LossKind::mixed_only) {
      const auto mixed = interpolate(Xl, yl, Xr, yr, draw_t());
      main = nn::backward(model_, mixed.x, mixed.y);
      loss = main.loss;
    } else {
      Eigen::MatrixXd Xo(Xl.rows() + Xr.rows(), Xl.cols());
      Xo << Xl, Xr;
      Eigen::VectorXd yo(yl.size() + yr.size());
      yo << yl, yr;
      main = nn::backward(model_, Xo, yo);
      loss = main.loss;
      if (kind == LossKind::mixup_control) {
        loss += spec_.lambda * mixup_control(Xl, yl, Xr, yr, batch, main.grad);
      } else if (kind == LossKind::fair_mixup) {
        loss += spec_.lambda * fair_mixup(Xl, yl, Xr, yr, batch, main.grad);
      }
    }
    if (!std::isfinite(loss)) throw TrainingError("non-finite training loss");
    nn::adam_step(model_, adam_, main.grad);
    loss_trace.push_back(loss);
    if (observer_) observer_(loss_trace.size(), model_);
    return loss;
  }

  void add_scaled(nn::MlpParams<double>& grad, const nn::MlpParams<double>& extra) const {
    nn::MlpParams<double>::for_each_tensor([&](auto& g, const auto& e) { g += spec_.lambda * e; }, grad, extra);
  }

  // Top-k over groups of the mean cross-entropy on each group's interpolated pairs.
  double mixup_control(const Eigen::MatrixXd& Xl, const Eigen::VectorXd& yl, const Eigen::MatrixXd& Xr,
                       const Eigen::VectorXd& yr, const PairedBatch& batch, nn::MlpParams<double>& grad) {
    const auto mixed = interpolate(Xl, yl, Xr, yr, draw_t());
    const Eigen::VectorXd p = nn::forward(model_, mixed.x);
    std::vector<std::vector<Eigen::Index>> subsets;
    std::vector<double> values;
    for (std::size_t g = 0; g < C_.size(); ++g) {
      auto subset = pair_subset(g, batch, false);
      if (subset.empty()) continue;
      double sum = 0.0;
      for (auto j : subset) sum += clamped_bce(p(j), mixed.y(j));
      values.push_back(sum / static_cast<double>(subset.size()));
      subsets.push_back(std::move(subset));
    }
    const auto top = aggregate_topk(values, spec_.k);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(mixed.x.rows());
    for (auto a : top.active) {
      const double share = 1.0 / (static_cast<double>(top.active.size()) * static_cast<double>(subsets[a].size()));
      for (auto j : subsets[a]) w(j) += share;
    }
    add_scaled(grad, nn::weighted_bce_backward(model_, mixed.x, mixed.y, w).grad);
    return top.value;
  }

  double fair_mixup(const Eigen::MatrixXd& Xl, const Eigen::VectorXd& yl, const Eigen::MatrixXd& Xr,
                    const Eigen::VectorXd& yr, const PairedBatch& batch, nn::MlpParams<double>& grad) {
    const double t = draw_t();
    const Eigen::MatrixXd x_mix = t * Xl + (1.0 - t) * Xr;
    const Eigen::MatrixXd direction = Xl - Xr;
    const Eigen::VectorXd jvp = nn::input_jvp(model_, x_mix, direction);
    const auto kind = penalty_kind(spec_.name);
    std::vector<int> bucket;
    if (kind == PenaltyKind::eo) {
      for (auto l : batch.left) bucket.push_back(static_cast<int>(y_(static_cast<Eigen::Index>(l))));
    } else if (kind == PenaltyKind::mc) {
      for (auto l : batch.left) bucket.push_back(interval_[l]);
    }
    std::vector<GroupPenalty> penalties;
    for (std::size_t g = 0; g < C_.size(); ++g) {
      const auto subset = pair_subset(g, batch, true);
      if (subset.empty()) continue;
      if (auto pen = penalty_on_subset(kind, jvp, yl, yr, bucket, subset, spec_.d)) penalties.push_back(std::move(*pen));
    }
    const auto top = aggregate_topk(penalties, spec_.k);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(jvp.size());
    for (auto a : top.active) w += penalties[a].weights / static_cast<double>(top.active.size());
    add_scaled(grad, nn::penalty_backward(model_, x_mix, direction, w));
    return top.value;
  }

  const MethodSpec& spec_;
  const Dataset& ds_;
  const GroupCollection& C_;
  const IndexList& train_rows_;
  const EncodedMatrix& enc_;
  const Eigen::VectorXd& y_;
  nn::MlpModel model_;
  nn::AdamState<double> adam_;
  Rng batch_rng_, mix_rng_;
  const UpdateObserver& observer_;
  BatchStrategy strategy_;
  std::vector<std::vector<char>> masks_;
  std::vector<std::vector<Cell>> pools_;  // [group][label or interval]
  std::vector<int> interval_;
};

void validate(const MethodSpec& spec, const Splits& splits, const GroupCollection& C) {
  if (spec.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (spec.n < 1) throw std::invalid_argument("n must be >= 1");
  if (spec.b < 2 || spec.b % 2 != 0) throw std::invalid_argument("batch size must be even and >= 2");
  if (spec.k < 1) throw std::invalid_argument("k must be >= 1");
  if (spec.d < 1 || spec.enforce_d < 1) throw std::invalid_argument("d must be >= 1");
  if (!(spec.lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(spec.eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (spec.hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
  if (spec.forced_t && !(*spec.forced_t >= 0.0 && *spec.forced_t <= 1.0)) {
    throw std::invalid_argument("forced t must lie in [0, 1]");
  }
  if (uses_groups(spec.name) && C.groups.empty()) {
    throw std::invalid_argument(to_string(spec.name) + " needs a nonempty group collection");
  }
  if (uses_enforcement(spec.name) && splits.postproc.empty()) {
    throw std::invalid_argument(to_string(spec.name) + " needs a nonempty post-processing split");
  }
  if (splits.val.empty()) throw std::invalid_argument("validation split is empty");
}

}  // namespace

std::string to_string(MethodName name) {
  for (const auto& m : kMethods) {
    if (m.name == name) return m.label;
  }
  return "?";
}

MethodName parse_method(const std::string& text) {
  const auto key = boost::trim_copy(text);
  for (const auto& m : kMethods) {
    if (boost::iequals(key, m.label)) return m.name;
  }
  throw std::invalid_argument("unknown method '" + text + "'");
}

std::span<const MethodName> all_methods() { return kMethodOrder; }

bool uses_enforcement(MethodName name) {
  return name == MethodName::enforce_ma || name == MethodName::enforce_mc || name == MethodName::mixup_enforce_mc;
}

bool uses_groups(MethodName name) {
  return name != MethodName::base && name != MethodName::mixup;
}

std::string to_string(TaskKind kind) { return kind == TaskKind::employment ? "employment" : "income"; }

TaskKind parse_task(const std::string& text) {
  const auto key = boost::trim_copy(text);
  if (boost::iequals(key, "employment")) return TaskKind::employment;
  if (boost::iequals(key, "income")) return TaskKind::income;
  throw std::invalid_argument("unknown task '" + text + "' (expected employment or income)");
}

MethodSpec default_spec(MethodName name, TaskKind task) {
  MethodSpec spec;
  spec.name = name;
  const auto& rows = task == TaskKind::employment ? kEmploymentRows : kIncomeRows;
  for (const auto& r : rows) {
    if (r.name == name) {
      spec.d = r.d;
      spec.k = r.k;
      spec.lambda = r.lambda;
    }
  }
  if (uses_enforcement(name)) spec.p = 0.25;
  return spec;
}

TrainingRecord train(const MethodSpec& spec, const Dataset& ds, const Splits& splits, const GroupCollection& C,
                     std::uint64_t seed, const UpdateObserver& observer) {
  validate(spec, splits, C);
  const auto started = std::chrono::steady_clock::now();
  const bool enforce = uses_enforcement(spec.name);
  IndexList train_rows = enforce ? splits.train : splits.training_pool();
  std::sort(train_rows.begin(), train_rows.end());
  if (train_rows.empty()) throw std::invalid_argument("training split is empty");

  const auto pool = splits.training_pool();
  const auto enc = fit_encoder(ds, pool);
  const auto n_rows = static_cast<Eigen::Index>(ds.rows());
  const auto& y = ds.outcomes();

  TrainingRecord record;
  record.spec = spec;
  record.seed = seed;
  record.encoder = enc;
  record.encoder.data.resize(0, 0);

  Run run(spec, ds, C, train_rows, enc, seed, observer);
  double best = -1.0;
  for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
    auto stats = run.epoch();
    stats.epoch = epoch;
    record.iterations += stats.iterations;
    record.skipped += stats.skipped;
    record.empty_cells += stats.empty_cells;
    const auto counted = record.iterations - record.empty_cells;
    const auto counted_skips = record.skipped - record.empty_cells;
    if (static_cast<double>(counted_skips) > spec.max_skip_fraction * static_cast<double>(counted)) {
      throw TrainingError(to_string(spec.name) + ": " + std::to_string(counted_skips) + " of " +
                          std::to_string(counted) + " iterations had an empty batch side");
    }

    Predictions val = forward_rows(run.model(), enc, splits.val, n_rows);
    std::optional<RuleCircuit> circuit;
    std::size_t draws = 0;
    if (enforce) {
      const auto post = forward_rows(run.model(), enc, splits.postproc, n_rows);
      EnforceOptions opts{spec.enforce_alpha, spec.enforce_d, seed, spec.enforce_max_draws};
      auto result = spec.name == MethodName::enforce_ma ? enforce_ma(ds, splits.postproc, post, C, y, opts)
                                                         : enforce_mc(ds, splits.postproc, post, C, y, opts);
      val = apply_circuit(ds, splits.val, val, result.circuit);
      stats.circuit_rules = result.circuit.rules.size();
      stats.enforcement_draws = result.draws;
      draws = result.draws;
      circuit = std::move(result.circuit);
    }
    stats.val_balanced_accuracy = balanced_accuracy(val, y, splits.val);
    if (stats.val_balanced_accuracy > best) {
      best = stats.val_balanced_accuracy;
      record.selected_epoch = epoch;
      record.model = run.model();
      record.circuit = std::move(circuit);
      record.enforcement_draws = draws;
    }
    record.epochs.push_back(stats);
  }
  record.loss_trace = std::move(run.loss_trace);
  record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return record;
}

Predictions predict_rows(const TrainingRecord& record, const Dataset& ds, std::span<const std::size_t> idx) {
  const auto n = static_cast<Eigen::Index>(ds.rows());
  for (auto i : idx) {
    if (static_cast<Eigen::Index>(i) >= n) throw std::out_of_range("predict: row index out of range");
  }
  EncodedMatrix enc = record.encoder;
  enc.data = record.encoder.encode(ds);
  Predictions p = forward_rows(record.model, enc, idx, n);
  if (record.circuit) p = apply_circuit(ds, idx, p, *record.circuit);
  return p;
}

Eigen::VectorXd predict(const TrainingRecord& record, const Dataset& ds, std::span<const std::size_t> idx) {
  if (idx.empty()) return Eigen::VectorXd(0);
  const auto full = predict_rows(record, ds, idx);
  return gather(full, IndexList(idx.begin(), idx.end()));
}

}  // namespace mcmix
