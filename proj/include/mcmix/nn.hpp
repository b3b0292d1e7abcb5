#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mcmix/rng.hpp"

namespace mcmix::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

inline constexpr int kHiddenWidth = 200;
inline constexpr double kProbabilityClamp = 1e-7;

/// Weights of the fixed 3-hidden-layer network
///   in -> W1 -> ReLU -> W2 -> ReLU -> W3 -> W4 -> sigmoid.
/// Also used as the gradient and optimizer-moment container.
template <typename Scalar>
struct MlpParams {
  Matrix<Scalar> W1, W2, W3, W4;
  RowVector<Scalar> b1, b2, b3, b4;

  static MlpParams zeros(Eigen::Index inputs, Eigen::Index hidden) {
    MlpParams p;
    p.W1 = Matrix<Scalar>::Zero(inputs, hidden);
    p.W2 = Matrix<Scalar>::Zero(hidden, hidden);
    p.W3 = Matrix<Scalar>::Zero(hidden, hidden);
    p.W4 = Matrix<Scalar>::Zero(hidden, 1);
    p.b1 = RowVector<Scalar>::Zero(hidden);
    p.b2 = RowVector<Scalar>::Zero(hidden);
    p.b3 = RowVector<Scalar>::Zero(hidden);
    p.b4 = RowVector<Scalar>::Zero(1);
    return p;
  }

  static MlpParams zeros_like(const MlpParams& other) { return zeros(other.W1.rows(), other.W1.cols()); }

  Eigen::Index size() const {
    Eigen::Index n = 0;
    for_each_tensor([&n](const auto& t) { n += t.size(); }, *this);
    return n;
  }

  bool operator==(const MlpParams& o) const {
    bool eq = true;
    for_each_tensor(
        [&eq](const auto& a, const auto& b) {
          eq = eq && a.rows() == b.rows() && a.cols() == b.cols() && a == b;
        },
        *this, o);
    return eq;
  }

  /// Calls f(t1, t2, ...) for each tensor slot of the given parameter sets, in
  /// the fixed order W1 b1 W2 b2 W3 b3 W4 b4.
  template <typename F, typename... Ps>
  static void for_each_tensor(F&& f, Ps&... ps) {
    f(ps.W1...);
    f(ps.b1...);
    f(ps.W2...);
    f(ps.b2...);
    f(ps.W3...);
    f(ps.b3...);
    f(ps.W4...);
    f(ps.b4...);
  }
};

template <typename Scalar>
class Mlp {
 public:
  using Params = MlpParams<Scalar>;

  Mlp() = default;
  explicit Mlp(Params params) : params_(std::move(params)) {
    const auto h = params_.W1.cols();
    if (params_.W2.rows() != h || params_.W2.cols() != h || params_.W3.rows() != h || params_.W3.cols() != h ||
        params_.W4.rows() != h || params_.W4.cols() != 1 || params_.b1.size() != h || params_.b2.size() != h ||
        params_.b3.size() != h || params_.b4.size() != 1) {
      throw std::invalid_argument("Mlp: inconsistent parameter shapes");
    }
  }

  /// Fan-in uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for
  /// weights and biases alike.
  static Mlp initialized(Eigen::Index inputs, std::uint64_t seed, Eigen::Index hidden = kHiddenWidth) {
    Rng rng = make_rng(seed, Stream::init);
    auto p = Params::zeros(inputs, hidden);
    auto fill = [&rng](auto& t, Eigen::Index fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = static_cast<Scalar>(bound * (2.0 * uniform01(rng) - 1.0));
      }
    };
    fill(p.W1, inputs);
    fill(p.b1, inputs);
    fill(p.W2, hidden);
    fill(p.b2, hidden);
    fill(p.W3, hidden);
    fill(p.b3, hidden);
    fill(p.W4, hidden);
    fill(p.b4, hidden);
    return Mlp(std::move(p));
  }

  const Params& params() const { return params_; }
  Params& params() { return params_; }
  Eigen::Index input_width() const { return params_.W1.rows(); }
  Eigen::Index hidden_width() const { return params_.W1.cols(); }

  bool operator==(const Mlp&) const = default;

 private:
  Params params_;
};

using MlpModel = Mlp<double>;

/// Activations of one forward pass, kept for the backward sweeps.
template <typename Scalar>
struct ForwardTrace {
  Matrix<Scalar> A1, H1, A2, H2, H3;
  Vector<Scalar> z, p;
};

/// Forward activations together with their tangents along an input direction.
template <typename Scalar>
struct TangentBundle {
  ForwardTrace<Scalar> primal;
  Matrix<Scalar> D, dA1, dH1, dA2, dH2, dH3;
  Vector<Scalar> dz, dp;
};

namespace detail {

template <typename Scalar>
void check_input(const Mlp<Scalar>& m, const Matrix<Scalar>& X, const char* what) {
  if (X.cols() != m.input_width()) {
    throw std::invalid_argument(std::string(what) + ": batch has " + std::to_string(X.cols()) +
                                " columns, model expects " + std::to_string(m.input_width()));
  }
}

template <typename Derived>
auto relu_mask(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  return (A.array() > Scalar(0)).template cast<Scalar>();
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

}  // namespace detail

template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const Mlp<Scalar>& m, const Matrix<Scalar>& X) {
  detail::check_input(m, X, "forward");
  const auto& w = m.params();
  ForwardTrace<Scalar> t;
  t.A1 = (X * w.W1).rowwise() + w.b1;
  t.H1 = t.A1.cwiseMax(Scalar(0));
  t.A2 = (t.H1 * w.W2).rowwise() + w.b2;
  t.H2 = t.A2.cwiseMax(Scalar(0));
  t.H3 = (t.H2 * w.W3).rowwise() + w.b3;
  t.z = (t.H3 * w.W4).array() + w.b4(0);
  t.p = t.z.unaryExpr([](Scalar v) { return detail::sigmoid(v); });
  return t;
}

template <typename Scalar>
Vector<Scalar> forward(const Mlp<Scalar>& m, const Matrix<Scalar>& X) {
  return forward_trace(m, X).p;
}

/// Mean binary cross-entropy; probabilities clamped to [1e-7, 1 - 1e-7].
/// Targets may be fractional.
template <typename Scalar>
Scalar bce_loss(const Vector<Scalar>& p, const Vector<Scalar>& y) {
  if (p.size() != y.size()) throw std::invalid_argument("bce_loss: size mismatch");
  if (p.size() == 0) return Scalar(0);
  const Scalar lo(kProbabilityClamp), hi(1.0 - kProbabilityClamp);
  Scalar total(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar q = std::clamp(p(i), lo, hi);
    total -= y(i) * std::log(q) + (Scalar(1) - y(i)) * std::log(Scalar(1) - q);
  }
  return total / static_cast<Scalar>(p.size());
}

template <typename Scalar>
struct LossGradient {
  Scalar loss{};
  MlpParams<Scalar> grad;
};

/// Gradient of sum_i weight_i * bce_i, where bce_i is the clamped per-row
/// cross-entropy. The loss field holds that weighted sum.
template <typename Scalar>
LossGradient<Scalar> weighted_bce_backward(const Mlp<Scalar>& m, const Matrix<Scalar>& X, const Vector<Scalar>& y,
                                           const Vector<Scalar>& weight) {
  if (y.size() != X.rows() || weight.size() != X.rows()) {
    throw std::invalid_argument("backward: target/weight length differs from batch rows");
  }
  const auto& w = m.params();
  const auto t = forward_trace(m, X);
  const Scalar lo(kProbabilityClamp), hi(1.0 - kProbabilityClamp);

  LossGradient<Scalar> out;
  Vector<Scalar> gz(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Scalar p = t.p(i);
    const Scalar q = std::clamp(p, lo, hi);
    out.loss -= weight(i) * (y(i) * std::log(q) + (Scalar(1) - y(i)) * std::log(Scalar(1) - q));
    // d bce / dz = p - y inside the clamp; the clamp itself has zero slope.
    gz(i) = (p > lo && p < hi) ? weight(i) * (p - y(i)) : Scalar(0);
  }

  auto& g = out.grad;
  g.W4 = t.H3.transpose() * gz;
  g.b4 = RowVector<Scalar>::Constant(1, gz.sum());
  const Matrix<Scalar> gH3 = gz * w.W4.transpose();
  g.W3 = t.H2.transpose() * gH3;
  g.b3 = gH3.colwise().sum();
  const Matrix<Scalar> gA2 = ((gH3 * w.W3.transpose()).array() * detail::relu_mask(t.A2)).matrix();
  g.W2 = t.H1.transpose() * gA2;
  g.b2 = gA2.colwise().sum();
  const Matrix<Scalar> gA1 = ((gA2 * w.W2.transpose()).array() * detail::relu_mask(t.A1)).matrix();
  g.W1 = X.transpose() * gA1;
  g.b1 = gA1.colwise().sum();
  return out;
}

/// Mean BCE and its exact parameter gradient.
template <typename Scalar>
LossGradient<Scalar> backward(const Mlp<Scalar>& m, const Matrix<Scalar>& X, const Vector<Scalar>& y) {
  const auto n = X.rows();
  if (n == 0) return {Scalar(0), MlpParams<Scalar>::zeros_like(m.params())};
  const Vector<Scalar> w = Vector<Scalar>::Constant(n, Scalar(1) / static_cast<Scalar>(n));
  return weighted_bce_backward(m, X, y, w);
}

/// Forward-mode propagation of the input direction D alongside the primal
/// pass. The ReLU tangent uses the subgradient 1{pre-activation > 0}.
template <typename Scalar>
TangentBundle<Scalar> tangent_trace(const Mlp<Scalar>& m, const Matrix<Scalar>& X, const Matrix<Scalar>& D) {
  if (D.rows() != X.rows() || D.cols() != X.cols()) throw std::invalid_argument("input_jvp: direction shape differs from batch");
  const auto& w = m.params();
  TangentBundle<Scalar> t;
  t.primal = forward_trace(m, X);
  t.D = D;
  t.dA1 = D * w.W1;
  t.dH1 = (t.dA1.array() * detail::relu_mask(t.primal.A1)).matrix();
  t.dA2 = t.dH1 * w.W2;
  t.dH2 = (t.dA2.array() * detail::relu_mask(t.primal.A2)).matrix();
  t.dH3 = t.dH2 * w.W3;
  t.dz = t.dH3 * w.W4;
  const auto& p = t.primal.p;
  t.dp = (p.array() * (Scalar(1) - p.array()) * t.dz.array()).matrix();
  return t;
}

/// Row i holds <grad_x f(x_i), d_i>.
template <typename Scalar>
Vector<Scalar> input_jvp(const Mlp<Scalar>& m, const Matrix<Scalar>& X, const Matrix<Scalar>& D) {
  return tangent_trace(m, X, D).dp;
}

/// Parameter gradient of sum_i weight_i * jvp_i by reverse-mode through the
/// tangent computation. ReLU second derivatives are taken as zero.
template <typename Scalar>
MlpParams<Scalar> penalty_backward(const Mlp<Scalar>& m, const Matrix<Scalar>& X, const Matrix<Scalar>& D,
                                   const Vector<Scalar>& weight) {
  if (weight.size() != X.rows()) throw std::invalid_argument("penalty_backward: weight length differs from batch rows");
  const auto& w = m.params();
  const auto t = tangent_trace(m, X, D);
  const auto& pr = t.primal;

  // jvp = s'(z) * dz with s' = p(1-p); d s'/dz = p(1-p)(1-2p).
  const auto p = pr.p.array();
  const Vector<Scalar> g_dz = (weight.array() * p * (Scalar(1) - p)).matrix();
  const Vector<Scalar> g_z = (weight.array() * p * (Scalar(1) - p) * (Scalar(1) - Scalar(2) * p) * t.dz.array()).matrix();

  MlpParams<Scalar> g;
  // z = H3 W4 + b4, dz = dH3 W4
  g.W4 = pr.H3.transpose() * g_z + t.dH3.transpose() * g_dz;
  g.b4 = RowVector<Scalar>::Constant(1, g_z.sum());
  const Matrix<Scalar> gH3 = g_z * w.W4.transpose();
  const Matrix<Scalar> g_dH3 = g_dz * w.W4.transpose();
  // H3 = H2 W3 + b3, dH3 = dH2 W3
  g.W3 = pr.H2.transpose() * gH3 + t.dH2.transpose() * g_dH3;
  g.b3 = gH3.colwise().sum();
  const auto mask2 = detail::relu_mask(pr.A2);
  const Matrix<Scalar> gA2 = ((gH3 * w.W3.transpose()).array() * mask2).matrix();
  const Matrix<Scalar> g_dA2 = ((g_dH3 * w.W3.transpose()).array() * mask2).matrix();
  // A2 = H1 W2 + b2, dA2 = dH1 W2
  g.W2 = pr.H1.transpose() * gA2 + t.dH1.transpose() * g_dA2;
  g.b2 = gA2.colwise().sum();
  const auto mask1 = detail::relu_mask(pr.A1);
  const Matrix<Scalar> gA1 = ((gA2 * w.W2.transpose()).array() * mask1).matrix();
  const Matrix<Scalar> g_dA1 = ((g_dA2 * w.W2.transpose()).array() * mask1).matrix();
  // A1 = X W1 + b1, dA1 = D W1
  g.W1 = X.transpose() * gA1 + D.transpose() * g_dA1;
  g.b1 = gA1.colwise().sum();
  return g;
}

template <typename Scalar>
struct AdamState {
  MlpParams<Scalar> m, v;
  std::int64_t step = 0;
  Scalar learning_rate = Scalar(0.001);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  AdamState() = default;
  explicit AdamState(const Mlp<Scalar>& model)
      : m(MlpParams<Scalar>::zeros_like(model.params())), v(MlpParams<Scalar>::zeros_like(model.params())) {}
};

/// Bias-corrected Adam update in place.
template <typename Scalar>
void adam_step(Mlp<Scalar>& model, AdamState<Scalar>& state, const MlpParams<Scalar>& grad) {
  ++state.step;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step));
  MlpParams<Scalar>::for_each_tensor(
      [&](auto& theta, auto& m, auto& v, const auto& g) {
        if (g.rows() != theta.rows() || g.cols() != theta.cols()) {
          throw std::invalid_argument("adam_step: gradient shape mismatch");
        }
        m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
        v = state.beta2 * v + (Scalar(1) - state.beta2) * g.cwiseProduct(g);
        theta.array() -= state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
      },
      model.params(), state.m, state.v, grad);
}

/// Text checkpoint: a shape header followed by every tensor with 17
/// significant digits, column-major. Round-trips bit-exactly.
void write_checkpoint(std::ostream& out, const MlpModel& model);
MlpModel read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace mcmix::nn
