#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gradcheck.hpp"
#include "mcmix/nn.hpp"

using namespace mcmix;
using namespace mcmix::testing;

TEST(Forward, ZeroWeightsGiveHalf) {
  const nn::MlpModel m(Params::zeros(3, 4));
  const Eigen::VectorXd p = nn::forward(m, Eigen::MatrixXd(Eigen::MatrixXd::Random(5, 3)));
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_EQ(p(i), 0.5);
}

TEST(Forward, RowsAreIndependent) {
  auto rng = make_rng(1, Stream::synth);
  const auto m = random_model(4, 6, 1);
  const auto X = random_matrix(7, 4, rng);
  const Eigen::VectorXd all = nn::forward(m, X);
  for (Eigen::Index i = 0; i < 7; ++i) {
    const Eigen::VectorXd one = nn::forward(m, Eigen::MatrixXd(X.row(i)));
    EXPECT_EQ(one(0), all(i));
  }
}

TEST(Forward, HandBuiltTwoNeuronInstance) {
  auto p = Params::zeros(1, 2);
  p.W1 << 1.0, -1.0;
  p.b1 << 0.0, 0.5;
  p.W2 << 2.0, 0.0, 0.0, 1.0;
  p.W3 << 1.0, 0.0, 0.0, 1.0;
  p.b3 << 0.1, -0.2;
  p.W4 << 0.5, -1.0;
  p.b4 << 0.3;
  const nn::MlpModel m(p);
  Eigen::MatrixXd X(2, 1);
  X << 0.25, -2.0;
  const Eigen::VectorXd out = nn::forward(m, X);
  auto oracle = [](double x) {
    const double h1a = std::max(0.0, x), h1b = std::max(0.0, -x + 0.5);
    const double h2a = std::max(0.0, 2 * h1a), h2b = std::max(0.0, h1b);
    const double z = 0.5 * (h2a + 0.1) - (h2b - 0.2) + 0.3;
    return 1.0 / (1.0 + std::exp(-z));
  };
  EXPECT_NEAR(out(0), oracle(0.25), 1e-15);
  EXPECT_NEAR(out(1), oracle(-2.0), 1e-15);
}

TEST(Bce, LnTwoAtHalf) {
  EXPECT_NEAR(nn::bce_loss(Eigen::VectorXd(Eigen::VectorXd::Constant(3, 0.5)), Eigen::VectorXd(Eigen::VectorXd::Constant(3, 0.5))), std::log(2.0), 1e-15);
}

TEST(Bce, ClampKeepsLossFinite) {
  Eigen::VectorXd p(2), y(2);
  p << 0.0, 1.0;
  y << 1.0, 0.0;
  const double loss = nn::bce_loss(p, y);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, -std::log(1e-7), 1e-6);
}

TEST(Bce, MatchesScalarLoop) {
  auto rng = make_rng(4, Stream::synth);
  Eigen::VectorXd p(50), y(50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    p(i) = uniform01(rng);
    y(i) = uniform01(rng) < 0.5 ? 0.0 : 1.0;
  }
  double oracle = 0.0;
  for (Eigen::Index i = 0; i < 50; ++i) oracle += -(y(i) * std::log(p(i)) + (1 - y(i)) * std::log(1 - p(i)));
  EXPECT_NEAR(nn::bce_loss(p, y), oracle / 50, 1e-12);
}

TEST(Backward, MatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20 && seed < 100; ++seed) {
    auto rng = make_rng(seed, Stream::synth);
    const auto m = random_model(3, 5, seed);
    const auto X = random_matrix(6, 3, rng);
    Eigen::VectorXd y(6);
    for (auto& v : y) v = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    if (kink_margin(m, X) < 1e-3 || !away_from_clamp(m, X)) continue;
    const auto g = nn::backward(m, X, y);
    const auto fd = numeric_gradient(m, [&](const nn::MlpModel& mm) { return nn::bce_loss(nn::forward(mm, X), y); });
    EXPECT_LE(relative_error(flatten(g.grad), fd), 1e-4) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(Backward, StationaryAtHalfTargets) {
  const nn::MlpModel m(Params::zeros(3, 4));
  const auto g = nn::backward(m, Eigen::MatrixXd(Eigen::MatrixXd::Random(5, 3)), Eigen::VectorXd(Eigen::VectorXd::Constant(5, 0.5)));
  EXPECT_LE(flatten(g.grad).norm(), 1e-10);
}

TEST(Backward, MeanIsAverageOfSingleRowGradients) {
  auto rng = make_rng(9, Stream::synth);
  const auto m = random_model(3, 4, 9);
  const auto X = random_matrix(4, 3, rng);
  Eigen::VectorXd y(4);
  y << 1, 0, 1, 1;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.params().size());
  for (Eigen::Index i = 0; i < 4; ++i) {
    sum += flatten(nn::backward(m, Eigen::MatrixXd(X.row(i)), Eigen::VectorXd(Eigen::VectorXd::Constant(1, y(i)))).grad);
  }
  EXPECT_LE((flatten(nn::backward(m, X, y).grad) - sum / 4).norm(), 1e-12);
}

TEST(Jvp, ZeroDirectionAndLinearity) {
  auto rng = make_rng(2, Stream::synth);
  const auto m = random_model(4, 6, 2);
  const auto X = random_matrix(5, 4, rng);
  const auto D1 = random_matrix(5, 4, rng), D2 = random_matrix(5, 4, rng);
  EXPECT_EQ(nn::input_jvp(m, X, Eigen::MatrixXd(Eigen::MatrixXd::Zero(5, 4))).norm(), 0.0);
  const Eigen::VectorXd sum = nn::input_jvp(m, X, Eigen::MatrixXd(D1 + D2));
  const Eigen::VectorXd parts = nn::input_jvp(m, X, D1) + nn::input_jvp(m, X, D2);
  EXPECT_LE((sum - parts).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Jvp, MatchesFiniteDifferences) {
  const double h = 1e-5;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20 && seed < 100; ++seed) {
    auto rng = make_rng(seed, Stream::synth);
    const auto m = random_model(3, 5, seed);
    const auto X = random_matrix(6, 3, rng);
    const auto D = random_matrix(6, 3, rng);
    const Eigen::MatrixXd up = X + h * D;
    const Eigen::MatrixXd down = X - h * D;
    if (kink_margin(m, up) < 1e-4 || kink_margin(m, down) < 1e-4 || kink_margin(m, X) < 1e-3) continue;
    const Eigen::VectorXd fd = (nn::forward(m, up) - nn::forward(m, down)) / (2 * h);
    EXPECT_LE((nn::input_jvp(m, X, D) - fd).cwiseAbs().maxCoeff(), 1e-6) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(PenaltyBackward, MatchesFiniteDifferencesOfWeightedTangents) {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20 && seed < 100; ++seed) {
    auto rng = make_rng(seed, Stream::synth);
    const auto m = random_model(3, 4, seed);
    const auto X = random_matrix(5, 3, rng);
    const auto D = random_matrix(5, 3, rng);
    const auto w = random_matrix(5, 1, rng);
    if (kink_margin(m, X) < 1e-3) continue;
    const Eigen::VectorXd wv = w.col(0);
    const auto g = nn::penalty_backward(m, X, D, wv);
    const auto fd = numeric_gradient(m, [&](const nn::MlpModel& mm) { return wv.dot(nn::input_jvp(mm, X, D)); });
    EXPECT_LE(relative_error(flatten(g), fd), 1e-4) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(PenaltyBackward, ConstantHeadGivesZeroBiasGradient) {
  auto rng = make_rng(3, Stream::synth);
  auto m = random_model(3, 4, 3);
  m.params().W4.setZero();
  const auto X = random_matrix(5, 3, rng);
  const auto D = random_matrix(5, 3, rng);
  EXPECT_EQ(nn::input_jvp(m, X, D).norm(), 0.0);
  const auto g = nn::penalty_backward(m, X, D, Eigen::VectorXd(Eigen::VectorXd::Ones(5)));
  EXPECT_EQ(g.b4(0), 0.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto m = random_model(2, 3, 1);
  const auto before = m;
  nn::AdamState<double> s(m);
  nn::adam_step(m, s, Params::zeros_like(m.params()));
  EXPECT_EQ(m, before);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto m = nn::MlpModel(Params::zeros(1, 1));
  nn::AdamState<double> s(m);
  auto g = Params::zeros(1, 1);
  g.b4(0) = 0.3;
  nn::adam_step(m, s, g);
  // m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps).
  EXPECT_NEAR(m.params().b4(0), -0.001 * 0.3 / (0.3 + 1e-8), 1e-15);
}

TEST(Adam, ConvergesOnQuadratic) {
  auto m = nn::MlpModel(Params::zeros(1, 1));
  nn::AdamState<double> s(m);
  s.learning_rate = 0.05;
  const double target = 0.7;
  for (int i = 0; i < 500; ++i) {
    auto g = Params::zeros(1, 1);
    g.b4(0) = 2 * (m.params().b4(0) - target);
    nn::adam_step(m, s, g);
  }
  EXPECT_NEAR(m.params().b4(0), target, 1e-3);
}

TEST(Checkpoint, RoundTripsBitExactly) {
  const auto m = random_model(5, 7, 11);
  std::stringstream s;
  nn::write_checkpoint(s, m);
  EXPECT_EQ(nn::read_checkpoint(s), m);
}

TEST(Checkpoint, RejectsTruncatedInput) {
  const auto m = random_model(2, 3, 1);
  std::stringstream s;
  nn::write_checkpoint(s, m);
  auto text = s.str();
  text.resize(text.size() / 2);
  std::stringstream cut(text);
  EXPECT_ANY_THROW(nn::read_checkpoint(cut));
}

TEST(Init, DeterministicAndBounded) {
  const auto a = nn::MlpModel::initialized(10, 3, 20);
  EXPECT_EQ(a, nn::MlpModel::initialized(10, 3, 20));
  EXPECT_FALSE(a == nn::MlpModel::initialized(10, 4, 20));
  EXPECT_LE(a.params().W1.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(10.0));
  EXPECT_LE(a.params().W2.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(20.0));
}
