#include <gtest/gtest.h>

#include <sstream>

#include "mcmix/eval.hpp"
#include "mcmix/rng.hpp"

using namespace mcmix;

namespace {

// Direct count over the confusion matrix.
double oracle(const Eigen::VectorXd& p, const Eigen::VectorXd& y, double threshold) {
  double tp = 0, fn = 0, tn = 0, fp = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const bool pred = p(i) >= threshold;
    if (y(i) == 1.0) {
      (pred ? tp : fn) += 1;
    } else {
      (pred ? fp : tn) += 1;
    }
  }
  return 0.5 * (tp / (tp + fn) + tn / (tn + fp));
}

}  // namespace

TEST(BalancedAccuracy, HandExample) {
  Eigen::VectorXd p(6), y(6);
  p << 0.9, 0.2, 0.5, 0.1, 0.7, 0.49;
  y << 1, 1, 1, 0, 0, 0;
  // TPR = 2/3 (0.5 counts as positive), TNR = 2/3.
  EXPECT_DOUBLE_EQ(balanced_accuracy(p, y), 2.0 / 3.0);
}

TEST(BalancedAccuracy, ConstantPredictorIsHalf) {
  Eigen::VectorXd y(5);
  y << 1, 0, 0, 1, 0;
  EXPECT_DOUBLE_EQ(balanced_accuracy(Eigen::VectorXd::Ones(5), y), 0.5);
  EXPECT_DOUBLE_EQ(balanced_accuracy(Eigen::VectorXd::Zero(5), y), 0.5);
  EXPECT_DOUBLE_EQ(balanced_accuracy(y, y), 1.0);
}

TEST(BalancedAccuracy, MatchesOracle) {
  auto rng = make_rng(3, Stream::synth);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(uniform_index(rng, 100));
    Eigen::VectorXd p(n), y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = uniform01(rng);
      y(i) = i < 2 ? static_cast<double>(i) : (uniform01(rng) < 0.3 ? 1.0 : 0.0);
    }
    const double th = uniform01(rng);
    EXPECT_NEAR(balanced_accuracy(p, y, th), oracle(p, y, th), 1e-15);
  }
}

TEST(BalancedAccuracy, RestrictedToRows) {
  Eigen::VectorXd p(5), y(5);
  p << 0.9, 0.0, 0.1, 0.8, 0.9;
  y << 1, 1, 0, 1, 0;
  const std::vector<std::size_t> idx{0, 2};
  EXPECT_DOUBLE_EQ(balanced_accuracy(p, y, idx), 1.0);
}

TEST(BalancedAccuracy, RejectsBadInput) {
  EXPECT_THROW(balanced_accuracy(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(3)), std::invalid_argument);
  EXPECT_THROW(balanced_accuracy(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(2)), std::invalid_argument);
  Eigen::VectorXd y(2);
  y << 0.5, 1.0;
  EXPECT_THROW(balanced_accuracy(Eigen::VectorXd::Ones(2), y), std::invalid_argument);
}

TEST(Summarize, PercentChanges) {
  const MethodScore base{"Base", 80.0, 0.5};
  const auto better = summarize(base, {"M", 84.0, 0.4});
  EXPECT_NEAR(better.combined, (5.0 + 20.0) / 2, 1e-12);
  EXPECT_EQ(better.method, "M");
  const auto worse = summarize({"Base", 70.0, 0.3}, {"N", 69.3, 0.33});
  EXPECT_NEAR(worse.combined, (-1.0 - 10.0) / 2, 1e-12);
  EXPECT_EQ(summarize(base, base).combined, 0.0);
}

TEST(Summarize, RejectsDegenerateBase) {
  EXPECT_THROW(summarize({"Base", 80.0, 0.0}, {"M", 80.0, 0.1}), std::invalid_argument);
  EXPECT_THROW(summarize({"Base", 0.0, 0.3}, {"M", 80.0, 0.1}), std::invalid_argument);
}

TEST(Summary, TsvLayout) {
  const std::vector<SummaryRow> rows{{"Base", 70.5, 0.25, 0.0}, {"FM_MC", 70.0, 0.2, 9.6}};
  std::ostringstream tsv;
  write_summary_tsv(tsv, rows);
  std::istringstream in(tsv.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method\tbalanced_accuracy\tworst_mc_alpha\tcombined");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 5), "Base\t");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 6), "FM_MC\t");
  EXPECT_FALSE(std::getline(in, line));

  std::ostringstream text;
  write_summary_text(text, rows);
  EXPECT_NE(text.str().find("FM_MC"), std::string::npos);
  EXPECT_NE(text.str().find("9.60"), std::string::npos);
}
