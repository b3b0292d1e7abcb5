#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "mcmix/audit.hpp"
#include "mcmix/mixup.hpp"

using namespace mcmix;
using namespace mcmix::testing;

TEST(SampleT, MomentsOfSymmetricBeta) {
  for (double eps : {0.5, 1.0, 4.0}) {
    auto rng = make_rng(1, Stream::mix);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t = sample_t(eps, rng);
      ASSERT_GE(t, 0.0);
      ASSERT_LE(t, 1.0);
      sum += t;
      sq += t * t;
    }
    const double mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 0.5, 0.005) << eps;
    EXPECT_NEAR(var, 1.0 / (4.0 * (2.0 * eps + 1.0)), 0.003) << eps;
  }
}

TEST(SampleT, UniformWhenEpsIsOne) {
  auto rng = make_rng(7, Stream::mix);
  std::vector<double> t(20000);
  for (auto& v : t) v = sample_t(1.0, rng);
  std::sort(t.begin(), t.end());
  double ks = 0.0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    ks = std::max({ks, std::abs((i + 1) / n - t[i]), std::abs(t[i] - i / n)});
  }
  // 1.63 / sqrt(n) is the 1% critical value.
  EXPECT_LT(ks, 1.63 / std::sqrt(n));
}

TEST(SampleT, RejectsNonPositiveEps) {
  auto rng = make_rng(0, Stream::mix);
  EXPECT_THROW(sample_t(0.0, rng), std::invalid_argument);
  EXPECT_THROW(sample_t(-1.0, rng), std::invalid_argument);
}

TEST(Interpolate, EndpointsAndMidpoint) {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  const Eigen::Vector2d ya(1, 0), yb(0, 0);
  EXPECT_EQ(interpolate(a, ya, b, yb, 1.0).x, a);
  EXPECT_EQ(interpolate(a, ya, b, yb, 0.0).x, b);
  EXPECT_EQ(interpolate(a, ya, b, yb, 0.0).y, yb);
  const auto mid = interpolate(a, ya, b, yb, 0.25);
  EXPECT_DOUBLE_EQ(mid.x(0, 0), 0.25 * 1 + 0.75 * 5);
  EXPECT_DOUBLE_EQ(mid.y(0), 0.25);
  EXPECT_THROW(interpolate(a, ya, Eigen::MatrixXd(3, 2), Eigen::VectorXd(3), 0.5), std::invalid_argument);
}

TEST(Sampling, WithoutReplacementIsDistinctSubset) {
  auto rng = make_rng(3, Stream::batch);
  const auto pool = iota_rows(50);
  const auto s = sample_without_replacement(pool, 30, rng);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 30u);
  EXPECT_THROW(sample_without_replacement(pool, 51, rng), std::invalid_argument);
  EXPECT_EQ(sample_without_replacement(pool, 50, rng).size(), 50u);
}

TEST(Sampling, WithoutReplacementIsUniform) {
  auto rng = make_rng(5, Stream::batch);
  const auto pool = iota_rows(10);
  std::vector<int> hits(10, 0);
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    for (auto v : sample_without_replacement(pool, 3, rng)) ++hits[v];
  }
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(trials), 0.3, 0.015);
}

TEST(DrawUniform, SizesAndSkip) {
  auto rng = make_rng(0, Stream::batch);
  const auto big = draw_uniform(iota_rows(1000), 500, rng);
  ASSERT_TRUE(big);
  EXPECT_EQ(big->left.size(), 250u);
  EXPECT_EQ(big->right.size(), 250u);
  IndexList all(big->left);
  all.insert(all.end(), big->right.begin(), big->right.end());
  EXPECT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), 500u);

  const auto odd = draw_uniform(iota_rows(61), 500, rng);
  ASSERT_TRUE(odd);
  EXPECT_EQ(odd->left.size(), 30u);
  EXPECT_FALSE(draw_uniform(iota_rows(1), 500, rng));
  EXPECT_FALSE(draw_uniform({}, 500, rng));
}

TEST(DrawBalanced, CapsAtSmallerPool) {
  auto rng = make_rng(0, Stream::batch);
  BatchStrategy s{BatchKind::balance_by_group, 500};
  IndexList left(30), right(900);
  std::iota(left.begin(), left.end(), 0);
  std::iota(right.begin(), right.end(), 100);
  const auto b = draw_balanced(left, right, s, rng);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->left.size(), 30u);
  EXPECT_EQ(b->right.size(), 30u);
  for (auto r : b->right) EXPECT_GE(r, 100u);

  const auto full = draw_balanced(iota_rows(400), right, s, rng);
  EXPECT_EQ(full->left.size(), 250u);
  EXPECT_EQ(full->right.size(), 250u);
}

TEST(DrawBalanced, EmptySideSkips) {
  auto rng = make_rng(0, Stream::batch);
  BatchStrategy s{BatchKind::balance_by_group, 500};
  EXPECT_FALSE(draw_balanced({}, iota_rows(5), s, rng));
  EXPECT_FALSE(draw_balanced(iota_rows(5), {}, s, rng));
  s.batch_size = 7;
  EXPECT_THROW(draw_balanced(iota_rows(5), iota_rows(5), s, rng), std::invalid_argument);
}

TEST(DrawBalanced, SmallGroupReplacement) {
  auto rng = make_rng(0, Stream::batch);
  BatchStrategy s{BatchKind::balance_by_group, 40};
  s.replacement = {true, 10.0};
  const IndexList left{1, 2, 3};
  const auto b = draw_balanced(left, iota_rows(100), s, rng);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->left.size(), 20u);
  EXPECT_EQ(b->right.size(), 20u);
  for (auto r : b->left) EXPECT_TRUE(r >= 1 && r <= 3);
  EXPECT_EQ(std::set<std::size_t>(b->right.begin(), b->right.end()).size(), 20u);

  // Above the threshold the ordinary cap applies.
  s.replacement.threshold = 2.0;
  EXPECT_EQ(draw_balanced(left, iota_rows(100), s, rng)->left.size(), 3u);
}

TEST(FocusPools, SplitsByMembershipLabelAndInterval) {
  const auto ds = demographic({0, 1, 1, 2, 1, 0}, {0, 1, 0, 1, 1, 0}, {1, 1, 0, 0, 1, 1});
  const auto g = make_group({{kRaceColumn, 1}});
  const auto rows = iota_rows(6);

  BatchStrategy s{BatchKind::balance_by_group, 4};
  auto [in, out] = focus_pools(s, {&g}, ds, rows, nullptr);
  EXPECT_EQ(in, (IndexList{1, 2, 4}));
  EXPECT_EQ(out, (IndexList{0, 3, 5}));

  s.kind = BatchKind::balance_by_group_and_label;
  std::tie(in, out) = focus_pools(s, {&g, 1}, ds, rows, nullptr);
  EXPECT_EQ(in, (IndexList{1, 4}));
  EXPECT_EQ(out, (IndexList{0, 5}));
  EXPECT_THROW(focus_pools(s, {&g}, ds, rows, nullptr), std::invalid_argument);

  s.kind = BatchKind::balance_by_group_and_interval;
  s.d = 10;
  Predictions p(6);
  p << 0.05, 0.95, 0.51, 0.55, 1.0, 0.59;
  std::tie(in, out) = focus_pools(s, {&g, std::nullopt, 5}, ds, rows, &p);
  EXPECT_EQ(in, (IndexList{2}));
  EXPECT_EQ(out, (IndexList{3, 5}));
  std::tie(in, out) = focus_pools(s, {&g, std::nullopt, 10}, ds, rows, &p);
  EXPECT_EQ(in, (IndexList{4}));
  EXPECT_TRUE(out.empty());
  EXPECT_THROW(focus_pools(s, {&g, std::nullopt, 5}, ds, rows, nullptr), std::invalid_argument);
}

TEST(SelectBatch, DeterministicPerSeed) {
  const auto ds = random_demographic(2000, 3);
  const auto g = make_group({{kRaceColumn, 2}});
  BatchStrategy s{BatchKind::balance_by_group, 100};
  const auto rows = iota_rows(2000);
  auto r1 = make_rng(9, Stream::batch), r2 = make_rng(9, Stream::batch);
  const auto a = select_batch(s, {&g}, ds, rows, nullptr, r1);
  const auto b = select_batch(s, {&g}, ds, rows, nullptr, r2);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->left, b->left);
  EXPECT_EQ(a->right, b->right);
  const auto mask = membership_mask(g, ds);
  for (auto r : a->left) EXPECT_TRUE(mask[r]);
  for (auto r : a->right) EXPECT_FALSE(mask[r]);
}
