#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "mcmix/postprocess.hpp"

using namespace mcmix;
using namespace mcmix::testing;

namespace {

GroupCollection single(const GroupSpec& g) {
  GroupCollection C;
  C.groups = {g};
  return C;
}

GroupCollection demographic_collection(int races) {
  GroupCollection C;
  C.groups.push_back(make_group({{"dis", 1}}));
  for (int r = 0; r < races; ++r) {
    C.groups.push_back(make_group({{"race", double(r)}}));
    C.groups.push_back(make_group({{"race", double(r)}, {"dis", 1}}));
  }
  return C;
}

Predictions random_predictions(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::init);
  Predictions p(static_cast<Eigen::Index>(n));
  for (auto& v : p) v = uniform01(rng);
  return p;
}

}  // namespace

TEST(EnforceMc, SingleStepHandTrace) {
  const auto ds = demographic({0, 0}, {0, 0}, {0, 0});
  Predictions p(2);
  p << 0.9, 0.9;
  EnforceOptions opt;
  opt.d = 1;
  const auto r = enforce_mc(ds, IndexList{0, 1}, p, single(make_group({})), ds.outcomes(), opt);
  ASSERT_EQ(r.circuit.rules.size(), 1u);
  EXPECT_EQ(r.circuit.rules[0].interval, 0);
  EXPECT_NEAR(r.circuit.rules[0].delta, -0.9, 1e-15);
  EXPECT_EQ(r.predictions(0), 0.0);
  EXPECT_EQ(r.predictions(1), 0.0);
}

TEST(EnforceMa, SingleStepHandTrace) {
  const auto ds = demographic({0, 0}, {0, 0}, {1, 1});
  Predictions p(2);
  p << 0.2, 0.2;
  const auto r = enforce_ma(ds, IndexList{0, 1}, p, single(make_group({})), ds.outcomes(), {});
  ASSERT_EQ(r.circuit.rules.size(), 1u);
  EXPECT_FALSE(r.circuit.rules[0].interval.has_value());
  EXPECT_NEAR(r.circuit.rules[0].delta, 0.8, 1e-15);
  EXPECT_EQ(r.predictions(0), 1.0);
  EXPECT_EQ(r.predictions(1), 1.0);
}

TEST(EnforceMc, CalibratedInputIsFixpoint) {
  const auto ds = demographic({0, 1, 0, 1}, {0, 0, 1, 1}, {0, 1, 1, 0}, 2);
  const Predictions p = ds.outcomes();
  const auto r = enforce_mc(ds, iota_rows(4), p, demographic_collection(2), ds.outcomes(), {});
  EXPECT_TRUE(r.circuit.rules.empty());
  EXPECT_EQ(r.predictions, p);
  EXPECT_GE(r.draws, 5u);
}

TEST(EnforceMc, CertificateAndMaImplication) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ds = random_demographic(2000, seed);
    const auto s = split(ds, {0.6, 0.2, 0.2, 0.25, seed});
    const auto p = random_predictions(ds.rows(), seed);
    const auto C = demographic_collection(4);
    EnforceOptions opt;
    opt.seed = seed;
    const auto r = enforce_mc(ds, s.postproc, p, C, ds.outcomes(), opt);
    EXPECT_LE(mc_alpha(r.predictions, ds.outcomes(), ds, s.postproc, C, 10).alpha, 0.01);
    EXPECT_LE(ma_alpha(r.predictions, ds.outcomes(), ds, s.postproc, C).alpha, 0.01);
    EXPECT_GE(r.predictions.minCoeff(), 0.0);
    EXPECT_LE(r.predictions.maxCoeff(), 1.0);
    // Rows outside the post-processing split are untouched.
    for (auto i : s.test) EXPECT_EQ(r.predictions(static_cast<Eigen::Index>(i)), p(static_cast<Eigen::Index>(i)));
  }
}

TEST(EnforceMa, Certificate) {
  const auto ds = random_demographic(2000, 3);
  const auto p = random_predictions(ds.rows(), 3);
  const auto C = demographic_collection(4);
  const auto idx = iota_rows(ds.rows());
  const auto r = enforce_ma(ds, idx, p, C, ds.outcomes(), {});
  EXPECT_LE(ma_alpha(r.predictions, ds.outcomes(), ds, idx, C).alpha, 0.01);
}

TEST(Enforce, DeterministicPerSeed) {
  const auto ds = random_demographic(1500, 6);
  const auto p = random_predictions(ds.rows(), 6);
  const auto C = demographic_collection(4);
  const auto idx = iota_rows(ds.rows());
  EnforceOptions a, b;
  a.seed = b.seed = 17;
  const auto x = enforce_mc(ds, idx, p, C, ds.outcomes(), a);
  const auto y = enforce_mc(ds, idx, p, C, ds.outcomes(), b);
  EXPECT_EQ(x.circuit, y.circuit);
  EXPECT_EQ(x.predictions, y.predictions);
}

TEST(Enforce, BudgetExceededIsReported) {
  const auto ds = random_demographic(1500, 7);
  const auto p = random_predictions(ds.rows(), 7);
  EnforceOptions opt;
  opt.max_draws = 3;
  EXPECT_THROW(enforce_mc(ds, iota_rows(ds.rows()), p, demographic_collection(4), ds.outcomes(), opt),
               EnforcementBudgetExceeded);
}

TEST(Enforce, RejectsBadOptions) {
  const auto ds = random_demographic(10, 1);
  const auto p = random_predictions(10, 1);
  EnforceOptions opt;
  opt.alpha = 0.0;
  EXPECT_THROW(enforce_mc(ds, iota_rows(10), p, demographic_collection(1), ds.outcomes(), opt), std::invalid_argument);
}

TEST(Replay, ReproducesEnforcementBitExactly) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = random_demographic(1200, seed + 100);
    const auto p = random_predictions(ds.rows(), seed);
    const auto C = demographic_collection(4);
    const auto idx = iota_rows(ds.rows());
    EnforceOptions opt;
    opt.seed = seed;
    const auto mc = enforce_mc(ds, idx, p, C, ds.outcomes(), opt);
    EXPECT_EQ(apply_circuit(ds, idx, p, mc.circuit), mc.predictions);
    const auto ma = enforce_ma(ds, idx, p, C, ds.outcomes(), opt);
    EXPECT_EQ(apply_circuit(ds, idx, p, ma.circuit), ma.predictions);
  }
}

TEST(Replay, EmptyCircuitIsIdentityAndVacuousRuleIsNoop) {
  const auto ds = random_demographic(50, 2);
  const auto p = random_predictions(50, 2);
  RuleCircuit c;
  EXPECT_EQ(apply_circuit(ds, iota_rows(50), p, c), p);
  Predictions low = Predictions::Constant(50, 0.05);
  c.rules.push_back({make_group({}), 9, 0.5});
  EXPECT_EQ(apply_circuit(ds, iota_rows(50), low, c), low);
}

TEST(Replay, IntervalMembershipUsesUpdatedValues) {
  // The first rule moves 0.15 into interval 2; the second then applies to it.
  const auto ds = demographic({0}, {0}, {0});
  Predictions p(1);
  p << 0.15;
  RuleCircuit c;
  c.rules = {{make_group({}), 1, 0.1}, {make_group({}), 2, 0.3}};
  EXPECT_NEAR(apply_circuit(ds, IndexList{0}, p, c)(0), 0.55, 1e-15);
}

TEST(CircuitText, RoundTripsBitExactly) {
  const auto ds = random_demographic(800, 8);
  const auto p = random_predictions(ds.rows(), 8);
  const auto r = enforce_mc(ds, iota_rows(ds.rows()), p, demographic_collection(4), ds.outcomes(), {});
  std::stringstream text;
  write_circuit(text, r.circuit);
  EXPECT_EQ(read_circuit(text), r.circuit);
}

TEST(CircuitText, RejectsMalformedInput) {
  std::stringstream no_header("dis=1: dis=1 | 3 | 0.1\n");
  EXPECT_THROW(read_circuit(no_header), DataError);
  std::stringstream bad_interval("MC d=10 alpha=0.01\ndis=1: dis=1 | 11 | 0.1\n");
  EXPECT_THROW(read_circuit(bad_interval), DataError);
  std::stringstream ma_with_interval("MA alpha=0.01\ndis=1: dis=1 | 3 | 0.1\n");
  EXPECT_THROW(read_circuit(ma_with_interval), DataError);
  std::stringstream big_delta("MA alpha=0.01\ndis=1: dis=1 | - | 1.5\n");
  EXPECT_THROW(read_circuit(big_delta), DataError);
}
