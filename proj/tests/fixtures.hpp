#pragma once

#include <numeric>
#include <vector>

#include "mcmix/dataset.hpp"
#include "mcmix/rng.hpp"

namespace mcmix::testing {

/// Dataset with columns race (categorical), dis (binary), x (continuous).
inline Dataset demographic(const std::vector<int>& race, const std::vector<int>& dis, const std::vector<double>& y,
                           int race_codes = 8) {
  FeatureSchema schema({ColumnSpec::categorical(kRaceColumn, race_codes), ColumnSpec::binary(kDisabilityColumn),
                        ColumnSpec::continuous("x", -100, 100)});
  const auto n = static_cast<Eigen::Index>(race.size());
  RawTable raw(n, 3);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    raw(i, 0) = race[k];
    raw(i, 1) = dis[k];
    raw(i, 2) = static_cast<double>(i % 17) - 8.0;
    out(i) = y[k];
  }
  return Dataset(schema, raw, out);
}

/// Random demographic dataset of n rows with nonuniform race frequencies.
inline Dataset random_demographic(std::size_t n, std::uint64_t seed, int race_codes = 4) {
  auto rng = make_rng(seed, Stream::synth);
  std::vector<int> race(n), dis(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    race[i] = std::min(race_codes - 1, static_cast<int>(u * u * race_codes));
    dis[i] = uniform01(rng) < 0.3 ? 1 : 0;
    y[i] = uniform01(rng) < 0.4 + 0.1 * race[i] / race_codes ? 1.0 : 0.0;
  }
  return demographic(race, dis, y, race_codes);
}

inline IndexList iota_rows(std::size_t n) {
  IndexList idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace mcmix::testing
