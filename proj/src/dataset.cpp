#include "mcmix/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>

#include "mcmix/rng.hpp"

namespace mcmix {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  boost::split(fields, line, boost::is_any_of(","));
  for (auto& f : fields) boost::trim(f);
  return fields;
}

bool is_integral(double v) { return std::isfinite(v) && v == std::floor(v); }

std::string kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::continuous: return "continuous";
  }
  return "?";
}

std::string format_cell(const ColumnSpec& col, double v) {
  if (col.kind == ColumnKind::continuous) return format_real(v);
  return std::to_string(static_cast<long long>(v));
}

}  // namespace

ColumnSpec ColumnSpec::binary(std::string name) {
  return ColumnSpec{std::move(name), ColumnKind::binary, 0, 0.0, 0.0};
}

ColumnSpec ColumnSpec::categorical(std::string name, int cardinality) {
  return ColumnSpec{std::move(name), ColumnKind::categorical, cardinality, 0.0, 0.0};
}

ColumnSpec ColumnSpec::continuous(std::string name, double min, double max) {
  return ColumnSpec{std::move(name), ColumnKind::continuous, 0, min, max};
}

bool ColumnSpec::admits(double cell) const {
  switch (kind) {
    case ColumnKind::binary: return cell == 0.0 || cell == 1.0;
    case ColumnKind::categorical:
      return is_integral(cell) && cell >= 0.0 && cell < static_cast<double>(cardinality);
    case ColumnKind::continuous: return std::isfinite(cell) && cell >= min && cell <= max;
  }
  return false;
}

FeatureSchema::FeatureSchema(std::vector<ColumnSpec> columns) : columns_(std::move(columns)) {
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw DataError("schema: empty column name");
    if (c.name == kOutcomeColumn) throw DataError("schema: column name '__y' is reserved");
    if (!seen.insert(c.name).second) throw DataError("schema: duplicate column '" + c.name + "'");
    if (c.kind == ColumnKind::categorical && c.cardinality < 2) {
      throw DataError("schema: categorical column '" + c.name + "' needs cardinality >= 2");
    }
    if (c.kind == ColumnKind::continuous && !(c.min < c.max)) {
      throw DataError("schema: continuous column '" + c.name + "' needs min < max");
    }
  }
}

std::optional<std::size_t> FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::require(const std::string& name) const {
  if (auto i = index_of(name)) return *i;
  throw DataError("unknown column '" + name + "'");
}

Dataset::Dataset(FeatureSchema schema, RawTable raw, Eigen::VectorXd outcomes)
    : schema_(std::move(schema)), raw_(std::move(raw)), outcomes_(std::move(outcomes)) {
  if (static_cast<std::size_t>(raw_.cols()) != schema_.size()) {
    throw DataError("dataset: raw table has " + std::to_string(raw_.cols()) + " columns, schema has " +
                    std::to_string(schema_.size()));
  }
  if (outcomes_.size() != raw_.rows()) throw DataError("dataset: outcome count differs from row count");
  for (Eigen::Index r = 0; r < raw_.rows(); ++r) {
    for (Eigen::Index c = 0; c < raw_.cols(); ++c) {
      const auto& col = schema_[static_cast<std::size_t>(c)];
      if (!col.admits(raw_(r, c))) {
        throw DataError("dataset: row " + std::to_string(r) + ", column '" + col.name + "': value " +
                        format_real(raw_(r, c)) + " outside " + kind_name(col.kind) + " domain");
      }
    }
    if (outcomes_(r) != 0.0 && outcomes_(r) != 1.0) {
      throw DataError("dataset: row " + std::to_string(r) + ": outcome " + format_real(outcomes_(r)) +
                      " is not 0 or 1");
    }
  }
}

std::string format_real(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || first == last) {
    throw DataError("cannot parse number '" + text + "'");
  }
  return v;
}

FeatureSchema read_schema(std::istream& in) {
  std::vector<ColumnSpec> columns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    boost::trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto f = split_fields(line);
    const auto where = "schema line " + std::to_string(lineno) + ": ";
    if (f.size() >= 2 && f[0] == "name" && f[1] == "kind") continue;  // optional header
    if (f.size() < 2) throw DataError(where + "expected name,kind,params");
    try {
      if (f[1] == "binary" && f.size() <= 3) {
        columns.push_back(ColumnSpec::binary(f[0]));
      } else if (f[1] == "categorical" && f.size() == 3) {
        const double card = parse_real(f[2]);
        if (!is_integral(card)) throw DataError("cardinality must be an integer");
        columns.push_back(ColumnSpec::categorical(f[0], static_cast<int>(card)));
      } else if (f[1] == "continuous" && f.size() == 4) {
        columns.push_back(ColumnSpec::continuous(f[0], parse_real(f[2]), parse_real(f[3])));
      } else {
        throw DataError("bad kind or parameter count for '" + f[1] + "'");
      }
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return FeatureSchema(std::move(columns));
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  return read_schema(in);
}

void write_schema(std::ostream& out, const FeatureSchema& schema) {
  for (const auto& c : schema.columns()) {
    out << c.name << ',' << kind_name(c.kind);
    if (c.kind == ColumnKind::categorical) out << ',' << c.cardinality;
    if (c.kind == ColumnKind::continuous) out << ',' << format_real(c.min) << ',' << format_real(c.max);
    out << '\n';
  }
}

Dataset read_csv(std::istream& in, const FeatureSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_fields(line);
  if (header.size() != schema.size() + 1 || header.back() != kOutcomeColumn) {
    throw DataError("csv: header must list the schema columns followed by '__y'");
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (header[c] != schema[c].name) {
      throw DataError("csv: header column " + std::to_string(c + 1) + " is '" + header[c] + "', expected '" +
                      schema[c].name + "'");
    }
  }

  std::vector<double> cells;
  std::vector<double> ys;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_fields(line);
    const auto where = "csv line " + std::to_string(lineno);
    if (f.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(f.size()));
    }
    for (std::size_t c = 0; c < schema.size(); ++c) {
      double v = 0.0;
      try {
        v = parse_real(f[c]);
      } catch (const DataError&) {
        throw DataError(where + ", column '" + schema[c].name + "': cannot parse '" + f[c] + "'");
      }
      if (!schema[c].admits(v)) {
        throw DataError(where + ", column '" + schema[c].name + "': value " + f[c] + " outside " +
                        kind_name(schema[c].kind) + " domain");
      }
      cells.push_back(v);
    }
    double y = -1.0;
    try {
      y = parse_real(f.back());
    } catch (const DataError&) {
    }
    if (y != 0.0 && y != 1.0) throw DataError(where + ": outcome '" + f.back() + "' is not 0 or 1");
    ys.push_back(y);
  }

  const auto n = static_cast<Eigen::Index>(ys.size());
  RawTable raw = Eigen::Map<RawTable>(cells.data(), n, static_cast<Eigen::Index>(schema.size()));
  Eigen::VectorXd outcomes = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  return Dataset(schema, std::move(raw), std::move(outcomes));
}

Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  const auto& schema = ds.schema();
  for (const auto& c : schema.columns()) out << c.name << ',';
  out << kOutcomeColumn << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) out << format_cell(schema[c], ds.cell(r, c)) << ',';
    out << static_cast<int>(ds.outcomes()(static_cast<Eigen::Index>(r))) << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(out, ds);
}

IndexList Splits::training_pool() const {
  IndexList pool(train);
  pool.insert(pool.end(), postproc.begin(), postproc.end());
  std::sort(pool.begin(), pool.end());
  return pool;
}

Splits split(const Dataset& ds, const SplitSpec& spec) {
  const double fracs[] = {spec.train_frac, spec.val_frac, spec.test_frac};
  for (double f : fracs) {
    if (!(f >= 0.0)) throw DataError("split: fractions must be nonnegative");
  }
  if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9) {
    throw DataError("split: fractions must sum to 1");
  }
  if (!(spec.postproc_frac >= 0.0 && spec.postproc_frac < 1.0)) {
    throw DataError("split: post-processing fraction must lie in [0, 1)");
  }

  const auto n = static_cast<long long>(ds.rows());
  long long n_train = std::llround(spec.train_frac * static_cast<double>(n));
  long long n_val = std::min(std::llround(spec.val_frac * static_cast<double>(n)), n - n_train);
  long long n_test = n - n_train - n_val;
  if (spec.test_frac == 0.0) {
    n_val += n_test;
    n_test = 0;
  }
  const auto n_post = static_cast<long long>(std::ceil(spec.postproc_frac * static_cast<double>(n_train) - 1e-9));

  auto require_nonempty = [](double frac, long long count, const char* name) {
    if (frac > 0.0 && count <= 0) {
      throw DataError(std::string("split: ") + name + " split is empty; too few rows");
    }
  };
  require_nonempty(spec.train_frac, n_train - n_post, "train");
  require_nonempty(spec.postproc_frac, n_post, "post-processing");
  require_nonempty(spec.val_frac, n_val, "validation");
  require_nonempty(spec.test_frac, n_test, "test");

  IndexList perm(ds.rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(spec.seed, Stream::split);
  std::shuffle(perm.begin(), perm.end(), rng);

  Splits out;
  auto take = [&](long long from, long long to) {
    return IndexList(perm.begin() + from, perm.begin() + to);
  };
  out.postproc = take(0, n_post);
  out.train = take(n_post, n_train);
  out.val = take(n_train, n_train + n_val);
  out.test = take(n_train + n_val, n);
  for (auto* list : {&out.train, &out.postproc, &out.val, &out.test}) std::sort(list->begin(), list->end());
  return out;
}

Eigen::MatrixXd EncodedMatrix::rows(const IndexList& idx) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), data.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

Eigen::MatrixXd EncodedMatrix::encode(const Dataset& ds) const {
  const auto& schema = ds.schema();
  if (schema.size() != encoding_map.size()) throw DataError("encode: schema has a different column count");
  std::size_t width = 0;
  for (const auto& slice : encoding_map) width = std::max(width, slice.offset + slice.width);
  const auto n = static_cast<Eigen::Index>(ds.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(width));
  auto stats = standardization.begin();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema[c];
    if (static_cast<std::size_t>(col.encoded_width()) != encoding_map[c].width) {
      throw DataError("encode: column '" + col.name + "' has a different encoded width");
    }
    const auto offset = static_cast<Eigen::Index>(encoding_map[c].offset);
    const auto src = ds.raw().col(static_cast<Eigen::Index>(c));
    switch (col.kind) {
      case ColumnKind::binary:
        out.col(offset) = src;
        break;
      case ColumnKind::categorical:
        for (Eigen::Index r = 0; r < n; ++r) out(r, offset + static_cast<Eigen::Index>(src(r))) = 1.0;
        break;
      case ColumnKind::continuous:
        if (stats == standardization.end() || stats->column != c) {
          throw DataError("encode: missing standardization for column '" + col.name + "'");
        }
        out.col(offset) = (src.array() - stats->mean) / stats->stddev;
        ++stats;
        break;
    }
  }
  return out;
}

EncodedMatrix fit_encoder(const Dataset& ds, const IndexList& train_idx) {
  if (train_idx.empty()) throw DataError("fit_encoder: empty training index list");
  const auto& schema = ds.schema();
  EncodedMatrix enc;
  std::size_t width = 0;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto& col = schema[c];
    enc.encoding_map.push_back({width, static_cast<std::size_t>(col.encoded_width())});
    width += static_cast<std::size_t>(col.encoded_width());
    if (col.kind != ColumnKind::continuous) continue;
    const auto src = ds.raw().col(static_cast<Eigen::Index>(c));
    double mean = 0.0;
    for (auto i : train_idx) mean += src(static_cast<Eigen::Index>(i));
    mean /= static_cast<double>(train_idx.size());
    double var = 0.0;
    for (auto i : train_idx) {
      const double dev = src(static_cast<Eigen::Index>(i)) - mean;
      var += dev * dev;
    }
    double sd = std::sqrt(var / static_cast<double>(train_idx.size()));
    if (sd == 0.0) sd = 1.0;
    enc.standardization.push_back({c, mean, sd});
  }
  enc.data = enc.encode(ds);
  return enc;
}

Dataset generate_synthetic(const SyntheticOptions& opt) {
  if (opt.race_codes < 2) throw DataError("generate_synthetic: need at least 2 race codes");
  const auto n = opt.rows;
  const int n_races = opt.race_codes;
  Rng rng = make_rng(opt.seed, Stream::synth);

  // Exact power-law apportionment (largest remainder, ties to the lower code)
  // keeps race counts nonincreasing in the code.
  std::vector<double> weight(static_cast<std::size_t>(n_races));
  for (int r = 0; r < n_races; ++r) weight[static_cast<std::size_t>(r)] = std::pow(r + 1.0, -opt.race_exponent);
  const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
  std::vector<std::size_t> count(weight.size());
  std::vector<std::pair<double, int>> remainder;
  std::size_t assigned = 0;
  for (int r = 0; r < n_races; ++r) {
    const double quota = static_cast<double>(n) * weight[static_cast<std::size_t>(r)] / total;
    count[static_cast<std::size_t>(r)] = static_cast<std::size_t>(std::floor(quota));
    assigned += count[static_cast<std::size_t>(r)];
    remainder.emplace_back(quota - std::floor(quota), r);
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++count[static_cast<std::size_t>(remainder[i].second)];

  std::vector<int> races;
  races.reserve(n);
  for (int r = 0; r < n_races; ++r) races.insert(races.end(), count[static_cast<std::size_t>(r)], r);
  std::shuffle(races.begin(), races.end(), rng);

  // Group-dependent logistic coefficients; rarer races deviate more.
  std::vector<double> race_offset(weight.size()), race_slope(weight.size()), race_dis(weight.size());
  for (int r = 0; r < n_races; ++r) {
    const double rarity = static_cast<double>(r) / (n_races - 1);
    race_offset[static_cast<std::size_t>(r)] = r == 0 ? 0.0 : standard_normal(rng) * (0.3 + 0.9 * rarity);
    race_slope[static_cast<std::size_t>(r)] = standard_normal(rng) * (0.2 + 0.6 * rarity);
    race_dis[static_cast<std::size_t>(r)] = standard_normal(rng) * (0.3 + 0.9 * rarity);
  }

  FeatureSchema schema({
      ColumnSpec::categorical(kRaceColumn, n_races),
      ColumnSpec::binary(kDisabilityColumn),
      ColumnSpec::continuous("age", 17.0, 95.0),
      ColumnSpec::continuous("hours", 0.0, 99.0),
      ColumnSpec::continuous("schooling", 0.0, 24.0),
  });
  RawTable raw(static_cast<Eigen::Index>(n), 5);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const int race = races[i];
    const double dis = uniform01(rng) < opt.disability_rate ? 1.0 : 0.0;
    const double age = 17.0 + 78.0 * uniform01(rng);
    const double hours = std::clamp(38.0 + 12.0 * standard_normal(rng), 0.0, 99.0);
    const double schooling = std::clamp(13.0 + 3.0 * standard_normal(rng), 0.0, 24.0);

    const double a = (age - 56.0) / 22.0;
    const double h = (hours - 38.0) / 12.0;
    const double s = (schooling - 13.0) / 3.0;
    const auto rr = static_cast<std::size_t>(race);
    const double logit = 0.3 + 0.8 * h + 0.6 * s - 0.7 * a * a + race_offset[rr] + race_slope[rr] * s -
                         0.9 * dis + race_dis[rr] * dis;
    const double prob = 1.0 / (1.0 + std::exp(-logit));

    raw(row, 0) = race;
    raw(row, 1) = dis;
    raw(row, 2) = age;
    raw(row, 3) = hours;
    raw(row, 4) = schooling;
    y(row) = uniform01(rng) < prob ? 1.0 : 0.0;
  }
  return Dataset(std::move(schema), std::move(raw), std::move(y));
}

}  // namespace mcmix
