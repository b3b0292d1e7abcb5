#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mcmix {

using IndexList = std::vector<std::size_t>;
using RawTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for malformed or out-of-domain input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnKind { binary, categorical, continuous };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::binary;
  int cardinality = 0;  // categorical only
  double min = 0.0;     // continuous only
  double max = 0.0;

  static ColumnSpec binary(std::string name);
  static ColumnSpec categorical(std::string name, int cardinality);
  static ColumnSpec continuous(std::string name, double min, double max);

  /// Number of encoded features this column expands to.
  int encoded_width() const { return kind == ColumnKind::categorical ? cardinality : 1; }
  bool admits(double cell) const;

  bool operator==(const ColumnSpec&) const = default;
};

class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<ColumnSpec> columns);

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns_[i]; }
  std::optional<std::size_t> index_of(const std::string& name) const;
  /// Like index_of but throws DataError for unknown names.
  std::size_t require(const std::string& name) const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<ColumnSpec> columns_;
};

/// Raw table plus binary outcomes. Immutable after construction; every cell is
/// validated against the schema.
class Dataset {
 public:
  Dataset(FeatureSchema schema, RawTable raw, Eigen::VectorXd outcomes);

  const FeatureSchema& schema() const { return schema_; }
  const RawTable& raw() const { return raw_; }
  const Eigen::VectorXd& outcomes() const { return outcomes_; }
  std::size_t rows() const { return static_cast<std::size_t>(raw_.rows()); }
  double cell(std::size_t row, std::size_t column) const {
    return raw_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(column));
  }

 private:
  FeatureSchema schema_;
  RawTable raw_;
  Eigen::VectorXd outcomes_;
};

inline constexpr const char* kOutcomeColumn = "__y";

FeatureSchema read_schema(std::istream& in);
FeatureSchema load_schema(const std::filesystem::path& path);
void write_schema(std::ostream& out, const FeatureSchema& schema);

Dataset read_csv(std::istream& in, const FeatureSchema& schema);
Dataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema);
void write_csv(std::ostream& out, const Dataset& ds);
void save_csv(const std::filesystem::path& path, const Dataset& ds);

/// Shortest-exact real formatting with 17 significant digits.
std::string format_real(double value);
double parse_real(const std::string& text);

struct SplitSpec {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  /// Fraction of the training pool carved out for post-processing.
  double postproc_frac = 0.0;
  std::uint64_t seed = 0;
};

struct Splits {
  IndexList train;     // training pool minus postproc
  IndexList postproc;
  IndexList val;
  IndexList test;

  /// train ∪ postproc, sorted.
  IndexList training_pool() const;
};

Splits split(const Dataset& ds, const SplitSpec& spec);

struct ColumnSlice {
  std::size_t offset = 0;
  std::size_t width = 0;
};

struct Standardization {
  std::size_t column = 0;
  double mean = 0.0;
  double stddev = 1.0;
};

struct EncodedMatrix {
  Eigen::MatrixXd data;
  std::vector<ColumnSlice> encoding_map;  // one per raw column
  std::vector<Standardization> standardization;

  std::size_t width() const { return static_cast<std::size_t>(data.cols()); }
  /// Gathers the given rows into a dense batch.
  Eigen::MatrixXd rows(const IndexList& idx) const;
  /// Encodes every row of ds with this fit's layout and statistics.
  Eigen::MatrixXd encode(const Dataset& ds) const;
};

/// One-hot categoricals, z-scored continuous columns (statistics from
/// train_idx only), binary pass-through.
EncodedMatrix fit_encoder(const Dataset& ds, const IndexList& train_idx);

struct SyntheticOptions {
  std::size_t rows = 10000;
  int race_codes = 8;
  std::uint64_t seed = 0;
  double disability_rate = 0.15;
  double race_exponent = 1.5;
};

inline constexpr const char* kRaceColumn = "race";
inline constexpr const char* kDisabilityColumn = "dis";

/// Census-like data: power-law race frequencies, a disability flag, three
/// continuous covariates, and outcomes from a logistic model with
/// group-dependent coefficients.
Dataset generate_synthetic(const SyntheticOptions& options);

}  // namespace mcmix
