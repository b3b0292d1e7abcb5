#include "mcmix/nn.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "mcmix/dataset.hpp"

namespace mcmix::nn {

namespace {

constexpr const char* kMagic = "mcmix-mlp";
constexpr const char* kNames[] = {"W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4"};

}  // namespace

void write_checkpoint(std::ostream& out, const MlpModel& model) {
  out << kMagic << " 1\n";
  out << "input " << model.input_width() << " hidden " << model.hidden_width() << '\n';
  int k = 0;
  MlpParams<double>::for_each_tensor(
      [&](const auto& t) {
        out << kNames[k++] << ' ' << t.rows() << ' ' << t.cols() << '\n';
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
          for (Eigen::Index i = 0; i < t.rows(); ++i) out << format_real(t(i, j)) << '\n';
        }
      },
      model.params());
}

MlpModel read_checkpoint(std::istream& in) {
  std::string magic, word;
  int version = 0;
  Eigen::Index inputs = 0, hidden = 0;
  if (!(in >> magic >> version) || magic != kMagic || version != 1) throw DataError("checkpoint: bad magic");
  if (!(in >> word >> inputs) || word != "input" || !(in >> word >> hidden) || word != "hidden" || inputs < 1 ||
      hidden < 1) {
    throw DataError("checkpoint: bad shape header");
  }
  auto params = MlpParams<double>::zeros(inputs, hidden);
  int k = 0;
  MlpParams<double>::for_each_tensor(
      [&](auto& t) {
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        if (!(in >> name >> rows >> cols) || name != kNames[k] || rows != t.rows() || cols != t.cols()) {
          throw DataError(std::string("checkpoint: bad header for tensor ") + kNames[k]);
        }
        for (Eigen::Index j = 0; j < cols; ++j) {
          for (Eigen::Index i = 0; i < rows; ++i) {
            if (!(in >> word)) throw DataError(std::string("checkpoint: truncated tensor ") + kNames[k]);
            t(i, j) = parse_real(word);
          }
        }
        ++k;
      },
      params);
  return MlpModel(std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_checkpoint(out, model);
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace mcmix::nn
