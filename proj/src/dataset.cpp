#include "widthlab/dataset.hpp"

#include "widthlab/rng.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace widthlab {

void Dataset::validate() const {
  if (inputs.rows() != labels.size()) throw std::invalid_argument("Dataset: inputs/labels row mismatch");
  if (inputs.cols() != d0) throw std::invalid_argument("Dataset: d0 does not match inputs");
  if (d0 < 1) throw std::invalid_argument("Dataset: d0 must be >= 1");
  if (n() < 2) throw std::invalid_argument("Dataset: need at least 2 samples");
  if (!inputs.allFinite()) throw std::invalid_argument("Dataset: non-finite feature");
  bool has_zero = false;
  bool has_one = false;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    double y = labels[i];
    if (y == 0.0) {
      has_zero = true;
    } else if (y == 1.0) {
      has_one = true;
    } else {
      throw std::invalid_argument("Dataset: labels must be exactly 0 or 1");
    }
  }
  if (!has_zero || !has_one) throw std::invalid_argument("Dataset: both classes must be present");
}

Dataset gen_synthetic(int n, int d0, double separation, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("gen_synthetic: n must be even and >= 2");
  if (d0 < 1) throw std::invalid_argument("gen_synthetic: d0 must be >= 1");
  if (separation < 0) throw std::invalid_argument("gen_synthetic: separation must be >= 0");

  Dataset ds;
  ds.d0 = d0;
  ds.name = "synthetic";
  ds.inputs.resize(n, d0);
  ds.labels.resize(n);

  Rng rng(mix_seed(seed, 0x5d5f));
  const int half = n / 2;
  for (int i = 0; i < n; ++i) {
    const double y = i < half ? 0.0 : 1.0;
    const double mean1 = (y - 0.5) * separation;
    for (int j = 0; j < d0; ++j) ds.inputs(i, j) = rng.normal() + (j == 0 ? mean1 : 0.0);
    ds.labels[i] = y;
  }

  const double mean_sq = ds.inputs.array().square().mean();
  if (mean_sq > 0) ds.inputs /= std::sqrt(mean_sq);

  ds.validate();
  return ds;
}

std::pair<Dataset, Dataset> load_cifar2(const std::string& path, int n_train, int n_test) {
  if (n_train < 0 || n_test < 0) throw std::invalid_argument("load_cifar2: negative split size");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("load_cifar2: cannot open '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t kRecord = 3073;  // 1 label byte + 32*32*3 pixel bytes
  if (bytes.size() % kRecord != 0) {
    throw DataFormatError("load_cifar2: file size " + std::to_string(bytes.size()) +
                          " is not a multiple of the 3073-byte record");
  }
  const std::size_t n_records = bytes.size() / kRecord;

  std::vector<std::size_t> keep;
  keep.reserve(n_records);
  for (std::size_t r = 0; r < n_records; ++r) {
    unsigned char label = static_cast<unsigned char>(bytes[r * kRecord]);
    if (label <= 1) keep.push_back(r);
  }
  const std::size_t wanted = static_cast<std::size_t>(n_train) + static_cast<std::size_t>(n_test);
  if (keep.size() < wanted) {
    throw InsufficientDataError("load_cifar2: only " + std::to_string(keep.size()) +
                                " class-0/1 records available, need " + std::to_string(wanted));
  }

  auto build = [&](std::size_t offset, int count, const std::string& tag) {
    Dataset ds;
    ds.d0 = 3072;
    ds.name = tag;
    ds.inputs.resize(count, 3072);
    ds.labels.resize(count);
    for (int i = 0; i < count; ++i) {
      const std::size_t r = keep[offset + static_cast<std::size_t>(i)];
      const char* rec = bytes.data() + r * kRecord;
      ds.labels[i] = static_cast<double>(static_cast<unsigned char>(rec[0]));
      for (int j = 0; j < 3072; ++j) {
        ds.inputs(i, j) = static_cast<double>(static_cast<unsigned char>(rec[1 + j])) / 255.0;
      }
    }
    if (count > 0) ds.validate();
    return ds;
  };

  Dataset train = build(0, n_train, "cifar2-train");
  Dataset test = build(static_cast<std::size_t>(n_train), n_test, "cifar2-test");
  return {std::move(train), std::move(test)};
}

std::vector<std::vector<int>> batch_iter(const Dataset& ds, int batch_size, std::uint64_t seed, int epoch) {
  const int n = ds.n();
  if (batch_size < 1 || batch_size > n) throw std::invalid_argument("batch_iter: batch_size out of range");

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  if (batch_size < n) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
  }

  std::vector<std::vector<int>> batches;
  batches.reserve(static_cast<std::size_t>((n + batch_size - 1) / batch_size));
  for (int start = 0; start < n; start += batch_size) {
    const int stop = std::min(start + batch_size, n);
    batches.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return batches;
}

void write_dataset_csv(const Dataset& ds, std::ostream& out) {
  out << "label";
  for (int j = 0; j < ds.d0; ++j) out << ",f" << j;
  out << "\n";
  char buf[40];
  for (int i = 0; i < ds.n(); ++i) {
    out << static_cast<int>(ds.labels[i]);
    for (int j = 0; j < ds.d0; ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", ds.inputs(i, j));
      out << ',' << buf;
    }
    out << "\n";
  }
}

}  // namespace widthlab
