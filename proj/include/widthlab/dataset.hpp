// Binary-classification datasets: a synthetic Gaussian-blob generator and a
// two-class reader for the CIFAR-10 binary batch format, plus deterministic
// minibatch iteration.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace widthlab {

// Raised when an input file does not match the expected binary layout.
struct DataFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a file parses fine but holds fewer usable samples than asked.
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Dataset {
  Eigen::MatrixXd inputs;  // n x d0, one sample per row
  Eigen::VectorXd labels;  // entries exactly 0.0 or 1.0
  int d0 = 0;
  std::string name;

  int n() const { return static_cast<int>(inputs.rows()); }

  // Enforces shape agreement, n >= 2, d0 >= 1, binary labels, finite inputs,
  // and that both classes are present. Throws std::invalid_argument.
  void validate() const;
};

// Two unit-variance Gaussian blobs in R^{d0} with means +-(separation/2) e_1,
// half the samples per class (class 0 first), then globally RMS-normalized so
// the average squared entry is 1. Deterministic in (n, d0, separation, seed).
Dataset gen_synthetic(int n, int d0, double separation, std::uint64_t seed);

// Reads CIFAR-10 binary batches (3073-byte records: label byte + 3072 pixel
// bytes), keeps only labels 0 and 1, maps pixels to [0, 1], and splits the
// surviving records into (train, test) of the requested sizes in file order.
// A requested size of 0 yields an empty, unvalidated split.
std::pair<Dataset, Dataset> load_cifar2(const std::string& path, int n_train, int n_test);

// Deterministic minibatch index schedule for one epoch: a seeded permutation
// (reshuffled per epoch) cut into batches of batch_size (last may be short).
// batch_size == n skips shuffling and yields one natural-order batch.
std::vector<std::vector<int>> batch_iter(const Dataset& ds, int batch_size, std::uint64_t seed, int epoch);

// Writes "label,f0,f1,..." rows (header included).
void write_dataset_csv(const Dataset& ds, std::ostream& out);

}  // namespace widthlab
