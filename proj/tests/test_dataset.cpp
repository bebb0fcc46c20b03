#include "doctest.h"

#include "widthlab/dataset.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace widthlab;

namespace {

// A scratch directory for files created by this test binary.
std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "widthlab_dataset_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

// Writes CIFAR-10-binary-style 3073-byte records with the given labels; every
// pixel of record i is (base + i) mod 256.
std::filesystem::path write_cifar_file(const std::string& name, const std::vector<std::uint8_t>& labels,
                                       int base = 0) {
  const auto path = scratch_dir() / name;
  std::ofstream out(path, std::ios::binary);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.put(static_cast<char>(labels[i]));
    const char pixel = static_cast<char>((base + static_cast<int>(i)) % 256);
    for (int p = 0; p < 3072; ++p) out.put(pixel);
  }
  out.close();
  return path;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

TEST_CASE("synthetic datasets have balanced binary labels and the declared shape") {
  const Dataset ds = gen_synthetic(64, 7, 2.0, 123);
  CHECK(ds.n() == 64);
  CHECK(ds.d0 == 7);
  CHECK(ds.inputs.rows() == 64);
  CHECK(ds.inputs.cols() == 7);
  CHECK_NOTHROW(ds.validate());

  int ones = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const double y = ds.labels(i);
    CHECK((y == 0.0 || y == 1.0));
    ones += (y == 1.0);
  }
  CHECK(ones == 32);
}

TEST_CASE("synthetic generation is deterministic in its arguments") {
  const Dataset a = gen_synthetic(32, 5, 3.0, 9);
  const Dataset b = gen_synthetic(32, 5, 3.0, 9);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);

  const Dataset c = gen_synthetic(32, 5, 3.0, 10);
  CHECK(a.inputs != c.inputs);
}

TEST_CASE("synthetic inputs are RMS-normalized to unit mean-square entry") {
  const Dataset ds = gen_synthetic(256, 20, 3.0, 1);
  const double mean_sq = ds.inputs.squaredNorm() / static_cast<double>(ds.inputs.size());
  CHECK(mean_sq == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the two blobs separate along the first coordinate") {
  const Dataset ds = gen_synthetic(256, 20, 3.0, 1);
  // Class means along e_1 sit near -+ separation/2 before normalization, so a
  // sign threshold on feature 0 should classify most points correctly.
  int correct = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const bool predicted_one = ds.inputs(i, 0) > 0.0;
    correct += (predicted_one == (ds.labels(i) == 1.0));
  }
  CHECK(correct > ds.n() * 9 / 10);
}

TEST_CASE("synthetic generation rejects odd or tiny sample counts") {
  CHECK_THROWS_AS(gen_synthetic(31, 5, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(0, 5, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(gen_synthetic(2, 0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("dataset validation catches malformed label vectors") {
  Dataset ds = gen_synthetic(8, 3, 1.0, 0);
  ds.labels(0) = 0.5;
  CHECK_THROWS_AS(ds.validate(), std::invalid_argument);

  Dataset one_class = gen_synthetic(8, 3, 1.0, 0);
  one_class.labels.setZero();
  CHECK_THROWS_AS(one_class.validate(), std::invalid_argument);

  Dataset short_labels = gen_synthetic(8, 3, 1.0, 0);
  short_labels.labels.conservativeResize(4);
  CHECK_THROWS_AS(short_labels.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// CIFAR two-class reader
// ---------------------------------------------------------------------------

TEST_CASE("the binary reader keeps only the first two classes, in file order") {
  const auto path = write_cifar_file("three_records.bin", {0, 7, 1}, 10);
  auto [train, test] = load_cifar2(path.string(), 2, 0);
  CHECK(train.n() == 2);
  CHECK(train.d0 == 3072);
  CHECK(train.labels(0) == 0.0);
  CHECK(train.labels(1) == 1.0);
  // Record 0 has pixel value 10, record 2 (the second survivor) value 12.
  CHECK(train.inputs(0, 0) == doctest::Approx(10.0 / 255.0));
  CHECK(train.inputs(1, 0) == doctest::Approx(12.0 / 255.0));
  CHECK(test.n() == 0);
}

TEST_CASE("pixel value 255 maps to exactly 1.0") {
  // Records carry pixel values 255, 0, 1, 2 in file order.
  const auto path = write_cifar_file("bright.bin", {0, 1, 0, 1}, 255);
  auto [train, test] = load_cifar2(path.string(), 2, 2);
  CHECK(train.inputs(0, 0) == 1.0);
  CHECK(train.inputs.maxCoeff() == 1.0);
  CHECK(train.inputs(1, 0) == 0.0);
  CHECK(test.labels(1) == 1.0);
}

TEST_CASE("train/test splits are disjoint consecutive slices of the survivors") {
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 12; ++i) labels.push_back(static_cast<std::uint8_t>(i % 3));  // 0,1,2,0,1,2,...
  const auto path = write_cifar_file("twelve.bin", labels, 0);
  auto [train, test] = load_cifar2(path.string(), 4, 4);
  CHECK(train.n() == 4);
  CHECK(test.n() == 4);
  // Survivors alternate 0,1,0,1,... in file order; pixel values identify records.
  CHECK(train.labels(0) == 0.0);
  CHECK(train.labels(1) == 1.0);
  CHECK(test.labels(0) == 0.0);
  const std::vector<int> survivor_records = {0, 1, 3, 4, 6, 7, 9, 10};
  for (int i = 0; i < 4; ++i) {
    CHECK(train.inputs(i, 0) == doctest::Approx(survivor_records[i] / 255.0));
    CHECK(test.inputs(i, 0) == doctest::Approx(survivor_records[4 + i] / 255.0));
  }
}

TEST_CASE("the reader reports missing files and truncated records as format errors") {
  CHECK_THROWS_AS(load_cifar2((scratch_dir() / "nonexistent.bin").string(), 1, 1), DataFormatError);

  const auto path = scratch_dir() / "truncated.bin";
  {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < 5000; ++i) out.put(0);  // not a multiple of 3073
  }
  CHECK_THROWS_AS(load_cifar2(path.string(), 1, 1), DataFormatError);
}

TEST_CASE("asking for more samples than survive raises the insufficiency error") {
  const auto path = write_cifar_file("small.bin", {0, 1, 2, 9});
  CHECK_THROWS_AS(load_cifar2(path.string(), 2, 1), InsufficientDataError);
  CHECK_NOTHROW(load_cifar2(path.string(), 2, 0));
}

// ---------------------------------------------------------------------------
// Batch iteration
// ---------------------------------------------------------------------------

TEST_CASE("full-batch iteration yields one natural-order batch") {
  const Dataset ds = gen_synthetic(16, 3, 1.0, 4);
  const auto batches = batch_iter(ds, 16, 77, 0);
  REQUIRE(batches.size() == 1);
  std::vector<int> expect(16);
  for (int i = 0; i < 16; ++i) expect[i] = i;
  CHECK(batches[0] == expect);
}

TEST_CASE("minibatches partition the index range for any batch size") {
  const Dataset ds = gen_synthetic(64, 3, 1.0, 4);
  for (int bs : {1, 3, 16, 63, 64}) {
    const auto batches = batch_iter(ds, bs, 5, 2);
    std::set<int> seen;
    std::size_t total = 0;
    for (const auto& batch : batches) {
      CHECK(batch.size() <= static_cast<std::size_t>(bs));
      for (int idx : batch) {
        CHECK(idx >= 0);
        CHECK(idx < 64);
        seen.insert(idx);
      }
      total += batch.size();
    }
    CHECK(total == 64);
    CHECK(seen.size() == 64);
    // All batches except possibly the last are full.
    for (std::size_t b = 0; b + 1 < batches.size(); ++b)
      CHECK(batches[b].size() == static_cast<std::size_t>(bs));
  }
}

TEST_CASE("batch schedules are deterministic per epoch and differ across epochs") {
  const Dataset ds = gen_synthetic(32, 3, 1.0, 4);
  CHECK(batch_iter(ds, 8, 99, 3) == batch_iter(ds, 8, 99, 3));
  CHECK(batch_iter(ds, 8, 99, 0) != batch_iter(ds, 8, 99, 1));
  CHECK(batch_iter(ds, 8, 98, 0) != batch_iter(ds, 8, 99, 0));
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

TEST_CASE("CSV export writes a header and one row per sample") {
  Dataset ds;
  ds.inputs = Eigen::MatrixXd{{1.5, -2.0}, {0.0, 3.25}};
  ds.labels = Eigen::VectorXd{{0.0, 1.0}};
  ds.d0 = 2;
  std::ostringstream out;
  write_dataset_csv(ds, out);
  std::istringstream lines(out.str());
  std::string line;
  REQUIRE(std::getline(lines, line));
  CHECK(line == "label,f0,f1");
  REQUIRE(std::getline(lines, line));
  CHECK(line.substr(0, 2) == "0,");
  CHECK(line.find("1.5") != std::string::npos);
  REQUIRE(std::getline(lines, line));
  CHECK(line.substr(0, 2) == "1,");
  CHECK(!std::getline(lines, line));
}
