#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <numeric>

#include "scornn/activations.hpp"
#include "scornn/tasks.hpp"
#include "support.hpp"

using namespace scornn;
using namespace scornn::test;
namespace fs = std::filesystem;

namespace {

int class_at(const TaskBatch& b, std::size_t t, std::size_t r) {
  const auto row = b.inputs[t].row(r);
  int hot = -1, count = 0;
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (row[c] == 1) {
      hot = static_cast<int>(c);
      ++count;
    } else {
      REQUIRE(row[c] == 0);
    }
  }
  REQUIRE(count == 1);
  return hot;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("scornn_test_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("copying: layout, marker and recall targets") {
  Rng rng(1);
  for (std::size_t length : {1, 10, 200}) {
    const TaskBatch b = gen_copying(length, 16, rng);
    CHECK(b.length() == length + 20);
    CHECK(b.input_size() == 10);
    CHECK(b.num_classes == 10);
    CHECK(b.loss == LossKind::PerStepCrossEntropy);
    CHECK(b.class_targets.size() == (length + 20) * 16);
    for (std::size_t r = 0; r < 16; ++r) {
      std::size_t markers = 0;
      for (std::size_t t = 0; t < b.length(); ++t) {
        const int c = class_at(b, t, r);
        if (c == kCopyingMarker) {
          ++markers;
          CHECK(t == length + 9);
        }
        if (t < 10) {
          CHECK(c >= 1);
          CHECK(c <= 8);
        } else if (t != length + 9) {
          CHECK(c == 0);
        }
      }
      CHECK(markers == 1);
      for (std::size_t t = 0; t < b.length(); ++t) {
        const int target = b.class_targets[t * 16 + r];
        CHECK(target != kCopyingMarker);
        if (t < length + 10) {
          CHECK(target == 0);
        } else {
          CHECK(target == class_at(b, t - length - 10, r));
        }
      }
    }
  }
  CHECK_THROWS_AS(gen_copying(0, 1, rng), std::invalid_argument);
}

TEST_CASE("copying baseline closed form") {
  CHECK(copying_baseline(1000) == doctest::Approx(0.020388).epsilon(2e-5));
  CHECK(copying_baseline(2000) == doctest::Approx(0.010297).epsilon(5e-5));
  CHECK(copying_baseline(200) == doctest::Approx(10 * std::log(8.0) / 220).epsilon(1e-15));
}

TEST_CASE("generators are pure functions of the seed") {
  Rng a(9), b(9), c(10);
  const TaskBatch x = gen_copying(30, 4, a);
  const TaskBatch y = gen_copying(30, 4, b);
  CHECK(x.inputs == y.inputs);
  CHECK(x.class_targets == y.class_targets);
  CHECK(x.class_targets != gen_copying(30, 4, c).class_targets);
  Rng d(3), e(3);
  const TaskBatch p = gen_adding(50, 8, d);
  const TaskBatch q = gen_adding(50, 8, e);
  CHECK(p.inputs == q.inputs);
  CHECK(p.value_targets == q.value_targets);
}

TEST_CASE("adding: marker intervals, targets and the constant-1 baseline over 10^5 samples") {
  const std::size_t length = 200, half = length / 2;
  Rng rng(2);
  std::size_t first_lo = 0, first_hi = 0, second_lo = 0, second_hi = 0;
  double sum_target = 0, sum_sq = 0;
  std::size_t count = 0;
  for (int chunk = 0; chunk < 100; ++chunk) {
    const TaskBatch b = gen_adding(length, 1000, rng);
    CHECK(b.loss == LossKind::LastStepMse);
    CHECK(b.input_size() == 2);
    CHECK(b.output_size() == 1);
    for (std::size_t r = 0; r < 1000; ++r) {
      std::vector<std::size_t> marks;
      for (std::size_t t = 0; t < length; ++t) {
        const Real m = b.inputs[t](r, 1);
        const Real v = b.inputs[t](r, 0);
        REQUIRE((m == 0 || m == 1));
        REQUIRE(v >= 0);
        REQUIRE(v < 1);
        if (m == 1) marks.push_back(t);
      }
      REQUIRE(marks.size() == 2);
      REQUIRE(marks[0] >= 1);
      REQUIRE(marks[0] < half);
      REQUIRE(marks[1] >= half);
      REQUIRE(marks[1] < length);
      first_lo += marks[0] == 1;
      first_hi += marks[0] == half - 1;
      second_lo += marks[1] == half;
      second_hi += marks[1] == length - 1;
      const double target = b.value_targets[r];
      REQUIRE(target == b.inputs[marks[0]](r, 0) + b.inputs[marks[1]](r, 0));
      sum_target += target;
      sum_sq += (target - 1) * (target - 1);
      ++count;
    }
  }
  CHECK(count == 100000);
  // Both ends of both intervals are hit (expected ~1000 times each).
  CHECK(first_lo > 0);
  CHECK(first_hi > 0);
  CHECK(second_lo > 0);
  CHECK(second_hi > 0);
  CHECK(std::abs(sum_target / count - 1.0) <= 0.01);
  CHECK(std::abs(sum_sq / count - 0.167) <= 0.01);
  CHECK(kAddingBaselineMse == doctest::Approx(0.167).epsilon(0.01));
  CHECK_THROWS_AS(gen_adding(3, 1, rng), std::invalid_argument);
}

TEST_CASE("adding: half marked values sum to 1") {
  TaskBatch b;
  b.loss = LossKind::LastStepMse;
  b.inputs.assign(1, Matrix(1, 2));
  b.value_targets = {0.5 + 0.5};
  CHECK(b.value_targets[0] == 1.0);
  const BatchScore s = score_outputs(b, std::vector<Matrix>{Matrix{{1.0}}});
  CHECK(s.loss == 0);
}

TEST_CASE("AddingDataset: samples depend only on (seed, index)") {
  const AddingDataset ds(20, 100, 7);
  const std::vector<std::size_t> all{3, 50, 99};
  const std::vector<std::size_t> one{50};
  const TaskBatch b = ds.batch(all);
  const TaskBatch s = ds.batch(one);
  CHECK(s.value_targets[0] == b.value_targets[1]);
  for (std::size_t t = 0; t < 20; ++t) {
    CHECK(s.inputs[t](0, 0) == b.inputs[t](1, 0));
    CHECK(s.inputs[t](0, 1) == b.inputs[t](1, 1));
  }
  const AddingDataset other(20, 100, 8);
  CHECK(other.batch(one).value_targets != s.value_targets);
  CHECK_THROWS_AS(ds.batch(std::vector<std::size_t>{100}), std::out_of_range);
  CHECK_THROWS_AS(AddingDataset(3, 10, 1), std::invalid_argument);
}

TEST_CASE("pixel permutation: bijection, deterministic, applied identically") {
  const auto p = pixel_permutation(784, 5);
  auto sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(784);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
  CHECK(pixel_permutation(784, 5) == p);
  CHECK(pixel_permutation(784, 6) != p);
  CHECK(p != iota);

  MnistDataset ds;
  ds.rows = 28;
  ds.cols = 28;
  ds.labels = {3, 7};
  ds.pixels.resize(2 * 784);
  for (std::size_t i = 0; i < ds.pixels.size(); ++i) ds.pixels[i] = static_cast<std::uint8_t>(i % 251);
  const MnistDataset perm = apply_permutation(ds, 5);
  CHECK(perm.permutation == p);
  for (std::size_t k = 0; k < 784; ++k) {
    CHECK(perm.value(1, k) == ds.value(1, p[k]));
  }
  CHECK(ds.value(0, 255) == doctest::Approx(static_cast<double>(255 % 251) / 255.0));
}

TEST_CASE("IDX round trip, slicing and batching") {
  TempDir dir("idx_roundtrip");
  const std::size_t count = 5, rows = 3, cols = 4;
  std::vector<std::uint8_t> pixels(count * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 7);
  const std::vector<std::uint8_t> labels{0, 9, 4, 4, 1};
  write_idx_images(dir.path / "img", count, rows, cols, pixels);
  write_idx_labels(dir.path / "lbl", labels);

  // Header: big-endian magic and dimensions.
  const auto raw = read_bytes(dir.path / "img");
  REQUIRE(raw.size() == 16 + pixels.size());
  CHECK(raw[2] == 0x08);
  CHECK(raw[3] == 0x03);
  CHECK(raw[7] == 5);
  CHECK(raw[11] == 3);
  CHECK(raw[15] == 4);

  const MnistDataset ds = load_mnist(dir.path / "img", dir.path / "lbl");
  CHECK(ds.count() == 5);
  CHECK(ds.rows == 3);
  CHECK(ds.cols == 4);
  CHECK(ds.sequence_length() == 12);
  CHECK(ds.pixels == pixels);
  CHECK(ds.labels == std::vector<int>{0, 9, 4, 4, 1});
  CHECK(ds.value(1, 2) == doctest::Approx(static_cast<double>(pixels[14]) / 255.0));

  const MnistDataset part = slice(ds, 1, 3);
  CHECK(part.count() == 2);
  CHECK(part.labels == std::vector<int>{9, 4});
  CHECK(part.value(0, 0) == ds.value(1, 0));
  CHECK_THROWS_AS(slice(ds, 4, 6), std::out_of_range);

  const std::vector<std::size_t> idx{4, 1};
  const TaskBatch b = mnist_batch(ds, idx);
  CHECK(b.length() == 12);
  CHECK(b.input_size() == 1);
  CHECK(b.loss == LossKind::LastStepCrossEntropy);
  CHECK(b.class_targets == std::vector<int>{1, 9});
  CHECK(b.inputs[5](0, 0) == ds.value(4, 5));
  CHECK(b.inputs[5](1, 0) == ds.value(1, 5));
  CHECK_THROWS_AS(mnist_batch(ds, std::vector<std::size_t>{5}), std::out_of_range);
}

TEST_CASE("IDX errors: bad magic, truncation, count mismatch, label range") {
  TempDir dir("idx_errors");
  std::vector<std::uint8_t> pixels(2 * 4, 1);
  write_idx_images(dir.path / "img", 2, 2, 2, pixels);
  write_idx_labels(dir.path / "lbl", std::vector<std::uint8_t>{1, 2});
  REQUIRE_NOTHROW(load_mnist(dir.path / "img", dir.path / "lbl"));

  CHECK_THROWS_AS(load_mnist(dir.path / "lbl", dir.path / "lbl"), IdxFormatError);
  CHECK_THROWS_AS(load_mnist(dir.path / "img", dir.path / "img"), IdxFormatError);

  auto img = read_bytes(dir.path / "img");
  img.pop_back();
  write_bytes(dir.path / "short_img", img);
  CHECK_THROWS_AS(load_mnist(dir.path / "short_img", dir.path / "lbl"), IdxFormatError);
  write_bytes(dir.path / "tiny", {0, 0, 8});
  CHECK_THROWS_AS(load_mnist(dir.path / "tiny", dir.path / "lbl"), IdxFormatError);

  write_idx_labels(dir.path / "three", std::vector<std::uint8_t>{1, 2, 3});
  CHECK_THROWS_AS(load_mnist(dir.path / "img", dir.path / "three"), IdxFormatError);

  auto lbl = read_bytes(dir.path / "lbl");
  lbl.back() = 10;
  write_bytes(dir.path / "bad_label", lbl);
  CHECK_THROWS_AS(load_mnist(dir.path / "img", dir.path / "bad_label"), IdxFormatError);

  CHECK_THROWS_AS(load_mnist(dir.path / "missing", dir.path / "lbl"), IdxFormatError);
}

TEST_CASE("score_outputs") {
  SUBCASE("per-step: mean over every (step, sample), gradient split back per step") {
    Rng rng(4);
    const TaskBatch b = gen_copying(2, 3, rng);
    std::vector<Matrix> outs;
    for (std::size_t t = 0; t < b.length(); ++t) outs.push_back(random_matrix(3, 10, rng));
    const BatchScore s = score_outputs(b, outs);
    Matrix stacked(b.length() * 3, 10);
    for (std::size_t t = 0; t < b.length(); ++t)
      for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 10; ++c) stacked(t * 3 + r, c) = outs[t](r, c);
    const LossResult ref = softmax_xent(stacked, b.class_targets);
    CHECK(s.loss == ref.loss);
    CHECK(s.scored == b.length() * 3);
    CHECK(s.output_grads[4](1, 7) == ref.grad(13, 7));
    outs.pop_back();
    CHECK_THROWS_AS(score_outputs(b, outs), ShapeError);
  }
  SUBCASE("last-step cross-entropy counts argmax hits") {
    TaskBatch b;
    b.loss = LossKind::LastStepCrossEntropy;
    b.num_classes = 3;
    b.inputs.assign(2, Matrix(2, 1));
    b.class_targets = {2, 0};
    const BatchScore s = score_outputs(b, std::vector<Matrix>{Matrix{{0, 1, 5}, {0, 3, 1}}});
    CHECK(s.correct == 1);
    CHECK(s.scored == 2);
  }
  SUBCASE("last-step MSE") {
    Rng rng(5);
    const TaskBatch b = gen_adding(10, 4, rng);
    const Matrix ones{{1}, {1}, {1}, {1}};
    const BatchScore s = score_outputs(b, std::vector<Matrix>{ones});
    double ref = 0;
    for (Real t : b.value_targets) ref += (t - 1) * (t - 1) / 4;
    CHECK(s.loss == doctest::Approx(ref).epsilon(1e-15));
    CHECK_THROWS_AS(score_outputs(b, std::vector<Matrix>{Matrix(4, 2)}), ShapeError);
  }
}

TEST_CASE("real MNIST header, when the files are present") {
  const char* root = std::getenv("SCORNN_DATA_ROOT");
  fs::path dir = root ? fs::path(root) / "mnist" : fs::path("/root/data/mnist");
  if (!fs::exists(dir / "train-images-idx3-ubyte")) {
    MESSAGE("MNIST not found; skipping");
    return;
  }
  const MnistDataset ds =
      load_mnist(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  CHECK(ds.count() == 60000);
  CHECK(ds.rows == 28);
  CHECK(ds.cols == 28);
  CHECK(ds.sequence_length() == 784);
}
