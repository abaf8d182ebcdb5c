#pragma once

// Benchmark data: the copying and adding problems (generated from a seed) and
// pixel-by-pixel MNIST read from IDX files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "scornn/linalg.hpp"
#include "scornn/network.hpp"
#include "scornn/rng.hpp"

namespace scornn {

enum class LossKind { PerStepCrossEntropy, LastStepCrossEntropy, LastStepMse };

OutputMode output_mode(LossKind kind);

/// One mini-batch. `inputs[t]` is batch x m. Class targets are laid out
/// [t * batch + b] for per-step losses and [b] for last-step ones.
struct TaskBatch {
  std::vector<Matrix> inputs;
  std::vector<int> class_targets;
  std::vector<Real> value_targets;
  LossKind loss = LossKind::PerStepCrossEntropy;
  std::size_t num_classes = 0;

  std::size_t length() const noexcept { return inputs.size(); }
  std::size_t batch_size() const noexcept {
    return inputs.empty() ? 0 : inputs.front().rows();
  }
  std::size_t input_size() const noexcept {
    return inputs.empty() ? 0 : inputs.front().cols();
  }
  /// Width of the network output this batch is scored against.
  std::size_t output_size() const noexcept {
    return loss == LossKind::LastStepMse ? 1 : num_classes;
  }
};

// ---- copying ---------------------------------------------------------------

inline constexpr std::size_t kCopyingClasses = 10;
inline constexpr std::size_t kCopyingRecall = 10;
inline constexpr int kCopyingBlank = 0;
inline constexpr int kCopyingMarker = 9;

/// Sequences of length T + 20: ten symbols from 1..8, blanks, the marker 9 at
/// index T + 9, then ten blanks during which the targets replay the symbols.
TaskBatch gen_copying(std::size_t length, std::size_t batch, Rng& rng);

/// Expected cross-entropy of blanks followed by ten uniform guesses over 1..8.
double copying_baseline(std::size_t length);

// ---- adding ----------------------------------------------------------------

/// Two channels per step: a value in [0, 1) and a marker. One marker falls in
/// [1, T/2), the other in [T/2, T); the target is the sum of the two marked
/// values. Requires T >= 4.
TaskBatch gen_adding(std::size_t length, std::size_t batch, Rng& rng);

/// MSE of always predicting 1: the variance of a sum of two U[0,1) draws.
inline constexpr double kAddingBaselineMse = 1.0 / 6.0;

/// Fixed adding-problem dataset. Sample i is generated from its own stream
/// derived from (seed, i), so any subset can be rebuilt without storing it.
class AddingDataset {
 public:
  AddingDataset(std::size_t length, std::size_t size, std::uint64_t seed);

  std::size_t size() const noexcept { return size_; }
  std::size_t length() const noexcept { return length_; }
  TaskBatch batch(std::span<const std::size_t> indices) const;

 private:
  std::size_t length_;
  std::size_t size_;
  std::uint64_t seed_;
};

// ---- MNIST -----------------------------------------------------------------

class IdxFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct MnistDataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count x rows*cols, raw bytes
  std::vector<int> labels;
  /// Sequence position k reads pixel permutation[k]; empty means row-major.
  std::vector<std::size_t> permutation;

  std::size_t count() const noexcept { return labels.size(); }
  std::size_t sequence_length() const noexcept { return rows * cols; }
  /// Pixel fed at sequence position k of image i, scaled to [0, 1].
  Real value(std::size_t image, std::size_t k) const;
};

MnistDataset load_mnist(const std::filesystem::path& images,
                        const std::filesystem::path& labels);

/// Fisher-Yates shuffle of 0..size-1 driven by `seed`.
std::vector<std::size_t> pixel_permutation(std::size_t size, std::uint64_t seed);

MnistDataset apply_permutation(MnistDataset ds, std::uint64_t seed);

/// Images [begin, end) as a new dataset (permutation carried over).
MnistDataset slice(const MnistDataset& ds, std::size_t begin, std::size_t end);

/// Batch of single-pixel sequences with last-step 10-way targets.
TaskBatch mnist_batch(const MnistDataset& ds, std::span<const std::size_t> indices);

void write_idx_images(const std::filesystem::path& path, std::size_t count,
                      std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path,
                      std::span<const std::uint8_t> labels);

// ---- scoring ---------------------------------------------------------------

struct BatchScore {
  double loss = 0;
  std::vector<Matrix> output_grads;
  std::size_t correct = 0;  // classification only
  std::size_t scored = 0;
};

/// Loss, dL/dy for each network output, and classification hits.
BatchScore score_outputs(const TaskBatch& batch, std::span<const Matrix> outputs);

}  // namespace scornn
