#include "scornn/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "scornn/activations.hpp"

namespace scornn {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxFormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw IdxFormatError(path.string() + ": truncated header");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

struct AddingSample {
  std::vector<Real> values;
  std::size_t first = 0;
  std::size_t second = 0;
};

AddingSample draw_adding(std::size_t length, Rng& rng) {
  AddingSample s;
  s.values.resize(length);
  for (Real& v : s.values) v = static_cast<Real>(rng.uniform());
  const std::size_t half = length / 2;
  s.first = rng.uniform_index(1, half);
  s.second = rng.uniform_index(half, length);
  return s;
}

TaskBatch adding_batch_shell(std::size_t length, std::size_t batch) {
  if (length < 4) {
    throw std::invalid_argument("adding problem needs T >= 4, got " +
                                std::to_string(length));
  }
  TaskBatch b;
  b.loss = LossKind::LastStepMse;
  b.inputs.assign(length, Matrix(batch, 2));
  b.value_targets.resize(batch);
  return b;
}

void place_adding(TaskBatch& b, std::size_t row, const AddingSample& s) {
  for (std::size_t t = 0; t < s.values.size(); ++t) b.inputs[t](row, 0) = s.values[t];
  b.inputs[s.first](row, 1) = 1;
  b.inputs[s.second](row, 1) = 1;
  b.value_targets[row] = s.values[s.first] + s.values[s.second];
}

std::size_t argmax(std::span<const Real> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) -
                                  row.begin());
}

}  // namespace

OutputMode output_mode(LossKind kind) {
  return kind == LossKind::PerStepCrossEntropy ? OutputMode::PerStep
                                               : OutputMode::LastStep;
}

TaskBatch gen_copying(std::size_t length, std::size_t batch, Rng& rng) {
  if (length < 1) throw std::invalid_argument("copying problem needs T >= 1");
  const std::size_t total = length + 2 * kCopyingRecall;
  TaskBatch b;
  b.loss = LossKind::PerStepCrossEntropy;
  b.num_classes = kCopyingClasses;
  b.inputs.assign(total, Matrix(batch, kCopyingClasses));
  b.class_targets.assign(total * batch, kCopyingBlank);

  std::vector<int> sequence(total);
  for (std::size_t r = 0; r < batch; ++r) {
    std::fill(sequence.begin(), sequence.end(), kCopyingBlank);
    for (std::size_t k = 0; k < kCopyingRecall; ++k)
      sequence[k] = 1 + static_cast<int>(rng.uniform_index(8));
    sequence[length + kCopyingRecall - 1] = kCopyingMarker;
    for (std::size_t t = 0; t < total; ++t)
      b.inputs[t](r, static_cast<std::size_t>(sequence[t])) = 1;
    for (std::size_t k = 0; k < kCopyingRecall; ++k)
      b.class_targets[(length + kCopyingRecall + k) * batch + r] = sequence[k];
  }
  return b;
}

double copying_baseline(std::size_t length) {
  return 10.0 * std::log(8.0) / static_cast<double>(length + 20);
}

TaskBatch gen_adding(std::size_t length, std::size_t batch, Rng& rng) {
  TaskBatch b = adding_batch_shell(length, batch);
  for (std::size_t r = 0; r < batch; ++r) place_adding(b, r, draw_adding(length, rng));
  return b;
}

AddingDataset::AddingDataset(std::size_t length, std::size_t size,
                             std::uint64_t seed)
    : length_(length), size_(size), seed_(seed) {
  if (length < 4) {
    throw std::invalid_argument("adding problem needs T >= 4, got " +
                                std::to_string(length));
  }
}

TaskBatch AddingDataset::batch(std::span<const std::size_t> indices) const {
  TaskBatch b = adding_batch_shell(length_, indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= size_) throw std::out_of_range("adding dataset index");
    Rng rng(mix_seed(seed_, indices[r]));
    place_adding(b, r, draw_adding(length_, rng));
  }
  return b;
}

Real MnistDataset::value(std::size_t image, std::size_t k) const {
  const std::size_t pixel = permutation.empty() ? k : permutation[k];
  return static_cast<Real>(pixels[image * sequence_length() + pixel]) / Real(255);
}

MnistDataset load_mnist(const std::filesystem::path& images,
                        const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  if (read_be32(img, 0, images) != kIdxImageMagic) {
    throw IdxFormatError(images.string() + ": bad magic for IDX images");
  }
  if (read_be32(lab, 0, labels) != kIdxLabelMagic) {
    throw IdxFormatError(labels.string() + ": bad magic for IDX labels");
  }
  const std::size_t count = read_be32(img, 4, images);
  MnistDataset ds;
  ds.rows = read_be32(img, 8, images);
  ds.cols = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (label_count != count) {
    throw IdxFormatError("image/label count mismatch: " + std::to_string(count) +
                         " images, " + std::to_string(label_count) + " labels");
  }
  const std::size_t pixel_bytes = count * ds.rows * ds.cols;
  if (img.size() < 16 + pixel_bytes) {
    throw IdxFormatError(images.string() + ": truncated pixel data");
  }
  if (lab.size() < 8 + count) {
    throw IdxFormatError(labels.string() + ": truncated label data");
  }
  ds.pixels.assign(img.begin() + 16, img.begin() + 16 + static_cast<std::ptrdiff_t>(pixel_bytes));
  ds.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = lab[8 + i];
    if (label > 9) {
      throw IdxFormatError(labels.string() + ": label " + std::to_string(label) +
                           " out of range at " + std::to_string(i));
    }
    ds.labels.push_back(label);
  }
  return ds;
}

std::vector<std::size_t> pixel_permutation(std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> perm(size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = size; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

MnistDataset apply_permutation(MnistDataset ds, std::uint64_t seed) {
  ds.permutation = pixel_permutation(ds.sequence_length(), seed);
  return ds;
}

MnistDataset slice(const MnistDataset& ds, std::size_t begin, std::size_t end) {
  if (begin > end || end > ds.count()) throw std::out_of_range("mnist slice");
  const std::size_t len = ds.sequence_length();
  MnistDataset out;
  out.rows = ds.rows;
  out.cols = ds.cols;
  out.permutation = ds.permutation;
  out.pixels.assign(ds.pixels.begin() + static_cast<std::ptrdiff_t>(begin * len),
                    ds.pixels.begin() + static_cast<std::ptrdiff_t>(end * len));
  out.labels.assign(ds.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    ds.labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

TaskBatch mnist_batch(const MnistDataset& ds, std::span<const std::size_t> indices) {
  const std::size_t len = ds.sequence_length();
  TaskBatch b;
  b.loss = LossKind::LastStepCrossEntropy;
  b.num_classes = 10;
  b.inputs.assign(len, Matrix(indices.size(), 1));
  b.class_targets.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t image = indices[r];
    if (image >= ds.count()) throw std::out_of_range("mnist batch index");
    for (std::size_t k = 0; k < len; ++k) b.inputs[k](r, 0) = ds.value(image, k);
    b.class_targets[r] = ds.labels[image];
  }
  return b;
}

void write_idx_images(const std::filesystem::path& path, std::size_t count,
                      std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels) {
  if (pixels.size() != count * rows * cols) {
    throw std::invalid_argument("write_idx_images: pixel count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxFormatError("cannot write " + path.string());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(count));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path,
                      std::span<const std::uint8_t> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxFormatError("cannot write " + path.string());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

BatchScore score_outputs(const TaskBatch& batch, std::span<const Matrix> outputs) {
  const std::size_t rows = batch.batch_size();
  BatchScore score;
  switch (batch.loss) {
    case LossKind::PerStepCrossEntropy: {
      const std::size_t steps = batch.length();
      if (outputs.size() != steps) throw ShapeError("score_outputs: per-step outputs");
      const std::size_t k = batch.num_classes;
      Matrix stacked(steps * rows, k);
      for (std::size_t t = 0; t < steps; ++t) {
        if (outputs[t].rows() != rows || outputs[t].cols() != k) {
          throw ShapeError("score_outputs: output shape at step " + std::to_string(t));
        }
        std::copy(outputs[t].entries().begin(), outputs[t].entries().end(),
                  stacked.row(t * rows).begin());
      }
      LossResult r = softmax_xent(stacked, batch.class_targets);
      score.loss = r.loss;
      score.output_grads.reserve(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        Matrix g(rows, k);
        std::copy_n(r.grad.row(t * rows).begin(), rows * k, g.entries().begin());
        score.output_grads.push_back(std::move(g));
      }
      for (std::size_t i = 0; i < steps * rows; ++i)
        if (argmax(stacked.row(i)) == static_cast<std::size_t>(batch.class_targets[i]))
          ++score.correct;
      score.scored = steps * rows;
      break;
    }
    case LossKind::LastStepCrossEntropy: {
      if (outputs.size() != 1) throw ShapeError("score_outputs: last-step output");
      LossResult r = softmax_xent(outputs[0], batch.class_targets);
      score.loss = r.loss;
      for (std::size_t i = 0; i < rows; ++i)
        if (argmax(outputs[0].row(i)) == static_cast<std::size_t>(batch.class_targets[i]))
          ++score.correct;
      score.scored = rows;
      score.output_grads.push_back(std::move(r.grad));
      break;
    }
    case LossKind::LastStepMse: {
      if (outputs.size() != 1 || outputs[0].cols() != 1) {
        throw ShapeError("score_outputs: adding task expects one scalar output");
      }
      Matrix target(rows, 1, std::vector<Real>(batch.value_targets));
      LossResult r = mse(outputs[0], target);
      score.loss = r.loss;
      score.output_grads.push_back(std::move(r.grad));
      break;
    }
  }
  return score;
}

}  // namespace scornn
