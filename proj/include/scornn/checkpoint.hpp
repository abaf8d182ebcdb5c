#pragma once

// Binary checkpoints. All integers and floats are little-endian 64-bit;
// strings are a u64 byte count followed by the bytes.
//
//   "SCORNNCK" u32 version
//   model, iteration, epoch, config text
//   tensors:    count, then (name, rows, cols, f64 entries) each
//   skew flag:  u8, then the skew record below when set
//   optimizers: count, then (name, steps, first moment, second moment) each
//
// Skew record: n, rho, the n(n-1)/2 packed entries of A as f64 in canonical
// order, then the n diagonal signs of D as i64.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scornn/cayley.hpp"
#include "scornn/linalg.hpp"
#include "scornn/lstm.hpp"
#include "scornn/network.hpp"

namespace scornn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_skew_record(std::ostream& out, const SkewParams& a, const ScalingMatrix& d);
std::pair<SkewParams, ScalingMatrix> read_skew_record(std::istream& in);

struct TensorRecord {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> data;
};

struct OptimizerRecord {
  std::string name;
  std::uint64_t steps = 0;
  std::vector<double> first;
  std::vector<double> second;
};

struct Checkpoint {
  std::string model;  // "scornn" or "lstm"
  std::uint64_t iteration = 0;
  std::uint64_t epoch = 0;
  std::string config;
  std::vector<TensorRecord> tensors;
  std::optional<std::pair<SkewParams, ScalingMatrix>> skew;
  std::vector<OptimizerRecord> optimizers;

  const TensorRecord& tensor(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint capture(const ScoCell& cell, const ScoOptimizer* optimizer);
Checkpoint capture(const LstmCell& cell, const LstmOptimizer* optimizer);

/// Rebuilds the cell (W recomputed from the stored A and D) and, when given,
/// the optimizer accumulators.
ScoCell restore_sco(const Checkpoint& ck, ScoOptimizer* optimizer);
LstmCell restore_lstm(const Checkpoint& ck, LstmOptimizer* optimizer);

}  // namespace scornn
