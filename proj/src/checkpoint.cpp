#include "scornn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <span>

namespace scornn {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'C', 'O', 'R', 'N', 'N', 'C', 'K'};
// Guards against allocating from a corrupt length field.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_doubles(std::ostream& out, std::span<const double> values) {
  put_u64(out, values.size());
  for (double v : values) put_f64(out, v);
}

void read_exact(std::istream& in, char* dst, std::size_t count) {
  in.read(dst, static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw CheckpointError("checkpoint truncated");
  }
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::uint64_t get_count(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  if (n > kMaxElements) throw CheckpointError("checkpoint length field out of range");
  return n;
}

std::string get_string(std::istream& in) {
  std::string s(get_count(in), '\0');
  read_exact(in, s.data(), s.size());
  return s;
}

std::vector<double> get_doubles(std::istream& in) {
  std::vector<double> v(get_count(in));
  for (double& x : v) x = get_f64(in);
  return v;
}

template <class Container>
std::vector<double> widen(const Container& values) {
  return std::vector<double>(values.begin(), values.end());
}

TensorRecord tensor_of(std::string name, const Matrix& m) {
  return {std::move(name), m.rows(), m.cols(), widen(m.entries())};
}

TensorRecord tensor_of(std::string name, std::span<const Real> v) {
  return {std::move(name), v.size(), 1, widen(v)};
}

Matrix matrix_of(const TensorRecord& t) {
  std::vector<Real> data(t.data.begin(), t.data.end());
  return Matrix(t.rows, t.cols, std::move(data));
}

std::vector<Real> vector_of(const TensorRecord& t) {
  if (t.cols != 1) throw CheckpointError("tensor '" + t.name + "' is not a vector");
  return std::vector<Real>(t.data.begin(), t.data.end());
}

void capture_groups(Checkpoint& ck, std::span<const ParamGroup> groups) {
  for (const ParamGroup& g : groups)
    ck.optimizers.push_back({g.name(), g.steps_taken(), widen(g.first_moment()),
                             widen(g.second_moment())});
}

void restore_groups(const Checkpoint& ck, std::span<ParamGroup> groups) {
  if (ck.optimizers.size() != groups.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(ck.optimizers.size()) +
                          " optimizer groups, model has " +
                          std::to_string(groups.size()));
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const OptimizerRecord& r = ck.optimizers[i];
    if (r.name != groups[i].name()) {
      throw CheckpointError("optimizer group '" + r.name + "' where '" +
                            groups[i].name() + "' was expected");
    }
    groups[i].restore_state(std::vector<Real>(r.first.begin(), r.first.end()),
                            std::vector<Real>(r.second.begin(), r.second.end()),
                            r.steps);
  }
}

void expect_model(const Checkpoint& ck, const std::string& model) {
  if (ck.model != model) {
    throw CheckpointError("checkpoint holds a '" + ck.model + "' model, not '" +
                          model + "'");
  }
}

}  // namespace

void write_skew_record(std::ostream& out, const SkewParams& a, const ScalingMatrix& d) {
  if (a.dim() != d.dim()) throw ShapeError("skew record: A and D dimensions differ");
  put_u64(out, a.dim());
  put_u64(out, d.rho());
  for (Real x : a.values()) put_f64(out, static_cast<double>(x));
  for (int s : d.signs()) put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(s)));
}

std::pair<SkewParams, ScalingMatrix> read_skew_record(std::istream& in) {
  const std::uint64_t n = get_count(in);
  const std::uint64_t rho = get_u64(in);
  std::vector<Real> v(SkewParams::packed_size(n));
  for (Real& x : v) x = static_cast<Real>(get_f64(in));
  std::vector<int> signs(n);
  for (int& s : signs) s = static_cast<int>(static_cast<std::int64_t>(get_u64(in)));
  ScalingMatrix d(std::move(signs));
  if (d.rho() != rho) {
    throw CheckpointError("skew record: rho " + std::to_string(rho) +
                          " disagrees with the stored signs");
  }
  return {SkewParams(n, std::move(v)), std::move(d)};
}

const TensorRecord& Checkpoint::tensor(const std::string& name) const {
  for (const TensorRecord& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, kCheckpointVersion);
    put_string(out, ck.model);
    put_u64(out, ck.iteration);
    put_u64(out, ck.epoch);
    put_string(out, ck.config);
    put_u64(out, ck.tensors.size());
    for (const TensorRecord& t : ck.tensors) {
      if (t.data.size() != t.rows * t.cols) {
        throw ShapeError("tensor '" + t.name + "' has inconsistent shape");
      }
      put_string(out, t.name);
      put_u64(out, t.rows);
      put_u64(out, t.cols);
      for (double x : t.data) put_f64(out, x);
    }
    out.put(ck.skew ? 1 : 0);
    if (ck.skew) write_skew_record(out, ck.skew->first, ck.skew->second);
    put_u64(out, ck.optimizers.size());
    for (const OptimizerRecord& r : ck.optimizers) {
      put_string(out, r.name);
      put_u64(out, r.steps);
      put_doubles(out, r.first);
      put_doubles(out, r.second);
    }
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::array<char, 8> magic{};
  read_exact(in, magic.data(), magic.size());
  if (magic != kMagic) throw CheckpointError(path.string() + ": not a checkpoint");
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported version " +
                          std::to_string(version));
  }
  Checkpoint ck;
  ck.model = get_string(in);
  ck.iteration = get_u64(in);
  ck.epoch = get_u64(in);
  ck.config = get_string(in);
  const std::uint64_t tensors = get_count(in);
  for (std::uint64_t i = 0; i < tensors; ++i) {
    TensorRecord t;
    t.name = get_string(in);
    t.rows = get_count(in);
    t.cols = get_count(in);
    if (t.rows * t.cols > kMaxElements) throw CheckpointError("tensor too large");
    t.data.resize(t.rows * t.cols);
    for (double& x : t.data) x = get_f64(in);
    ck.tensors.push_back(std::move(t));
  }
  char flag = 0;
  read_exact(in, &flag, 1);
  if (flag == 1) {
    ck.skew = read_skew_record(in);
  } else if (flag != 0) {
    throw CheckpointError("checkpoint: bad skew flag");
  }
  const std::uint64_t groups = get_count(in);
  for (std::uint64_t i = 0; i < groups; ++i) {
    OptimizerRecord r;
    r.name = get_string(in);
    r.steps = get_u64(in);
    r.first = get_doubles(in);
    r.second = get_doubles(in);
    ck.optimizers.push_back(std::move(r));
  }
  return ck;
}

Checkpoint capture(const ScoCell& cell, const ScoOptimizer* optimizer) {
  Checkpoint ck;
  ck.model = "scornn";
  ck.tensors.push_back(tensor_of("input_weights", cell.input_weights));
  ck.tensors.push_back(tensor_of("modrelu_bias", cell.modrelu_bias));
  ck.tensors.push_back(tensor_of("output_weights", cell.output_weights));
  ck.tensors.push_back(tensor_of("output_bias", cell.output_bias));
  ck.skew.emplace(cell.skew, cell.scaling);
  if (optimizer) capture_groups(ck, optimizer->groups());
  return ck;
}

Checkpoint capture(const LstmCell& cell, const LstmOptimizer* optimizer) {
  Checkpoint ck;
  ck.model = "lstm";
  ck.tensors.push_back(tensor_of("input_weights", cell.input_weights));
  ck.tensors.push_back(tensor_of("recurrent_weights", cell.recurrent_weights));
  ck.tensors.push_back(tensor_of("bias", cell.bias));
  ck.tensors.push_back(tensor_of("output_weights", cell.output_weights));
  ck.tensors.push_back(tensor_of("output_bias", cell.output_bias));
  const Real forget = cell.forget_bias;
  ck.tensors.push_back(tensor_of("forget_bias", std::span<const Real>(&forget, 1)));
  if (optimizer) capture_groups(ck, optimizer->groups());
  return ck;
}

ScoCell restore_sco(const Checkpoint& ck, ScoOptimizer* optimizer) {
  expect_model(ck, "scornn");
  if (!ck.skew) throw CheckpointError("scornn checkpoint without a skew record");
  ScoCell cell;
  cell.input_weights = matrix_of(ck.tensor("input_weights"));
  cell.skew = ck.skew->first;
  cell.scaling = ck.skew->second;
  cell.modrelu_bias = vector_of(ck.tensor("modrelu_bias"));
  cell.output_weights = matrix_of(ck.tensor("output_weights"));
  cell.output_bias = vector_of(ck.tensor("output_bias"));
  const std::size_t n = cell.skew.dim();
  if (cell.input_weights.rows() != n || cell.modrelu_bias.size() != n ||
      cell.output_weights.cols() != n ||
      cell.output_bias.size() != cell.output_weights.rows()) {
    throw CheckpointError("scornn checkpoint tensors have inconsistent shapes");
  }
  cell.refresh_recurrent();
  if (optimizer) restore_groups(ck, optimizer->groups());
  return cell;
}

LstmCell restore_lstm(const Checkpoint& ck, LstmOptimizer* optimizer) {
  expect_model(ck, "lstm");
  LstmCell cell;
  cell.input_weights = matrix_of(ck.tensor("input_weights"));
  cell.recurrent_weights = matrix_of(ck.tensor("recurrent_weights"));
  cell.bias = vector_of(ck.tensor("bias"));
  cell.output_weights = matrix_of(ck.tensor("output_weights"));
  cell.output_bias = vector_of(ck.tensor("output_bias"));
  cell.forget_bias = vector_of(ck.tensor("forget_bias")).at(0);
  const std::size_t n = cell.recurrent_weights.cols();
  if (cell.recurrent_weights.rows() != 4 * n || cell.input_weights.rows() != 4 * n ||
      cell.bias.size() != 4 * n || cell.output_weights.cols() != n ||
      cell.output_bias.size() != cell.output_weights.rows()) {
    throw CheckpointError("lstm checkpoint tensors have inconsistent shapes");
  }
  if (optimizer) restore_groups(ck, optimizer->groups());
  return cell;
}

}  // namespace scornn
