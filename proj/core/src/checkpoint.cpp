#include "rsplab/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "rsplab/image.hpp"  // IoError

namespace rsplab::ckpt {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'P', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  if (len > (1u << 20)) throw img::IoError("checkpoint: implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

void write_int_vec(std::ostream& out, const std::vector<int>& v) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
  for (int x : v) write_pod<std::int32_t>(out, x);
}

std::vector<int> read_int_vec(std::istream& in) {
  const auto n = read_pod<std::uint32_t>(in);
  if (n > (1u << 16)) throw img::IoError("checkpoint: implausible list length");
  std::vector<int> v(n);
  for (auto& x : v) x = read_pod<std::int32_t>(in);
  return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw img::IoError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, config_hash);
  write_pod<std::int32_t>(out, epoch);
  write_pod<std::int64_t>(out, step);

  write_int_vec(out, enc_cfg.widths);
  write_int_vec(out, enc_cfg.kernels);
  write_pod<std::int32_t>(out, enc_cfg.in_channels);
  write_pod<std::int32_t>(out, enc_cfg.embed_dim);
  write_pod<std::int32_t>(out, enc_cfg.group_norm_groups);
  write_pod<std::uint8_t>(out, enc_cfg.normalize_embeddings ? 1 : 0);
  write_pod<std::uint8_t>(out, enc_cfg.final_norm ? 1 : 0);

  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_string(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d = 0; d < tensor.rank(); ++d) write_pod<std::uint64_t>(out, tensor.dim(d));
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
  }
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ints.size()));
  for (const auto& [name, values] : ints) {
    write_string(out, name);
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(values.size()));
    for (auto v : values) write_pod<std::int64_t>(out, v);
  }
  if (!out) throw img::IoError("write failure on checkpoint '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw img::IoError("cannot open checkpoint '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw img::IoError("'" + path + "' is not a checkpoint (bad magic)");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw img::IoError("checkpoint '" + path + "': unsupported version " +
                       std::to_string(version));
  }
  Checkpoint c;
  c.config_hash = read_pod<std::uint64_t>(in);
  c.epoch = read_pod<std::int32_t>(in);
  c.step = read_pod<std::int64_t>(in);
  c.enc_cfg.widths = read_int_vec(in);
  c.enc_cfg.kernels = read_int_vec(in);
  c.enc_cfg.in_channels = read_pod<std::int32_t>(in);
  c.enc_cfg.embed_dim = read_pod<std::int32_t>(in);
  c.enc_cfg.group_norm_groups = read_pod<std::int32_t>(in);
  c.enc_cfg.normalize_embeddings = read_pod<std::uint8_t>(in) != 0;
  c.enc_cfg.final_norm = read_pod<std::uint8_t>(in) != 0;

  const auto n_tensors = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = read_string(in);
    const auto rank = read_pod<std::uint32_t>(in);
    if (rank > 8) throw img::IoError("checkpoint '" + path + "': implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
    TensorF t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    c.tensors.emplace(name, std::move(t));
  }
  const auto n_ints = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_ints; ++i) {
    const std::string name = read_string(in);
    const auto count = read_pod<std::uint64_t>(in);
    if (count > (1ull << 32)) throw img::IoError("checkpoint: implausible int list");
    std::vector<std::int64_t> values(static_cast<std::size_t>(count));
    for (auto& v : values) v = read_pod<std::int64_t>(in);
    c.ints.emplace(name, std::move(values));
  }
  if (!in) throw img::IoError("checkpoint '" + path + "' truncated");
  return c;
}

void Checkpoint::check_hash(std::uint64_t expected, bool force) const {
  if (config_hash == expected) return;
  if (force) return;
  throw config::ConfigError("checkpoint config hash mismatch (checkpoint " +
                            config::hash_hex(config_hash) + ", current " +
                            config::hash_hex(expected) + "); pass --force to load anyway");
}

Checkpoint Checkpoint::from_model(model::RspNet<float>& net, std::uint64_t config_hash, int epoch,
                                  std::int64_t step) {
  Checkpoint c;
  c.config_hash = config_hash;
  c.epoch = epoch;
  c.step = step;
  c.enc_cfg = net.config();
  for (auto& [name, tensor] : net.named_params()) c.tensors.emplace(name, *tensor);
  return c;
}

void Checkpoint::load_into(model::RspNet<float>& net) const {
  for (auto& [name, tensor] : net.named_params()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw img::IoError("checkpoint missing parameter '" + name + "'");
    }
    check_shape(it->second.shape(), tensor->shape(), ("checkpoint:" + name).c_str());
    *tensor = it->second;
  }
}

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_epoch_%04d", epoch);
  return buf;
}

}  // namespace rsplab::ckpt
