#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rsplab/model.hpp"
#include "rsplab/tensor.hpp"

namespace rsplab::ckpt {

// Persisted parameter container: named float tensors (parameters, optimizer
// momentum, bank vectors) plus named int64 lists (bank tags, counters),
// stamped with the EncoderConfig and the model-relevant config hash.
// Binary little-endian layout, magic "RSPLCKPT", versioned.
struct Checkpoint {
  std::uint64_t config_hash = 0;
  int epoch = 0;
  std::int64_t step = 0;
  model::EncoderConfig enc_cfg;
  std::map<std::string, TensorF> tensors;
  std::map<std::string, std::vector<std::int64_t>> ints;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Raises config::ConfigError on hash mismatch unless force.
  void check_hash(std::uint64_t expected, bool force) const;

  // Copies model parameters into / out of the named-tensor map.
  static Checkpoint from_model(model::RspNet<float>& net, std::uint64_t config_hash, int epoch,
                               std::int64_t step);
  void load_into(model::RspNet<float>& net) const;
};

// "ckpt_epoch_%04d"
std::string checkpoint_name(int epoch);

}  // namespace rsplab::ckpt
