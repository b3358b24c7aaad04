#include "rsplab/bank.hpp"

#include <cstring>
#include <stdexcept>

#include "rsplab/config.hpp"
#include "rsplab/image.hpp"

namespace rsplab::train {

NegativeBank::NegativeBank(int capacity, int dim) : capacity_(capacity), dim_(dim) {
  if (capacity < 1) throw config::ConfigError("[train] bank capacity must be >= 1");
  if (dim < 1) throw config::ConfigError("[train] bank dim must be >= 1");
  data_ = TensorF({static_cast<std::size_t>(capacity), static_cast<std::size_t>(dim)});
  tags_.assign(static_cast<std::size_t>(capacity), 0);
  steps_.assign(static_cast<std::size_t>(capacity), 0);
}

void NegativeBank::enqueue(const float* vec, std::int64_t tag, std::int64_t step) {
  std::memcpy(data_.data() + static_cast<std::size_t>(cursor_) * dim_, vec,
              sizeof(float) * static_cast<std::size_t>(dim_));
  tags_[static_cast<std::size_t>(cursor_)] = tag;
  steps_[static_cast<std::size_t>(cursor_)] = step;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

TensorF NegativeBank::snapshot() const {
  TensorF out({static_cast<std::size_t>(size_), static_cast<std::size_t>(dim_)});
  for (int i = 0; i < size_; ++i) {
    const int slot = (size_ == capacity_) ? (cursor_ + i) % capacity_ : i;
    std::memcpy(out.data() + static_cast<std::size_t>(i) * dim_,
                data_.data() + static_cast<std::size_t>(slot) * dim_,
                sizeof(float) * static_cast<std::size_t>(dim_));
  }
  return out;
}

std::vector<std::int64_t> NegativeBank::tags() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(size_));
  for (int i = 0; i < size_; ++i) {
    const int slot = (size_ == capacity_) ? (cursor_ + i) % capacity_ : i;
    out[static_cast<std::size_t>(i)] = tags_[static_cast<std::size_t>(slot)];
  }
  return out;
}

std::vector<std::int64_t> NegativeBank::steps() const {
  std::vector<std::int64_t> out(static_cast<std::size_t>(size_));
  for (int i = 0; i < size_; ++i) {
    const int slot = (size_ == capacity_) ? (cursor_ + i) % capacity_ : i;
    out[static_cast<std::size_t>(i)] = steps_[static_cast<std::size_t>(slot)];
  }
  return out;
}

void NegativeBank::save_to(ckpt::Checkpoint& c) const {
  c.tensors["bank.data"] = snapshot();
  c.ints["bank.tags"] = tags();
  c.ints["bank.steps"] = steps();
  c.ints["bank.meta"] = {capacity_, dim_, size_};
}

NegativeBank NegativeBank::restore_from(const ckpt::Checkpoint& c) {
  auto meta_it = c.ints.find("bank.meta");
  auto data_it = c.tensors.find("bank.data");
  auto tags_it = c.ints.find("bank.tags");
  auto steps_it = c.ints.find("bank.steps");
  if (meta_it == c.ints.end() || data_it == c.tensors.end() || tags_it == c.ints.end() ||
      steps_it == c.ints.end() || meta_it->second.size() != 3) {
    throw img::IoError("checkpoint has no negative bank");
  }
  const int capacity = static_cast<int>(meta_it->second[0]);
  const int dim = static_cast<int>(meta_it->second[1]);
  const int size = static_cast<int>(meta_it->second[2]);
  NegativeBank bank(capacity, dim);
  const TensorF& data = data_it->second;
  if (data.rank() != 2 || static_cast<int>(data.dim(0)) != size ||
      static_cast<int>(data.dim(1)) != dim ||
      tags_it->second.size() != static_cast<std::size_t>(size) ||
      steps_it->second.size() != static_cast<std::size_t>(size)) {
    throw img::IoError("checkpoint negative bank is inconsistent");
  }
  for (int i = 0; i < size; ++i) {
    bank.enqueue(data.data() + static_cast<std::size_t>(i) * dim, tags_it->second[i],
                 steps_it->second[i]);
  }
  return bank;
}

}  // namespace rsplab::train
