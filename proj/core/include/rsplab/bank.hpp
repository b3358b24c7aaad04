#pragma once

#include <cstdint>
#include <vector>

#include "rsplab/checkpoint.hpp"
#include "rsplab/tensor.hpp"

namespace rsplab::train {

// FIFO feature bank of appearance embeddings. Entries carry the source video
// index (tag) and the step that enqueued them, so tests can audit that a
// training step never consumes a vector enqueued by that same step (the bank
// is snapshotted before the step's own vectors go in). After warm-up the
// bank stays exactly at capacity; enqueueing evicts the oldest entry.
class NegativeBank {
 public:
  NegativeBank(int capacity, int dim);

  void enqueue(const float* vec, std::int64_t tag, std::int64_t step);

  int size() const { return size_; }
  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  bool full() const { return size_ == capacity_; }

  // Contents in FIFO order (oldest first).
  TensorF snapshot() const;  // [size, dim]
  std::vector<std::int64_t> tags() const;
  std::vector<std::int64_t> steps() const;

  // Persists as "bank.data" / "bank.tags" / "bank.steps" / "bank.meta".
  void save_to(ckpt::Checkpoint& c) const;
  static NegativeBank restore_from(const ckpt::Checkpoint& c);

 private:
  int capacity_;
  int dim_;
  int size_ = 0;
  int cursor_ = 0;  // next write slot
  TensorF data_;    // [capacity, dim] ring storage
  std::vector<std::int64_t> tags_;
  std::vector<std::int64_t> steps_;
};

}  // namespace rsplab::train
