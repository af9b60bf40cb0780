#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "hicd/correlation.hpp"
#include "hicd/tensor.hpp"

namespace hicd {

struct MemoryBankConfig {
  std::size_t capacity = 20480;     // N_q
  std::size_t push_per_image = 8;   // N_p
  std::size_t sample_count = 4096;  // K_q
};

/// Fixed-capacity FIFO of detached d-dimensional pixel features.
///
/// Storage is a ring buffer; entries() returns rows oldest first. The bank is
/// single-writer: callers sample before a step's forward pass and push after.
class MemoryBank {
 public:
  MemoryBank(std::size_t depth, MemoryBankConfig config);

  std::size_t size() const { return size_; }
  std::size_t depth() const { return depth_; }
  std::size_t capacity() const { return config_.capacity; }
  const MemoryBankConfig& config() const { return config_; }
  bool empty() const { return size_ == 0; }
  /// Ring position of the next write.
  std::uint64_t cursor() const { return head_; }

  /// Appends n x d rows, evicting the oldest beyond capacity.
  void push_rows(const Tensor& rows);

  /// Picks one of (teacher F1, teacher F2, student F1) uniformly and pushes
  /// N_p of its pixels drawn without replacement.
  void push(const FeatureMap& teacher_f1, const FeatureMap& teacher_f2, const FeatureMap& student_f1,
            std::mt19937_64& rng);

  /// K_q rows: without replacement once the bank holds at least K_q entries,
  /// with replacement before that.
  Tensor sample(std::mt19937_64& rng) const;

  /// All rows, oldest first (size x depth).
  Tensor entries() const;

  /// CDTK tensor of the raw ring storage (size x depth) followed by a u64 cursor.
  void write(std::ostream& os) const;
  static MemoryBank read(std::istream& is, MemoryBankConfig config);

  friend bool operator==(const MemoryBank& a, const MemoryBank& b) {
    return a.depth_ == b.depth_ && a.size_ == b.size_ && a.head_ == b.head_ && a.storage_ == b.storage_;
  }

 private:
  const double* row(std::size_t logical) const;

  std::size_t depth_;
  MemoryBankConfig config_;
  std::vector<double> storage_;  // capacity x depth
  std::size_t size_ = 0;
  std::size_t head_ = 0;
};

}  // namespace hicd
