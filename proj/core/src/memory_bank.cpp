#include "hicd/memory_bank.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

#include "hicd/error.hpp"
#include "hicd/tensor_io.hpp"

namespace hicd {

MemoryBank::MemoryBank(std::size_t depth, MemoryBankConfig config) : depth_(depth), config_(config) {
  if (depth == 0) throw ParameterError("memory bank: depth must be positive");
  if (config.capacity == 0 || config.push_per_image == 0 || config.sample_count == 0) {
    throw ParameterError("memory bank: capacity, push and sample counts must be positive");
  }
  if (config.push_per_image >= config.capacity) {
    throw ParameterError("memory bank: push count must be much smaller than capacity");
  }
  if (config.sample_count > config.capacity) throw ParameterError("memory bank: sample count exceeds capacity");
  storage_.assign(config.capacity * depth, 0.0);
}

const double* MemoryBank::row(std::size_t logical) const {
  // Oldest entry sits at head_ once the ring has wrapped.
  const std::size_t start = size_ == config_.capacity ? head_ : 0;
  return storage_.data() + ((start + logical) % config_.capacity) * depth_;
}

void MemoryBank::push_rows(const Tensor& rows) {
  if (rows.rank() != 2 || rows.dim(1) != depth_) {
    throw DimensionError("memory bank: rows " + shape_to_string(rows.shape()) + " do not have depth " +
                         std::to_string(depth_));
  }
  auto v = rows.values();
  for (std::size_t r = 0; r < rows.dim(0); ++r) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(r * depth_), depth_,
                storage_.begin() + static_cast<std::ptrdiff_t>(head_ * depth_));
    head_ = (head_ + 1) % config_.capacity;
    size_ = std::min(size_ + 1, config_.capacity);
  }
}

void MemoryBank::push(const FeatureMap& teacher_f1, const FeatureMap& teacher_f2, const FeatureMap& student_f1,
                      std::mt19937_64& rng) {
  for (const auto* f : {&teacher_f1, &teacher_f2, &student_f1}) {
    if (f->depth() != depth_) throw DimensionError("memory bank: feature depth mismatch");
  }
  const FeatureMap* choices[] = {&teacher_f1, &teacher_f2, &student_f1};
  const FeatureMap& chosen = *choices[std::uniform_int_distribution<int>(0, 2)(rng)];
  const std::size_t hw = chosen.pixels();
  const std::size_t np = config_.push_per_image;
  if (np > hw) {
    throw ParameterError("memory bank: cannot draw " + std::to_string(np) + " pixels from a map of " +
                         std::to_string(hw));
  }
  // Partial Fisher-Yates: the first np slots are a uniform draw without replacement.
  std::vector<std::size_t> idx(hw);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < np; ++i) {
    std::swap(idx[i], idx[std::uniform_int_distribution<std::size_t>(i, hw - 1)(rng)]);
  }
  auto v = chosen.tensor().values();
  std::vector<double> picked(np * depth_);
  for (std::size_t i = 0; i < np; ++i) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(idx[i] * depth_), depth_,
                picked.begin() + static_cast<std::ptrdiff_t>(i * depth_));
  }
  push_rows(Tensor({np, depth_}, std::move(picked)));
}

Tensor MemoryBank::sample(std::mt19937_64& rng) const {
  if (size_ == 0) throw StateError("memory bank: cannot sample from an empty bank");
  const std::size_t k = config_.sample_count;
  std::vector<std::size_t> pick(k);
  if (size_ >= k) {
    std::vector<std::size_t> idx(size_);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(idx[i], idx[std::uniform_int_distribution<std::size_t>(i, size_ - 1)(rng)]);
    }
    std::copy_n(idx.begin(), k, pick.begin());
  } else {
    std::uniform_int_distribution<std::size_t> any(0, size_ - 1);
    for (auto& p : pick) p = any(rng);
  }
  std::vector<double> out(k * depth_);
  for (std::size_t i = 0; i < k; ++i) {
    std::copy_n(row(pick[i]), depth_, out.begin() + static_cast<std::ptrdiff_t>(i * depth_));
  }
  return Tensor({k, depth_}, std::move(out));
}

Tensor MemoryBank::entries() const {
  if (size_ == 0) throw StateError("memory bank: empty");
  std::vector<double> out(size_ * depth_);
  for (std::size_t i = 0; i < size_; ++i) {
    std::copy_n(row(i), depth_, out.begin() + static_cast<std::ptrdiff_t>(i * depth_));
  }
  return Tensor({size_, depth_}, std::move(out));
}

void MemoryBank::write(std::ostream& os) const {
  if (size_ == 0) throw StateError("memory bank: refusing to serialize an empty bank");
  std::vector<double> raw(storage_.begin(), storage_.begin() + static_cast<std::ptrdiff_t>(size_ * depth_));
  write_cdtk(os, Tensor({size_, depth_}, std::move(raw)));
  write_u64(os, head_);
}

MemoryBank MemoryBank::read(std::istream& is, MemoryBankConfig config) {
  const Tensor raw = read_cdtk(is);
  const std::uint64_t cursor = read_u64(is);
  if (raw.rank() != 2) throw IoError("memory bank: expected a matrix");
  MemoryBank bank(raw.dim(1), config);
  if (raw.dim(0) > config.capacity || cursor >= config.capacity) throw IoError("memory bank: exceeds capacity");
  std::copy(raw.values().begin(), raw.values().end(), bank.storage_.begin());
  bank.size_ = raw.dim(0);
  bank.head_ = static_cast<std::size_t>(cursor);
  return bank;
}

}  // namespace hicd
