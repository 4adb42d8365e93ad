#ifndef MOC3D_FLAT_STACKS_HPP
#define MOC3D_FLAT_STACKS_HPP

#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "moc3d/error.hpp"

namespace moc3d {

// An irregular three-level array Z[i][j][k] unfolded into one contiguous
// payload. Block i holds a variable number of records j, each record holds a
// fixed number c of values k, and
//
//   Z[i][j][k] == payload[offset[i] + j * c + k].
template <class T>
class FlattenedStacks {
 public:
  FlattenedStacks() = default;
  explicit FlattenedStacks(std::size_t record_length) : c_(record_length) {
    if (c_ == 0) throw BoundsError("record length must be positive");
  }

  static FlattenedStacks from_nested(
      const std::vector<std::vector<std::vector<T>>>& nested,
      std::size_t record_length) {
    FlattenedStacks flat(record_length);
    for (const auto& block : nested) {
      flat.begin_block();
      for (const auto& record : block) flat.push_record(record);
    }
    return flat;
  }

  void begin_block() {
    offsets_.push_back(payload_.size());
    counts_.push_back(0);
  }

  void push_record(std::span<const T> record) {
    if (offsets_.empty()) begin_block();
    if (record.size() != c_) {
      throw BoundsError("record length does not match the fixed length c");
    }
    payload_.insert(payload_.end(), record.begin(), record.end());
    ++counts_.back();
  }

  std::size_t num_blocks() const { return offsets_.size(); }
  std::size_t block_size(std::size_t i) const { return counts_[i]; }
  std::size_t record_length() const { return c_; }
  std::span<const std::size_t> offsets() const { return offsets_; }
  std::span<const T> payload() const { return payload_; }

  const T& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return payload_[offsets_[i] + j * c_ + k];
  }

  const T& at(std::size_t i, std::size_t j, std::size_t k) const {
    if (i >= offsets_.size() || j >= counts_[i] || k >= c_) {
      std::ostringstream os;
      os << "flattened index (" << i << ", " << j << ", " << k
         << ") out of range";
      throw BoundsError(os.str());
    }
    return (*this)(i, j, k);
  }

 private:
  std::size_t c_ = 1;
  std::vector<T> payload_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> counts_;
};

}  // namespace moc3d

#endif
