#pragma once

#include <cstdint>
#include <initializer_list>

namespace wsm {

/// Counter-based random stream. Each output is a bijective 64-bit mix of
/// (key + counter * golden gamma), so a stream is fully determined by its key
/// and substreams derived from distinct key paths are independent of the order
/// in which they are consumed.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t key) : key_(key) {}

  /// Key of the substream reached by hashing `path` into this stream's key.
  RandomStream substream(std::initializer_list<std::uint64_t> path) const;

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform();

  /// Standard normal via high-accuracy inverse CDF.
  double normal();

  /// Standard Gumbel (location 0, scale 1).
  double gumbel();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace wsm
