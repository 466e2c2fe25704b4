#include "wsm/rng.hpp"

#include <cmath>

#include "wsm/core_num.hpp"

namespace wsm {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z)
{
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RandomStream RandomStream::substream(std::initializer_list<std::uint64_t> path) const
{
  std::uint64_t k = mix64(key_ ^ 0x6A09E667F3BCC909ULL);
  for (std::uint64_t part : path)
    k = mix64(k + kGamma * (mix64(part) | 1ULL));
  return RandomStream(k);
}

std::uint64_t RandomStream::next_u64()
{
  ++counter_;
  return mix64(key_ + kGamma * counter_);
}

double RandomStream::uniform()
{
  // 53 random bits centred in their cell: (k + 0.5) / 2^53 lies in (0, 1).
  const auto bits = next_u64() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal()
{
  return normal_quantile(uniform());
}

double RandomStream::gumbel()
{
  return -std::log(-std::log(uniform()));
}

}  // namespace wsm
