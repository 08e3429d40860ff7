#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sams {

inline constexpr std::string_view kVersion = "0.1.0";

// Error taxonomy mirrored by the CLI exit codes: config 2, data 3, runtime 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfRegionError : DataError {
  using DataError::DataError;
};

struct RuntimeFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invariant violation inside the engine itself; never expected in normal runs.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

// splitmix64 finalizer; used to derive independent substream seeds
// (per zone, per worker, per episode) from one master seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace sams
