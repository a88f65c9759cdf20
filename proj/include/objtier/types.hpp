#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace objtier {

using ObjectId = std::uint32_t;
using RegionId = std::uint32_t;
using PageId = std::uint64_t;
using Bytes = std::uint64_t;

inline constexpr Bytes kKiB = 1024;
inline constexpr Bytes kMiB = 1024 * kKiB;

/// Raised when the simulated system reaches a state it cannot continue from
/// (heap exhausted, dangling object id, violated invariant).
class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HeapExhausted : public SimError {
 public:
  using SimError::SimError;
};

}  // namespace objtier
