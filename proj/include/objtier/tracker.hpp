#pragma once

#include <cstdint>
#include <span>

#include "objtier/heap.hpp"
#include "objtier/profiler.hpp"
#include "objtier/workload.hpp"

namespace objtier {

/// Enables tracking for one millisecond out of every `period` milliseconds of
/// virtual time.
struct ActivationGate {
  std::uint32_t period = 1;
  std::uint32_t phase = 0;

  bool active(std::uint64_t time_ns) const {
    return (time_ns / 1'000'000) % period == phase;
  }
};

struct TrackerConfig {
  std::uint32_t activation_period = 32;
  std::uint32_t activation_phase = 0;
  double refresh_ratio = 0.5;

  void validate() const;
  ActivationGate gate() const { return {activation_period, activation_phase}; }
};

/// Counts accesses by delinquent sites into the 16-bit header counter of the
/// accessed object.
class HotnessTracker {
 public:
  explicit HotnessTracker(TrackerConfig config);

  /// `delinquent` must be sorted. Returns true when a counter was
  /// incremented. Throws SimError for a dangling object id.
  bool on_access(const AccessEvent& ev, Heap& heap, std::span<const SiteKey> delinquent);

  std::uint64_t increments() const { return increments_; }
  std::uint64_t saturated_skips() const { return saturated_; }
  const TrackerConfig& config() const { return config_; }

 private:
  TrackerConfig config_;
  ActivationGate gate_;
  std::uint64_t increments_ = 0;
  std::uint64_t saturated_ = 0;
};

/// Scales every live object's counter by `ratio` (floor).
void refresh_counters(Heap& heap, double ratio);

enum class CasOutcome { retry, real_conflict };

/// Classifies a failed lock CAS: if the lower 48 header bits are identical
/// before and after the attempt, the failure came from a hotness update and
/// the CAS is retried.
constexpr CasOutcome classify_cas_failure(ObjectHeader before, ObjectHeader after) {
  return before.payload() == after.payload() ? CasOutcome::retry : CasOutcome::real_conflict;
}

/// Replays one failed lock attempt on `header`: a concurrent hotness
/// increment always lands, and `concurrent_lock_write` additionally flips the
/// lock bits. Returns how the locking thread classifies its CAS failure.
CasOutcome simulate_header_contention(ObjectHeader& header, bool concurrent_lock_write);

}  // namespace objtier
