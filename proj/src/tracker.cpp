#include "objtier/tracker.hpp"

#include <algorithm>
#include <stdexcept>

namespace objtier {

void TrackerConfig::validate() const {
  if (activation_period < 1) throw std::invalid_argument("activation_period: must be >= 1");
  if (activation_phase >= activation_period) {
    throw std::invalid_argument("activation_phase: must be < activation_period");
  }
  if (!(refresh_ratio > 0.0 && refresh_ratio < 1.0)) {
    throw std::invalid_argument("refresh_ratio: must be in (0,1)");
  }
}

HotnessTracker::HotnessTracker(TrackerConfig config)
    : config_(config), gate_(config.gate()) {
  config_.validate();
}

bool HotnessTracker::on_access(const AccessEvent& ev, Heap& heap,
                               std::span<const SiteKey> delinquent) {
  auto& header = heap.header(ev.object);
  if (!gate_.active(ev.time_ns)) return false;
  if (!std::binary_search(delinquent.begin(), delinquent.end(),
                          SiteKey{ev.site, ev.context})) {
    return false;
  }
  if (!header.increment_hotness()) {
    ++saturated_;
    return false;
  }
  ++increments_;
  return true;
}

void refresh_counters(Heap& heap, double ratio) {
  for (const auto& obj : heap.objects()) {
    if (!obj.live) continue;
    auto& h = heap.header(obj.id);
    if (h.hotness() == 0) continue;
    h.set_hotness(static_cast<std::uint16_t>(decay_count(h.hotness(), ratio)));
  }
}

CasOutcome simulate_header_contention(ObjectHeader& header, bool concurrent_lock_write) {
  const ObjectHeader before = header;
  header.increment_hotness();
  if (concurrent_lock_write) header.set_payload(header.payload() ^ 0b11);
  return classify_cas_failure(before, header);
}

}  // namespace objtier
