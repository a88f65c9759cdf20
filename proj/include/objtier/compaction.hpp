#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "objtier/heap.hpp"

namespace objtier {

inline constexpr int kHistogramBins = 16;

/// Bin i holds the bytes of live small objects whose counter lies in
/// [2^i, 2^(i+1)). Zero counters are not recorded.
struct HotnessHistogram {
  std::array<Bytes, kHistogramBins> bins{};

  static int bin_of(std::uint16_t counter);
  void add(std::uint16_t counter, Bytes size);
  Bytes total() const;
};

/// Objects with counter >= min_hot_counter are hot. min_hot_counter of
/// 2^16 means nothing is hot.
struct CutoffDecision {
  std::optional<int> cutoff_bin;
  std::uint32_t min_hot_counter = 1;

  bool is_hot(std::uint16_t counter) const {
    return counter != 0 && counter >= min_hot_counter;
  }
  /// Every object with a non-zero counter is hot (no cutoff).
  static CutoffDecision all_tracked() { return {}; }
};

/// Walks bins from hottest to coldest accumulating bytes; at the first bin i
/// whose cumulative sum exceeds `fast_budget`, bins i+1 and above are hot.
/// If the budget is never exceeded every tracked object is hot.
CutoffDecision compute_cutoff(const HotnessHistogram& histogram, Bytes fast_budget);

struct RegionStats {
  RegionId region = 0;
  Bytes live_bytes = 0;
  Bytes hot_bytes = 0;
  RegionClass designation = RegionClass::normal;

  double hot_ratio() const {
    return live_bytes ? static_cast<double>(hot_bytes) / static_cast<double>(live_bytes) : 0.0;
  }
};

struct ScanResult {
  HotnessHistogram histogram;
  CutoffDecision cutoff;
  /// One entry per open small region, in region-id order.
  std::vector<RegionStats> regions;
  Bytes live_small_bytes = 0;
  Bytes hot_small_bytes = 0;
};

/// Object-graph scan over live small objects: builds the histogram, then
/// records per-region hot bytes (also written to Region::hot_bytes) using
/// `previous` if given, otherwise the cutoff freshly derived from
/// `fast_budget`.
ScanResult scan_object_graph(Heap& heap, Bytes fast_budget,
                             std::optional<CutoffDecision> previous = std::nullopt);

struct RegionSelection {
  double low_watermark = 0.05;
  double high_watermark = 0.50;
  std::vector<RegionId> selected;
  /// Hot ratio of each selected region at decision time (parallel array).
  std::vector<double> ratios;
  std::vector<Bytes> hot_bytes;
};

/// Normal regions whose hot ratio lies in [low, high]; empty and hot_space
/// regions are never selected.
RegionSelection select_regions(std::span<const RegionStats> stats, double low, double high);

enum class CompactionKind { piggyback, dedicated };
std::string_view to_string(CompactionKind kind);

struct RelocationReport {
  CompactionKind kind = CompactionKind::dedicated;
  std::uint64_t moved_objects = 0;
  Bytes moved_bytes = 0;
  /// Bytes redirected into hot_space.
  Bytes moved_hot_bytes = 0;
  /// Cold bytes consolidated into normal regions (piggyback only).
  Bytes moved_cold_bytes = 0;
  /// Of moved_cold_bytes, objects demoted out of hot_space.
  Bytes demoted_bytes = 0;
  std::uint64_t scanned_regions = 0;
  std::uint64_t freed_regions = 0;
  /// Ids of the regions returned to the free pool, in release order.
  std::vector<RegionId> released;
  /// Sum of scan-time hot bytes over the watermark-selected regions.
  Bytes selected_hot_bytes = 0;
  std::vector<double> source_ratios;
  /// Set when a destination region could not be opened.
  bool truncated = false;
};

struct NormalGcPlan {
  /// Fully evacuated, emptiest first.
  std::vector<RegionId> evacuate;
  /// hot_space regions that only give up their demoted objects.
  std::vector<RegionId> demote;
};

/// Regions a normal (fragmentation-driven) GC pass touches:
///  - regions holding garbage at or below `live_threshold` occupancy are
///    evacuated; for hot_space regions only bytes still above the cutoff
///    count as live,
///  - other hot_space regions holding objects that fell below the cutoff
///    give those objects up,
///  - further normal regions holding garbage are evacuated, most fragmented
///    first, until free regions plus reclaimed space reach `reserve_bytes`.
NormalGcPlan plan_normal_gc(Heap& heap, const CutoffDecision& cutoff, double live_threshold,
                            Bytes reserve_bytes = 0);

/// Hot-object compaction.
///  - dedicated: hot objects in the selected regions move to hot_space; cold
///    objects stay.
///  - piggyback: selected regions and `plan.evacuate` are fully evacuated,
///    hot objects to hot_space and the rest to normal regions; regions in
///    `plan.demote` move their cold objects to normal regions.
/// Emptied source regions are released. Passes that only add live bytes stop,
/// flagging the report truncated, rather than open a region when
/// `reserve_regions` or fewer are free; full evacuations may use the reserve
/// since they free their source.
RelocationReport compact(Heap& heap, const CutoffDecision& cutoff,
                         const RegionSelection& selection,
                         CompactionKind kind = CompactionKind::dedicated,
                         const NormalGcPlan& plan = {}, std::size_t reserve_regions = 0);

/// True iff at least `min_regions` regions were selected.
inline bool maybe_trigger_dedicated_phase(const RegionSelection& selection,
                                             std::size_t min_regions) {
  return selection.selected.size() >= min_regions && !selection.selected.empty();
}

}  // namespace objtier
