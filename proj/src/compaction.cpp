#include "objtier/compaction.hpp"

#include <algorithm>
#include <bit>

namespace objtier {

int HotnessHistogram::bin_of(std::uint16_t counter) {
  return counter == 0 ? -1 : std::bit_width(counter) - 1;
}

void HotnessHistogram::add(std::uint16_t counter, Bytes size) {
  if (counter == 0) return;
  bins[bin_of(counter)] += size;
}

Bytes HotnessHistogram::total() const {
  Bytes t = 0;
  for (const auto b : bins) t += b;
  return t;
}

CutoffDecision compute_cutoff(const HotnessHistogram& histogram, Bytes fast_budget) {
  Bytes cumulative = 0;
  for (int i = kHistogramBins - 1; i >= 0; --i) {
    cumulative += histogram.bins[i];
    if (cumulative > fast_budget) {
      return {i, std::uint32_t{1} << (i + 1)};
    }
  }
  return CutoffDecision::all_tracked();
}

ScanResult scan_object_graph(Heap& heap, Bytes fast_budget,
                             std::optional<CutoffDecision> previous) {
  ScanResult out;
  for (const auto& obj : heap.objects()) {
    if (!obj.live || obj.large) continue;
    out.histogram.add(obj.header.hotness(), obj.size);
    out.live_small_bytes += obj.size;
  }
  out.cutoff = previous ? *previous : compute_cutoff(out.histogram, fast_budget);

  std::vector<Bytes> hot(heap.region_slots(), 0);
  for (const auto& obj : heap.objects()) {
    if (!obj.live || obj.large) continue;
    if (out.cutoff.is_hot(obj.header.hotness())) {
      hot[obj.region] += obj.size;
      out.hot_small_bytes += obj.size;
    }
  }
  for (const auto& r : heap.regions()) {
    if (r.state != RegionState::small) continue;
    heap.set_hot_bytes(r.id, hot[r.id]);
    out.regions.push_back({r.id, r.live_bytes, hot[r.id], r.designation});
  }
  return out;
}

RegionSelection select_regions(std::span<const RegionStats> stats, double low, double high) {
  RegionSelection sel;
  sel.low_watermark = low;
  sel.high_watermark = high;
  for (const auto& s : stats) {
    if (s.designation == RegionClass::hot_space || s.live_bytes == 0) continue;
    const double ratio = s.hot_ratio();
    if (ratio >= low && ratio <= high) {
      sel.selected.push_back(s.region);
      sel.ratios.push_back(ratio);
      sel.hot_bytes.push_back(s.hot_bytes);
    }
  }
  return sel;
}

std::string_view to_string(CompactionKind kind) {
  return kind == CompactionKind::piggyback ? "piggyback" : "dedicated";
}

NormalGcPlan plan_normal_gc(Heap& heap, const CutoffDecision& cutoff, double live_threshold,
                            Bytes reserve_bytes) {
  std::vector<std::pair<Bytes, RegionId>> forced, optional;
  NormalGcPlan plan;
  const auto limit = [&](const Region& r) {
    return live_threshold * static_cast<double>(r.capacity);
  };
  for (const auto& r : heap.regions()) {
    if (r.state != RegionState::small || r.live_bytes == 0) continue;
    // Only regions filled past their live bytes hold garbage.
    const bool garbage = r.fill_cursor > r.live_bytes;
    if (r.designation == RegionClass::hot_space) {
      Bytes hot = 0;
      for (const ObjectId id : heap.members(r.id)) {
        const auto& o = heap.object(id);
        if (cutoff.is_hot(o.header.hotness())) hot += o.size;
      }
      const bool demoted = hot < r.live_bytes;
      if ((demoted || garbage) && static_cast<double>(hot) <= limit(r)) {
        forced.emplace_back(r.live_bytes, r.id);
      } else if (demoted) {
        plan.demote.push_back(r.id);
      }
      continue;
    }
    if (garbage && static_cast<double>(r.live_bytes) <= limit(r)) {
      forced.emplace_back(r.live_bytes, r.id);
    } else if (garbage) {
      optional.emplace_back(r.live_bytes, r.id);
    }
  }
  std::sort(forced.begin(), forced.end());
  std::sort(optional.begin(), optional.end());

  Bytes projected = static_cast<Bytes>(heap.free_region_count()) * heap.config().region_size;
  for (const auto& [live, id] : forced) {
    plan.evacuate.push_back(id);
    projected += heap.region(id).capacity - live;
  }
  for (const auto& [live, id] : optional) {
    if (projected >= reserve_bytes) break;
    plan.evacuate.push_back(id);
    projected += heap.region(id).capacity - live;
  }
  std::stable_sort(plan.evacuate.begin(), plan.evacuate.end(), [&](RegionId a, RegionId b) {
    return heap.region(a).live_bytes < heap.region(b).live_bytes;
  });
  return plan;
}

namespace {

enum class Move { all, hot, cold };

// Moves the selected members of `r`: hot objects go to hot_space, the rest to
// normal regions. Returns false when no destination could be opened.
bool evacuate(Heap& heap, RegionId r, const CutoffDecision& cutoff, Move which,
              RelocationReport& report, std::size_t reserve) {
  const auto span = heap.members(r);
  const std::vector<ObjectId> members(span.begin(), span.end());
  const bool from_hot_space = heap.region(r).designation == RegionClass::hot_space;
  for (const ObjectId id : members) {
    const auto& obj = heap.object(id);
    const bool hot = cutoff.is_hot(obj.header.hotness());
    if ((which == Move::hot && !hot) || (which == Move::cold && hot)) continue;
    const Bytes size = obj.size;
    const auto cls = hot ? RegionClass::hot_space : RegionClass::normal;
    const auto cur = heap.cursor(cls);
    const bool opens = !cur || heap.free_bytes(*cur) < size || *cur == obj.region;
    if (opens && heap.free_region_count() <= reserve) return false;
    try {
      heap.relocate_to_class(id, cls);
    } catch (const HeapExhausted&) {
      return false;
    }
    ++report.moved_objects;
    report.moved_bytes += size;
    if (hot) {
      report.moved_hot_bytes += size;
    } else {
      report.moved_cold_bytes += size;
      if (from_hot_space) report.demoted_bytes += size;
    }
  }
  return true;
}

}  // namespace

RelocationReport compact(Heap& heap, const CutoffDecision& cutoff,
                         const RegionSelection& selection, CompactionKind kind,
                         const NormalGcPlan& plan, std::size_t reserve_regions) {
  RelocationReport report;
  report.kind = kind;
  report.source_ratios = selection.ratios;
  for (const auto b : selection.hot_bytes) report.selected_hot_bytes += b;

  const bool dedicated = kind == CompactionKind::dedicated;
  std::vector<RegionId> sources = selection.selected;
  std::vector<RegionId> demote;
  if (!dedicated) {
    for (const RegionId r : plan.evacuate) {
      if (std::find(sources.begin(), sources.end(), r) == sources.end()) sources.push_back(r);
    }
    // Emptiest first so freed regions become destinations early.
    std::stable_sort(sources.begin(), sources.end(), [&](RegionId a, RegionId b) {
      return heap.region(a).live_bytes < heap.region(b).live_bytes;
    });
    for (const RegionId r : plan.demote) {
      if (std::find(sources.begin(), sources.end(), r) == sources.end()) demote.push_back(r);
    }
  }
  for (const auto cls : {RegionClass::normal, RegionClass::hot_space}) {
    const auto cur = heap.cursor(cls);
    if (cur && std::find(sources.begin(), sources.end(), *cur) != sources.end()) {
      heap.retire_cursor(cls);
    }
  }

  const auto release_if_empty = [&](RegionId r) {
    if (heap.region(r).state == RegionState::small && heap.region(r).live_bytes == 0) {
      heap.release_region(r);
      ++report.freed_regions;
      report.released.push_back(r);
    }
  };
  for (const RegionId r : sources) {
    ++report.scanned_regions;
    const bool ok = evacuate(heap, r, cutoff, dedicated ? Move::hot : Move::all, report,
                             dedicated ? reserve_regions : 0);
    release_if_empty(r);
    if (!ok) {
      report.truncated = true;
      return report;
    }
  }
  for (const RegionId r : demote) {
    ++report.scanned_regions;
    const bool ok = evacuate(heap, r, cutoff, Move::cold, report, reserve_regions);
    release_if_empty(r);
    if (!ok) {
      report.truncated = true;
      return report;
    }
  }
  return report;
}

}  // namespace objtier
