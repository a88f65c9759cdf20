#include <doctest.h>

#include <map>

#include "objtier/compaction.hpp"
#include "oracles.hpp"

using namespace objtier;
using objtier::testing::floor_log2;
using objtier::testing::greedy_fill;
using objtier::testing::random_population;

namespace {

Heap make_heap(Bytes regions = 16) {
  return Heap(HeapConfig{.capacity = regions * 2 * kMiB});
}

ObjectId put(Heap& heap, Bytes size, std::uint16_t counter,
             RegionClass cls = RegionClass::normal) {
  const ObjectId id = heap.allocate(size, cls).id;
  heap.header(id) = ObjectHeader::make(0xC1A55 + id, counter);
  return id;
}

Bytes hot_space_live(const Heap& heap) {
  Bytes sum = 0;
  for (const auto& r : heap.regions()) {
    if (r.state == RegionState::small && r.designation == RegionClass::hot_space) {
      sum += r.live_bytes;
    }
  }
  return sum;
}

RegionSelection select_one(RegionId r, double ratio = 0.3, Bytes hot = 0) {
  RegionSelection sel;
  sel.selected = {r};
  sel.ratios = {ratio};
  sel.hot_bytes = {hot};
  return sel;
}

}  // namespace

TEST_CASE("histogram bin rule") {
  CHECK(HotnessHistogram::bin_of(0) == -1);
  CHECK(HotnessHistogram::bin_of(1) == 0);
  CHECK(HotnessHistogram::bin_of(3) == 1);
  CHECK(HotnessHistogram::bin_of(4) == 2);
  CHECK(HotnessHistogram::bin_of(65535) == 15);
  for (std::uint32_t c = 1; c < 65536; ++c) {
    REQUIRE(HotnessHistogram::bin_of(static_cast<std::uint16_t>(c)) == floor_log2(c));
  }
}

TEST_CASE("scan example histogram") {
  auto heap = make_heap();
  for (const std::uint16_t c : {1, 1, 2, 4}) put(heap, 256, c);
  const auto big = heap.allocate(8 * kKiB).id;
  heap.header(big).set_hotness(100);
  const auto scan = scan_object_graph(heap, 1 * kMiB);
  CHECK(scan.histogram.bins[0] == 512);
  CHECK(scan.histogram.bins[1] == 256);
  CHECK(scan.histogram.bins[2] == 256);
  CHECK(scan.histogram.total() == 1024);

  auto cold = make_heap();
  for (int i = 0; i < 10; ++i) put(cold, 256, 0);
  CHECK(scan_object_graph(cold, kMiB).histogram.total() == 0);
}

TEST_CASE("histogram totals match direct enumeration") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    auto heap = make_heap(32);
    random_population(heap, rng, 5000);
    std::map<int, Bytes> brute;
    Bytes total = 0;
    for (const auto& o : heap.objects()) {
      if (!o.live || o.large || o.header.hotness() == 0) continue;
      brute[floor_log2(o.header.hotness())] += o.size;
      total += o.size;
    }
    const auto scan = scan_object_graph(heap, 4 * kMiB);
    REQUIRE(scan.histogram.total() == total);
    for (int b = 0; b < kHistogramBins; ++b) REQUIRE(scan.histogram.bins[b] == brute[b]);
  }
}

TEST_CASE("cutoff examples") {
  HotnessHistogram h;
  h.bins[0] = h.bins[1] = h.bins[2] = 60;
  const auto d = compute_cutoff(h, 100);
  REQUIRE(d.cutoff_bin.has_value());
  CHECK(*d.cutoff_bin == 1);
  CHECK(d.min_hot_counter == 4);
  CHECK(d.is_hot(4));
  CHECK_FALSE(d.is_hot(3));

  const auto all = compute_cutoff(h, 180);
  CHECK_FALSE(all.cutoff_bin.has_value());
  CHECK(all.is_hot(1));
  CHECK_FALSE(all.is_hot(0));

  const auto none = compute_cutoff(HotnessHistogram{}, 0);
  for (std::uint32_t c = 0; c < 65536; c += 97) CHECK(none.is_hot(static_cast<std::uint16_t>(c)) == (c > 0));

  HotnessHistogram top;
  top.bins[15] = 1000;
  const auto empty = compute_cutoff(top, 999);
  CHECK(*empty.cutoff_bin == 15);
  CHECK_FALSE(empty.is_hot(65535));
}

TEST_CASE("cutoff hot set matches the greedy fill at bin granularity") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto heap = make_heap(32);
    random_population(heap, rng, 1 + rng.below(5000));
    const Bytes budget = rng.below(heap.live_small_bytes() + 1);
    const auto scan = scan_object_graph(heap, budget);
    const auto greedy = greedy_fill(heap, budget);
    CHECK(scan.hot_small_bytes <= budget);
    const int boundary = greedy.boundary_counter ? floor_log2(greedy.boundary_counter) : -1;
    for (const auto& o : heap.objects()) {
      if (!o.live || o.large) continue;
      const auto c = o.header.hotness();
      const bool hot = scan.cutoff.is_hot(c);
      if (c == 0) {
        REQUIRE_FALSE(hot);
      } else if (floor_log2(c) > boundary) {
        REQUIRE(hot);
      } else {
        REQUIRE_FALSE(hot);
      }
    }
  }
}

TEST_CASE("region selection examples") {
  const std::vector<RegionStats> stats{
      {0, 1000, 300, RegionClass::normal},  {1, 1000, 20, RegionClass::normal},
      {2, 1000, 600, RegionClass::normal},  {3, 1000, 50, RegionClass::normal},
      {4, 1000, 500, RegionClass::normal},  {5, 0, 0, RegionClass::normal},
      {6, 1000, 300, RegionClass::hot_space}};
  const auto sel = select_regions(stats, 0.05, 0.5);
  CHECK(sel.selected == std::vector<RegionId>{0, 3, 4});
  CHECK(sel.ratios == std::vector<double>{0.3, 0.05, 0.5});
  CHECK(sel.hot_bytes == std::vector<Bytes>{300, 50, 500});
}

TEST_CASE("dedicated compaction moves hot objects only") {
  auto heap = make_heap();
  std::vector<ObjectId> hot;
  std::vector<ObjectId> cold;
  for (int i = 0; i < 8; ++i) {
    const bool is_hot = i % 3 == 0;
    const ObjectId id = put(heap, 100 + 10 * static_cast<Bytes>(i), is_hot ? 50 : 1);
    (is_hot ? hot : cold).push_back(id);
  }
  REQUIRE(hot.size() == 3);
  const RegionId src = heap.object(hot[0]).region;
  CutoffDecision cut{3, 16};
  const Bytes before = hot_space_live(heap);
  const auto headers = [&] {
    std::vector<std::uint64_t> h;
    for (const auto& o : heap.objects()) h.push_back(o.header.raw());
    return h;
  }();
  const auto report = compact(heap, cut, select_one(src));
  Bytes hot_size = 0;
  for (const auto id : hot) {
    hot_size += heap.object(id).size;
    CHECK(heap.region(heap.object(id).region).designation == RegionClass::hot_space);
  }
  for (const auto id : cold) CHECK(heap.object(id).region == src);
  CHECK(report.moved_objects == 3);
  CHECK(report.moved_bytes == hot_size);
  CHECK(report.moved_hot_bytes == hot_size);
  CHECK(report.moved_cold_bytes == 0);
  CHECK(report.scanned_regions == 1);
  CHECK_FALSE(report.truncated);
  CHECK(hot_space_live(heap) - before == report.moved_bytes);
  std::vector<std::uint64_t> after;
  for (const auto& o : heap.objects()) after.push_back(o.header.raw());
  CHECK(after == headers);
  heap.check_invariants();
}

TEST_CASE("empty selection leaves the heap unchanged") {
  auto heap = make_heap();
  for (int i = 0; i < 100; ++i) put(heap, 200, static_cast<std::uint16_t>(i));
  const auto before = std::vector<ObjectRecord>(heap.objects().begin(), heap.objects().end());
  const auto report = compact(heap, CutoffDecision{}, RegionSelection{});
  CHECK(report.moved_objects == 0);
  CHECK(report.moved_bytes == 0);
  CHECK(report.scanned_regions == 0);
  CHECK(report.freed_regions == 0);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(heap.objects()[i].region == before[i].region);
    CHECK(heap.objects()[i].offset == before[i].offset);
  }
}

TEST_CASE("piggyback compaction evacuates and releases the source") {
  auto heap = make_heap();
  std::vector<ObjectId> ids;
  for (int i = 0; i < 20; ++i) ids.push_back(put(heap, 512, i % 4 == 0 ? 40 : 2));
  const RegionId src = heap.object(ids[0]).region;
  heap.free_object(ids[1]);
  const auto report =
      compact(heap, CutoffDecision{4, 32}, select_one(src), CompactionKind::piggyback);
  CHECK(heap.region(src).state == RegionState::free);
  CHECK(report.freed_regions == 1);
  CHECK(report.moved_hot_bytes == 5 * 512);
  CHECK(report.moved_cold_bytes == 14 * 512);
  CHECK(report.moved_bytes == report.moved_hot_bytes + report.moved_cold_bytes);
  for (const auto id : ids) {
    if (!heap.contains(id)) continue;
    const bool hot = heap.object(id).header.hotness() >= 32;
    CHECK(heap.region(heap.object(id).region).designation ==
          (hot ? RegionClass::hot_space : RegionClass::normal));
  }
  heap.check_invariants();
}

TEST_CASE("normal GC plan") {
  auto heap = make_heap();
  // Region A: half garbage. Region B: full, no garbage.
  std::vector<ObjectId> a;
  while (heap.cursor(RegionClass::normal) == std::nullopt ||
         heap.free_bytes(*heap.cursor(RegionClass::normal)) >= 4000) {
    a.push_back(put(heap, 4000, 1));
  }
  const RegionId ra = heap.object(a[0]).region;
  for (std::size_t i = 0; i < a.size(); i += 2) heap.free_object(a[i]);
  heap.retire_cursor(RegionClass::normal);
  std::vector<ObjectId> b;
  for (int i = 0; i < 100; ++i) b.push_back(put(heap, 4000, 1));
  const RegionId rb = heap.object(b[0]).region;
  // A hot_space region whose only object fell below the cutoff.
  const ObjectId demoted = put(heap, 256, 1, RegionClass::hot_space);
  const RegionId rh = heap.object(demoted).region;
  heap.retire_cursor(RegionClass::hot_space);
  // A hot_space region that stays mostly hot around one demoted object.
  const ObjectId straggler = put(heap, 256, 1, RegionClass::hot_space);
  const RegionId rm = heap.object(straggler).region;
  std::vector<ObjectId> hot;
  while (heap.cursor(RegionClass::hot_space) == rm && heap.free_bytes(rm) >= 4000) {
    hot.push_back(put(heap, 4000, 100, RegionClass::hot_space));
  }
  REQUIRE(rm != rh);

  const auto has = [](const std::vector<RegionId>& v, RegionId r) {
    return std::find(v.begin(), v.end(), r) != v.end();
  };
  const auto plan = plan_normal_gc(heap, CutoffDecision{2, 8}, 0.75);
  CHECK(has(plan.evacuate, ra));
  CHECK_FALSE(has(plan.evacuate, rb));
  CHECK(has(plan.evacuate, rh));
  CHECK_FALSE(has(plan.evacuate, rm));
  CHECK(plan.demote == std::vector<RegionId>{rm});
  // Emptiest first.
  CHECK(plan.evacuate.front() == rh);

  const auto tight = plan_normal_gc(heap, CutoffDecision{}, 0.0);
  CHECK(tight.evacuate.empty());
  CHECK(tight.demote.empty());
  // A large free reserve pulls in the remaining garbage-holding regions.
  heap.free_object(b[0]);
  const auto reserve = plan_normal_gc(heap, CutoffDecision{}, 0.0, heap.capacity());
  CHECK(has(reserve.evacuate, rb));

  const auto report = compact(heap, CutoffDecision{2, 8}, RegionSelection{},
                              CompactionKind::piggyback, plan);
  CHECK_FALSE(report.truncated);
  CHECK(report.demoted_bytes == 512);
  CHECK(heap.region(heap.object(demoted).region).designation == RegionClass::normal);
  CHECK(heap.region(heap.object(straggler).region).designation == RegionClass::normal);
  for (const auto id : hot) CHECK(heap.object(id).region == rm);
  heap.check_invariants();
}

TEST_CASE("dedicated phases stop at the relocation reserve") {
  auto heap = make_heap(4);
  std::vector<ObjectId> ids;
  for (int i = 0; i < 40; ++i) ids.push_back(put(heap, 1000, 100));
  const RegionId src = heap.object(ids[0]).region;
  const auto free_before = heap.free_region_count();
  const auto report = compact(heap, CutoffDecision{5, 64}, select_one(src),
                              CompactionKind::dedicated, {}, free_before);
  CHECK(report.truncated);
  CHECK(report.moved_bytes == 0);
  CHECK(heap.free_region_count() == free_before);
}

TEST_CASE("random compaction passes: accounting, containment, idempotence, density") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    auto heap = make_heap(64);
    random_population(heap, rng, 8000, 0.1);
    std::map<ObjectId, std::uint64_t> headers;
    for (const auto& o : heap.objects()) {
      if (o.live) headers[o.id] = o.header.raw();
    }
    const Bytes budget = heap.live_small_bytes() / (2 + rng.below(8));
    const auto scan = scan_object_graph(heap, budget);
    const auto sel = select_regions(scan.regions, 0.05, 0.5);
    const Bytes hs_before = hot_space_live(heap);
    const auto report = compact(heap, scan.cutoff, sel);
    heap.check_invariants();

    for (const double r : report.source_ratios) {
      REQUIRE(r >= 0.05);
      REQUIRE(r <= 0.5);
    }
    REQUIRE(report.moved_bytes <= report.selected_hot_bytes);
    if (!report.truncated) REQUIRE(report.moved_bytes == report.selected_hot_bytes);
    REQUIRE(hot_space_live(heap) - hs_before == report.moved_bytes);
    for (const auto& [id, raw] : headers) REQUIRE(heap.object(id).header.raw() == raw);

    // Rerun with unchanged counters: sources now fall below the low mark.
    const auto again = scan_object_graph(heap, budget, scan.cutoff);
    const auto sel2 = select_regions(again.regions, 0.05, 0.5);
    for (const auto r : sel2.selected) {
      REQUIRE(heap.region(r).designation == RegionClass::normal);
      REQUIRE(std::find(sel.selected.begin(), sel.selected.end(), r) == sel.selected.end());
    }
    const auto report2 = compact(heap, scan.cutoff, sel2);
    CHECK(report2.moved_bytes == 0);

    // hot_space holds hot objects only; at most one partially filled tail.
    Bytes hs_live = 0;
    Bytes hs_hot = 0;
    for (const auto& rs : again.regions) {
      if (rs.designation != RegionClass::hot_space) continue;
      REQUIRE(rs.hot_bytes == rs.live_bytes);
      hs_live += rs.live_bytes;
      hs_hot += rs.hot_bytes;
    }
    if (hs_live) CHECK(static_cast<double>(hs_hot) / hs_live >= 0.5);
  }
}

TEST_CASE("dedicated phase trigger") {
  RegionSelection sel;
  CHECK_FALSE(maybe_trigger_dedicated_phase(sel, 1));
  CHECK_FALSE(maybe_trigger_dedicated_phase(sel, 0));
  sel.selected = {1, 2, 3, 4, 5};
  CHECK(maybe_trigger_dedicated_phase(sel, 1));
  CHECK_FALSE(maybe_trigger_dedicated_phase(sel, 10));
}
