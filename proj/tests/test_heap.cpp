#include <doctest.h>

#include <algorithm>
#include <map>

#include "objtier/heap.hpp"
#include "objtier/rng.hpp"

using namespace objtier;

namespace {

HeapConfig small_heap(Bytes regions = 8, Bytes page = 4 * kKiB) {
  return {.region_size = 2 * kMiB, .page_size = page, .capacity = regions * 2 * kMiB};
}

}  // namespace

TEST_CASE("header keeps payload and counter apart") {
  auto h = ObjectHeader::make(0x0000'1234'5678'9abcULL, 7);
  CHECK(h.payload() == 0x0000'1234'5678'9abcULL);
  CHECK(h.hotness() == 7);
  h.set_hotness(0xFFFF);
  CHECK(h.payload() == 0x0000'1234'5678'9abcULL);
  CHECK_FALSE(h.increment_hotness());
  CHECK(h.hotness() == 0xFFFF);
  h.set_payload(~0ULL);
  CHECK(h.hotness() == 0xFFFF);
  CHECK(h.payload() == ObjectHeader::kPayloadMask);
}

TEST_CASE("allocate bumps within a region") {
  Heap heap(small_heap());
  const auto a = heap.allocate(256);
  CHECK(a.offset == 0);
  CHECK(heap.region(a.region).fill_cursor == 256);
  const auto b = heap.allocate(256);
  CHECK(b.region == a.region);
  CHECK(b.offset == 256);
  CHECK(heap.region(a.region).live_bytes == 512);
}

TEST_CASE("allocate opens a new region when the current one is full") {
  Heap heap(small_heap());
  const RegionId first = heap.allocate(4000).region;
  while (heap.free_bytes(first) >= 4000) heap.allocate(4000);
  const auto b = heap.allocate(4000);
  CHECK(b.region != first);
  CHECK(b.offset == 0);
  CHECK(heap.region(first).live_bytes == heap.region(first).fill_cursor);
}

TEST_CASE("hot_space and normal allocations use different regions") {
  Heap heap(small_heap());
  const auto a = heap.allocate(64, RegionClass::normal);
  const auto b = heap.allocate(64, RegionClass::hot_space);
  CHECK(a.region != b.region);
  CHECK(heap.region(b.region).designation == RegionClass::hot_space);
}

TEST_CASE("objects above the threshold become large objects") {
  Heap heap(small_heap());
  const auto& big = heap.allocate(5 * kMiB);
  CHECK(big.large);
  CHECK(big.offset == 0);
  const auto pages = heap.page_span(big.id);
  CHECK(pages.size() == 5 * kMiB / (4 * kKiB));
  CHECK(pages.front() == heap.address(big.id) / (4 * kKiB));
  // 4 KB exactly is still small.
  CHECK_FALSE(heap.allocate(4 * kKiB).large);
  CHECK(heap.allocate(4 * kKiB + 1).large);
}

TEST_CASE("relocate preserves id and header") {
  Heap heap(small_heap());
  const ObjectId id = heap.allocate(256).id;
  heap.header(id) = ObjectHeader::make(0xABCDEF, 9);
  const RegionId src = heap.object(id).region;
  const auto& moved = heap.relocate_to_class(id, RegionClass::hot_space);
  CHECK(moved.id == id);
  CHECK(moved.header.hotness() == 9);
  CHECK(moved.header.payload() == 0xABCDEF);
  CHECK(heap.region(moved.region).designation == RegionClass::hot_space);
  CHECK(heap.region(src).live_bytes == 0);
  heap.check_invariants();
}

TEST_CASE("relocate rejects large objects") {
  Heap heap(small_heap());
  const ObjectId big = heap.allocate(5 * kMiB).id;
  const RegionId dest = heap.open_region(RegionClass::hot_space);
  CHECK_THROWS_AS(heap.relocate(big, dest), SimError);
  CHECK_THROWS_AS(heap.relocate_to_class(big, RegionClass::hot_space), SimError);
}

TEST_CASE("relocate accounting") {
  Heap heap(small_heap());
  ObjectId ids[4];
  for (auto& id : ids) id = heap.allocate(256).id;
  const RegionId src = heap.object(ids[0]).region;
  CHECK(heap.region(src).live_bytes == 1024);
  const RegionId dest = heap.open_region(RegionClass::hot_space);
  heap.relocate(ids[1], dest);
  CHECK(heap.region(src).live_bytes == 768);
  CHECK(heap.region(dest).live_bytes == 256);
  CHECK(heap.region(dest).fill_cursor == 256);
}

TEST_CASE("relocate into a full region is rejected") {
  Heap heap(small_heap());
  const ObjectId id = heap.allocate(256).id;
  const RegionId dest = heap.open_region(RegionClass::hot_space);
  while (heap.free_bytes(dest) >= 4000) heap.allocate(4000, RegionClass::hot_space);
  heap.allocate(heap.free_bytes(dest), RegionClass::hot_space);
  CHECK(heap.free_bytes(dest) == 0);
  CHECK_THROWS_AS(heap.relocate(id, dest), SimError);
}

TEST_CASE("address_of maps regions to pages") {
  SUBCASE("4 KB pages") {
    Heap heap(small_heap());
    const ObjectId a = heap.allocate(5000).id;  // large, region 0
    const ObjectId b = heap.allocate(256).id;
    (void)a;
    CHECK(heap.address_of(b, 0).page == heap.address(b) / (4 * kKiB));
    Heap h2(small_heap());
    const ObjectId first = h2.allocate(4000).id;
    const ObjectId second = h2.allocate(1000).id;
    const ObjectId third = h2.allocate(100).id;
    CHECK(h2.address_of(first) == PageCoord{0, 0});
    CHECK(h2.object(third).offset == 5000);
    CHECK(h2.address_of(third) == PageCoord{1, 904});
    CHECK(h2.address_of(second, 0).page == 0);
  }
  SUBCASE("2 MB pages") {
    Heap heap(small_heap(8, 2 * kMiB));
    for (int r = 0; r < 3; ++r) heap.allocate(2 * kMiB - 10);
    const ObjectId id = heap.allocate(256).id;
    CHECK(heap.object(id).region == 3);
    CHECK(heap.object(id).offset == 0);
    CHECK(heap.address_of(id) == PageCoord{3, 0});
  }
}

TEST_CASE("heap exhaustion is reported") {
  Heap heap(small_heap(2));
  heap.allocate(2 * kMiB - 1);
  heap.allocate(2 * kMiB - 1);
  CHECK_THROWS_AS(heap.allocate(64), HeapExhausted);
  CHECK_THROWS_AS(heap.allocate(0), SimError);
}

TEST_CASE("invalid heap configurations are rejected") {
  CHECK_THROWS_AS(Heap(HeapConfig{.capacity = kMiB}), SimError);
  CHECK_THROWS_AS(Heap(HeapConfig{.page_size = 3000, .capacity = 4 * kMiB}), SimError);
}

TEST_CASE("free and release regions") {
  Heap heap(small_heap());
  const ObjectId a = heap.allocate(256).id;
  const RegionId r = heap.object(a).region;
  CHECK_THROWS_AS(heap.release_region(r), SimError);
  heap.free_object(a);
  CHECK_FALSE(heap.contains(a));
  CHECK_THROWS_AS(heap.header(a), SimError);
  const auto before = heap.free_region_count();
  heap.release_region(r);
  CHECK(heap.free_region_count() == before + 1);
  heap.check_invariants();
}

TEST_CASE("random relocation batches keep heap invariants and headers") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    Heap heap(small_heap(24));
    std::vector<ObjectId> ids;
    for (int i = 0; i < 3000; ++i) {
      const Bytes size = 16 + rng.below(4096 - 16);
      const auto cls = rng.below(4) == 0 ? RegionClass::hot_space : RegionClass::normal;
      const ObjectId id = heap.allocate(size, cls).id;
      heap.header(id) = ObjectHeader::make(rng.next_u64(), static_cast<std::uint16_t>(rng.below(65536)));
      ids.push_back(id);
    }
    std::map<ObjectId, std::uint64_t> headers;
    for (const auto id : ids) headers[id] = heap.object(id).header.raw();

    for (int batch = 0; batch < 10; ++batch) {
      for (int k = 0; k < 200; ++k) {
        const ObjectId id = ids[rng.below(ids.size())];
        const auto cls = rng.below(2) ? RegionClass::hot_space : RegionClass::normal;
        if (heap.cursor(cls) == heap.object(id).region) continue;
        heap.relocate_to_class(id, cls);
      }
      heap.check_invariants();
      for (const auto id : ids) REQUIRE(heap.object(id).header.raw() == headers[id]);
      // Every region's member list names exactly its resident objects.
      Bytes listed = 0;
      for (RegionId r = 0; r < heap.region_slots(); ++r) {
        if (heap.region(r).state != RegionState::small) continue;
        Bytes sum = 0;
        for (const auto m : heap.members(r)) {
          REQUIRE(heap.object(m).region == r);
          sum += heap.object(m).size;
        }
        REQUIRE(sum == heap.region(r).live_bytes);
        listed += sum;
      }
      CHECK(listed == heap.live_small_bytes());
    }
  }
}
