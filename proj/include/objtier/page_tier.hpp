#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "objtier/heap.hpp"
#include "objtier/workload.hpp"

namespace objtier {

struct MigrationReport {
  std::uint64_t promoted_pages = 0;
  std::uint64_t demoted_pages = 0;
  Bytes moved_bytes = 0;
};

/// Generic sampled top-k page tiering backend. Pages start slow-resident.
class TierState {
 public:
  TierState(PageId page_count, Bytes page_size, Bytes fast_capacity);

  void record_sample(PageId page);
  /// Scales every page count by `ratio` (floor).
  void decay(double ratio);

  /// Ranks pages by (count desc, id asc) and makes the top ones fast up to
  /// capacity. Pages with a zero count are never promoted; fast pages with a
  /// zero count stay fast while capacity allows.
  MigrationReport migrate_epoch();

  /// Drops the pages [first, first + count): their counts are cleared and
  /// fast residency is given up, as when a region is uncommitted.
  void release_pages(PageId first, PageId count);

  bool is_fast(PageId page) const { return fast_[page] != 0; }
  std::uint32_t count(PageId page) const { return counts_[page]; }
  PageId page_count() const { return counts_.size(); }
  Bytes page_size() const { return page_size_; }
  std::uint64_t capacity_pages() const { return capacity_pages_; }
  std::uint64_t fast_pages() const { return fast_pages_; }
  Bytes fast_bytes() const { return fast_pages_ * page_size_; }

 private:
  Bytes page_size_;
  std::uint64_t capacity_pages_;
  std::uint64_t fast_pages_ = 0;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint8_t> fast_;
};

enum class OracleUnit { object, page4k, page2m };
std::string_view to_string(OracleUnit unit);
/// Accepts "object", "4k", "2m". Throws std::invalid_argument otherwise.
OracleUnit parse_oracle_unit(std::string_view name);

/// Static address layout of the objects a trace refers to.
struct ObjectExtent {
  Bytes address = 0;
  Bytes size = 0;
  bool large = false;
};

class AddressMap {
 public:
  static AddressMap from_heap(const Heap& heap);
  /// Objects 0..count-1 of `size` bytes laid out back to back.
  static AddressMap uniform(std::uint64_t count, Bytes size, Bytes large_threshold = 4 * kKiB);
  /// CSV `object,address,size` with an optional `# heap_capacity,<bytes>` line.
  static AddressMap read_csv(std::istream& in);
  void write_csv(std::ostream& out) const;

  const ObjectExtent& at(ObjectId id) const;
  std::size_t size() const { return extents_.size(); }
  /// Heap capacity the layout came from; 0 when unknown.
  Bytes heap_capacity() const { return heap_capacity_; }
  Bytes footprint() const;

 private:
  std::vector<ObjectExtent> extents_;
  std::vector<std::uint8_t> present_;
  Bytes heap_capacity_ = 0;
};

struct UnitKey {
  std::uint64_t id = 0;
  Bytes size = 0;
};

/// Relocation unit an access falls in. At object granularity large objects
/// are split into 4 KB pages, since they are page managed.
UnitKey unit_of(const AddressMap& map, const AccessEvent& ev, OracleUnit unit);

/// Offline greedy placement: count accesses per unit, then fill the fast tier
/// with units in (count desc, id asc) order until the first unit that does not
/// fit.
class OraclePlacement {
 public:
  void count(const UnitKey& unit);
  void place(Bytes capacity);
  bool is_fast(std::uint64_t unit_id) const { return fast_.contains(unit_id); }

  std::uint64_t events() const { return events_; }
  std::size_t units() const { return counts_.size(); }
  std::size_t placed_units() const { return fast_.size(); }
  Bytes placed_bytes() const { return placed_bytes_; }

 private:
  std::unordered_map<std::uint64_t, std::pair<std::uint64_t, Bytes>> counts_;
  std::unordered_set<std::uint64_t> fast_;
  std::uint64_t events_ = 0;
  Bytes placed_bytes_ = 0;
};

struct OracleResult {
  double hit_ratio = 0.0;
  std::uint64_t events = 0;
  std::uint64_t hits = 0;
  std::size_t placed_units = 0;
  Bytes placed_bytes = 0;
};

/// Two passes over `trace`: count, place, then score every event.
OracleResult oracle_placement(std::span<const AccessEvent> trace, const AddressMap& map,
                              OracleUnit unit, Bytes capacity);

}  // namespace objtier
