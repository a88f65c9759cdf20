#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "objtier/types.hpp"

namespace objtier {

/// 64-bit object header. The lower 48 bits are opaque lock/class metadata;
/// the upper 16 bits hold the saturating hotness counter.
class ObjectHeader {
 public:
  static constexpr std::uint64_t kPayloadMask = (std::uint64_t{1} << 48) - 1;
  static constexpr int kHotnessShift = 48;
  static constexpr std::uint16_t kMaxHotness = 0xFFFF;

  constexpr ObjectHeader() = default;
  constexpr explicit ObjectHeader(std::uint64_t raw) : raw_(raw) {}

  static constexpr ObjectHeader make(std::uint64_t payload, std::uint16_t hotness) {
    return ObjectHeader((payload & kPayloadMask) |
                        (static_cast<std::uint64_t>(hotness) << kHotnessShift));
  }

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr std::uint64_t payload() const { return raw_ & kPayloadMask; }
  constexpr std::uint16_t hotness() const {
    return static_cast<std::uint16_t>(raw_ >> kHotnessShift);
  }

  constexpr void set_hotness(std::uint16_t value) {
    raw_ = payload() | (static_cast<std::uint64_t>(value) << kHotnessShift);
  }
  constexpr void set_payload(std::uint64_t payload) {
    raw_ = (raw_ & ~kPayloadMask) | (payload & kPayloadMask);
  }

  /// Saturating increment. Returns false (and leaves the header untouched)
  /// when the counter is already at its limit.
  constexpr bool increment_hotness() {
    const auto h = hotness();
    if (h == kMaxHotness) return false;
    set_hotness(static_cast<std::uint16_t>(h + 1));
    return true;
  }

  friend constexpr bool operator==(ObjectHeader, ObjectHeader) = default;

 private:
  std::uint64_t raw_ = 0;
};

enum class RegionClass : std::uint8_t { normal, hot_space };
enum class RegionState : std::uint8_t { free, small, large };

struct ObjectRecord {
  ObjectId id = 0;
  Bytes size = 0;
  ObjectHeader header;
  /// For large objects: first region of the span.
  RegionId region = 0;
  Bytes offset = 0;
  bool large = false;
  bool live = false;
};

struct Region {
  RegionId id = 0;
  Bytes capacity = 0;
  Bytes live_bytes = 0;
  /// Bytes of objects classified hot by the most recent scan.
  Bytes hot_bytes = 0;
  RegionClass designation = RegionClass::normal;
  RegionState state = RegionState::free;
  Bytes fill_cursor = 0;
};

struct PageCoord {
  PageId page = 0;
  Bytes offset = 0;
  friend bool operator==(const PageCoord&, const PageCoord&) = default;
};

struct HeapConfig {
  Bytes region_size = 2 * kMiB;
  /// 4 KB or 2 MB in practice; must divide region_size.
  Bytes page_size = 4 * kKiB;
  /// Objects strictly larger than this are large objects.
  Bytes large_object_threshold = 4 * kKiB;
  /// Total heap reservation; rounded down to whole regions.
  Bytes capacity = 0;
};

/// Region-based managed heap with bump allocation. Objects are addressed as
/// region_id * region_size + offset; regions are page aligned.
class Heap {
 public:
  explicit Heap(HeapConfig config);

  const HeapConfig& config() const { return config_; }

  /// Bump-allocates into the current region of `cls`, opening a new region
  /// when the object does not fit. Objects above the large-object threshold
  /// get a run of dedicated regions and ignore `cls`.
  const ObjectRecord& allocate(Bytes size, RegionClass cls = RegionClass::normal);

  /// Moves a small object to the fill cursor of `dest`. Header and id are
  /// preserved. Throws SimError for large objects and when `dest` is full.
  const ObjectRecord& relocate(ObjectId id, RegionId dest);

  /// Moves a small object to the current region of `cls`, opening a new
  /// region if needed. Throws HeapExhausted when no region is free.
  const ObjectRecord& relocate_to_class(ObjectId id, RegionClass cls);

  /// Opens the lowest-numbered free region with the given designation and
  /// makes it the allocation cursor of that class.
  RegionId open_region(RegionClass cls);

  void free_object(ObjectId id);

  /// Returns a region with no live objects to the free pool.
  void release_region(RegionId id);

  std::optional<RegionId> cursor(RegionClass cls) const {
    return cursors_[static_cast<int>(cls)];
  }
  void retire_cursor(RegionClass cls) { cursors_[static_cast<int>(cls)].reset(); }

  Bytes address(ObjectId id, Bytes offset_in_object = 0) const;
  PageCoord address_of(ObjectId id, Bytes offset_in_object = 0) const;
  PageId page_of(ObjectId id, Bytes offset_in_object = 0) const {
    return address(id, offset_in_object) / config_.page_size;
  }
  std::vector<PageId> page_span(ObjectId id) const;

  bool contains(ObjectId id) const { return id < objects_.size() && objects_[id].live; }
  const ObjectRecord& object(ObjectId id) const;
  ObjectHeader& header(ObjectId id);

  std::span<const ObjectRecord> objects() const { return objects_; }
  std::span<const Region> regions() const { return regions_; }
  const Region& region(RegionId id) const { return regions_.at(id); }
  void set_hot_bytes(RegionId id, Bytes hot) { regions_.at(id).hot_bytes = hot; }

  /// Live objects currently resident in `id`, in placement order.
  std::span<const ObjectId> members(RegionId id);

  Bytes free_bytes(RegionId id) const {
    const auto& r = regions_.at(id);
    return r.capacity - r.fill_cursor;
  }
  std::size_t region_slots() const { return regions_.size(); }
  std::size_t free_region_count() const { return free_.size(); }
  Bytes capacity() const { return regions_.size() * config_.region_size; }
  PageId page_count() const { return capacity() / config_.page_size; }
  Bytes live_small_bytes() const { return live_small_bytes_; }
  Bytes live_large_bytes() const { return live_large_bytes_; }

  /// Throws SimError describing the first violated heap invariant.
  void check_invariants() const;

 private:
  const ObjectRecord& allocate_large(Bytes size);
  void place(ObjectRecord& obj, RegionId dest);
  ObjectRecord& live_object(ObjectId id);

  HeapConfig config_;
  std::vector<ObjectRecord> objects_;
  std::vector<Region> regions_;
  std::vector<std::vector<ObjectId>> members_;
  std::vector<std::uint8_t> stale_;
  std::set<RegionId> free_;
  std::optional<RegionId> cursors_[2];
  Bytes live_small_bytes_ = 0;
  Bytes live_large_bytes_ = 0;
};

}  // namespace objtier
