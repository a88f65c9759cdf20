#include "objtier/heap.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace objtier {

Heap::Heap(HeapConfig config) : config_(config) {
  if (config_.region_size == 0 || config_.page_size == 0) {
    throw SimError("heap: region_size and page_size must be positive");
  }
  if (config_.region_size % config_.page_size != 0) {
    throw SimError(fmt::format("heap: page_size {} does not divide region_size {}",
                               config_.page_size, config_.region_size));
  }
  const auto slots = config_.capacity / config_.region_size;
  if (slots == 0) {
    throw SimError(fmt::format("heap: capacity {} is smaller than one region",
                               config_.capacity));
  }
  regions_.resize(slots);
  members_.resize(slots);
  stale_.assign(slots, 0);
  for (RegionId r = 0; r < slots; ++r) {
    regions_[r].id = r;
    regions_[r].capacity = config_.region_size;
    free_.insert(free_.end(), r);
  }
}

RegionId Heap::open_region(RegionClass cls) {
  if (free_.empty()) {
    throw HeapExhausted(fmt::format(
        "heap exhausted: all {} regions ({} bytes) in use, live small bytes {}",
        regions_.size(), capacity(), live_small_bytes_));
  }
  const RegionId id = *free_.begin();
  free_.erase(free_.begin());
  auto& r = regions_[id];
  r.state = RegionState::small;
  r.designation = cls;
  r.fill_cursor = 0;
  r.live_bytes = 0;
  r.hot_bytes = 0;
  cursors_[static_cast<int>(cls)] = id;
  return id;
}

void Heap::place(ObjectRecord& obj, RegionId dest) {
  // A stale list may still name this object from an earlier stay in `dest`.
  if (stale_[dest]) members(dest);
  auto& r = regions_[dest];
  obj.region = dest;
  obj.offset = r.fill_cursor;
  r.fill_cursor += obj.size;
  r.live_bytes += obj.size;
  members_[dest].push_back(obj.id);
}

const ObjectRecord& Heap::allocate(Bytes size, RegionClass cls) {
  if (size == 0) throw SimError("allocate: size must be positive");
  if (size > config_.large_object_threshold) return allocate_large(size);
  if (size > config_.region_size) {
    throw SimError("allocate: small object larger than a region");
  }
  auto cur = cursors_[static_cast<int>(cls)];
  if (!cur || free_bytes(*cur) < size) cur = open_region(cls);

  ObjectRecord obj;
  obj.id = static_cast<ObjectId>(objects_.size());
  obj.size = size;
  obj.live = true;
  objects_.push_back(obj);
  place(objects_.back(), *cur);
  live_small_bytes_ += size;
  return objects_.back();
}

const ObjectRecord& Heap::allocate_large(Bytes size) {
  const auto need = (size + config_.region_size - 1) / config_.region_size;
  // Lowest run of `need` consecutive free regions.
  std::optional<RegionId> start;
  RegionId run_start = 0;
  std::size_t run = 0;
  RegionId prev = 0;
  for (const RegionId r : free_) {
    if (run > 0 && r == prev + 1) {
      ++run;
    } else {
      run_start = r;
      run = 1;
    }
    prev = r;
    if (run == need) {
      start = run_start;
      break;
    }
  }
  if (!start) {
    throw HeapExhausted(fmt::format(
        "heap exhausted: no run of {} free regions for a {}-byte large object", need,
        size));
  }
  for (RegionId r = *start; r < *start + need; ++r) {
    free_.erase(r);
    auto& reg = regions_[r];
    reg.state = RegionState::large;
    reg.designation = RegionClass::normal;
    reg.fill_cursor = reg.capacity;
    reg.live_bytes = 0;
  }
  ObjectRecord obj;
  obj.id = static_cast<ObjectId>(objects_.size());
  obj.size = size;
  obj.region = *start;
  obj.offset = 0;
  obj.large = true;
  obj.live = true;
  objects_.push_back(obj);
  live_large_bytes_ += size;
  return objects_.back();
}

ObjectRecord& Heap::live_object(ObjectId id) {
  if (!contains(id)) throw SimError(fmt::format("unknown or dead object id {}", id));
  return objects_[id];
}

const ObjectRecord& Heap::object(ObjectId id) const {
  if (!contains(id)) throw SimError(fmt::format("unknown or dead object id {}", id));
  return objects_[id];
}

ObjectHeader& Heap::header(ObjectId id) { return live_object(id).header; }

const ObjectRecord& Heap::relocate(ObjectId id, RegionId dest) {
  auto& obj = live_object(id);
  if (obj.large) {
    throw SimError(fmt::format("relocate: object {} is a large object", id));
  }
  if (dest >= regions_.size() || regions_[dest].state != RegionState::small) {
    throw SimError(fmt::format("relocate: region {} is not an open small region", dest));
  }
  if (dest == obj.region) {
    throw SimError(fmt::format("relocate: object {} already resides in region {}", id,
                               dest));
  }
  if (free_bytes(dest) < obj.size) {
    throw SimError(fmt::format("relocate: destination region {} is full", dest));
  }
  auto& src = regions_[obj.region];
  src.live_bytes -= obj.size;
  src.hot_bytes = std::min(src.hot_bytes, src.live_bytes);
  stale_[obj.region] = 1;
  place(obj, dest);
  return obj;
}

const ObjectRecord& Heap::relocate_to_class(ObjectId id, RegionClass cls) {
  const auto& obj = object(id);
  auto cur = cursors_[static_cast<int>(cls)];
  if (!cur || free_bytes(*cur) < obj.size || *cur == obj.region) cur = open_region(cls);
  return relocate(id, *cur);
}

void Heap::free_object(ObjectId id) {
  auto& obj = live_object(id);
  obj.live = false;
  if (obj.large) {
    live_large_bytes_ -= obj.size;
    const auto need = (obj.size + config_.region_size - 1) / config_.region_size;
    for (RegionId r = obj.region; r < obj.region + need; ++r) {
      regions_[r] = Region{.id = r, .capacity = config_.region_size};
      free_.insert(r);
    }
    return;
  }
  live_small_bytes_ -= obj.size;
  auto& r = regions_[obj.region];
  r.live_bytes -= obj.size;
  r.hot_bytes = std::min(r.hot_bytes, r.live_bytes);
  stale_[obj.region] = 1;
}

void Heap::release_region(RegionId id) {
  auto& r = regions_.at(id);
  if (r.state != RegionState::small) {
    throw SimError(fmt::format("release_region: region {} is not a small region", id));
  }
  if (r.live_bytes != 0) {
    throw SimError(fmt::format("release_region: region {} still holds {} live bytes", id,
                               r.live_bytes));
  }
  for (auto& c : cursors_) {
    if (c == id) c.reset();
  }
  r = Region{.id = id, .capacity = config_.region_size};
  members_[id].clear();
  stale_[id] = 0;
  free_.insert(id);
}

std::span<const ObjectId> Heap::members(RegionId id) {
  auto& m = members_.at(id);
  if (stale_[id]) {
    std::erase_if(m, [&](ObjectId o) {
      return !objects_[o].live || objects_[o].region != id;
    });
    stale_[id] = 0;
  }
  return m;
}

Bytes Heap::address(ObjectId id, Bytes offset_in_object) const {
  const auto& obj = object(id);
  return static_cast<Bytes>(obj.region) * config_.region_size + obj.offset +
         offset_in_object;
}

PageCoord Heap::address_of(ObjectId id, Bytes offset_in_object) const {
  const auto a = address(id, offset_in_object);
  return {a / config_.page_size, a % config_.page_size};
}

std::vector<PageId> Heap::page_span(ObjectId id) const {
  const auto& obj = object(id);
  const auto first = address(id) / config_.page_size;
  const auto last = (address(id) + obj.size - 1) / config_.page_size;
  std::vector<PageId> pages;
  for (auto p = first; p <= last; ++p) pages.push_back(p);
  return pages;
}

void Heap::check_invariants() const {
  std::vector<Bytes> live(regions_.size(), 0);
  std::vector<std::vector<std::pair<Bytes, Bytes>>> spans(regions_.size());
  Bytes small_total = 0;
  for (const auto& o : objects_) {
    if (!o.live || o.large) continue;
    const auto& r = regions_[o.region];
    if (r.state != RegionState::small) {
      throw SimError(fmt::format("object {} resides in non-small region {}", o.id, r.id));
    }
    if (o.offset + o.size > r.fill_cursor || o.offset + o.size > r.capacity) {
      throw SimError(fmt::format("object {} extends past region {} cursor", o.id, r.id));
    }
    live[o.region] += o.size;
    small_total += o.size;
    spans[o.region].emplace_back(o.offset, o.offset + o.size);
  }
  if (small_total != live_small_bytes_) {
    throw SimError("live small byte total does not match object sizes");
  }
  Bytes region_total = 0;
  for (const auto& r : regions_) {
    if (r.state == RegionState::small && live[r.id] != r.live_bytes) {
      throw SimError(fmt::format("region {} live_bytes {} != member sum {}", r.id,
                                 r.live_bytes, live[r.id]));
    }
    if (r.state != RegionState::small && live[r.id] != 0) {
      throw SimError(fmt::format("region {} is not small but holds objects", r.id));
    }
    if (r.live_bytes > r.capacity || r.hot_bytes > r.live_bytes) {
      throw SimError(fmt::format("region {} byte accounting out of range", r.id));
    }
    region_total += r.state == RegionState::small ? r.live_bytes : 0;
    auto s = spans[r.id];
    std::sort(s.begin(), s.end());
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i].first < s[i - 1].second) {
        throw SimError(fmt::format("overlapping objects in region {}", r.id));
      }
    }
  }
  if (region_total != small_total) {
    throw SimError("sum of region live_bytes differs from live small object bytes");
  }
}

}  // namespace objtier
