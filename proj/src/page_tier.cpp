#include "objtier/page_tier.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "objtier/profiler.hpp"

namespace objtier {

TierState::TierState(PageId page_count, Bytes page_size, Bytes fast_capacity)
    : page_size_(page_size),
      capacity_pages_(page_size ? fast_capacity / page_size : 0),
      counts_(page_count, 0),
      fast_(page_count, 0) {
  if (page_size == 0) throw SimError("tier: page_size must be positive");
}

void TierState::record_sample(PageId page) {
  auto& c = counts_.at(page);
  if (c != std::numeric_limits<std::uint32_t>::max()) ++c;
}

void TierState::decay(double ratio) {
  for (auto& c : counts_) c = static_cast<std::uint32_t>(decay_count(c, ratio));
}

MigrationReport TierState::migrate_epoch() {
  std::vector<PageId> ranked;
  for (PageId p = 0; p < counts_.size(); ++p) {
    if (counts_[p] > 0) ranked.push_back(p);
  }
  const auto by_rank = [&](PageId a, PageId b) {
    return counts_[a] != counts_[b] ? counts_[a] > counts_[b] : a < b;
  };
  const auto k = std::min<std::size_t>(ranked.size(), capacity_pages_);
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k),
                    ranked.end(), by_rank);

  std::vector<std::uint8_t> next(counts_.size(), 0);
  std::uint64_t used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    next[ranked[i]] = 1;
    ++used;
  }
  for (PageId p = 0; p < counts_.size() && used < capacity_pages_; ++p) {
    if (fast_[p] && counts_[p] == 0) {
      next[p] = 1;
      ++used;
    }
  }

  MigrationReport report;
  for (PageId p = 0; p < counts_.size(); ++p) {
    if (next[p] && !fast_[p]) ++report.promoted_pages;
    if (!next[p] && fast_[p]) ++report.demoted_pages;
  }
  report.moved_bytes = (report.promoted_pages + report.demoted_pages) * page_size_;
  fast_ = std::move(next);
  fast_pages_ = used;
  return report;
}

void TierState::release_pages(PageId first, PageId count) {
  for (PageId p = first; p < first + count; ++p) {
    counts_.at(p) = 0;
    if (fast_[p]) {
      fast_[p] = 0;
      --fast_pages_;
    }
  }
}

std::string_view to_string(OracleUnit unit) {
  switch (unit) {
    case OracleUnit::object: return "object";
    case OracleUnit::page4k: return "4k";
    case OracleUnit::page2m: return "2m";
  }
  return "?";
}

OracleUnit parse_oracle_unit(std::string_view name) {
  if (name == "object") return OracleUnit::object;
  if (name == "4k") return OracleUnit::page4k;
  if (name == "2m") return OracleUnit::page2m;
  throw std::invalid_argument(
      fmt::format("unknown oracle unit '{}' (expected object, 4k or 2m)", name));
}

AddressMap AddressMap::from_heap(const Heap& heap) {
  AddressMap m;
  const auto objs = heap.objects();
  m.extents_.resize(objs.size());
  m.present_.assign(objs.size(), 0);
  for (const auto& o : objs) {
    if (!o.live) continue;
    m.extents_[o.id] = {heap.address(o.id), o.size, o.large};
    m.present_[o.id] = 1;
  }
  m.heap_capacity_ = heap.capacity();
  return m;
}

AddressMap AddressMap::uniform(std::uint64_t count, Bytes size, Bytes large_threshold) {
  AddressMap m;
  m.extents_.resize(count);
  m.present_.assign(count, 1);
  for (std::uint64_t i = 0; i < count; ++i) m.extents_[i] = {i * size, size, size > large_threshold};
  return m;
}

namespace {

std::uint64_t parse_field(std::string_view s, std::uint64_t line, std::string_view what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw TraceError(fmt::format("layout line {}: bad {} '{}'", line, what, s));
  }
  return v;
}

}  // namespace

AddressMap AddressMap::read_csv(std::istream& in) {
  AddressMap m;
  std::string line;
  std::uint64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr std::string_view tag = "# heap_capacity,";
      if (line.starts_with(tag)) {
        m.heap_capacity_ = parse_field(std::string_view(line).substr(tag.size()), n, "capacity");
      }
      continue;
    }
    if (line.starts_with("object,")) continue;  // header
    std::string_view rest(line);
    std::uint64_t f[3];
    for (int i = 0; i < 3; ++i) {
      const auto comma = rest.find(',');
      if ((i < 2) != (comma != std::string_view::npos)) {
        throw TraceError(fmt::format("layout line {}: expected object,address,size", n));
      }
      f[i] = parse_field(rest.substr(0, comma), n, i == 0 ? "object" : i == 1 ? "address" : "size");
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    if (f[2] == 0) throw TraceError(fmt::format("layout line {}: size must be positive", n));
    if (f[0] >= m.extents_.size()) {
      m.extents_.resize(f[0] + 1);
      m.present_.resize(f[0] + 1, 0);
    }
    m.extents_[f[0]] = {f[1], f[2], f[2] > 4 * kKiB};
    m.present_[f[0]] = 1;
  }
  return m;
}

void AddressMap::write_csv(std::ostream& out) const {
  if (heap_capacity_) out << "# heap_capacity," << heap_capacity_ << '\n';
  out << "object,address,size\n";
  for (std::size_t i = 0; i < extents_.size(); ++i) {
    if (!present_[i]) continue;
    out << fmt::format("{},{},{}\n", i, extents_[i].address, extents_[i].size);
  }
}

const ObjectExtent& AddressMap::at(ObjectId id) const {
  if (id >= extents_.size() || !present_[id]) {
    throw SimError(fmt::format("object {} is not in the address layout", id));
  }
  return extents_[id];
}

Bytes AddressMap::footprint() const {
  Bytes total = 0;
  for (std::size_t i = 0; i < extents_.size(); ++i) {
    if (present_[i]) total += extents_[i].size;
  }
  return total;
}

UnitKey unit_of(const AddressMap& map, const AccessEvent& ev, OracleUnit unit) {
  const auto& ext = map.at(ev.object);
  const Bytes addr = ext.address + std::min<Bytes>(ev.offset, ext.size - 1);
  switch (unit) {
    case OracleUnit::object:
      if (ext.large) return {(std::uint64_t{1} << 63) | (addr / (4 * kKiB)), 4 * kKiB};
      return {ev.object, ext.size};
    case OracleUnit::page4k: return {addr / (4 * kKiB), 4 * kKiB};
    case OracleUnit::page2m: return {addr / (2 * kMiB), 2 * kMiB};
  }
  return {};
}

void OraclePlacement::count(const UnitKey& unit) {
  auto& slot = counts_[unit.id];
  ++slot.first;
  slot.second = unit.size;
  ++events_;
}

void OraclePlacement::place(Bytes capacity) {
  std::vector<std::pair<std::uint64_t, std::pair<std::uint64_t, Bytes>>> ranked(counts_.begin(),
                                                                               counts_.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second.first != b.second.first ? a.second.first > b.second.first : a.first < b.first;
  });
  fast_.clear();
  placed_bytes_ = 0;
  for (const auto& [id, cs] : ranked) {
    if (placed_bytes_ + cs.second > capacity) break;
    placed_bytes_ += cs.second;
    fast_.insert(id);
  }
}

OracleResult oracle_placement(std::span<const AccessEvent> trace, const AddressMap& map,
                              OracleUnit unit, Bytes capacity) {
  OraclePlacement oracle;
  for (const auto& ev : trace) oracle.count(unit_of(map, ev, unit));
  oracle.place(capacity);
  OracleResult r;
  for (const auto& ev : trace) {
    ++r.events;
    if (oracle.is_fast(unit_of(map, ev, unit).id)) ++r.hits;
  }
  r.hit_ratio = r.events ? static_cast<double>(r.hits) / static_cast<double>(r.events) : 0.0;
  r.placed_units = oracle.placed_units();
  r.placed_bytes = oracle.placed_bytes();
  return r;
}

}  // namespace objtier
