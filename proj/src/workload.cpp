#include "objtier/workload.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace objtier {

namespace {

// Opaque lower-48-bit header words: a fake class pointer plus the "unlocked"
// lock pattern, so header-preservation checks have non-zero bits to compare.
constexpr std::uint64_t kDirectoryKlass = 0x0000'7f00'1000'0001ULL;
constexpr std::uint64_t kMetadataKlass = 0x0000'7f00'2000'0001ULL;
constexpr std::uint64_t kPayloadKlass = 0x0000'7f00'3000'0001ULL;

constexpr std::uint64_t kNsPerSecond = 1'000'000'000ULL;

Bytes round_up(Bytes v, Bytes unit) { return (v + unit - 1) / unit * unit; }

}  // namespace

Bytes KvWorkloadSpec::footprint() const {
  return static_cast<Bytes>(key_count) * (metadata_size + value_size + reference_size);
}

void KvWorkloadSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw std::invalid_argument(field + ": " + msg);
  };
  if (key_count == 0) fail("key_count", "must be positive");
  if (value_size == 0) fail("value_size", "must be positive");
  if (metadata_size == 0) fail("metadata_size", "must be positive");
  if (reference_size == 0) fail("reference_size", "must be positive");
  if (qps == 0) fail("qps", "must be positive");
  if (!(get_fraction >= 0.0 && get_fraction <= 1.0)) fail("get_fraction", "must be in [0,1]");
  if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
    fail("background_fraction", "must be in [0,1)");
  }
  if (background_fraction > 0.0 && background_sites == 0) {
    fail("background_sites", "must be positive when background_fraction > 0");
  }
  if (!(background_ratio > 0.0 && background_ratio <= 1.0)) {
    fail("background_ratio", "must be in (0,1]");
  }
  if (const auto* z = std::get_if<Zipfian>(&distribution); z && !(z->s > 0.0)) {
    fail("distribution.s", "must be > 0");
  }
  if (const auto* h = std::get_if<HotWarm>(&distribution)) {
    if (!(h->hot_fraction > 0.0 && h->hot_fraction < 1.0)) {
      fail("distribution.hot_fraction", "must be in (0,1)");
    }
    if (!(h->hot_mass > 0.0 && h->hot_mass < 1.0)) {
      fail("distribution.hot_mass", "must be in (0,1)");
    }
  }
  for (std::size_t i = 1; i < shifts.size(); ++i) {
    if (shifts[i].time_ns < shifts[i - 1].time_ns) {
      fail(fmt::format("shifts[{}].time_ns", i), "shift points must be time-ordered");
    }
  }
}

KvPopulation build_kv_heap(const KvWorkloadSpec& spec, HeapConfig base) {
  spec.validate();
  const Bytes footprint = spec.footprint();
  const auto required = static_cast<Bytes>(std::ceil(1.2 * static_cast<double>(footprint)));
  if (base.capacity == 0) {
    // Small populations still need whole regions for the directory and for
    // the tail of the last key-value region.
    const Bytes dir_bytes = static_cast<Bytes>(spec.key_count) * spec.reference_size;
    const Bytes kv_bytes = footprint - dir_bytes;
    const Bytes minimum = round_up(dir_bytes, base.region_size) +
                          round_up(kv_bytes, base.region_size) + base.region_size;
    base.capacity = std::max(round_up(required, base.region_size), minimum);
  } else if (base.capacity < required) {
    throw std::invalid_argument(fmt::format(
        "heap capacity {} is below 1.2x the footprint ({} bytes required)", base.capacity,
        required));
  }

  KvPopulation pop{Heap(base), {}, footprint};
  auto& heap = pop.heap;
  const auto& dir =
      heap.allocate(static_cast<Bytes>(spec.key_count) * spec.reference_size);
  pop.layout.directory = dir.id;
  heap.header(dir.id).set_payload(kDirectoryKlass);
  pop.layout.metadata.reserve(spec.key_count);
  pop.layout.payload.reserve(spec.key_count);
  for (std::uint32_t k = 0; k < spec.key_count; ++k) {
    const ObjectId meta = heap.allocate(spec.metadata_size).id;
    heap.header(meta).set_payload(kMetadataKlass);
    const ObjectId value = heap.allocate(spec.value_size).id;
    heap.header(value).set_payload(kPayloadKlass);
    pop.layout.metadata.push_back(meta);
    pop.layout.payload.push_back(value);
  }
  return pop;
}

RankSampler::RankSampler(const KeyDistribution& dist, std::uint32_t key_count)
    : dist_(dist), key_count_(key_count) {
  if (key_count == 0) throw std::invalid_argument("key_count: must be positive");
  if (const auto* z = std::get_if<Zipfian>(&dist_)) {
    cdf_.resize(key_count);
    double sum = 0.0;
    for (std::uint32_t r = 0; r < key_count; ++r) {
      sum += std::pow(static_cast<double>(r) + 1.0, -z->s);
      cdf_[r] = sum;
    }
    for (auto& c : cdf_) c /= sum;
    cdf_.back() = 1.0;
  } else if (const auto* h = std::get_if<HotWarm>(&dist_)) {
    const auto hot = std::llround(h->hot_fraction * key_count);
    hot_count_ = static_cast<std::uint32_t>(
        std::clamp<long long>(hot, 1, static_cast<long long>(key_count) - 1));
    if (key_count < 2) throw std::invalid_argument("hotwarm needs at least two keys");
  }
}

std::uint32_t RankSampler::sample(Rng& rng) const {
  if (std::holds_alternative<Zipfian>(dist_)) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = static_cast<std::uint32_t>(it - cdf_.begin());
    return std::min(idx, key_count_ - 1);
  }
  if (const auto* h = std::get_if<HotWarm>(&dist_)) {
    if (rng.uniform() < h->hot_mass) return static_cast<std::uint32_t>(rng.below(hot_count_));
    return hot_count_ + static_cast<std::uint32_t>(rng.below(key_count_ - hot_count_));
  }
  return static_cast<std::uint32_t>(rng.below(key_count_));
}

double RankSampler::probability(std::uint32_t rank) const {
  if (rank >= key_count_) return 0.0;
  if (std::holds_alternative<Zipfian>(dist_)) {
    return rank == 0 ? cdf_[0] : cdf_[rank] - cdf_[rank - 1];
  }
  if (const auto* h = std::get_if<HotWarm>(&dist_)) {
    return rank < hot_count_ ? h->hot_mass / hot_count_
                             : (1.0 - h->hot_mass) / (key_count_ - hot_count_);
  }
  return 1.0 / key_count_;
}

KvGenerator::KvGenerator(const KvWorkloadSpec& spec, KvLayout layout)
    : spec_(spec),
      layout_(std::move(layout)),
      sampler_(spec.distribution, spec.key_count),
      rng_(spec.seed) {
  spec_.validate();
  if (layout_.metadata.size() != spec_.key_count || layout_.payload.size() != spec_.key_count) {
    throw std::invalid_argument("layout does not match key_count");
  }
  // Popularity is independent of allocation order.
  rank_to_key_.resize(spec_.key_count);
  std::iota(rank_to_key_.begin(), rank_to_key_.end(), 0U);
  Rng perm_rng(mix_seed(spec_.seed) ^ 0x5eed'0001ULL);
  perm_rng.shuffle(rank_to_key_.begin(), rank_to_key_.end());

  if (spec_.background_fraction > 0.0) {
    double w = 1.0;
    double sum = 0.0;
    for (std::uint32_t i = 0; i < spec_.background_sites; ++i) {
      bg_weights_.push_back(w);
      sum += w;
      w *= spec_.background_ratio;
    }
    double acc = 0.0;
    for (auto& x : bg_weights_) {
      x /= sum;
      acc += x;
      bg_cdf_.push_back(acc);
    }
    bg_cdf_.back() = 1.0;
  }
}

void KvGenerator::apply_permutation(std::span<const std::uint32_t> perm) {
  if (perm.size() != rank_to_key_.size()) {
    throw std::invalid_argument("permutation size does not match key_count");
  }
  std::vector<std::uint32_t> next(rank_to_key_.size());
  std::vector<std::uint8_t> seen(rank_to_key_.size(), 0);
  for (std::size_t r = 0; r < perm.size(); ++r) {
    if (perm[r] >= perm.size() || seen[perm[r]]) {
      throw std::invalid_argument("not a permutation");
    }
    seen[perm[r]] = 1;
    next[r] = rank_to_key_[perm[r]];
  }
  rank_to_key_ = std::move(next);
}

void KvGenerator::apply_hotness_shift(std::uint64_t seed) {
  std::vector<std::uint32_t> perm(rank_to_key_.size());
  std::iota(perm.begin(), perm.end(), 0U);
  Rng r(seed);
  r.shuffle(perm.begin(), perm.end());
  apply_permutation(perm);
}

void KvGenerator::emit_request() {
  if (spec_.background_fraction > 0.0 && rng_.uniform() < spec_.background_fraction) {
    const double u = rng_.uniform();
    const auto site = static_cast<std::uint32_t>(
        std::upper_bound(bg_cdf_.begin(), bg_cdf_.end(), u) - bg_cdf_.begin());
    const auto key = static_cast<std::uint32_t>(rng_.below(spec_.key_count));
    pending_.push_back({.site = kSiteBackgroundBase + std::min(site, spec_.background_sites - 1),
                        .context = kContextBackground,
                        .object = layout_.metadata[key]});
    return;
  }
  const auto key = rank_to_key_[sampler_.sample(rng_)];
  const auto ctx = rng_.uniform() < spec_.get_fraction ? kContextGet : kContextPut;
  if (spec_.directory_accesses) {
    pending_.push_back({.site = kSiteDirectory,
                        .context = ctx,
                        .object = layout_.directory,
                        .offset = static_cast<std::uint32_t>(key * spec_.reference_size)});
  }
  pending_.push_back({.site = kSiteMetadata, .context = ctx, .object = layout_.metadata[key]});
  pending_.push_back({.site = kSitePayload, .context = ctx, .object = layout_.payload[key]});
}

AccessEvent KvGenerator::next() {
  const std::uint64_t now = emitted_ * kNsPerSecond / spec_.qps;
  if (pending_.empty()) {
    while (next_shift_ < spec_.shifts.size() && spec_.shifts[next_shift_].time_ns <= now) {
      apply_hotness_shift(spec_.shifts[next_shift_].seed);
      ++next_shift_;
    }
    emit_request();
  }
  AccessEvent ev = pending_.front();
  pending_.pop_front();
  ev.time_ns = now;
  ++emitted_;
  return ev;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

bool TraceReader::next(AccessEvent& ev) {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;

    std::uint64_t fields[5] = {0, 0, 0, 0, 0};
    std::size_t n = 0;
    while (true) {
      const auto comma = s.find(',');
      const auto tok = trim(s.substr(0, comma));
      if (n == 5) throw TraceError(fmt::format("line {}: too many fields", line_));
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), fields[n]);
      if (tok.empty() || ec != std::errc{} || p != tok.data() + tok.size()) {
        throw TraceError(fmt::format("line {}: field {} is not an unsigned integer: '{}'",
                                     line_, n + 1, tok));
      }
      ++n;
      if (comma == std::string_view::npos) break;
      s = s.substr(comma + 1);
    }
    if (n < 4) {
      throw TraceError(fmt::format("line {}: expected time_ns,site_id,context_id,object_id",
                                   line_));
    }
    constexpr std::uint64_t u32max = 0xFFFF'FFFFULL;
    if (fields[1] > u32max || fields[2] > u32max || fields[3] > u32max || fields[4] > u32max) {
      throw TraceError(fmt::format("line {}: id out of 32-bit range", line_));
    }
    if (seen_ && fields[0] < last_time_) {
      throw TraceError(fmt::format("line {}: timestamp {} precedes previous {}", line_,
                                   fields[0], last_time_));
    }
    seen_ = true;
    last_time_ = fields[0];
    ev = AccessEvent{.time_ns = fields[0],
                     .site = static_cast<std::uint32_t>(fields[1]),
                     .context = static_cast<std::uint32_t>(fields[2]),
                     .object = static_cast<ObjectId>(fields[3]),
                     .offset = static_cast<std::uint32_t>(fields[4])};
    return true;
  }
  return false;
}

std::vector<AccessEvent> parse_trace(std::istream& in) {
  TraceReader reader(in);
  std::vector<AccessEvent> out;
  AccessEvent ev;
  while (reader.next(ev)) out.push_back(ev);
  return out;
}

std::vector<AccessEvent> replay_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError(fmt::format("cannot open trace file '{}'", path));
  return parse_trace(in);
}

void write_trace_event(std::ostream& out, const AccessEvent& ev) {
  if (ev.offset == 0) {
    out << fmt::format("{},{},{},{}\n", ev.time_ns, ev.site, ev.context, ev.object);
  } else {
    out << fmt::format("{},{},{},{},{}\n", ev.time_ns, ev.site, ev.context, ev.object,
                       ev.offset);
  }
}

}  // namespace objtier
