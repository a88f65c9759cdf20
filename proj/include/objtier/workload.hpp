#pragma once

#include <cstdint>
#include <deque>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "objtier/heap.hpp"
#include "objtier/rng.hpp"
#include "objtier/types.hpp"

namespace objtier {

/// One simulated LLC-missing access.
struct AccessEvent {
  std::uint64_t time_ns = 0;
  std::uint32_t site = 0;
  std::uint32_t context = 0;
  ObjectId object = 0;
  /// Byte offset of the access inside the object.
  std::uint32_t offset = 0;
  bool is_miss = true;

  friend bool operator==(const AccessEvent&, const AccessEvent&) = default;
};

// Stable site / context ids of the key-value access paths.
inline constexpr std::uint32_t kSiteDirectory = 1;
inline constexpr std::uint32_t kSiteMetadata = 2;
inline constexpr std::uint32_t kSitePayload = 3;
inline constexpr std::uint32_t kSiteBackgroundBase = 100;
inline constexpr std::uint32_t kContextGet = 1;
inline constexpr std::uint32_t kContextPut = 2;
inline constexpr std::uint32_t kContextBackground = 0;

struct Zipfian {
  double s = 0.99;
};
struct HotWarm {
  double hot_fraction = 0.2;
  double hot_mass = 0.9;
};
struct Uniform {};
using KeyDistribution = std::variant<Zipfian, HotWarm, Uniform>;

struct ShiftPoint {
  std::uint64_t time_ns = 0;
  std::uint64_t seed = 0;
};

struct KvWorkloadSpec {
  std::uint32_t key_count = 100000;
  Bytes value_size = 256;
  Bytes metadata_size = 64;
  /// Bytes per directory slot (one reference).
  Bytes reference_size = 8;
  KeyDistribution distribution = Zipfian{};
  /// Events per virtual second.
  std::uint64_t qps = 10'000'000;
  double get_fraction = 0.95;
  /// Share of request slots replaced by a single background access.
  double background_fraction = 0.0;
  std::uint32_t background_sites = 16;
  /// Geometric ratio between consecutive background site weights.
  double background_ratio = 0.5;
  /// When false, requests emit only the metadata and payload accesses.
  bool directory_accesses = true;
  std::vector<ShiftPoint> shifts;
  std::uint64_t seed = 1;

  /// Sum of object sizes (directory + metadata + payload).
  Bytes footprint() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct KvLayout {
  ObjectId directory = 0;
  std::vector<ObjectId> metadata;
  std::vector<ObjectId> payload;
};

struct KvPopulation {
  Heap heap;
  KvLayout layout;
  Bytes footprint = 0;
};

/// Builds the key-value heap: one directory LargeObject, then for every key a
/// metadata object followed by its payload (adjacent). When `base.capacity` is
/// zero the heap is sized to 1.2x the footprint; an explicit capacity below
/// that is rejected.
KvPopulation build_kv_heap(const KvWorkloadSpec& spec, HeapConfig base = {});

/// Key-popularity sampler: draws a popularity rank from the configured mass
/// function.
class RankSampler {
 public:
  RankSampler(const KeyDistribution& dist, std::uint32_t key_count);
  std::uint32_t sample(Rng& rng) const;
  /// Probability mass of `rank` (0 = most popular).
  double probability(std::uint32_t rank) const;
  std::uint32_t key_count() const { return key_count_; }

 private:
  KeyDistribution dist_;
  std::uint32_t key_count_;
  std::uint32_t hot_count_ = 0;
  std::vector<double> cdf_;
};

/// Deterministic event stream for a key-value store. Each request emits a
/// directory, metadata and payload access; a configurable share of request
/// slots is replaced by a background-site access.
class KvGenerator {
 public:
  KvGenerator(const KvWorkloadSpec& spec, KvLayout layout);

  AccessEvent next();
  std::uint64_t emitted() const { return emitted_; }

  /// Re-permutes popularity ranks with a random permutation drawn from `seed`.
  void apply_hotness_shift(std::uint64_t seed);
  /// new_rank_to_key[r] = old_rank_to_key[perm[r]].
  void apply_permutation(std::span<const std::uint32_t> perm);

  std::uint32_t key_for_rank(std::uint32_t rank) const { return rank_to_key_[rank]; }
  const RankSampler& sampler() const { return sampler_; }
  const KvLayout& layout() const { return layout_; }
  /// Background site weights, normalised to sum to 1.
  std::span<const double> background_weights() const { return bg_weights_; }

 private:
  void emit_request();

  KvWorkloadSpec spec_;
  KvLayout layout_;
  RankSampler sampler_;
  Rng rng_;
  std::vector<std::uint32_t> rank_to_key_;
  std::vector<double> bg_weights_;
  std::vector<double> bg_cdf_;
  std::deque<AccessEvent> pending_;
  std::size_t next_shift_ = 0;
  std::uint64_t emitted_ = 0;
};

/// Raised for malformed trace input; the message carries the line number.
class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Streams events from the text trace format
/// `time_ns,site_id,context_id,object_id[,offset]` with `#` comments.
class TraceReader {
 public:
  explicit TraceReader(std::istream& in) : in_(in) {}
  /// Returns false at end of input. Throws TraceError on malformed lines and
  /// decreasing timestamps.
  bool next(AccessEvent& ev);
  std::uint64_t line() const { return line_; }

 private:
  std::istream& in_;
  std::uint64_t line_ = 0;
  std::uint64_t last_time_ = 0;
  bool seen_ = false;
};

std::vector<AccessEvent> replay_trace(const std::string& path);
std::vector<AccessEvent> parse_trace(std::istream& in);
void write_trace_event(std::ostream& out, const AccessEvent& ev);

}  // namespace objtier
