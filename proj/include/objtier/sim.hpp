#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "objtier/compaction.hpp"
#include "objtier/page_tier.hpp"
#include "objtier/profiler.hpp"
#include "objtier/tracker.hpp"
#include "objtier/workload.hpp"

namespace objtier {

enum class Policy {
  clove,
  page_only,
  oracle_object,
  oracle_4k,
  oracle_2m,
  clove_no_cutoff,
  clove_one_shot,
};
std::string_view to_string(Policy policy);

/// Invalid scenario configuration. `path` names the offending field, e.g.
/// "tier.fast_fraction".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

Policy parse_policy(std::string_view name);

struct CompactionConfig {
  double low_watermark = 0.05;
  double high_watermark = 0.50;
  std::size_t min_regions = 1;
  /// A normal GC pass runs on every G-th counter-refresh scan, starting with
  /// the first; the other scans may trigger dedicated phases.
  std::uint32_t normal_gc_every = 2;
  /// Share of the fast tier the hotness cutoff may fill.
  double budget_fraction = 0.9;
  /// Normal regions at or below this occupancy are evacuated by normal GC.
  double gc_live_threshold = 0.75;
  /// Free space (share of the heap) a normal GC pass tries to leave behind,
  /// on top of the bytes it demotes out of hot_space.
  double gc_free_reserve = 0.05;
  /// Free regions kept back for evacuation destinations.
  std::size_t relocation_reserve_regions = 2;
};

enum class CapacityBasis { heap, footprint };

struct TierConfig {
  Bytes page_size = 2 * kMiB;
  /// Fast-tier capacity as a share of the heap (or of the live footprint).
  double fast_fraction = 0.2;
  CapacityBasis capacity_basis = CapacityBasis::heap;
  /// Regions freed by compaction drop their pages' counts and residency.
  bool release_freed_pages = false;
  /// Samples between migration epochs; 0 means decay_window / 10.
  std::uint64_t epoch_samples = 0;
  double latency_fast_ns = 100.0;
  double latency_slow_ns = 300.0;
  /// Charged per migrated byte.
  double migration_bytes_per_s = 1e9;
};

struct ShiftSpec {
  /// Shift position as a share of the run, in [0,1).
  double at_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct ScenarioConfig {
  Policy policy = Policy::clove;
  std::uint64_t seed = 1;
  std::uint64_t duration_events = 10'000'000;
  KvWorkloadSpec workload;
  std::vector<ShiftSpec> shifts;
  ProfilerConfig profiler;
  TrackerConfig tracker;
  CompactionConfig compaction;
  TierConfig tier;
  Bytes region_size = 2 * kMiB;
  Bytes large_object_threshold = 4 * kKiB;
  /// Events per timeline row; 0 means duration / 60.
  std::uint64_t window_events = 0;

  /// Throws ConfigError.
  void validate() const;
  std::uint64_t window() const;
  std::uint64_t epoch_samples() const;
};

/// Throws ConfigError on unknown keys, wrong types and out-of-range values.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioConfig& cfg);

double amat(double hit_ratio, double latency_fast_ns, double latency_slow_ns);

struct TimelineRow {
  std::uint64_t time_ns = 0;
  std::uint64_t events = 0;
  double fast_hit_ratio = 0.0;
  double amat_ns = 0.0;
  Bytes moved_bytes_object = 0;
  Bytes moved_bytes_page = 0;
  std::uint64_t tracked_increments = 0;
  std::size_t delinquent_set_size = 0;
};

struct RelocationRow {
  std::uint64_t time_ns = 0;
  std::uint64_t scan = 0;
  RelocationReport report;
};

struct MigrationRow {
  std::uint64_t time_ns = 0;
  MigrationReport report;
  std::uint64_t fast_pages = 0;
};

struct ScanRow {
  std::uint64_t time_ns = 0;
  std::uint64_t scan = 0;
  HotnessHistogram histogram;
  CutoffDecision cutoff;
  Bytes hot_bytes = 0;
  std::size_t selected_regions = 0;
};

struct RunSummary {
  std::uint64_t events = 0;
  std::uint64_t hits = 0;
  double hit_ratio = 0.0;
  double steady_hit_ratio = 0.0;
  double amat_ns = 0.0;
  double steady_amat_ns = 0.0;
  Bytes moved_bytes_object = 0;
  Bytes moved_bytes_page = 0;
  double migration_time_ns = 0.0;
  std::uint64_t tracked_increments = 0;
  /// Tracked accesses skipped because the counter was saturated.
  std::uint64_t tracked_saturated = 0;
  std::uint64_t scans = 0;
  std::uint64_t normal_passes = 0;
  std::uint64_t dedicated_phases = 0;
  std::uint64_t truncated_passes = 0;
  Bytes heap_capacity = 0;
  Bytes footprint = 0;
  Bytes fast_capacity = 0;
  Bytes cutoff_budget = 0;
  /// Live hot_space bytes at the end of the run, and the share of them on
  /// fast-resident pages.
  Bytes hot_space_bytes = 0;
  double hot_space_fast_share = 0.0;
};

struct RunResult {
  ScenarioConfig config;
  std::vector<TimelineRow> timeline;
  std::vector<RelocationRow> relocations;
  std::vector<MigrationRow> migrations;
  std::vector<ScanRow> scans;
  RunSummary summary;
  std::string profiler_dump;
};

struct RunHooks {
  /// Receives every generated event in trace format.
  std::ostream* trace = nullptr;
  /// Receives `index,time_ns,object,unit,hit` per event.
  std::ostream* debug = nullptr;
  /// Receives the object layout the trace refers to.
  std::ostream* layout = nullptr;
  /// Called once after the last event with the final heap and tier state.
  std::function<void(const Heap&, const TierState&, const KvLayout&)> at_end;
};

/// Runs one scenario. Deterministic for a given config.
RunResult run(const ScenarioConfig& cfg, const RunHooks& hooks = {});

void write_timeline_csv(std::ostream& out, std::span<const TimelineRow> rows);
void write_relocations_csv(std::ostream& out, std::span<const RelocationRow> rows);
void write_migrations_csv(std::ostream& out, std::span<const MigrationRow> rows);
void write_histograms_csv(std::ostream& out, std::span<const ScanRow> rows);
std::string summary_csv_header();
std::string summary_csv_row(const ScenarioConfig& cfg, const RunSummary& s);

/// Writes timeline, relocations, migrations, histograms, profiler and
/// summary CSVs into `dir` (created if missing).
void write_results(const RunResult& result, const std::filesystem::path& dir);

}  // namespace objtier
