#include "objtier/sim.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace objtier {

double amat(double hit_ratio, double latency_fast_ns, double latency_slow_ns) {
  return hit_ratio * latency_fast_ns + (1.0 - hit_ratio) * latency_slow_ns;
}

namespace {

constexpr std::uint64_t kNsPerSecond = 1'000'000'000ULL;

bool is_oracle(Policy p) {
  return p == Policy::oracle_object || p == Policy::oracle_4k || p == Policy::oracle_2m;
}

bool tracks_objects(Policy p) {
  return p == Policy::clove || p == Policy::clove_no_cutoff || p == Policy::clove_one_shot;
}

OracleUnit oracle_unit(Policy p) {
  if (p == Policy::oracle_4k) return OracleUnit::page4k;
  if (p == Policy::oracle_2m) return OracleUnit::page2m;
  return OracleUnit::object;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, const RunHooks& hooks)
      : cfg_(cfg),
        hooks_(hooks),
        spec_(resolve_spec(cfg)),
        pop_(build_kv_heap(spec_, HeapConfig{.region_size = cfg.region_size,
                                             .page_size = cfg.tier.page_size,
                                             .large_object_threshold =
                                                 cfg.large_object_threshold})),
        heap_(pop_.heap),
        profiler_(profiler_config(cfg)),
        tracker_(cfg.tracker),
        fast_capacity_(static_cast<Bytes>(
            cfg.tier.fast_fraction *
            static_cast<double>(cfg.tier.capacity_basis == CapacityBasis::heap
                                    ? heap_.capacity()
                                    : pop_.footprint))),
        budget_(static_cast<Bytes>(cfg.compaction.budget_fraction *
                                   static_cast<double>(fast_capacity_))),
        tier_(heap_.page_count(), cfg.tier.page_size, fast_capacity_) {
    result_.config = cfg;
  }

  RunResult run() {
    if (hooks_.layout) AddressMap::from_heap(heap_).write_csv(*hooks_.layout);
    const bool oracle = is_oracle(cfg_.policy);
    if (oracle) prepare_oracle();

    const std::uint64_t n = cfg_.duration_events;
    const std::uint64_t steady_from = n - n / 3;
    const std::uint64_t window = cfg_.window();
    const std::uint64_t epoch = cfg_.epoch_samples();
    const bool tracking = tracks_objects(cfg_.policy);
    const OracleUnit unit = oracle_unit(cfg_.policy);

    KvGenerator gen(spec_, pop_.layout);
    std::uint64_t hits = 0, steady_hits = 0, win_hits = 0, win_events = 0;
    std::uint64_t since_epoch = 0;

    for (std::uint64_t i = 0; i < n; ++i) {
      const AccessEvent ev = gen.next();
      if (hooks_.trace) write_trace_event(*hooks_.trace, ev);

      bool hit;
      std::uint64_t unit_id;
      if (oracle) {
        unit_id = unit_of(*map_, ev, unit).id;
        hit = oracle_.is_fast(unit_id);
      } else {
        unit_id = heap_.page_of(ev.object, ev.offset);
        hit = tier_.is_fast(unit_id);
      }
      hits += hit;
      win_hits += hit;
      ++win_events;
      if (i >= steady_from) steady_hits += hit;
      if (hooks_.debug) {
        *hooks_.debug << fmt::format("{},{},{},{},{}\n", i, ev.time_ns, ev.object, unit_id,
                                     hit ? 1 : 0);
      }

      if (!oracle) {
        const bool sampled = profiler_.sample(ev).has_value();
        if (sampled) tier_.record_sample(unit_id);
        if (tracking) tracker_.on_access(ev, heap_, delinquent_);
        if (sampled) {
          if (++since_epoch >= epoch) {
            since_epoch = 0;
            delinquent_ = profiler_.delinquent_set();
            migrate(ev.time_ns);
          }
          if (profiler_.decay_due()) {
            profiler_.decay_tick();
            tier_.decay(cfg_.profiler.decay_ratio);
            if (tracking) scan(ev.time_ns);
          }
        }
      }

      if (win_events == window || i + 1 == n) {
        close_window(ev.time_ns, win_hits, win_events);
        win_hits = 0;
        win_events = 0;
      }
    }

    auto& s = result_.summary;
    s.events = n;
    s.hits = hits;
    s.hit_ratio = ratio(hits, n);
    s.steady_hit_ratio = ratio(steady_hits, n - steady_from);
    s.amat_ns = amat(s.hit_ratio, cfg_.tier.latency_fast_ns, cfg_.tier.latency_slow_ns);
    s.steady_amat_ns =
        amat(s.steady_hit_ratio, cfg_.tier.latency_fast_ns, cfg_.tier.latency_slow_ns);
    s.migration_time_ns = static_cast<double>(s.moved_bytes_page) /
                          cfg_.tier.migration_bytes_per_s * static_cast<double>(kNsPerSecond);
    s.tracked_increments = tracker_.increments();
    s.tracked_saturated = tracker_.saturated_skips();
    s.heap_capacity = heap_.capacity();
    s.footprint = pop_.footprint;
    s.fast_capacity = fast_capacity_;
    s.cutoff_budget = budget_;
    measure_hot_space();
    if (hooks_.at_end) hooks_.at_end(heap_, tier_, pop_.layout);
    std::ostringstream dump;
    profiler_.dump_csv(dump);
    result_.profiler_dump = dump.str();
    return std::move(result_);
  }

 private:
  static KvWorkloadSpec resolve_spec(const ScenarioConfig& cfg) {
    KvWorkloadSpec spec = cfg.workload;
    spec.seed = cfg.seed;
    spec.shifts.clear();
    for (const auto& sh : cfg.shifts) {
      const auto at = static_cast<std::uint64_t>(sh.at_fraction *
                                                 static_cast<double>(cfg.duration_events));
      spec.shifts.push_back({at * kNsPerSecond / spec.qps, sh.seed});
    }
    return spec;
  }

  static ProfilerConfig profiler_config(const ScenarioConfig& cfg) {
    ProfilerConfig p = cfg.profiler;
    p.seed = mix_seed(cfg.seed ^ 0x5eed'0f'50a7ULL);
    return p;
  }

  void prepare_oracle() {
    map_ = AddressMap::from_heap(heap_);
    KvGenerator pass1(spec_, pop_.layout);
    const OracleUnit unit = oracle_unit(cfg_.policy);
    for (std::uint64_t i = 0; i < cfg_.duration_events; ++i) {
      oracle_.count(unit_of(*map_, pass1.next(), unit));
    }
    oracle_.place(fast_capacity_);
  }

  void migrate(std::uint64_t now) {
    const auto rep = tier_.migrate_epoch();
    result_.summary.moved_bytes_page += rep.moved_bytes;
    win_moved_page_ += rep.moved_bytes;
    result_.migrations.push_back({now, rep, tier_.fast_pages()});
  }

  void scan(std::uint64_t now) {
    ++scans_;
    const auto& cc = cfg_.compaction;
    std::optional<CutoffDecision> fixed;
    if (cfg_.policy == Policy::clove_no_cutoff) fixed = CutoffDecision::all_tracked();
    const ScanResult sr = scan_object_graph(heap_, budget_, fixed);
    const RegionSelection sel = select_regions(sr.regions, cc.low_watermark, cc.high_watermark);
    result_.scans.push_back({now, scans_, sr.histogram, sr.cutoff, sr.hot_small_bytes,
                             sel.selected.size()});

    const bool compaction_allowed = cfg_.policy != Policy::clove_one_shot || scans_ == 1;
    const bool normal_pass = (scans_ - 1) % cc.normal_gc_every == 0;
    std::optional<RelocationReport> rep;
    if (compaction_allowed && normal_pass) {
      const auto gc = plan_normal_gc(
          heap_, sr.cutoff, cc.gc_live_threshold,
          static_cast<Bytes>(cc.gc_free_reserve * static_cast<double>(heap_.capacity())));
      if (!sel.selected.empty() || !gc.evacuate.empty() || !gc.demote.empty()) {
        rep = compact(heap_, sr.cutoff, sel, CompactionKind::piggyback, gc,
                      cc.relocation_reserve_regions);
        ++result_.summary.normal_passes;
      }
    } else if (compaction_allowed && maybe_trigger_dedicated_phase(sel, cc.min_regions)) {
      rep = compact(heap_, sr.cutoff, sel, CompactionKind::dedicated, {},
                    cc.relocation_reserve_regions);
      ++result_.summary.dedicated_phases;
    }
    if (rep) {
      if (cfg_.tier.release_freed_pages) {
        const PageId per_region = cfg_.region_size / cfg_.tier.page_size;
        for (const RegionId r : rep->released) tier_.release_pages(r * per_region, per_region);
      }
      result_.summary.moved_bytes_object += rep->moved_bytes;
      result_.summary.truncated_passes += rep->truncated;
      win_moved_object_ += rep->moved_bytes;
      result_.relocations.push_back({now, scans_, std::move(*rep)});
    }
    refresh_counters(heap_, cfg_.tracker.refresh_ratio);
    result_.summary.scans = scans_;
  }

  void close_window(std::uint64_t now, std::uint64_t win_hits, std::uint64_t win_events) {
    TimelineRow row;
    row.time_ns = now;
    row.events = win_events;
    row.fast_hit_ratio = ratio(win_hits, win_events);
    row.amat_ns = amat(row.fast_hit_ratio, cfg_.tier.latency_fast_ns, cfg_.tier.latency_slow_ns);
    row.moved_bytes_object = win_moved_object_;
    row.moved_bytes_page = win_moved_page_;
    row.tracked_increments = tracker_.increments() - last_increments_;
    row.delinquent_set_size = delinquent_.size();
    result_.timeline.push_back(row);
    win_moved_object_ = 0;
    win_moved_page_ = 0;
    last_increments_ = tracker_.increments();
  }

  void measure_hot_space() {
    Bytes total = 0, fast = 0;
    const Bytes page = cfg_.tier.page_size;
    for (const auto& obj : heap_.objects()) {
      if (!obj.live || obj.large) continue;
      if (heap_.region(obj.region).designation != RegionClass::hot_space) continue;
      total += obj.size;
      const Bytes begin = heap_.address(obj.id);
      const Bytes end = begin + obj.size;
      for (Bytes a = begin; a < end;) {
        const Bytes next = std::min(end, (a / page + 1) * page);
        if (tier_.is_fast(a / page)) fast += next - a;
        a = next;
      }
    }
    result_.summary.hot_space_bytes = total;
    result_.summary.hot_space_fast_share = total ? ratio(fast, total) : 0.0;
  }

  const ScenarioConfig& cfg_;
  const RunHooks& hooks_;
  KvWorkloadSpec spec_;
  KvPopulation pop_;
  Heap& heap_;
  Profiler profiler_;
  HotnessTracker tracker_;
  Bytes fast_capacity_;
  Bytes budget_;
  TierState tier_;
  std::optional<AddressMap> map_;
  OraclePlacement oracle_;
  std::vector<SiteKey> delinquent_;
  std::uint64_t scans_ = 0;
  Bytes win_moved_object_ = 0;
  Bytes win_moved_page_ = 0;
  std::uint64_t last_increments_ = 0;
  RunResult result_;
};

}  // namespace

RunResult run(const ScenarioConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  return Simulation(cfg, hooks).run();
}

void write_timeline_csv(std::ostream& out, std::span<const TimelineRow> rows) {
  out << "time_ns,events,fast_hit_ratio,amat_ns,moved_bytes_object,moved_bytes_page,"
         "tracked_increments,delinquent_set_size\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{:.6f},{:.3f},{},{},{},{}\n", r.time_ns, r.events,
                       r.fast_hit_ratio, r.amat_ns, r.moved_bytes_object, r.moved_bytes_page,
                       r.tracked_increments, r.delinquent_set_size);
  }
}

void write_relocations_csv(std::ostream& out, std::span<const RelocationRow> rows) {
  out << "time_ns,scan,kind,regions,moved_bytes,moved_objects,moved_hot_bytes,"
         "moved_cold_bytes,selected_regions,selected_hot_bytes,min_source_ratio,"
         "max_source_ratio,freed_regions,truncated\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    double lo = 0.0, hi = 0.0;
    if (!r.source_ratios.empty()) {
      const auto [a, b] = std::minmax_element(r.source_ratios.begin(), r.source_ratios.end());
      lo = *a;
      hi = *b;
    }
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{},{}\n", row.time_ns,
                       row.scan, to_string(r.kind), r.scanned_regions, r.moved_bytes,
                       r.moved_objects, r.moved_hot_bytes, r.moved_cold_bytes,
                       r.source_ratios.size(), r.selected_hot_bytes, lo, hi, r.freed_regions,
                       r.truncated ? 1 : 0);
  }
}

void write_migrations_csv(std::ostream& out, std::span<const MigrationRow> rows) {
  out << "time_ns,promoted_pages,demoted_pages,moved_bytes,fast_pages\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{}\n", r.time_ns, r.report.promoted_pages,
                       r.report.demoted_pages, r.report.moved_bytes, r.fast_pages);
  }
}

void write_histograms_csv(std::ostream& out, std::span<const ScanRow> rows) {
  out << "scan,time_ns,bin,bytes,cutoff_bin,min_hot_counter,hot_bytes,selected_regions\n";
  for (const auto& r : rows) {
    const std::string cutoff = r.cutoff.cutoff_bin ? std::to_string(*r.cutoff.cutoff_bin) : "";
    for (int b = 0; b < kHistogramBins; ++b) {
      out << fmt::format("{},{},{},{},{},{},{},{}\n", r.scan, r.time_ns, b, r.histogram.bins[b],
                         cutoff, r.cutoff.min_hot_counter, r.hot_bytes, r.selected_regions);
    }
  }
}

std::string summary_csv_header() {
  return "policy,distribution,fast_fraction,seed,events,hit_ratio,steady_hit_ratio,amat_ns,"
         "steady_amat_ns,moved_bytes_object,moved_bytes_page,migration_time_ns,"
         "tracked_increments,tracked_saturated,scans,normal_passes,dedicated_phases,truncated_passes,"
         "heap_capacity,footprint,fast_capacity,cutoff_budget,hot_space_bytes,"
         "hot_space_fast_share";
}

std::string summary_csv_row(const ScenarioConfig& cfg, const RunSummary& s) {
  const char* dist = std::holds_alternative<Zipfian>(cfg.workload.distribution)   ? "zipfian"
                     : std::holds_alternative<HotWarm>(cfg.workload.distribution) ? "hotwarm"
                                                                                   : "uniform";
  return fmt::format(
      "{},{},{:.6f},{},{},{:.6f},{:.6f},{:.3f},{:.3f},{},{},{:.1f},{},{},{},{},{},{},{},{},{},{},{},"
      "{:.6f}",
      to_string(cfg.policy), dist, cfg.tier.fast_fraction, cfg.seed, s.events, s.hit_ratio,
      s.steady_hit_ratio, s.amat_ns, s.steady_amat_ns, s.moved_bytes_object, s.moved_bytes_page,
      s.migration_time_ns, s.tracked_increments, s.tracked_saturated, s.scans, s.normal_passes, s.dedicated_phases,
      s.truncated_passes, s.heap_capacity, s.footprint, s.fast_capacity, s.cutoff_budget,
      s.hot_space_bytes, s.hot_space_fast_share);
}

void write_results(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw SimError(fmt::format("cannot write {}", (dir / name).string()));
    return f;
  };
  {
    auto f = open("timeline.csv");
    write_timeline_csv(f, result.timeline);
  }
  {
    auto f = open("relocations.csv");
    write_relocations_csv(f, result.relocations);
  }
  {
    auto f = open("migrations.csv");
    write_migrations_csv(f, result.migrations);
  }
  {
    auto f = open("histograms.csv");
    write_histograms_csv(f, result.scans);
  }
  {
    auto f = open("profiler.csv");
    f << result.profiler_dump;
  }
  {
    auto f = open("summary.csv");
    f << summary_csv_header() << '\n' << summary_csv_row(result.config, result.summary) << '\n';
  }
}

}  // namespace objtier
