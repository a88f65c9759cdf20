#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "objtier/compaction.hpp"
#include "objtier/page_tier.hpp"
#include "objtier/profiler.hpp"
#include "objtier/sim.hpp"

namespace py = pybind11;
using namespace objtier;

namespace {

ScenarioConfig config_from(const std::string& text) {
  return parse_scenario(nlohmann::json::parse(text));
}

// The scenario's workload without hotness shifts, seeded like a run.
KvWorkloadSpec stationary(const ScenarioConfig& cfg) {
  KvWorkloadSpec spec = cfg.workload;
  spec.seed = cfg.seed;
  spec.shifts.clear();
  return spec;
}

KvPopulation population(const ScenarioConfig& cfg) {
  return build_kv_heap(stationary(cfg), HeapConfig{.region_size = cfg.region_size,
                                                   .page_size = cfg.tier.page_size,
                                                   .large_object_threshold =
                                                       cfg.large_object_threshold});
}

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["events"] = s.events;
  d["hits"] = s.hits;
  d["hit_ratio"] = s.hit_ratio;
  d["steady_hit_ratio"] = s.steady_hit_ratio;
  d["amat_ns"] = s.amat_ns;
  d["steady_amat_ns"] = s.steady_amat_ns;
  d["moved_bytes_object"] = s.moved_bytes_object;
  d["moved_bytes_page"] = s.moved_bytes_page;
  d["migration_time_ns"] = s.migration_time_ns;
  d["tracked_increments"] = s.tracked_increments;
  d["tracked_saturated"] = s.tracked_saturated;
  d["scans"] = s.scans;
  d["normal_passes"] = s.normal_passes;
  d["dedicated_phases"] = s.dedicated_phases;
  d["truncated_passes"] = s.truncated_passes;
  d["heap_capacity"] = s.heap_capacity;
  d["footprint"] = s.footprint;
  d["fast_capacity"] = s.fast_capacity;
  d["cutoff_budget"] = s.cutoff_budget;
  d["hot_space_bytes"] = s.hot_space_bytes;
  d["hot_space_fast_share"] = s.hot_space_fast_share;
  return d;
}

py::dict run_scenario(const std::string& config) {
  const auto cfg = config_from(config);
  RunResult result;
  {
    py::gil_scoped_release release;
    result = run(cfg);
  }
  py::list timeline;
  for (const auto& row : result.timeline) {
    py::dict r;
    r["time_ns"] = row.time_ns;
    r["events"] = row.events;
    r["fast_hit_ratio"] = row.fast_hit_ratio;
    r["amat_ns"] = row.amat_ns;
    r["moved_bytes_object"] = row.moved_bytes_object;
    r["moved_bytes_page"] = row.moved_bytes_page;
    r["tracked_increments"] = row.tracked_increments;
    r["delinquent_set_size"] = row.delinquent_set_size;
    timeline.append(std::move(r));
  }
  py::dict out;
  out["summary"] = summary_dict(result.summary);
  out["timeline"] = std::move(timeline);
  out["config"] = to_json(result.config).dump();
  return out;
}

// Oracle hit ratio of the scenario's stationary workload stream, per unit and fraction
// of the heap capacity.
py::dict oracle(const std::string& config, const std::vector<double>& fractions,
                const std::vector<std::string>& unit_names, std::uint64_t events) {
  const auto cfg = config_from(config);
  if (events == 0) events = cfg.duration_events;
  std::vector<OracleUnit> units;
  for (const auto& name : unit_names) units.push_back(parse_oracle_unit(name));
  std::vector<std::vector<double>> ratios(units.size(), std::vector<double>(fractions.size()));
  {
    py::gil_scoped_release release;
    auto pop = population(cfg);
    const auto map = AddressMap::from_heap(pop.heap);
    std::vector<std::vector<OraclePlacement>> placement(
        units.size(), std::vector<OraclePlacement>(fractions.size()));
    {
      KvGenerator gen(stationary(cfg), pop.layout);
      for (std::uint64_t i = 0; i < events; ++i) {
        const auto ev = gen.next();
        for (std::size_t u = 0; u < units.size(); ++u) {
          const auto key = unit_of(map, ev, units[u]);
          for (auto& p : placement[u]) p.count(key);
        }
      }
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
      for (std::size_t f = 0; f < fractions.size(); ++f) {
        placement[u][f].place(
            static_cast<Bytes>(fractions[f] * static_cast<double>(pop.heap.capacity())));
      }
    }
    std::vector<std::vector<std::uint64_t>> hits(units.size(),
                                                 std::vector<std::uint64_t>(fractions.size()));
    KvGenerator gen(stationary(cfg), pop.layout);
    for (std::uint64_t i = 0; i < events; ++i) {
      const auto ev = gen.next();
      for (std::size_t u = 0; u < units.size(); ++u) {
        const auto id = unit_of(map, ev, units[u]).id;
        for (std::size_t f = 0; f < fractions.size(); ++f) hits[u][f] += placement[u][f].is_fast(id);
      }
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
      for (std::size_t f = 0; f < fractions.size(); ++f) {
        ratios[u][f] = events ? static_cast<double>(hits[u][f]) / static_cast<double>(events) : 0.0;
      }
    }
  }
  py::dict out;
  for (std::size_t u = 0; u < units.size(); ++u) out[py::str(unit_names[u])] = ratios[u];
  return out;
}

// Delinquent (site, context) pairs after profiling `events` of the scenario's stream.
std::vector<std::pair<std::uint32_t, std::uint32_t>> delinquent_sites(const std::string& config,
                                                                      std::uint64_t events) {
  const auto cfg = config_from(config);
  std::vector<SiteKey> sites;
  {
    py::gil_scoped_release release;
    auto pop = population(cfg);
    KvGenerator gen(stationary(cfg), pop.layout);
    Profiler profiler(cfg.profiler);
    for (std::uint64_t i = 0; i < events; ++i) {
      profiler.sample(gen.next());
      if (profiler.decay_due()) profiler.decay_tick();
    }
    sites = profiler.delinquent_set();
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& s : sites) out.emplace_back(s.site, s.context);
  return out;
}

py::tuple cutoff(const std::vector<Bytes>& bins, Bytes budget) {
  if (bins.size() != kHistogramBins) {
    throw py::value_error("expected " + std::to_string(kHistogramBins) + " bins");
  }
  HotnessHistogram h;
  std::copy(bins.begin(), bins.end(), h.bins.begin());
  const auto c = compute_cutoff(h, budget);
  return py::make_tuple(c.cutoff_bin ? py::cast(*c.cutoff_bin) : py::none(), c.min_hot_counter);
}

}  // namespace

PYBIND11_MODULE(_objtier, m) {
  m.doc() = "Object-level tiered memory simulator";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("run_scenario", &run_scenario, py::arg("config"),
        "Run a scenario given as a JSON string; returns summary, timeline and config.");
  m.def("oracle", &oracle, py::arg("config"), py::arg("fractions"),
        py::arg("units") = std::vector<std::string>{"object", "4k", "2m"},
        py::arg("events") = 0,
        "Oracle placement hit ratios for the scenario's workload.");
  m.def("delinquent_sites", &delinquent_sites, py::arg("config"), py::arg("events"));
  m.def("compute_cutoff", &cutoff, py::arg("bins"), py::arg("budget"),
        "Returns (cutoff_bin or None, min_hot_counter).");
  m.def("bin_of", &HotnessHistogram::bin_of, py::arg("counter"));
  m.def("amat", &amat, py::arg("hit_ratio"), py::arg("latency_fast_ns"),
        py::arg("latency_slow_ns"));
  m.def("policies", [] {
    std::vector<std::string> names;
    for (const auto p : {Policy::clove, Policy::page_only, Policy::oracle_object, Policy::oracle_4k,
                         Policy::oracle_2m, Policy::clove_no_cutoff, Policy::clove_one_shot}) {
      names.emplace_back(to_string(p));
    }
    return names;
  });
}
