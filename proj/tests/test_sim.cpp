#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "objtier/sim.hpp"

using namespace objtier;
using nlohmann::json;

namespace {

ScenarioConfig small_scenario(Policy policy = Policy::clove) {
  ScenarioConfig cfg;
  cfg.policy = policy;
  cfg.duration_events = 300'000;
  cfg.workload.key_count = 4000;
  cfg.workload.value_size = 1024;
  cfg.workload.background_fraction = 0.05;
  cfg.workload.distribution = HotWarm{};
  cfg.profiler.sample_rate = 50;
  cfg.profiler.decay_window = 400;
  cfg.tracker.activation_period = 4;
  cfg.tier.page_size = 4 * kKiB;
  cfg.window_events = 10'000;
  return cfg;
}

ScenarioConfig desk_config(const char* name) {
  return load_scenario(std::filesystem::path(OBJTIER_SOURCE_DIR) / "configs" / name);
}

std::string all_csv(const RunResult& r) {
  std::ostringstream out;
  write_timeline_csv(out, r.timeline);
  write_relocations_csv(out, r.relocations);
  write_migrations_csv(out, r.migrations);
  write_histograms_csv(out, r.scans);
  out << r.profiler_dump << summary_csv_row(r.config, r.summary);
  return out.str();
}

}  // namespace

TEST_CASE("amat examples") {
  CHECK(amat(1.0, 100, 300) == 100.0);
  CHECK(amat(0.0, 100, 300) == 300.0);
  CHECK(amat(0.5, 100, 300) == 200.0);
}

TEST_CASE("config parsing and field-path errors") {
  const auto cfg = parse_scenario(json::parse(R"({
    "policy": "page_only", "seed": 9, "duration_events": 1e6,
    "workload": {"key_count": 100, "distribution": {"type": "uniform"},
                 "shifts": [{"at_fraction": 0.5, "seed": 3}]},
    "tier": {"fast_fraction": 0.5, "capacity_basis": "footprint"}
  })"));
  CHECK(cfg.policy == Policy::page_only);
  CHECK(cfg.duration_events == 1'000'000);
  CHECK(std::holds_alternative<Uniform>(cfg.workload.distribution));
  CHECK(cfg.shifts.size() == 1);
  CHECK(cfg.tier.capacity_basis == CapacityBasis::footprint);
  // to_json round trip.
  const auto back = parse_scenario(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));

  const auto error_path = [](const char* text) {
    try {
      parse_scenario(json::parse(text));
    } catch (const ConfigError& e) {
      return e.path();
    }
    return std::string("<no error>");
  };
  CHECK(error_path(R"({"policy": "lru"})") == "policy");
  CHECK(error_path(R"({"bogus": 1})") == "bogus");
  CHECK(error_path(R"({"workload": {"key_count": -3}})") == "workload.key_count");
  CHECK(error_path(R"({"workload": {"distribution": {"type": "pareto"}}})") ==
        "workload.distribution.type");
  CHECK(error_path(R"({"workload": {"shifts": [{"at_fraction": 1.5}]}})") ==
        "workload.shifts[0].at_fraction");
  CHECK(error_path(R"({"tier": {"fast_fraction": 0}})") == "tier.fast_fraction");
  CHECK(error_path(R"({"tier": {"page_size": 3000}})") == "tier.page_size");
  CHECK(error_path(R"({"compaction": {"high_watermark": 0.01}})") ==
        "compaction.high_watermark");
  CHECK(error_path(R"({"duration_events": 0})") == "duration_events");
  CHECK(error_path(R"({"profiler": {"decay_ratio": 2}})") == "profiler");
  CHECK(error_path(R"({"tracker": "x"})") == "tracker");
  CHECK_THROWS_AS(load_scenario("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("policy names") {
  for (const auto p : {Policy::clove, Policy::page_only, Policy::oracle_object, Policy::oracle_4k,
                       Policy::oracle_2m, Policy::clove_no_cutoff, Policy::clove_one_shot}) {
    CHECK(parse_policy(to_string(p)) == p);
  }
  CHECK_THROWS_AS(parse_policy("ideal"), ConfigError);
}

TEST_CASE("identical config and seed give identical output") {
  for (const auto policy : {Policy::clove, Policy::page_only, Policy::oracle_4k}) {
    const auto cfg = small_scenario(policy);
    const auto a = run(cfg);
    const auto b = run(cfg);
    CHECK(all_csv(a) == all_csv(b));
  }
  auto other = small_scenario();
  other.seed = 2;
  CHECK(all_csv(run(other)) != all_csv(run(small_scenario())));
}

TEST_CASE("hit ratio is recomputable from the debug log") {
  for (const auto policy : {Policy::clove, Policy::oracle_object}) {
    const auto cfg = small_scenario(policy);
    std::stringstream log;
    RunHooks hooks;
    hooks.debug = &log;
    const auto r = run(cfg, hooks);
    std::uint64_t events = 0;
    std::uint64_t hits = 0;
    std::uint64_t steady = 0;
    std::vector<std::uint64_t> window_hits;
    std::string line;
    while (std::getline(log, line)) {
      std::uint64_t idx = 0, t = 0, obj = 0, unit = 0, hit = 0;
      char c;
      std::istringstream ls(line);
      ls >> idx >> c >> t >> c >> obj >> c >> unit >> c >> hit;
      REQUIRE(idx == events);
      ++events;
      hits += hit;
      if (idx >= cfg.duration_events - cfg.duration_events / 3) steady += hit;
      if (idx % cfg.window_events == 0) window_hits.push_back(0);
      window_hits.back() += hit;
    }
    CHECK(events == cfg.duration_events);
    CHECK(r.summary.hits == hits);
    CHECK(r.summary.hit_ratio == static_cast<double>(hits) / events);
    CHECK(r.summary.steady_hit_ratio ==
          static_cast<double>(steady) / (cfg.duration_events / 3));
    REQUIRE(window_hits.size() == r.timeline.size());
    for (std::size_t w = 0; w < window_hits.size(); ++w) {
      CHECK(r.timeline[w].fast_hit_ratio ==
            static_cast<double>(window_hits[w]) / r.timeline[w].events);
    }
  }
}

TEST_CASE("moved-byte totals equal the report rows") {
  auto cfg = small_scenario();
  cfg.duration_events = 600'000;
  const auto r = run(cfg);
  Bytes object = 0;
  Bytes page = 0;
  for (const auto& row : r.relocations) object += row.report.moved_bytes;
  for (const auto& row : r.migrations) page += row.report.moved_bytes;
  CHECK(r.summary.moved_bytes_object == object);
  CHECK(r.summary.moved_bytes_page == page);
  Bytes tl_object = 0;
  Bytes tl_page = 0;
  std::uint64_t increments = 0;
  for (const auto& row : r.timeline) {
    tl_object += row.moved_bytes_object;
    tl_page += row.moved_bytes_page;
    increments += row.tracked_increments;
    CHECK(row.amat_ns == amat(row.fast_hit_ratio, 100, 300));
  }
  CHECK(tl_object == object);
  CHECK(tl_page == page);
  CHECK(increments == r.summary.tracked_increments);
  CHECK(object > 0);
  CHECK(r.summary.scans > 0);
}

TEST_CASE("page_only on a uniform workload at half capacity") {
  const auto cfg = desk_config("uniform_page_only.json");
  const auto r = run(cfg);
  CHECK(std::abs(r.summary.steady_hit_ratio - 0.5) <= 0.02);
  CHECK(r.summary.moved_bytes_object == 0);
}

TEST_CASE("clove on HotWarm at 20 percent: capture and composition") {
  const auto cfg = desk_config("hotwarm.json");
  bool checked = false;
  RunHooks hooks;
  hooks.at_end = [&](const Heap& heap, const TierState&, const KvLayout&) {
    heap.check_invariants();
    checked = true;
  };
  const auto r = run(cfg, hooks);
  CHECK(checked);
  CHECK(r.summary.steady_hit_ratio >= 0.85);
  CHECK(r.summary.hot_space_bytes > 0);
  CHECK(r.summary.hot_space_fast_share >= 0.95);
  CHECK(r.summary.truncated_passes == 0);
}

TEST_CASE("results directory layout") {
  const auto dir = std::filesystem::temp_directory_path() / "objtier_test_results";
  std::filesystem::remove_all(dir);
  write_results(run(small_scenario()), dir);
  for (const char* f : {"timeline.csv", "relocations.csv", "migrations.csv", "histograms.csv",
                        "profiler.csv", "summary.csv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  std::ifstream in(dir / "summary.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == summary_csv_header());
  std::filesystem::remove_all(dir);
}
