// objtier: command-line driver for the tiered-memory simulator.
//
//   objtier run <config.json> [--seed N] [--out DIR] [--emit-trace FILE]
//   objtier oracle <trace> [--unit object,4k,2m] (--fraction F... | --capacity-bytes B...)
//                          [--layout FILE] [--object-size B] [--out DIR]
//   objtier sweep <config.json> --fast 0.1,0.2,0.5 --policy clove,page_only [--jobs N]
//
// Results go to --out, else $OBJTIER_RESULTS_DIR, else ./results.
// Exit codes: 0 ok, 1 runtime error, 2 usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "objtier/sim.hpp"

namespace fs = std::filesystem;
using namespace objtier;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path results_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("OBJTIER_RESULTS_DIR"); env && *env) return env;
  return "results";
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw SimError(fmt::format("cannot write {}", p.string()));
  return f;
}

ScenarioConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  if (!fs::exists(path)) throw UsageError(fmt::format("config file '{}' not found", path));
  ScenarioConfig cfg = load_scenario(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed,
            const std::string& out_flag, const std::string& trace_path,
            const std::string& debug_path) {
  const ScenarioConfig cfg = load(config, seed);
  const fs::path out = results_dir(out_flag);
  std::optional<std::ofstream> trace, layout, debug;
  RunHooks hooks;
  if (!trace_path.empty()) {
    trace = open_out(trace_path);
    *trace << "# time_ns,site_id,context_id,object_id[,offset]\n";
    layout = open_out(fs::path(trace_path).string() + ".layout.csv");
    hooks.trace = &*trace;
    hooks.layout = &*layout;
  }
  if (!debug_path.empty()) {
    debug = open_out(debug_path);
    *debug << "index,time_ns,object,unit,hit\n";
    hooks.debug = &*debug;
  }
  const RunResult result = run(cfg, hooks);
  write_results(result, out);
  std::cout << summary_csv_header() << '\n' << summary_csv_row(cfg, result.summary) << '\n';
  return kExitOk;
}

// Streams the trace file once per pass; traces can be far larger than memory.
template <typename F>
void for_each_event(const std::string& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open trace file '{}'", path));
  TraceReader reader(in);
  AccessEvent ev;
  while (reader.next(ev)) f(ev);
}

int cmd_oracle(const std::string& trace, std::vector<std::string> units,
               const std::vector<double>& fractions, const std::vector<Bytes>& capacities,
               const std::string& layout_path, Bytes object_size, const std::string& out_flag) {
  if (fractions.empty() == capacities.empty()) {
    throw UsageError("give exactly one of --fraction or --capacity-bytes");
  }
  std::vector<OracleUnit> parsed;
  for (const auto& u : units) {
    try {
      parsed.push_back(parse_oracle_unit(u));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  AddressMap map;
  if (!layout_path.empty()) {
    std::ifstream in(layout_path);
    if (!in) throw UsageError(fmt::format("cannot open layout file '{}'", layout_path));
    map = AddressMap::read_csv(in);
  } else {
    ObjectId max_id = 0;
    for_each_event(trace, [&](const AccessEvent& ev) { max_id = std::max(max_id, ev.object); });
    map = AddressMap::uniform(std::uint64_t{max_id} + 1, object_size);
  }
  const Bytes heap = map.heap_capacity() ? map.heap_capacity()
                                         : static_cast<Bytes>(1.2 * static_cast<double>(map.footprint()));

  std::vector<Bytes> caps = capacities;
  for (const double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw UsageError("--fraction values must be in (0,1]");
    caps.push_back(static_cast<Bytes>(f * static_cast<double>(heap)));
  }

  std::vector<OraclePlacement> oracles(parsed.size());
  for_each_event(trace, [&](const AccessEvent& ev) {
    for (std::size_t u = 0; u < parsed.size(); ++u) oracles[u].count(unit_of(map, ev, parsed[u]));
  });

  const fs::path out = results_dir(out_flag);
  fs::create_directories(out);
  auto csv = open_out(out / "oracle.csv");
  std::string header = "capacity_bytes,fraction";
  for (const auto u : parsed) header += fmt::format(",{}", to_string(u));
  csv << header << '\n';
  std::cout << header << '\n';
  for (const Bytes cap : caps) {
    std::vector<std::uint64_t> hits(parsed.size(), 0);
    std::uint64_t events = 0;
    for (auto& o : oracles) o.place(cap);
    for_each_event(trace, [&](const AccessEvent& ev) {
      ++events;
      for (std::size_t u = 0; u < parsed.size(); ++u) {
        hits[u] += oracles[u].is_fast(unit_of(map, ev, parsed[u]).id);
      }
    });
    std::string row = fmt::format("{},{:.6f}", cap, static_cast<double>(cap) / static_cast<double>(heap));
    for (const auto h : hits) {
      row += fmt::format(",{:.6f}", events ? static_cast<double>(h) / static_cast<double>(events) : 0.0);
    }
    csv << row << '\n';
    std::cout << row << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config, std::optional<std::uint64_t> seed,
              const std::vector<double>& fast, const std::vector<std::string>& policies,
              unsigned jobs, const std::string& out_flag) {
  const ScenarioConfig base = load(config, seed);
  std::vector<ScenarioConfig> grid;
  for (const double f : fast) {
    for (const auto& p : policies) {
      ScenarioConfig c = base;
      c.tier.fast_fraction = f;
      c.policy = parse_policy(p);
      c.validate();
      grid.push_back(c);
    }
  }
  std::vector<std::optional<RunSummary>> summaries(grid.size());
  jobs = std::max(1u, jobs);
  for (std::size_t start = 0; start < grid.size(); start += jobs) {
    std::vector<std::future<RunSummary>> batch;
    for (std::size_t i = start; i < std::min(grid.size(), start + jobs); ++i) {
      batch.push_back(std::async(std::launch::async, [&grid, i] { return run(grid[i]).summary; }));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) summaries[start + k] = batch[k].get();
  }
  const fs::path out = results_dir(out_flag);
  fs::create_directories(out);
  auto csv = open_out(out / "sweep.csv");
  csv << summary_csv_header() << '\n';
  std::cout << summary_csv_header() << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto row = summary_csv_row(grid[i], *summaries[i]);
    csv << row << '\n';
    std::cout << row << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-level tiered memory simulator"};
  app.require_subcommand(1);

  std::string config, trace, out, emit_trace, debug_log, layout;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> units{"object", "4k", "2m"};
  std::vector<std::string> policies{"clove", "page_only"};
  std::vector<double> fractions, fast{0.1, 0.2, 0.5};
  std::vector<Bytes> capacities;
  Bytes object_size = 256;
  unsigned jobs = 1;

  auto* run_cmd = app.add_subcommand("run", "Run one scenario");
  run_cmd->add_option("config", config, "Scenario JSON file")->required();
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_option("--out", out, "Results directory");
  run_cmd->add_option("--emit-trace", emit_trace, "Write the generated event stream here");
  run_cmd->add_option("--debug-log", debug_log, "Write a per-event hit log here");

  auto* oracle_cmd = app.add_subcommand("oracle", "Oracle placement hit ratio of a trace");
  oracle_cmd->add_option("trace", trace, "Trace file")->required();
  oracle_cmd->add_option("--unit", units, "Relocation units: object, 4k, 2m")->delimiter(',');
  oracle_cmd->add_option("--fraction", fractions, "Fast capacity as a share of the heap")
      ->delimiter(',');
  oracle_cmd->add_option("--capacity-bytes", capacities, "Fast capacity in bytes")->delimiter(',');
  oracle_cmd->add_option("--layout", layout, "Object layout CSV written by run --emit-trace");
  oracle_cmd->add_option("--object-size", object_size,
                         "Object size when no layout is given (objects laid out by id)");
  oracle_cmd->add_option("--out", out, "Results directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a fast-fraction x policy grid");
  sweep_cmd->add_option("config", config, "Scenario JSON file")->required();
  sweep_cmd->add_option("--fast", fast, "Fast fractions")->delimiter(',');
  sweep_cmd->add_option("--policy", policies, "Policies")->delimiter(',');
  sweep_cmd->add_option("--seed", seed, "Override the config seed");
  sweep_cmd->add_option("--jobs", jobs, "Scenarios run in parallel");
  sweep_cmd->add_option("--out", out, "Results directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(config, seed, out, emit_trace, debug_log);
    if (*oracle_cmd) {
      return cmd_oracle(trace, units, fractions, capacities, layout, object_size, out);
    }
    if (*sweep_cmd) return cmd_sweep(config, seed, fast, policies, jobs, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
