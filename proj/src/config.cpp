#include <fstream>
#include <set>

#include <fmt/format.h>

#include "objtier/sim.hpp"

namespace objtier {

using nlohmann::json;

ConfigError::ConfigError(std::string path, const std::string& message)
    : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

namespace {

constexpr std::pair<Policy, std::string_view> kPolicies[] = {
    {Policy::clove, "clove"},
    {Policy::page_only, "page_only"},
    {Policy::oracle_object, "oracle_object"},
    {Policy::oracle_4k, "oracle_4k"},
    {Policy::oracle_2m, "oracle_2m"},
    {Policy::clove_no_cutoff, "clove_no_cutoff"},
    {Policy::clove_one_shot, "clove_one_shot"},
};

// Reads the members of one JSON object, remembering which keys were used so
// that leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string at(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* find(std::string_view key) {
    const auto it = node_.find(std::string(key));
    if (it == node_.end()) return nullptr;
    used_.insert(std::string(key));
    return &*it;
  }

  template <typename T>
  void get(std::string_view key, T& out) {
    const json* v = find(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) throw ConfigError(at(key), "expected a boolean");
      out = v->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (v->is_number_unsigned()) {
        out = static_cast<T>(v->get<std::uint64_t>());
      } else if (v->is_number_float() && v->get<double>() >= 0 &&
                 v->get<double>() == static_cast<double>(static_cast<std::uint64_t>(v->get<double>()))) {
        // Allow 1e7-style literals for counts.
        out = static_cast<T>(v->get<double>());
      } else {
        throw ConfigError(at(key), "expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) throw ConfigError(at(key), "expected a number");
      out = v->get<double>();
    } else {
      if (!v->is_string()) throw ConfigError(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& [k, _] : node_.items()) {
      if (!used_.contains(k)) throw ConfigError(at(k), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

void parse_workload(const json& node, ScenarioConfig& cfg) {
  Section s(node, "workload");
  auto& w = cfg.workload;
  s.get("key_count", w.key_count);
  s.get("value_size", w.value_size);
  s.get("metadata_size", w.metadata_size);
  s.get("reference_size", w.reference_size);
  s.get("qps", w.qps);
  s.get("get_fraction", w.get_fraction);
  s.get("background_fraction", w.background_fraction);
  s.get("background_sites", w.background_sites);
  s.get("background_ratio", w.background_ratio);
  s.get("directory_accesses", w.directory_accesses);
  if (const json* d = s.find("distribution")) {
    Section ds(*d, "workload.distribution");
    std::string type;
    ds.get("type", type);
    if (type == "zipfian") {
      Zipfian z;
      ds.get("s", z.s);
      w.distribution = z;
    } else if (type == "hotwarm") {
      HotWarm h;
      ds.get("hot_fraction", h.hot_fraction);
      ds.get("hot_mass", h.hot_mass);
      w.distribution = h;
    } else if (type == "uniform") {
      w.distribution = Uniform{};
    } else {
      throw ConfigError("workload.distribution.type",
                        fmt::format("unknown distribution '{}' (zipfian, hotwarm, uniform)", type));
    }
    ds.finish();
  }
  if (const json* sh = s.find("shifts")) {
    if (!sh->is_array()) throw ConfigError("workload.shifts", "expected an array");
    cfg.shifts.clear();
    for (std::size_t i = 0; i < sh->size(); ++i) {
      Section e((*sh)[i], fmt::format("workload.shifts[{}]", i));
      ShiftSpec spec;
      e.get("at_fraction", spec.at_fraction);
      e.get("seed", spec.seed);
      e.finish();
      cfg.shifts.push_back(spec);
    }
  }
  s.finish();
}

}  // namespace

std::string_view to_string(Policy policy) {
  for (const auto& [p, name] : kPolicies) {
    if (p == policy) return name;
  }
  return "?";
}

Policy parse_policy(std::string_view name) {
  for (const auto& [p, n] : kPolicies) {
    if (n == name) return p;
  }
  throw ConfigError("policy", fmt::format("unknown policy '{}'", name));
}

ScenarioConfig parse_scenario(const json& doc) {
  ScenarioConfig cfg;
  Section root(doc, "");
  std::string policy = std::string(to_string(cfg.policy));
  root.get("policy", policy);
  cfg.policy = parse_policy(policy);
  root.get("seed", cfg.seed);
  root.get("duration_events", cfg.duration_events);
  root.get("window_events", cfg.window_events);
  root.get("region_size", cfg.region_size);
  root.get("large_object_threshold", cfg.large_object_threshold);
  if (const json* w = root.find("workload")) parse_workload(*w, cfg);
  if (const json* p = root.find("profiler")) {
    Section s(*p, "profiler");
    s.get("sample_rate", cfg.profiler.sample_rate);
    s.get("decay_window", cfg.profiler.decay_window);
    s.get("decay_ratio", cfg.profiler.decay_ratio);
    s.get("delinquency_threshold", cfg.profiler.delinquency_threshold);
    s.finish();
  }
  if (const json* t = root.find("tracker")) {
    Section s(*t, "tracker");
    s.get("activation_period", cfg.tracker.activation_period);
    s.get("activation_phase", cfg.tracker.activation_phase);
    s.get("refresh_ratio", cfg.tracker.refresh_ratio);
    s.finish();
  }
  if (const json* c = root.find("compaction")) {
    Section s(*c, "compaction");
    s.get("low_watermark", cfg.compaction.low_watermark);
    s.get("high_watermark", cfg.compaction.high_watermark);
    s.get("min_regions", cfg.compaction.min_regions);
    s.get("normal_gc_every", cfg.compaction.normal_gc_every);
    s.get("budget_fraction", cfg.compaction.budget_fraction);
    s.get("gc_live_threshold", cfg.compaction.gc_live_threshold);
    s.get("gc_free_reserve", cfg.compaction.gc_free_reserve);
    s.get("relocation_reserve_regions", cfg.compaction.relocation_reserve_regions);
    s.finish();
  }
  if (const json* t = root.find("tier")) {
    Section s(*t, "tier");
    s.get("page_size", cfg.tier.page_size);
    s.get("fast_fraction", cfg.tier.fast_fraction);
    s.get("release_freed_pages", cfg.tier.release_freed_pages);
    std::string basis;
    s.get("capacity_basis", basis);
    if (basis == "footprint") {
      cfg.tier.capacity_basis = CapacityBasis::footprint;
    } else if (basis == "heap") {
      cfg.tier.capacity_basis = CapacityBasis::heap;
    } else if (!basis.empty()) {
      throw ConfigError("tier.capacity_basis",
                        fmt::format("unknown basis '{}' (heap, footprint)", basis));
    }
    s.get("epoch_samples", cfg.tier.epoch_samples);
    s.get("latency_fast_ns", cfg.tier.latency_fast_ns);
    s.get("latency_slow_ns", cfg.tier.latency_slow_ns);
    s.get("migration_bytes_per_s", cfg.tier.migration_bytes_per_s);
    s.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", fmt::format("cannot open config '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_scenario(doc);
}

void ScenarioConfig::validate() const {
  const auto fraction = [](double v, bool closed_low = false) {
    return closed_low ? (v >= 0.0 && v <= 1.0) : (v > 0.0 && v <= 1.0);
  };
  if (duration_events == 0) throw ConfigError("duration_events", "must be positive");
  if (region_size == 0) throw ConfigError("region_size", "must be positive");
  try {
    workload.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("workload", e.what());
  }
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    if (!(shifts[i].at_fraction >= 0.0 && shifts[i].at_fraction < 1.0)) {
      throw ConfigError(fmt::format("workload.shifts[{}].at_fraction", i), "must be in [0,1)");
    }
    if (i > 0 && shifts[i].at_fraction < shifts[i - 1].at_fraction) {
      throw ConfigError(fmt::format("workload.shifts[{}].at_fraction", i),
                        "shift points must be ordered");
    }
  }
  try {
    profiler.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("profiler", e.what());
  }
  try {
    tracker.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("tracker", e.what());
  }
  const auto& c = compaction;
  if (!fraction(c.low_watermark, true)) throw ConfigError("compaction.low_watermark", "must be in [0,1]");
  if (!fraction(c.high_watermark) || c.high_watermark < c.low_watermark) {
    throw ConfigError("compaction.high_watermark", "must be in (0,1] and >= low_watermark");
  }
  if (c.normal_gc_every == 0) throw ConfigError("compaction.normal_gc_every", "must be >= 1");
  if (!fraction(c.budget_fraction)) throw ConfigError("compaction.budget_fraction", "must be in (0,1]");
  if (!fraction(c.gc_live_threshold, true)) {
    throw ConfigError("compaction.gc_live_threshold", "must be in [0,1]");
  }
  if (!(c.gc_free_reserve >= 0.0 && c.gc_free_reserve < 1.0)) {
    throw ConfigError("compaction.gc_free_reserve", "must be in [0,1)");
  }
  if (tier.page_size == 0 || region_size % tier.page_size != 0) {
    throw ConfigError("tier.page_size", "must be positive and divide region_size");
  }
  if (!fraction(tier.fast_fraction)) throw ConfigError("tier.fast_fraction", "must be in (0,1]");
  if (!(tier.latency_fast_ns > 0.0)) throw ConfigError("tier.latency_fast_ns", "must be > 0");
  if (!(tier.latency_slow_ns >= tier.latency_fast_ns)) {
    throw ConfigError("tier.latency_slow_ns", "must be >= latency_fast_ns");
  }
  if (!(tier.migration_bytes_per_s > 0.0)) {
    throw ConfigError("tier.migration_bytes_per_s", "must be > 0");
  }
}

std::uint64_t ScenarioConfig::window() const {
  if (window_events) return window_events;
  return std::max<std::uint64_t>(1, duration_events / 60);
}

std::uint64_t ScenarioConfig::epoch_samples() const {
  if (tier.epoch_samples) return tier.epoch_samples;
  return std::max<std::uint64_t>(1, profiler.decay_window / 10);
}

json to_json(const ScenarioConfig& cfg) {
  const auto& w = cfg.workload;
  json dist;
  if (const auto* z = std::get_if<Zipfian>(&w.distribution)) {
    dist = {{"type", "zipfian"}, {"s", z->s}};
  } else if (const auto* h = std::get_if<HotWarm>(&w.distribution)) {
    dist = {{"type", "hotwarm"}, {"hot_fraction", h->hot_fraction}, {"hot_mass", h->hot_mass}};
  } else {
    dist = {{"type", "uniform"}};
  }
  json shifts = json::array();
  for (const auto& s : cfg.shifts) shifts.push_back({{"at_fraction", s.at_fraction}, {"seed", s.seed}});
  return {
      {"policy", to_string(cfg.policy)},
      {"seed", cfg.seed},
      {"duration_events", cfg.duration_events},
      {"window_events", cfg.window_events},
      {"region_size", cfg.region_size},
      {"large_object_threshold", cfg.large_object_threshold},
      {"workload",
       {{"key_count", w.key_count},
        {"value_size", w.value_size},
        {"metadata_size", w.metadata_size},
        {"reference_size", w.reference_size},
        {"qps", w.qps},
        {"get_fraction", w.get_fraction},
        {"background_fraction", w.background_fraction},
        {"background_sites", w.background_sites},
        {"background_ratio", w.background_ratio},
        {"directory_accesses", w.directory_accesses},
        {"distribution", dist},
        {"shifts", shifts}}},
      {"profiler",
       {{"sample_rate", cfg.profiler.sample_rate},
        {"decay_window", cfg.profiler.decay_window},
        {"decay_ratio", cfg.profiler.decay_ratio},
        {"delinquency_threshold", cfg.profiler.delinquency_threshold}}},
      {"tracker",
       {{"activation_period", cfg.tracker.activation_period},
        {"activation_phase", cfg.tracker.activation_phase},
        {"refresh_ratio", cfg.tracker.refresh_ratio}}},
      {"compaction",
       {{"low_watermark", cfg.compaction.low_watermark},
        {"high_watermark", cfg.compaction.high_watermark},
        {"min_regions", cfg.compaction.min_regions},
        {"normal_gc_every", cfg.compaction.normal_gc_every},
        {"budget_fraction", cfg.compaction.budget_fraction},
        {"gc_live_threshold", cfg.compaction.gc_live_threshold},
        {"gc_free_reserve", cfg.compaction.gc_free_reserve},
        {"relocation_reserve_regions", cfg.compaction.relocation_reserve_regions}}},
      {"tier",
       {{"page_size", cfg.tier.page_size},
        {"fast_fraction", cfg.tier.fast_fraction},
        {"release_freed_pages", cfg.tier.release_freed_pages},
        {"capacity_basis",
         cfg.tier.capacity_basis == CapacityBasis::heap ? "heap" : "footprint"},
        {"epoch_samples", cfg.tier.epoch_samples},
        {"latency_fast_ns", cfg.tier.latency_fast_ns},
        {"latency_slow_ns", cfg.tier.latency_slow_ns},
        {"migration_bytes_per_s", cfg.tier.migration_bytes_per_s}}},
  };
}

}  // namespace objtier
