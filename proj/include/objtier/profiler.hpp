#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "objtier/rng.hpp"
#include "objtier/workload.hpp"

namespace objtier {

/// An access site qualified by its caller context.
struct SiteKey {
  std::uint32_t site = 0;
  std::uint32_t context = 0;
  friend auto operator<=>(const SiteKey&, const SiteKey&) = default;
};

struct ProfilerConfig {
  /// 1-in-R sampling of miss events.
  std::uint64_t sample_rate = 2000;
  /// Number of samples between decay ticks.
  std::uint64_t decay_window = 1'000'000;
  double decay_ratio = 0.5;
  double delinquency_threshold = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Online miss profiler: subsamples miss events, keeps per-(site, context)
/// counts that are scaled by decay_ratio every decay_window samples, and
/// reports the sites whose share of the decayed total exceeds the threshold.
class Profiler {
 public:
  explicit Profiler(ProfilerConfig config);

  /// Bernoulli(1/R) selection. Selected events are counted and returned.
  std::optional<AccessEvent> sample(const AccessEvent& ev);

  /// True once decay_window samples have accumulated since the last tick.
  bool decay_due() const { return since_decay_ >= config_.decay_window; }
  void decay_tick();

  /// Sorted; strict inequality against the threshold.
  std::vector<SiteKey> delinquent_set() const;
  std::vector<SiteKey> delinquent_set(double threshold) const;

  const std::map<SiteKey, std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t samples() const { return samples_; }
  std::uint64_t ticks() const { return ticks_; }
  const ProfilerConfig& config() const { return config_; }

  /// site,context,count,ratio rows.
  void dump_csv(std::ostream& out) const;

 private:
  ProfilerConfig config_;
  Rng rng_;
  std::uint64_t threshold_;  // u64 draws below this are sampled
  std::map<SiteKey, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t samples_ = 0;
  std::uint64_t since_decay_ = 0;
  std::uint64_t ticks_ = 0;
};

/// |found ∩ reference| / |reference|; 1.0 for an empty reference.
double coverage_against(std::span<const SiteKey> found, std::span<const SiteKey> reference);

/// floor(count * ratio) without drifting for the common ratio 1/2.
std::uint64_t decay_count(std::uint64_t count, double ratio);

}  // namespace objtier
