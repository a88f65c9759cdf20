#include "objtier/profiler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace objtier {

void ProfilerConfig::validate() const {
  if (sample_rate < 1) throw std::invalid_argument("sample_rate: must be >= 1");
  if (decay_window < 1) throw std::invalid_argument("decay_window: must be >= 1");
  if (!(decay_ratio > 0.0 && decay_ratio < 1.0)) {
    throw std::invalid_argument("decay_ratio: must be in (0,1)");
  }
  if (!(delinquency_threshold > 0.0 && delinquency_threshold < 1.0)) {
    throw std::invalid_argument("delinquency_threshold: must be in (0,1)");
  }
}

std::uint64_t decay_count(std::uint64_t count, double ratio) {
  if (ratio == 0.5) return count >> 1;
  return static_cast<std::uint64_t>(std::floor(static_cast<double>(count) * ratio));
}

Profiler::Profiler(ProfilerConfig config) : config_(config), rng_(config.seed ^ 0x9e0f'11e5ULL) {
  config_.validate();
  threshold_ = config_.sample_rate == 1
                   ? std::numeric_limits<std::uint64_t>::max()
                   : std::numeric_limits<std::uint64_t>::max() / config_.sample_rate;
}

std::optional<AccessEvent> Profiler::sample(const AccessEvent& ev) {
  if (config_.sample_rate != 1 && rng_.next_u64() >= threshold_) return std::nullopt;
  ++counts_[SiteKey{ev.site, ev.context}];
  ++total_;
  ++samples_;
  ++since_decay_;
  return ev;
}

void Profiler::decay_tick() {
  total_ = 0;
  for (auto it = counts_.begin(); it != counts_.end();) {
    it->second = decay_count(it->second, config_.decay_ratio);
    total_ += it->second;
    // Zero entries carry no information; dropping them keeps the map small.
    it = it->second == 0 ? counts_.erase(it) : std::next(it);
  }
  since_decay_ = 0;
  ++ticks_;
}

std::vector<SiteKey> Profiler::delinquent_set() const {
  return delinquent_set(config_.delinquency_threshold);
}

std::vector<SiteKey> Profiler::delinquent_set(double threshold) const {
  std::vector<SiteKey> out;
  if (total_ == 0) return out;
  const auto denom = static_cast<double>(total_);
  for (const auto& [key, count] : counts_) {
    if (static_cast<double>(count) / denom > threshold) out.push_back(key);
  }
  return out;
}

void Profiler::dump_csv(std::ostream& out) const {
  out << "site,context,count,ratio\n";
  for (const auto& [key, count] : counts_) {
    const double ratio = total_ ? static_cast<double>(count) / static_cast<double>(total_) : 0.0;
    out << fmt::format("{},{},{},{:.6f}\n", key.site, key.context, count, ratio);
  }
}

double coverage_against(std::span<const SiteKey> found, std::span<const SiteKey> reference) {
  if (reference.empty()) return 1.0;
  std::vector<SiteKey> a(found.begin(), found.end());
  std::vector<SiteKey> b(reference.begin(), reference.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::size_t hit = 0;
  for (const auto& k : b) hit += std::binary_search(a.begin(), a.end(), k) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(b.size());
}

}  // namespace objtier
