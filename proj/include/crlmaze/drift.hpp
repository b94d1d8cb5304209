#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include "crlmaze/errors.hpp"

namespace crlmaze {

/// Reward-based drift detector. Keeps the last `window_long` per-episode
/// training rewards and gates the consolidation strength:
///   lambda = alpha  if mavg_short - mavg_long <= eta (after warm-up)
///   lambda = 0      otherwise.
class DriftDetector {
 public:
  DriftDetector() = default;
  DriftDetector(int window_short, int window_long, double eta, double alpha)
      : window_short_(window_short), window_long_(window_long), eta_(eta), alpha_(alpha) {
    if (window_short <= 0 || window_short >= window_long)
      throw ConfigError("window_short must be positive and smaller than window_long", "window_short");
  }

  void record_episode(double mean_cumulative_reward) {
    if (!std::isfinite(mean_cumulative_reward)) throw ContractViolation("drift detector fed a non-finite reward");
    rewards_.push_back(mean_cumulative_reward);
    while (rewards_.size() > static_cast<std::size_t>(window_long_)) rewards_.pop_front();
    ++episodes_recorded_;
  }

  /// Mean of the last `window_short` records (fewer while warming up).
  double short_average() const { return trailing_mean(window_short_); }
  double long_average() const { return trailing_mean(window_long_); }
  double gap() const { return short_average() - long_average(); }

  bool warmed_up() const { return episodes_recorded_ >= window_long_; }

  double current_lambda() const {
    if (!warmed_up()) return 0.0;
    return gap() <= eta_ ? alpha_ : 0.0;
  }

  int window_short() const { return window_short_; }
  int window_long() const { return window_long_; }
  double eta() const { return eta_; }
  double alpha() const { return alpha_; }
  std::int64_t episodes_recorded() const { return episodes_recorded_; }
  std::vector<double> buffer() const { return {rewards_.begin(), rewards_.end()}; }

  /// Rebuilds a detector from checkpointed fields.
  static DriftDetector restore(int window_short, int window_long, double eta, double alpha,
                               const std::vector<double>& buffer, std::int64_t episodes_recorded) {
    DriftDetector d(window_short, window_long, eta, alpha);
    if (buffer.size() > static_cast<std::size_t>(window_long))
      throw ContractViolation("detector buffer longer than window_long");
    d.rewards_.assign(buffer.begin(), buffer.end());
    d.episodes_recorded_ = episodes_recorded;
    return d;
  }

  bool operator==(const DriftDetector&) const = default;

 private:
  // Summed oldest-to-newest each time so the result depends only on the
  // recorded values, never on update history.
  double trailing_mean(int window) const {
    if (rewards_.empty()) return 0.0;
    const std::size_t n = std::min(rewards_.size(), static_cast<std::size_t>(window));
    double sum = 0.0;
    for (std::size_t i = rewards_.size() - n; i < rewards_.size(); ++i) sum += rewards_[i];
    return sum / static_cast<double>(n);
  }

  int window_short_ = 6;
  int window_long_ = 50;
  double eta_ = 0.0;
  double alpha_ = 0.0;
  std::deque<double> rewards_;
  std::int64_t episodes_recorded_ = 0;
};

}  // namespace crlmaze
