#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "aloha/net_model.hpp"

namespace aloha {

/// Per-node medium access probabilities, each in [0, 1].
class MapVector {
 public:
  MapVector() = default;
  explicit MapVector(std::vector<double> p);
  MapVector(std::initializer_list<double> p) : MapVector(std::vector<double>(p)) {}

  static MapVector constant(std::size_t n, double value);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const noexcept { return p_[i]; }
  void set(std::size_t i, double value);
  std::span<const double> values() const noexcept { return p_; }
  const std::vector<double>& vector() const noexcept { return p_; }

  auto begin() const noexcept { return p_.begin(); }
  auto end() const noexcept { return p_.end(); }

 private:
  std::vector<double> p_;
};

struct RateReport {
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> rate;  ///< p_i q_i
  double aggregate = 0.0;    ///< sum of rates
  double log_utility = 0.0;  ///< sum of log rates, -inf when some rate is 0
  double min_rate = 0.0;
  bool has_zero_rate = false;
};

/// q_i = exp(-mu w T r0^alpha) prod_{j != i} (1 - p_j / (1 + b_ji)).
std::vector<double> success_probability(const MapVector& p, const InterferenceMatrix& b,
                                        const ChannelParams& params, double link_distance);

/// Closest-interferer approximation q~_i = 1 - p_c(i) / (1 + b_c(i)i).
std::vector<double> nearest_success_probability(const MapVector& p, const InterferenceMatrix& b,
                                                const NeighborStructure& nbr);

/// Assemble rates and aggregates from per-node success probabilities.
RateReport make_rate_report(const MapVector& p, std::span<const double> q);

/// Report with exact aggregate-interference success probabilities.
RateReport rate_report(const MapVector& p, const InterferenceMatrix& b, const ChannelParams& params,
                       double link_distance);

/// Aggregates restricted to `nodes` (e.g. an observation window).
RateReport restrict_report(const RateReport& full, std::span<const std::size_t> nodes);

struct SlotStatistics {
  std::uint64_t n_slots = 0;
  std::vector<std::uint64_t> attempts;
  std::vector<std::uint64_t> successes;

  /// successes / n_slots, an unbiased estimate of p_i q_i.
  std::vector<double> rate() const;
  /// successes / attempts, an estimate of q_i (0 when never attempted).
  std::vector<double> success_given_attempt() const;
};

/// Slot-level Monte Carlo: Bernoulli access, i.i.d. Exp(mu) fading redrawn every
/// slot, success iff SINR >= T. Slots are split into fixed chunks with derived
/// seeds, so the result does not depend on `threads`.
SlotStatistics simulate_slots(const NetworkRealization& realization, const MapVector& p,
                              const ChannelParams& params, std::uint64_t n_slots, std::uint64_t seed,
                              unsigned threads = 1);

}  // namespace aloha
