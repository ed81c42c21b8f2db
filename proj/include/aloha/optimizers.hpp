#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aloha/net_model.hpp"

namespace aloha {

/// Binary transmit decisions a_i in {0, 1}.
using ActionVector = std::vector<std::uint8_t>;

/// Temperature schedule for the Gibbs samplers, indexed by sweep t >= 1.
struct CoolingSchedule {
  enum class Kind { log_cooling, fixed_temperature };
  Kind kind = Kind::log_cooling;
  /// tau0 for log cooling, the constant temperature otherwise (may be +inf).
  double tau = 1.0;

  static CoolingSchedule logarithmic(double tau0) { return {Kind::log_cooling, tau0}; }
  static CoolingSchedule fixed(double tau) { return {Kind::fixed_temperature, tau}; }

  /// tau0 / log(1 + t) or the fixed temperature.
  double at(std::size_t t) const;
  void validate() const;
};

/// Dual step size beta(n), n >= 1.
struct StepSchedule {
  enum class Kind { inverse_sqrt, constant };
  Kind kind = Kind::inverse_sqrt;
  double beta0 = 0.1;

  double at(std::size_t n) const;
};

struct EdgeMultiplier {
  std::size_t from = 0;
  std::size_t to = 0;
  double value = 0.0;
};

/// Lagrange multipliers and log-rate variables of the max-min dual ascent.
struct DualState {
  std::vector<double> lambda;
  std::vector<EdgeMultiplier> mu;  ///< closest-interferer variant only
  std::vector<double> theta;       ///< one entry (global) or one per node
  std::vector<double> log_rate;    ///< log of each node's rate at the returned p
  double min_rate = 0.0;           ///< exp of the smallest log-rate
};

struct OptimizerReport {
  std::string scheme;
  std::vector<double> p;  ///< MAPs, or 0/1 actions for throughput schemes
  double objective_value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;
  std::vector<double> trace;
  std::optional<DualState> dual;
  /// Numeric configuration echoed for reproducibility (tolerances, schedules).
  std::map<std::string, double> settings;
  std::optional<std::uint64_t> seed;
};

// ---------------------------------------------------------------------------
// Proportional fair

struct FixedPointOptions {
  double tol = 1e-12;
  std::size_t max_iter = 200;
  /// Starting point of every per-node iteration.
  double start = 1.0;
  /// p <- (1 - relaxation) p + relaxation f(p). 1 is the plain iteration, which
  /// does not converge when a single interferer term is present.
  double relaxation = 0.5;
  /// Record sum_i log(p_i q_i) after every synchronous iteration.
  bool record_trace = false;
};

/// f_i(p) = (sum_{j != i} 1 / (1 + b_ij - p))^-1.
double prop_fair_map(const InterferenceMatrix& b, std::size_t i, double p);

/// Maximizer of sum_i log(p_i q_i) with aggregate interference.
OptimizerReport prop_fair_global(const InterferenceMatrix& b, const FixedPointOptions& opts = {});

/// Same with success probabilities of the closest-interferer approximation.
OptimizerReport prop_fair_nearest(const InterferenceMatrix& b, const NeighborStructure& nbr,
                                  const FixedPointOptions& opts = {});

/// C(i) = {j}: (1 + b_ij) / 2 if b_ij < 1, else 1.
double prop_fair_singleton_closed_form(double b_ij);

/// C(i) = {i-1, i+1}: the root in [0, 1] of 1/p = 1/(1+b- - p) + 1/(1+b+ - p),
/// or 1 when 1/b- + 1/b+ <= 1.
double prop_fair_linear_closed_form(double b_minus, double b_plus);

// ---------------------------------------------------------------------------
// Maximum throughput

/// Theta(M) = sum_{i in M} prod_{j in M \ i} (1 - 1/(1 + b_ji)).
double aggregate_throughput(const InterferenceMatrix& b, std::span<const std::uint8_t> a);

/// Objective of the closest-interferer approximation:
/// sum_{i in M} (1 - 1{c(i) in M} / (1 + b_c(i)i)).
double nearest_throughput(const InterferenceMatrix& b, const NeighborStructure& nbr,
                          std::span<const std::uint8_t> a);

/// Objective that charges each active node its closest active interferer:
/// sum_{i in M} (1 - 1/(1 + b_c(i,M)i)), with no charge when M = {i}.
double closest_active_throughput(const InterferenceMatrix& b, std::span<const std::uint8_t> a);

inline constexpr std::size_t kBruteForceMaxNodes = 22;

/// Exhaustive search over all 2^N subsets (N <= 22). Ties go to the
/// lexicographically smallest sorted index list.
OptimizerReport max_throughput_bruteforce(const InterferenceMatrix& b);

struct GibbsOptions {
  CoolingSchedule schedule = CoolingSchedule::logarithmic(1.0);
  std::uint64_t seed = 0;
  std::size_t n_sweeps = 2000;
  bool record_trace = false;
  /// Called with the action profile after every sweep.
  std::function<void(std::span<const std::uint8_t>)> on_sweep;
};

/// Gibbs sampler on Theta with the logistic rule P(a_i = 1) = 1/(1 + exp(-u_i/tau)),
/// u_i the marginal gain of node i. Returns the best profile visited.
OptimizerReport max_throughput_gibbs(const InterferenceMatrix& b, const GibbsOptions& opts);

/// Round-robin best responses (a_i = 1 iff u_i > 0) until no node switches.
/// The trace holds Theta after every switch.
OptimizerReport max_throughput_best_response(const InterferenceMatrix& b, const ActionVector& init);

enum class NearestVariant { static_nearest, closest_active };

/// Gibbs dynamics with closest-interferer utilities. The static variant pins
/// nodes whose utility is positive under any opponent profile and skips them.
OptimizerReport max_throughput_nearest(const InterferenceMatrix& b, const NeighborStructure& nbr,
                                       NearestVariant variant, const GibbsOptions& opts);

// ---------------------------------------------------------------------------
// Max-min fair

struct DualOptions {
  StepSchedule step{};
  double tol = 1e-6;
  std::size_t max_iter = 2000000;
  /// Inner fixed points are solved to tol * inner_tol_factor.
  double inner_tol_factor = 0.1;
  double initial_lambda = -1.0;  ///< negative: 1/N
  /// Lower clamp on p when forming log-rates for the multiplier step.
  double p_floor = 1e-9;
  bool record_trace = false;
};

/// Dual gradient projection for max theta s.t. theta <= log(p_i q_i).
OptimizerReport max_min_global(const InterferenceMatrix& b, const DualOptions& opts = {});

/// Closest-interferer max-min with per-node theta_i and edge multipliers mu_ij.
/// Each connected component of the link graph (edges i - c(i)) is solved
/// independently.
OptimizerReport max_min_nearest(const InterferenceMatrix& b, const NeighborStructure& nbr,
                                const DualOptions& opts = {});

/// Connected components of the undirected graph with edges i - c(i), each
/// sorted ascending, ordered by their smallest member.
std::vector<std::vector<std::size_t>> link_graph_components(const NeighborStructure& nbr);

}  // namespace aloha
