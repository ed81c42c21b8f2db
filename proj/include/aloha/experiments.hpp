#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aloha/net_model.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rate_model.hpp"
#include "aloha/stochgeo.hpp"

namespace aloha {

enum class Scheme { pf_ai, pf_ci, mt_ai, mt_ci, mt_ci_improved, mm_ai, mm_ci, plain_aloha };

/// A scheme entry. For plain Aloha a negative `common_p` selects the best
/// common p per instance on a 0.01 grid.
struct SchemeSpec {
  Scheme scheme = Scheme::pf_ai;
  double common_p = -1.0;

  /// "PF-AI", ..., "plain-aloha(0.5)", "plain-aloha(best)".
  std::string label() const;
};

/// Accepts "PF-AI", "PF-CI", "MT-AI", "MT-CI", "MT-CI-improved", "MM-AI",
/// "MM-CI", "plain-aloha", "plain-aloha(best)" and "plain-aloha(<p>)".
SchemeSpec parse_scheme(const std::string& name);

struct ExperimentConfig {
  double intensity = 0.25;
  /// When set, the node count overrides intensity (lambda = N / L^2).
  std::optional<std::size_t> n_nodes;
  double region_side = 40.0;
  double link_distance = 1.0;
  ChannelParams channel{};
  CountMode count_mode = CountMode::fixed;
  std::vector<SchemeSpec> schemes{{Scheme::pf_ai, -1.0}};
  std::size_t n_realizations = 1000;
  std::uint64_t master_seed = 1;
  double window_fraction = 0.5;

  FixedPointOptions fixed_point{};
  GibbsOptions gibbs{};  ///< seed is ignored, derived per realization
  DualOptions dual{};
  QuadratureSettings quadrature{};
  unsigned threads = 1;

  /// Realization seeds and the effective intensity.
  std::uint64_t realization_seed(std::size_t k) const;
  double effective_intensity() const;
  void validate() const;
};

struct RealizationRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t n_nodes = 0;
  std::size_t n_window = 0;
  bool failed = false;
  std::string scheme;
  std::string message;
};

/// A MAP sample traceable to its realization and node.
struct MapSample {
  std::size_t realization = 0;
  std::size_t node = 0;
  double p = 0.0;
};

/// ccdf(rho) = fraction of samples > rho for rho < 1; at rho = 1 and in
/// atom_at_one, the fraction >= 1 - 1e-12.
CdfCurve empirical_cdf(std::span<const double> samples, std::span<const double> grid);

/// max |a - b| over the common grid and the atoms.
double kolmogorov_distance(const CdfCurve& a, const CdfCurve& b);

struct MapCdfResult {
  std::string scheme;
  CdfCurve empirical;
  std::optional<CdfCurve> analytic;
  std::optional<double> kolmogorov;
  std::vector<MapSample> samples;
  std::vector<RealizationRecord> realizations;
  std::size_t n_failed = 0;
  /// Share of samples with p >= 1 - 1e-6.
  double fraction_full_access = 0.0;
};

/// Empirical MAP law of window nodes for PF-AI or PF-CI; for PF-AI also the
/// analytic curve and the Kolmogorov distance between them. Without any
/// sample the empirical curve is NaN and no distance is reported.
MapCdfResult run_map_cdf_experiment(const ExperimentConfig& config, Scheme scheme,
                                    bool with_analytic = true);

struct ConditionalCdfResult {
  std::vector<double> distances;
  double half_width = 0.0;
  std::vector<CdfCurve> empirical;
  std::vector<std::size_t> n_pairs;
  std::vector<CdfCurve> analytic;
  std::vector<double> kolmogorov;  ///< NaN for a bin without pairs
  std::size_t n_failed = 0;
  std::vector<RealizationRecord> failures;
};

/// PF-AI MAPs of window nodes binned by the distance between their transmitter
/// and another window node's transmitter, against the tagged-transmitter law.
ConditionalCdfResult run_conditional_cdf_experiment(const ExperimentConfig& config,
                                                    std::span<const double> distances,
                                                    double half_width, bool with_analytic = true);

struct MeanUtilityEstimate {
  double log_map_term = 0.0;       ///< mean of log p_i over window nodes
  double interference_term = 0.0;  ///< mean of log q_i over window nodes
  double total = 0.0;
  double total_stderr = 0.0;       ///< across realizations
  std::size_t n_samples = 0;
  std::size_t n_failed = 0;
  std::vector<RealizationRecord> failures;
};

/// Monte-Carlo E0[log p0 + log q0] under PF-AI with exact q (NaN without samples).
MeanUtilityEstimate run_mean_utility_experiment(const ExperimentConfig& config);

struct SweepRow {
  std::size_t n_nodes = 0;
  std::string scheme;
  double mean_aggregate = 0.0;       ///< window throughput sum_i p_i q_i, averaged
  double stderr_aggregate = 0.0;
  double mean_log_throughput = 0.0;  ///< per-node mean of log(p_i q_i), averaged; may be -inf
  double mean_common_p = 0.0;        ///< plain Aloha only
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RealizationRecord> failures;
};

/// Every scheme scored with the exact aggregate-interference q on the window.
SweepResult run_throughput_sweep(const ExperimentConfig& config, std::span<const std::size_t> n_values);

/// Uniform MAP p_common scored exactly.
RateReport plain_aloha_baseline(const InterferenceMatrix& b, double p_common);

struct BestCommonP {
  double p = 0.0;
  double aggregate = 0.0;
};

/// Common p on `grid` maximizing the aggregate over `nodes` (all nodes when empty).
BestCommonP best_common_p(const InterferenceMatrix& b, std::span<const double> grid,
                          std::span<const std::size_t> nodes = {});

/// 0.01, 0.02, ..., 1.
std::vector<double> common_p_grid(double step = 0.01);

/// Runs one scheme on a realization; returns the MAP (or 0/1 action) vector.
/// Throws NumericalError when the optimizer reports non-convergence.
std::vector<double> solve_scheme(const SchemeSpec& spec, const InterferenceMatrix& b,
                                 const ExperimentConfig& config, std::uint64_t seed,
                                 std::span<const std::size_t> window);

}  // namespace aloha
