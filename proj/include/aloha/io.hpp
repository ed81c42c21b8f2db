#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aloha/experiments.hpp"
#include "aloha/net_model.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rate_model.hpp"
#include "aloha/stochgeo.hpp"

namespace aloha::io {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Decimal with 12 significant digits; non-finite values as inf, -inf, nan.
std::string format_number(double v);

/// Finite values as JSON numbers, others as the strings of format_number.
json number(double v);
/// Inverse of number(); accepts numbers and the three strings.
double parse_number(const json& v, const std::string& field);

json to_json(const NetworkRealization& r);
/// Strict: missing or malformed fields throw ParameterError naming the field.
NetworkRealization realization_from_json(const json& j);

json to_json(const RateReport& r);
/// Header i,p,q,rate; one row per node.
std::string rate_report_csv(const RateReport& r);

json to_json(const OptimizerReport& r);
/// Header iteration,objective.
std::string trace_csv(const OptimizerReport& r);

json to_json(const AnalyticModel& m);
json to_json(const QuadratureSettings& q);
/// A comment line with the model, then rho,ccdf rows. The rho = 1 row holds
/// the atom P(p = 1).
std::string curve_csv(const CdfCurve& c, const AnalyticModel& m);
json to_json(const CdfCurve& c);
json to_json(const MeanUtility& u, const AnalyticModel& m);

/// Everything a command may read from its configuration file.
struct RunConfig {
  ExperimentConfig experiment{};
  /// Ordered experiment names: map_cdf, conditional_cdf, mean_utility, throughput_sweep.
  std::vector<std::string> experiments{"map_cdf"};
  std::vector<std::size_t> n_values{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<double> conditional_distances{1.0, 10.0};
  double conditional_half_width = 0.25;

  /// analyze: curve, conditional, mean-utility or laplace.
  std::string analysis_target = "curve";
  /// Transform route for laplace: kernel, generic or alpha4.
  std::string analysis_route = "kernel";
  double analysis_distance = 1.0;
  ConditionalVariant analysis_variant = ConditionalVariant::transmitter_distance;
  std::vector<double> laplace_rho{0.3, 0.7};
  std::vector<std::complex<double>> laplace_s{{1.0, 0.0}, {2.0, 3.0}};

  /// optimize: ERROR when absent and no --scheme flag.
  std::optional<std::string> scheme;
  ActionVector best_response_init;

  AnalyticModel analytic_model() const;
};

/// Strict parser: unknown keys and wrong types throw ParameterError naming the
/// dotted field path.
RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& c);

json to_json(const ExperimentConfig& c);

/// Reads and parses a whole file; ParameterError when unreadable or invalid.
json read_json_file(const std::string& path);
/// Serialized with two-space indentation and a trailing newline.
std::string dump(const json& j);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace aloha::io
