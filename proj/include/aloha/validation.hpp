#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aloha {

struct CriterionResult {
  int id = 0;
  std::string preset;
  bool passed = false;
  /// Ordered measurements and limits, e.g. kolmogorov, limit.
  std::vector<std::pair<std::string, double>> metrics;
  std::string detail;
  double seconds = 0.0;

  /// "PASS [1] cdf-lambda-0.25: kolmogorov=0.0123 limit=0.03".
  std::string line() const;
};

struct ValidationOptions {
  unsigned threads = 1;
  /// Overrides the realization count of Monte-Carlo criteria (full size when unset).
  std::optional<std::size_t> n_realizations;
  /// Overrides the number of random instances of the optimizer criteria.
  std::optional<std::size_t> n_instances;
  std::uint64_t seed = 1;
  /// Scratch directory for the determinism criterion (a temporary one when empty).
  std::string work_dir;
};

struct PresetInfo {
  std::string name;
  int criterion = 0;
  std::string summary;
};

/// Presets in criterion order.
const std::vector<PresetInfo>& validation_presets();

/// Runs one preset; throws ParameterError for an unknown name.
CriterionResult run_validation(const std::string& preset, const ValidationOptions& opts);

}  // namespace aloha
