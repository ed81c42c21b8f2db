#include "aloha/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "aloha/error.hpp"
#include "aloha/parallel.hpp"
#include "aloha/rng.hpp"

namespace aloha {

namespace {

AnalyticModel model_of(const ExperimentConfig& c) {
  AnalyticModel m;
  m.intensity = c.effective_intensity();
  m.sinr_threshold = c.channel.sinr_threshold;
  m.link_distance = c.link_distance;
  m.alpha = c.channel.alpha;
  return m;
}

NetworkRealization realize(const ExperimentConfig& c, std::size_t k) {
  return generate_realization(c.effective_intensity(), c.region_side, c.link_distance, c.count_mode,
                              c.realization_seed(k));
}

std::string format_p(double p) {
  std::ostringstream os;
  os << p;
  return os.str();
}

void require_converged(const OptimizerReport& r) {
  if (!r.converged) {
    std::ostringstream os;
    os << r.scheme << " did not converge after " << r.iterations << " iterations (residual "
       << r.residual << ")";
    throw NumericalError(os.str(), r.residual);
  }
}

}  // namespace

std::string SchemeSpec::label() const {
  switch (scheme) {
    case Scheme::pf_ai: return "PF-AI";
    case Scheme::pf_ci: return "PF-CI";
    case Scheme::mt_ai: return "MT-AI";
    case Scheme::mt_ci: return "MT-CI";
    case Scheme::mt_ci_improved: return "MT-CI-improved";
    case Scheme::mm_ai: return "MM-AI";
    case Scheme::mm_ci: return "MM-CI";
    case Scheme::plain_aloha:
      return common_p < 0.0 ? "plain-aloha(best)" : "plain-aloha(" + format_p(common_p) + ")";
  }
  return "unknown";
}

SchemeSpec parse_scheme(const std::string& name) {
  if (name == "PF-AI") return {Scheme::pf_ai};
  if (name == "PF-CI") return {Scheme::pf_ci};
  if (name == "MT-AI") return {Scheme::mt_ai};
  if (name == "MT-CI") return {Scheme::mt_ci};
  if (name == "MT-CI-improved") return {Scheme::mt_ci_improved};
  if (name == "MM-AI") return {Scheme::mm_ai};
  if (name == "MM-CI") return {Scheme::mm_ci};
  if (name == "plain-aloha" || name == "plain-aloha(best)") return {Scheme::plain_aloha, -1.0};
  const std::string prefix = "plain-aloha(";
  if (name.rfind(prefix, 0) == 0 && name.back() == ')') {
    const std::string inner = name.substr(prefix.size(), name.size() - prefix.size() - 1);
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == inner.size() && used > 0 && p >= 0.0 && p <= 1.0) return {Scheme::plain_aloha, p};
  }
  throw ParameterError("unknown scheme '" + name + "'");
}

std::uint64_t ExperimentConfig::realization_seed(std::size_t k) const {
  return derive_seed(master_seed, k);
}

double ExperimentConfig::effective_intensity() const {
  if (n_nodes) return static_cast<double>(*n_nodes) / (region_side * region_side);
  return intensity;
}

void ExperimentConfig::validate() const {
  if (!(region_side > 0.0)) throw ParameterError("region_side must be positive");
  if (!(link_distance > 0.0)) throw ParameterError("link_distance must be positive");
  if (!(intensity >= 0.0)) throw ParameterError("intensity must be nonnegative");
  if (n_realizations < 1) throw ParameterError("n_realizations must be at least 1");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw ParameterError("window_fraction must lie in (0, 1]");
  if (schemes.empty()) throw ParameterError("scheme list must not be empty");
  channel.validate();
}

CdfCurve empirical_cdf(std::span<const double> samples, std::span<const double> grid) {
  if (samples.empty()) throw ParameterError("empirical_cdf needs at least one sample");
  if (grid.empty()) throw ParameterError("empirical_cdf needs a grid");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  const auto full = static_cast<double>(s.end() - std::lower_bound(s.begin(), s.end(), 1.0 - 1e-12));
  CdfCurve c;
  c.rho.assign(grid.begin(), grid.end());
  c.ccdf.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] >= 1.0) {
      c.ccdf[k] = full / n;
    } else {
      const auto above = s.end() - std::upper_bound(s.begin(), s.end(), grid[k]);
      c.ccdf[k] = static_cast<double>(above) / n;
    }
  }
  c.atom_at_one = full / n;
  return c;
}

double kolmogorov_distance(const CdfCurve& a, const CdfCurve& b) {
  if (a.rho.size() != b.rho.size() || a.ccdf.size() != a.rho.size() || b.ccdf.size() != b.rho.size())
    throw ParameterError("curves are not on a common grid");
  double d = std::abs(a.atom_at_one - b.atom_at_one);
  for (std::size_t k = 0; k < a.rho.size(); ++k) {
    if (std::abs(a.rho[k] - b.rho[k]) > 1e-12) throw ParameterError("curves are not on a common grid");
    d = std::max(d, std::abs(a.ccdf[k] - b.ccdf[k]));
  }
  return d;
}

RateReport plain_aloha_baseline(const InterferenceMatrix& b, double p_common) {
  const MapVector p = MapVector::constant(b.size(), p_common);
  return rate_report(p, b, ChannelParams{}, 1.0);
}

std::vector<double> common_p_grid(double step) {
  if (!(step > 0.0 && step <= 1.0)) throw ParameterError("grid step must lie in (0, 1]");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::llround(1.0 / step));
  for (std::size_t k = 1; k <= n; ++k) g.push_back(std::min(1.0, k * step));
  if (g.back() < 1.0) g.push_back(1.0);
  return g;
}

BestCommonP best_common_p(const InterferenceMatrix& b, std::span<const double> grid,
                          std::span<const std::size_t> nodes) {
  if (grid.empty()) throw ParameterError("common-p grid must not be empty");
  BestCommonP best{grid.front(), -1.0};
  for (double p : grid) {
    const RateReport r = plain_aloha_baseline(b, p);
    double agg = 0.0;
    if (nodes.empty()) {
      agg = r.aggregate;
    } else {
      for (std::size_t i : nodes) agg += r.rate[i];
    }
    if (agg > best.aggregate) best = {p, agg};
  }
  return best;
}

std::vector<double> solve_scheme(const SchemeSpec& spec, const InterferenceMatrix& b,
                                 const ExperimentConfig& config, std::uint64_t seed,
                                 std::span<const std::size_t> window) {
  GibbsOptions g = config.gibbs;
  g.seed = seed;
  g.on_sweep = nullptr;
  g.record_trace = false;
  switch (spec.scheme) {
    case Scheme::pf_ai: {
      auto r = prop_fair_global(b, config.fixed_point);
      require_converged(r);
      return r.p;
    }
    case Scheme::pf_ci: {
      auto r = prop_fair_nearest(b, nearest_interferer_structure(b), config.fixed_point);
      require_converged(r);
      return r.p;
    }
    case Scheme::mt_ai: return max_throughput_gibbs(b, g).p;
    case Scheme::mt_ci:
      return max_throughput_nearest(b, nearest_interferer_structure(b), NearestVariant::static_nearest, g).p;
    case Scheme::mt_ci_improved:
      return max_throughput_nearest(b, nearest_interferer_structure(b), NearestVariant::closest_active, g).p;
    case Scheme::mm_ai: {
      auto r = max_min_global(b, config.dual);
      require_converged(r);
      return r.p;
    }
    case Scheme::mm_ci: {
      auto r = max_min_nearest(b, nearest_interferer_structure(b), config.dual);
      require_converged(r);
      return r.p;
    }
    case Scheme::plain_aloha: {
      double p = spec.common_p;
      if (p < 0.0) {
        const auto grid = common_p_grid();
        p = best_common_p(b, grid, window).p;
      }
      return std::vector<double>(b.size(), p);
    }
  }
  throw ParameterError("unknown scheme");
}

namespace {

// Placeholder for a sample set that came out empty.
CdfCurve nan_curve(std::span<const double> grid) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {std::vector<double>(grid.begin(), grid.end()), std::vector<double>(grid.size(), nan), nan};
}

RealizationRecord failure_record(const ExperimentConfig& config, std::size_t k, std::size_t n_nodes,
                                 const std::string& message) {
  return {k, config.realization_seed(k), n_nodes, 0, true, "PF-AI", message};
}

}  // namespace

MapCdfResult run_map_cdf_experiment(const ExperimentConfig& config, Scheme scheme, bool with_analytic) {
  config.validate();
  if (scheme != Scheme::pf_ai && scheme != Scheme::pf_ci)
    throw ParameterError("MAP CDF experiments support PF-AI and PF-CI only");
  const SchemeSpec spec{scheme};
  const std::size_t K = config.n_realizations;

  std::vector<RealizationRecord> recs(K);
  std::vector<std::vector<MapSample>> per(K);
  parallel_for(K, config.threads, [&](std::size_t k) {
    RealizationRecord& rec = recs[k];
    rec.index = k;
    rec.seed = config.realization_seed(k);
    rec.scheme = spec.label();
    const NetworkRealization net = realize(config, k);
    rec.n_nodes = net.size();
    const auto window = window_nodes(net, config.window_fraction);
    rec.n_window = window.size();
    if (net.size() < 2) {
      for (std::size_t i : window) per[k].push_back({k, i, 1.0});
      return;
    }
    try {
      const auto b = interference_coefficients(net, config.channel);
      const auto p = solve_scheme(spec, b, config, rec.seed, window);
      for (std::size_t i : window) per[k].push_back({k, i, p[i]});
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.message = e.what();
    }
  });

  MapCdfResult out;
  out.scheme = spec.label();
  out.realizations = std::move(recs);
  for (std::size_t k = 0; k < K; ++k) {
    if (out.realizations[k].failed) {
      ++out.n_failed;
      continue;
    }
    out.samples.insert(out.samples.end(), per[k].begin(), per[k].end());
  }
  if (out.samples.empty()) {
    out.empirical = nan_curve(config.quadrature.rho_grid);
    out.fraction_full_access = std::numeric_limits<double>::quiet_NaN();
    if (with_analytic && scheme == Scheme::pf_ai)
      out.analytic = map_ccdf_curve(model_of(config), config.quadrature, config.threads);
    return out;
  }
  std::vector<double> ps;
  ps.reserve(out.samples.size());
  std::size_t full = 0;
  for (const auto& s : out.samples) {
    ps.push_back(s.p);
    if (s.p >= 1.0 - 1e-6) ++full;
  }
  out.fraction_full_access = static_cast<double>(full) / static_cast<double>(ps.size());
  out.empirical = empirical_cdf(ps, config.quadrature.rho_grid);
  if (with_analytic && scheme == Scheme::pf_ai) {
    out.analytic = map_ccdf_curve(model_of(config), config.quadrature, config.threads);
    out.kolmogorov = kolmogorov_distance(out.empirical, *out.analytic);
  }
  return out;
}

ConditionalCdfResult run_conditional_cdf_experiment(const ExperimentConfig& config,
                                                    std::span<const double> distances,
                                                    double half_width, bool with_analytic) {
  config.validate();
  if (distances.empty()) throw ParameterError("no conditioning distances given");
  if (!(half_width > 0.0)) throw ParameterError("bin half width must be positive");
  const std::size_t K = config.n_realizations, nd = distances.size();
  std::vector<std::vector<std::vector<double>>> per(K, std::vector<std::vector<double>>(nd));
  std::vector<std::optional<RealizationRecord>> failed(K);
  const SchemeSpec spec{Scheme::pf_ai};

  parallel_for(K, config.threads, [&](std::size_t k) {
    const NetworkRealization net = realize(config, k);
    if (net.size() < 2) return;
    const auto window = window_nodes(net, config.window_fraction);
    std::vector<double> p;
    try {
      p = solve_scheme(spec, interference_coefficients(net, config.channel), config,
                       config.realization_seed(k), window);
    } catch (const std::exception& e) {
      failed[k] = failure_record(config, k, net.size(), e.what());
      return;
    }
    for (std::size_t i : window)
      for (std::size_t j : window) {
        if (i == j) continue;
        const double d = distance(net.bipoles[i].tx, net.bipoles[j].tx);
        for (std::size_t m = 0; m < nd; ++m)
          if (std::abs(d - distances[m]) <= half_width) per[k][m].push_back(p[j]);
      }
  });

  ConditionalCdfResult out;
  out.distances.assign(distances.begin(), distances.end());
  out.half_width = half_width;
  for (std::size_t k = 0; k < K; ++k)
    if (failed[k]) out.failures.push_back(*failed[k]);
  out.n_failed = out.failures.size();
  for (std::size_t m = 0; m < nd; ++m) {
    std::vector<double> s;
    for (std::size_t k = 0; k < K; ++k) s.insert(s.end(), per[k][m].begin(), per[k][m].end());
    out.n_pairs.push_back(s.size());
    out.empirical.push_back(s.empty() ? nan_curve(config.quadrature.rho_grid)
                                      : empirical_cdf(s, config.quadrature.rho_grid));
    if (with_analytic) {
      out.analytic.push_back(conditional_map_ccdf_curve(distances[m], model_of(config), config.quadrature,
                                                        ConditionalVariant::transmitter_distance,
                                                        config.threads));
      out.kolmogorov.push_back(s.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : kolmogorov_distance(out.empirical.back(), out.analytic.back()));
    }
  }
  return out;
}

MeanUtilityEstimate run_mean_utility_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::size_t K = config.n_realizations;
  struct Part {
    double log_p = 0.0, log_q = 0.0;
    std::size_t n = 0;
    bool failed = false;
    std::size_t n_nodes = 0;
    std::string message;
  };
  std::vector<Part> parts(K);
  const SchemeSpec spec{Scheme::pf_ai};
  parallel_for(K, config.threads, [&](std::size_t k) {
    const NetworkRealization net = realize(config, k);
    const auto window = window_nodes(net, config.window_fraction);
    if (net.size() < 2) {
      parts[k].n = window.size();  // a lone node transmits always and always succeeds
      return;
    }
    try {
      const auto b = interference_coefficients(net, config.channel);
      const auto p = solve_scheme(spec, b, config, config.realization_seed(k), window);
      const auto q = success_probability(MapVector(p), b, config.channel, config.link_distance);
      for (std::size_t i : window) {
        parts[k].log_p += std::log(p[i]);
        parts[k].log_q += std::log(q[i]);
        ++parts[k].n;
      }
    } catch (const std::exception& e) {
      parts[k].failed = true;
      parts[k].n_nodes = net.size();
      parts[k].message = e.what();
    }
  });

  MeanUtilityEstimate est;
  double sp = 0.0, sq = 0.0;
  std::vector<double> means;
  for (std::size_t k = 0; k < K; ++k) {
    const Part& pt = parts[k];
    if (pt.failed) {
      ++est.n_failed;
      est.failures.push_back(failure_record(config, k, pt.n_nodes, pt.message));
      continue;
    }
    sp += pt.log_p;
    sq += pt.log_q;
    est.n_samples += pt.n;
    if (pt.n > 0) means.push_back((pt.log_p + pt.log_q) / static_cast<double>(pt.n));
  }
  if (est.n_samples == 0) {
    est.log_map_term = est.interference_term = est.total = est.total_stderr =
        std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  const double n = static_cast<double>(est.n_samples);
  est.log_map_term = sp / n;
  est.interference_term = sq / n;
  est.total = est.log_map_term + est.interference_term;
  if (means.size() > 1) {
    double m = 0.0, v = 0.0;
    for (double x : means) m += x;
    m /= static_cast<double>(means.size());
    for (double x : means) v += (x - m) * (x - m);
    v /= static_cast<double>(means.size() - 1);
    est.total_stderr = std::sqrt(v / static_cast<double>(means.size()));
  }
  return est;
}

SweepResult run_throughput_sweep(const ExperimentConfig& config, std::span<const std::size_t> n_values) {
  config.validate();
  if (n_values.empty()) throw ParameterError("n_values must not be empty");
  const std::size_t K = config.n_realizations, S = config.schemes.size();

  struct Cell {
    double aggregate = 0.0;
    double log_mean = 0.0;
    double common_p = 0.0;
    bool has_window = false;
    bool failed = false;
    std::string message;
  };

  SweepResult out;
  for (std::size_t n : n_values) {
    ExperimentConfig c = config;
    c.n_nodes = n;
    c.count_mode = CountMode::fixed;
    const std::uint64_t master = derive_seed(config.master_seed, n);
    std::vector<std::vector<Cell>> cells(K, std::vector<Cell>(S));

    parallel_for(K, config.threads, [&](std::size_t k) {
      const std::uint64_t seed = derive_seed(master, k);
      const NetworkRealization net = generate_realization(c.effective_intensity(), c.region_side,
                                                          c.link_distance, CountMode::fixed, seed);
      const auto window = window_nodes(net, c.window_fraction);
      InterferenceMatrix b;
      try {
        b = interference_coefficients(net, c.channel);
      } catch (const std::exception& e) {
        for (auto& cell : cells[k]) {
          cell.failed = true;
          cell.message = e.what();
        }
        return;
      }
      for (std::size_t s = 0; s < S; ++s) {
        Cell& cell = cells[k][s];
        try {
          const auto p = solve_scheme(c.schemes[s], b, c, derive_seed(seed, s + 1), window);
          const auto q = success_probability(MapVector(p), b, c.channel, c.link_distance);
          double logsum = 0.0;
          for (std::size_t i : window) {
            cell.aggregate += p[i] * q[i];
            logsum += std::log(p[i] * q[i]);
          }
          cell.has_window = !window.empty();
          cell.log_mean = window.empty() ? 0.0 : logsum / static_cast<double>(window.size());
          cell.common_p = p.empty() ? 0.0 : p.front();
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.message = e.what();
        }
      }
    });

    for (std::size_t s = 0; s < S; ++s) {
      SweepRow row;
      row.n_nodes = n;
      row.scheme = c.schemes[s].label();
      double sum = 0.0, sum2 = 0.0, logsum = 0.0, psum = 0.0;
      std::size_t n_log = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const Cell& cell = cells[k][s];
        if (cell.failed) {
          ++row.n_failed;
          out.failures.push_back({k, derive_seed(master, k), n, 0, true, row.scheme, cell.message});
          continue;
        }
        ++row.n_ok;
        sum += cell.aggregate;
        sum2 += cell.aggregate * cell.aggregate;
        psum += cell.common_p;
        if (cell.has_window) {
          logsum += cell.log_mean;
          ++n_log;
        }
      }
      if (row.n_ok > 0) {
        const double m = sum / static_cast<double>(row.n_ok);
        row.mean_aggregate = m;
        if (row.n_ok > 1) {
          const double var = std::max(0.0, (sum2 - row.n_ok * m * m) / static_cast<double>(row.n_ok - 1));
          row.stderr_aggregate = std::sqrt(var / static_cast<double>(row.n_ok));
        }
        row.mean_common_p = c.schemes[s].scheme == Scheme::plain_aloha ? psum / row.n_ok : 0.0;
      }
      row.mean_log_throughput = n_log > 0 ? logsum / static_cast<double>(n_log) : 0.0;
      out.rows.push_back(row);
    }
  }
  return out;
}

}  // namespace aloha
