#include "aloha/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "aloha/error.hpp"
#include "aloha/experiments.hpp"
#include "aloha/io.hpp"
#include "aloha/net_model.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/parallel.hpp"
#include "aloha/rate_model.hpp"
#include "aloha/stochgeo.hpp"
#include "aloha/validation.hpp"

namespace aloha {

namespace {

using io::json;
namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> threads;
  std::string format = "json";
};

void add_common(CLI::App* cmd, Common& c, const std::string& format_default) {
  c.format = format_default;
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--seed", c.seed, "Seed overriding the configuration");
  cmd->add_option("--out", c.out, "Output path (standard output when omitted)");
  cmd->add_option("--threads", c.threads, "Worker threads, 0 or omitted for all cores");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

io::RunConfig load_config(const Common& c) {
  io::RunConfig cfg;
  bool has_threads = false;
  if (!c.config.empty()) {
    const json j = io::read_json_file(c.config);
    cfg = io::run_config_from_json(j);
    has_threads = j.contains("threads");
  }
  if (c.seed) cfg.experiment.master_seed = *c.seed;
  if (c.threads)
    cfg.experiment.threads = *c.threads;
  else if (!has_threads)
    cfg.experiment.threads = 0;
  return cfg;
}

// Writes to --out or the given stream, plus a manifest next to a file output.
void emit(const Common& c, const std::string& text, std::ostream& out, const json& manifest) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  io::write_text_file(c.out, text);
  json m = manifest;
  m["outputs"] = json::array({c.out});
  m["finished"] = timestamp();
  io::write_text_file(c.out + ".manifest.json", io::dump(m));
}

json base_manifest(const std::string& command, const std::vector<std::string>& args, const json& config,
                   std::uint64_t seed) {
  json m;
  m["format"] = "aloha.manifest";
  m["command"] = command;
  m["arguments"] = args;
  m["version"] = ALOHA_VERSION;
  m["seed"] = seed;
  m["started"] = timestamp();
  m["config"] = config;
  return m;
}

// ---------------------------------------------------------------------------

int cmd_generate(const Common& c, const std::vector<std::string>& args, std::ostream& out) {
  const io::RunConfig cfg = load_config(c);
  const ExperimentConfig& e = cfg.experiment;
  const json manifest = base_manifest("generate", args, io::to_json(cfg), e.master_seed);
  const NetworkRealization net =
      generate_realization(e.effective_intensity(), e.region_side, e.link_distance, e.count_mode, e.master_seed);
  std::string text;
  if (c.format == "csv") {
    text = "i,x,y,phi\n";
    for (std::size_t i = 0; i < net.size(); ++i) {
      const auto& b = net.bipoles[i];
      text += std::to_string(i) + "," + io::format_number(b.tx.x) + "," + io::format_number(b.tx.y) + "," +
              io::format_number(b.rx_angle) + "\n";
    }
  } else {
    text = io::dump(io::to_json(net));
  }
  emit(c, text, out, manifest);
  return kExitOk;
}

OptimizerReport solve_named(const std::string& name, const InterferenceMatrix& b, const ExperimentConfig& e,
                            const io::RunConfig& cfg, bool trace) {
  GibbsOptions g = e.gibbs;
  g.seed = e.master_seed;
  g.record_trace = trace;
  FixedPointOptions fp = e.fixed_point;
  fp.record_trace = trace;
  DualOptions d = e.dual;
  d.record_trace = trace;
  if (name == "MT-BF") return max_throughput_bruteforce(b);
  if (name == "MT-BR") {
    ActionVector init = cfg.best_response_init;
    if (init.empty()) init.assign(b.size(), 0);
    if (init.size() != b.size()) throw ParameterError("field 'optimize.init' must have one entry per node");
    return max_throughput_best_response(b, init);
  }
  const SchemeSpec spec = parse_scheme(name);
  switch (spec.scheme) {
    case Scheme::pf_ai: return prop_fair_global(b, fp);
    case Scheme::pf_ci: return prop_fair_nearest(b, nearest_interferer_structure(b), fp);
    case Scheme::mt_ai: return max_throughput_gibbs(b, g);
    case Scheme::mt_ci:
      return max_throughput_nearest(b, nearest_interferer_structure(b), NearestVariant::static_nearest, g);
    case Scheme::mt_ci_improved:
      return max_throughput_nearest(b, nearest_interferer_structure(b), NearestVariant::closest_active, g);
    case Scheme::mm_ai: return max_min_global(b, d);
    case Scheme::mm_ci: return max_min_nearest(b, nearest_interferer_structure(b), d);
    case Scheme::plain_aloha: {
      OptimizerReport r;
      r.scheme = spec.label();
      double p = spec.common_p;
      if (p < 0.0) {
        const auto grid = common_p_grid();
        p = best_common_p(b, grid).p;
      }
      r.p.assign(b.size(), p);
      r.converged = true;
      r.settings["common_p"] = p;
      r.objective_value = plain_aloha_baseline(b, p).aggregate;
      return r;
    }
  }
  throw ParameterError("unknown scheme '" + name + "'");
}

int cmd_optimize(const Common& c, const std::vector<std::string>& args, const std::string& input,
                 std::string scheme, const std::string& trace_path, std::ostream& out, std::ostream& err) {
  const io::RunConfig cfg = load_config(c);
  const ExperimentConfig& e = cfg.experiment;
  if (scheme.empty()) scheme = cfg.scheme.value_or("");
  if (scheme.empty()) throw ParameterError("no scheme given (use --scheme)");
  const bool known = scheme == "MT-BF" || scheme == "MT-BR";
  if (!known) parse_scheme(scheme);  // usage error on unknown names

  const NetworkRealization net = io::realization_from_json(io::read_json_file(input));
  const InterferenceMatrix b = interference_coefficients(net, e.channel);
  const json manifest = base_manifest("optimize", args, io::to_json(cfg), e.master_seed);
  const OptimizerReport rep = solve_named(scheme, b, e, cfg, !trace_path.empty());
  const RateReport rates = rate_report(MapVector(rep.p), b, e.channel, net.link_distance);

  std::string text;
  if (c.format == "csv") {
    text = io::rate_report_csv(rates);
  } else {
    json j;
    j["format"] = "aloha.optimize";
    j["version"] = io::kFormatVersion;
    j["realization_seed"] = net.seed;
    j["n_nodes"] = net.size();
    j["report"] = io::to_json(rep);
    j["rates"] = io::to_json(rates);
    j["config"] = {{"channel",
                    {{"alpha", e.channel.alpha},
                     {"sinr_threshold", e.channel.sinr_threshold},
                     {"fading_rate", e.channel.fading_rate},
                     {"noise", e.channel.noise}}},
                   {"fixed_point", io::to_json(e)["fixed_point"]},
                   {"gibbs", io::to_json(e)["gibbs"]},
                   {"dual", io::to_json(e)["dual"]},
                   {"seed", e.master_seed}};
    text = io::dump(j);
  }
  emit(c, text, out, manifest);
  if (!trace_path.empty()) io::write_text_file(trace_path, io::trace_csv(rep));
  if (!rep.converged) {
    err << rep.scheme << " did not converge: residual " << io::format_number(rep.residual) << " after "
        << rep.iterations << " iterations\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_analyze(const Common& c, const std::vector<std::string>& args, const std::optional<std::string>& target,
                const std::optional<double>& distance, const std::optional<std::string>& route,
                const std::optional<std::string>& variant, std::ostream& out) {
  io::RunConfig cfg = load_config(c);
  if (target) cfg.analysis_target = *target;
  if (distance) cfg.analysis_distance = *distance;
  if (route) cfg.analysis_route = *route;
  if (variant) cfg.analysis_variant = *variant == "receiver" ? ConditionalVariant::receiver_distance
                                                             : ConditionalVariant::transmitter_distance;
  if (cfg.analysis_route != "kernel" && cfg.analysis_target != "laplace")
    throw ParameterError("--route applies to the laplace target only");
  const AnalyticModel model = cfg.analytic_model();
  const QuadratureSettings& quad = cfg.experiment.quadrature;
  const unsigned threads = cfg.experiment.threads;
  const json manifest = base_manifest("analyze", args, io::to_json(cfg), cfg.experiment.master_seed);

  std::string text;
  if (cfg.analysis_target == "curve" || cfg.analysis_target == "conditional") {
    const bool cond = cfg.analysis_target == "conditional";
    const CdfCurve curve = cond ? conditional_map_ccdf_curve(cfg.analysis_distance, model, quad,
                                                             cfg.analysis_variant, threads)
                                : map_ccdf_curve(model, quad, threads);
    if (c.format == "csv") {
      text = io::curve_csv(curve, model);
    } else {
      json j;
      j["format"] = "aloha.curve";
      j["version"] = io::kFormatVersion;
      j["target"] = cfg.analysis_target;
      j["model"] = io::to_json(model);
      j["quadrature"] = io::to_json(quad);
      if (cond) {
        j["distance"] = cfg.analysis_distance;
        j["variant"] = cfg.analysis_variant == ConditionalVariant::receiver_distance ? "receiver" : "transmitter";
      }
      j["curve"] = io::to_json(curve);
      text = io::dump(j);
    }
  } else if (cfg.analysis_target == "mean-utility") {
    const MeanUtility u = mean_utility(model, quad, threads);
    if (c.format == "csv") {
      text = "term,value\nlog_map_term," + io::format_number(u.log_map_term) + "\ninterference_term," +
             io::format_number(u.interference_term) + "\ntail," + io::format_number(u.tail) + "\ntotal," +
             io::format_number(u.total) + "\n";
    } else {
      json j = io::to_json(u, model);
      j["quadrature"] = io::to_json(quad);
      text = io::dump(j);
    }
  } else {
    json rows = json::array();
    std::string csv = "rho,s_re,s_im,re,im,abs\n";
    for (double rho : cfg.laplace_rho)
      for (const auto& s : cfg.laplace_s) {
        std::complex<double> v;
        if (cfg.analysis_route == "generic")
          v = laplace_shotnoise(rho, s, model, quad);
        else if (cfg.analysis_route == "alpha4")
          v = laplace_shotnoise_alpha4(rho, s, model, quad);
        else
          v = laplace_shotnoise_fast(rho, s, model);
        rows.push_back({{"rho", rho}, {"s", {s.real(), s.imag()}}, {"value", {v.real(), v.imag()}}});
        csv += io::format_number(rho) + "," + io::format_number(s.real()) + "," + io::format_number(s.imag()) +
               "," + io::format_number(v.real()) + "," + io::format_number(v.imag()) + "," +
               io::format_number(std::abs(v)) + "\n";
      }
    if (c.format == "csv") {
      text = csv;
    } else {
      json j;
      j["format"] = "aloha.laplace";
      j["version"] = io::kFormatVersion;
      j["route"] = cfg.analysis_route;
      j["model"] = io::to_json(model);
      j["values"] = std::move(rows);
      text = io::dump(j);
    }
  }
  emit(c, text, out, manifest);
  return kExitOk;
}

// ---------------------------------------------------------------------------

std::string num(double v) { return io::format_number(v); }

std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.' || ch == '_')) ch = '_';
  return s;
}

int cmd_experiment(const Common& c, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (c.out.empty()) throw ParameterError("experiment needs --out DIR");
  const io::RunConfig cfg = load_config(c);
  const ExperimentConfig& e = cfg.experiment;
  json manifest = base_manifest("experiment", args, io::to_json(cfg), e.master_seed);
  fs::create_directories(c.out);
  const fs::path dir(c.out);
  std::vector<std::string> outputs;
  auto write = [&](const std::string& name, const std::string& text) {
    io::write_text_file((dir / name).string(), text);
    outputs.push_back(name);
  };

  write("config.json", io::dump(io::to_json(cfg)));
  std::string failures = "experiment,realization,seed,n_nodes,scheme,message\n";
  auto fail_row = [&](const std::string& exp, std::size_t k, std::uint64_t seed, std::size_t n,
                      const std::string& scheme, std::string msg) {
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    failures += exp + "," + std::to_string(k) + "," + std::to_string(seed) + "," + std::to_string(n) + "," +
                scheme + "," + msg + "\n";
  };
  std::size_t attempted = 0, failed = 0;
  json summary;
  summary["format"] = "aloha.summary";
  summary["version"] = io::kFormatVersion;
  summary["manifest"] = "manifest.json";
  summary["seed"] = e.master_seed;
  json results = json::object();
  std::ostringstream table;
  bool aborted = false;

  for (const auto& name : cfg.experiments) {
    try {
      if (name == "map_cdf") {
        json part = json::object();
        for (const auto& spec : e.schemes) {
          if (spec.scheme != Scheme::pf_ai && spec.scheme != Scheme::pf_ci) continue;
          const MapCdfResult r = run_map_cdf_experiment(e, spec.scheme);
          attempted += r.realizations.size();
          failed += r.n_failed;
          for (const auto& rec : r.realizations)
            if (rec.failed) fail_row(name, rec.index, rec.seed, rec.n_nodes, rec.scheme, rec.message);
          std::string csv = r.analytic ? "rho,empirical_ccdf,analytic_ccdf\n" : "rho,empirical_ccdf\n";
          for (std::size_t k = 0; k < r.empirical.rho.size(); ++k) {
            csv += num(r.empirical.rho[k]) + "," + num(r.empirical.ccdf[k]);
            if (r.analytic) csv += "," + num(r.analytic->ccdf[k]);
            csv += "\n";
          }
          write("cdf_" + safe_name(r.scheme) + ".csv", csv);
          json s;
          s["samples"] = r.samples.size();
          s["failed"] = r.n_failed;
          s["fraction_full_access"] = io::number(r.fraction_full_access);
          s["atom_empirical"] = io::number(r.empirical.atom_at_one);
          if (r.kolmogorov) s["kolmogorov"] = *r.kolmogorov;
          part[r.scheme] = std::move(s);
          table << "map_cdf " << r.scheme << ": samples " << r.samples.size() << ", full access "
                << num(r.fraction_full_access);
          if (r.kolmogorov) table << ", kolmogorov " << num(*r.kolmogorov);
          table << "\n";
        }
        results["map_cdf"] = std::move(part);
      } else if (name == "conditional_cdf") {
        const ConditionalCdfResult r =
            run_conditional_cdf_experiment(e, cfg.conditional_distances, cfg.conditional_half_width);
        attempted += e.n_realizations;
        failed += r.n_failed;
        for (const auto& f : r.failures) fail_row(name, f.index, f.seed, f.n_nodes, f.scheme, f.message);
        std::string csv = "rho";
        for (double d : r.distances) csv += ",empirical_r" + num(d) + ",analytic_r" + num(d);
        csv += "\n";
        for (std::size_t k = 0; k < e.quadrature.rho_grid.size(); ++k) {
          csv += num(e.quadrature.rho_grid[k]);
          for (std::size_t m = 0; m < r.distances.size(); ++m)
            csv += "," + num(r.empirical[m].ccdf[k]) + "," + num(r.analytic[m].ccdf[k]);
          csv += "\n";
        }
        write("conditional_cdf.csv", csv);
        json part = json::array();
        for (std::size_t m = 0; m < r.distances.size(); ++m) {
          part.push_back({{"distance", r.distances[m]},
                          {"pairs", r.n_pairs[m]},
                          {"kolmogorov", io::number(r.kolmogorov[m])}});
          table << "conditional r=" << num(r.distances[m]) << ": pairs " << r.n_pairs[m] << ", kolmogorov "
                << num(r.kolmogorov[m]) << "\n";
        }
        results["conditional_cdf"] = {{"half_width", r.half_width}, {"failed", r.n_failed}, {"bins", part}};
      } else if (name == "mean_utility") {
        const MeanUtility a = mean_utility(cfg.analytic_model(), e.quadrature, e.threads);
        const MeanUtilityEstimate s = run_mean_utility_experiment(e);
        attempted += e.n_realizations;
        failed += s.n_failed;
        for (const auto& f : s.failures) fail_row(name, f.index, f.seed, f.n_nodes, f.scheme, f.message);
        json j;
        j["analytic"] = io::to_json(a, cfg.analytic_model());
        j["simulated"] = {{"log_map_term", io::number(s.log_map_term)},
                          {"interference_term", io::number(s.interference_term)},
                          {"total", io::number(s.total)},
                          {"total_stderr", io::number(s.total_stderr)},
                          {"samples", s.n_samples},
                          {"failed", s.n_failed}};
        write("mean_utility.json", io::dump(j));
        results["mean_utility"] = {{"analytic_total", a.total}, {"simulated_total", io::number(s.total)}};
        table << "mean_utility: analytic " << num(a.total) << ", simulated " << num(s.total) << " +- "
              << num(s.total_stderr) << "\n";
      } else if (name == "throughput_sweep") {
        const SweepResult r = run_throughput_sweep(e, cfg.n_values);
        std::string csv =
            "n_nodes,scheme,mean_aggregate,stderr_aggregate,mean_log_throughput,mean_common_p,n_ok,n_failed\n";
        json rows = json::array();
        for (const auto& row : r.rows) {
          attempted += row.n_ok + row.n_failed;
          failed += row.n_failed;
          csv += std::to_string(row.n_nodes) + "," + row.scheme + "," + num(row.mean_aggregate) + "," +
                 num(row.stderr_aggregate) + "," + num(row.mean_log_throughput) + "," + num(row.mean_common_p) +
                 "," + std::to_string(row.n_ok) + "," + std::to_string(row.n_failed) + "\n";
          rows.push_back({{"n_nodes", row.n_nodes},
                          {"scheme", row.scheme},
                          {"mean_aggregate", io::number(row.mean_aggregate)},
                          {"mean_log_throughput", io::number(row.mean_log_throughput)}});
          table << "sweep N=" << row.n_nodes << " " << row.scheme << ": aggregate " << num(row.mean_aggregate)
                << "\n";
        }
        for (const auto& f : r.failures) fail_row(name, f.index, f.seed, f.n_nodes, f.scheme, f.message);
        write("throughput_sweep.csv", csv);
        results["throughput_sweep"] = std::move(rows);
      }
    } catch (const NumericalError& ex) {
      err << name << ": " << ex.what() << " (error estimate " << num(ex.error_estimate()) << ")\n";
      results[name] = {{"error", ex.what()}};
      aborted = true;
    }
  }
  write("failures.csv", failures);
  const double ok_fraction =
      attempted == 0 ? 1.0 : static_cast<double>(attempted - failed) / static_cast<double>(attempted);
  summary["realizations_attempted"] = attempted;
  summary["realizations_failed"] = failed;
  summary["success_fraction"] = ok_fraction;
  summary["results"] = std::move(results);
  const bool success = !aborted && ok_fraction >= 0.9;
  summary["status"] = success ? "ok" : "failed";
  write("summary.json", io::dump(summary));
  manifest["outputs"] = outputs;
  manifest["finished"] = timestamp();
  io::write_text_file((dir / "manifest.json").string(), io::dump(manifest));

  out << table.str();
  out << "realizations: " << attempted << " attempted, " << failed << " failed\n";
  return success ? kExitOk : kExitNumerical;
}

int cmd_validate(const Common& c, const std::vector<std::string>& args, const std::string& preset, bool list,
                 std::ostream& out) {
  if (list) {
    for (const auto& p : validation_presets())
      out << p.name << "  [" << p.criterion << "] " << p.summary << "\n";
    out << "all  runs every preset\n";
    return kExitOk;
  }
  if (preset.empty()) throw ParameterError("validate needs a preset name (see --list)");
  std::vector<std::string> names;
  if (preset == "all") {
    for (const auto& p : validation_presets()) names.push_back(p.name);
  } else {
    bool found = false;
    for (const auto& p : validation_presets()) found = found || p.name == preset;
    if (!found) throw ParameterError("unknown preset '" + preset + "' (see --list)");
    names.push_back(preset);
  }
  ValidationOptions opts;
  opts.threads = c.threads.value_or(0);
  if (c.seed) opts.seed = *c.seed;
  if (!c.config.empty()) {
    const json j = io::read_json_file(c.config);
    if (!j.is_object()) throw ParameterError("validate config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it->is_number_unsigned())
        throw ParameterError("field '" + it.key() + "' must be a nonnegative integer");
      if (it.key() == "n_realizations")
        opts.n_realizations = it->get<std::size_t>();
      else if (it.key() == "n_instances")
        opts.n_instances = it->get<std::size_t>();
      else if (it.key() == "seed")
        opts.seed = c.seed.value_or(it->get<std::uint64_t>());
      else
        throw ParameterError("unknown field '" + it.key() + "'");
    }
  }
  const json manifest = base_manifest("validate", args, json::object(), opts.seed);
  bool all = true;
  json report = json::array();
  std::string csv = "criterion,preset,passed,metric,value\n";
  for (const auto& name : names) {
    const CriterionResult r = run_validation(name, opts);
    out << r.line() << "  " << std::fixed << std::setprecision(1) << r.seconds << " s\n";
    out.unsetf(std::ios::fixed);
    all = all && r.passed;
    json m = json::object();
    for (const auto& [k, v] : r.metrics) {
      m[k] = io::number(v);
      csv += std::to_string(r.id) + "," + r.preset + "," + (r.passed ? "1" : "0") + "," + k + "," + num(v) + "\n";
    }
    report.push_back({{"criterion", r.id}, {"preset", r.preset}, {"passed", r.passed}, {"metrics", m},
                      {"detail", r.detail}});
  }
  if (!c.out.empty()) {
    const std::string text = c.format == "csv" ? csv : io::dump(report);
    json mf = manifest;
    emit(c, text, out, mf);
  }
  return all ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive spatial Aloha: MAP optimizers, stochastic-geometry analytics, experiments"};
  app.name("aloha");
  app.require_subcommand(1);
  app.set_version_flag("--version", ALOHA_VERSION);

  Common gen_c, opt_c, ana_c, exp_c, val_c;
  auto* gen = app.add_subcommand("generate", "Sample a bipole realization");
  add_common(gen, gen_c, "json");

  auto* opt = app.add_subcommand("optimize", "Run a MAP optimizer on a realization");
  add_common(opt, opt_c, "json");
  std::string input, scheme, trace;
  opt->add_option("--input", input, "Realization JSON file")->required();
  opt->add_option("--scheme", scheme,
                  "PF-AI, PF-CI, MT-AI, MT-CI, MT-CI-improved, MM-AI, MM-CI, plain-aloha(p), MT-BF, MT-BR");
  opt->add_option("--trace", trace, "Write the per-iteration objective trace as CSV");

  auto* ana = app.add_subcommand("analyze", "Evaluate the analytic MAP law or mean utility");
  add_common(ana, ana_c, "csv");
  std::optional<std::string> target, route, variant;
  std::optional<double> dist;
  ana->add_option("--target", target, "curve, conditional, mean-utility or laplace")
      ->check(CLI::IsMember({"curve", "conditional", "mean-utility", "laplace"}));
  ana->add_option("--distance", dist, "Conditioning distance for the conditional target");
  ana->add_option("--route", route, "Transform route for laplace: kernel, generic, alpha4")
      ->check(CLI::IsMember({"kernel", "generic", "alpha4"}));
  ana->add_option("--variant", variant, "Conditioning variant: transmitter or receiver")
      ->check(CLI::IsMember({"transmitter", "receiver"}));

  auto* exp = app.add_subcommand("experiment", "Run the configured Monte-Carlo experiments");
  add_common(exp, exp_c, "csv");

  auto* val = app.add_subcommand("validate", "Run acceptance presets");
  add_common(val, val_c, "json");
  std::string preset;
  bool list = false;
  val->add_option("preset", preset, "Preset name or all");
  val->add_flag("--list", list, "List presets");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_c, args, out);
    if (opt->parsed()) return cmd_optimize(opt_c, args, input, scheme, trace, out, err);
    if (ana->parsed()) return cmd_analyze(ana_c, args, target, dist, route, variant, out);
    if (exp->parsed()) return cmd_experiment(exp_c, args, out, err);
    if (val->parsed()) return cmd_validate(val_c, args, preset, list, out);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << " (error estimate " << io::format_number(e.error_estimate())
        << ")\n";
    return kExitNumerical;
  } catch (const GeometryError& e) {
    err << "geometry error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace aloha
