#include "aloha/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "aloha/cli.hpp"
#include "aloha/error.hpp"
#include "aloha/experiments.hpp"
#include "aloha/io.hpp"
#include "aloha/net_model.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rate_model.hpp"
#include "aloha/rng.hpp"
#include "aloha/stochgeo.hpp"

namespace aloha {

namespace {

using cplx = std::complex<double>;

std::string fmt(double v) { return io::format_number(v); }

ExperimentConfig reference_config(const ValidationOptions& o, std::size_t default_realizations) {
  ExperimentConfig c;
  c.intensity = 0.25;
  c.region_side = 40.0;
  c.link_distance = 1.0;
  c.channel = ChannelParams{};
  c.n_realizations = o.n_realizations.value_or(default_realizations);
  c.master_seed = o.seed;
  c.threads = o.threads;
  return c;
}

// Random instance of n nodes at intensity 0.25 with unit links.
InterferenceMatrix random_instance(std::size_t n, std::uint64_t seed, double threshold = 10.0) {
  ChannelParams ch;
  ch.sinr_threshold = threshold;
  const double side = std::sqrt(static_cast<double>(n) / 0.25);
  return interference_coefficients(generate_realization(0.25, side, 1.0, CountMode::fixed, seed), ch);
}

AnalyticModel reference_model() { return AnalyticModel{}; }

// c1: analytic MAP law against PF-AI simulation
CriterionResult map_cdf(const ValidationOptions& o) {
  CriterionResult r;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run_map_cdf_experiment(reference_config(o, 1000), Scheme::pf_ai);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double d = res.kolmogorov.value_or(1.0);
  r.passed = d <= 0.03 && res.n_failed == 0 && secs <= 900.0;
  r.metrics = {{"kolmogorov", d},
               {"limit", 0.03},
               {"samples", static_cast<double>(res.samples.size())},
               {"failed", static_cast<double>(res.n_failed)},
               {"realizations", static_cast<double>(res.realizations.size())}};
  r.detail = "runtime budget 900 s";
  return r;
}

// c2: conditional ordering and agreement with binned simulation
CriterionResult conditional(const ValidationOptions& o) {
  CriterionResult r;
  const std::vector<double> dist{1.0, 10.0};
  const auto cfg = reference_config(o, 1000);
  const auto res = run_conditional_cdf_experiment(cfg, dist, 0.25);
  const auto& near = res.analytic[0];
  const auto& far = res.analytic[1];
  const double slack = 2.0 * cfg.quadrature.contour_rel_tol;
  double worst = -1.0;
  for (std::size_t k = 0; k < near.rho.size(); ++k) {
    if (near.rho[k] < 0.05 || near.rho[k] > 0.95) continue;
    worst = std::max(worst, near.ccdf[k] - far.ccdf[k]);
  }
  const bool ordered = worst <= slack;
  r.passed = ordered && res.kolmogorov[0] <= 0.05 && res.kolmogorov[1] <= 0.05 && res.n_failed == 0;
  r.metrics = {{"max_excess_r1_over_r10", worst},
               {"kolmogorov_r1", res.kolmogorov[0]},
               {"kolmogorov_r10", res.kolmogorov[1]},
               {"limit", 0.05},
               {"pairs_r1", static_cast<double>(res.n_pairs[0])},
               {"pairs_r10", static_cast<double>(res.n_pairs[1])},
               {"failed", static_cast<double>(res.n_failed)}};
  r.detail = "pairs binned by transmitter distance within 0.25";
  return r;
}

// c3: fixed point convergence and start independence
CriterionResult contraction(const ValidationOptions& o) {
  CriterionResult r;
  const std::size_t n = o.n_instances.value_or(100);
  std::size_t ok = 0;
  double worst_res = 0.0, worst_shift = 0.0;
  std::size_t worst_iter = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto b = random_instance(20, derive_seed(o.seed + 300, k));
    FixedPointOptions fp;
    fp.tol = 1e-10;
    fp.max_iter = 200;
    const auto a = prop_fair_global(b, fp);
    fp.start = 0.5;
    const auto c = prop_fair_global(b, fp);
    double shift = 0.0;
    for (std::size_t i = 0; i < a.p.size(); ++i) shift = std::max(shift, std::abs(a.p[i] - c.p[i]));
    worst_res = std::max({worst_res, a.residual, c.residual});
    worst_iter = std::max({worst_iter, a.iterations, c.iterations});
    worst_shift = std::max(worst_shift, shift);
    if (a.converged && c.converged && a.residual <= 1e-10 && c.residual <= 1e-10 && a.iterations <= 200 &&
        c.iterations <= 200 && shift <= 1e-8)
      ++ok;
  }
  r.passed = ok == n;
  r.metrics = {{"instances_ok", static_cast<double>(ok)},
               {"instances", static_cast<double>(n)},
               {"max_residual", worst_res},
               {"max_iterations", static_cast<double>(worst_iter)},
               {"max_restart_shift", worst_shift}};
  return r;
}

// c4: high-threshold limit
CriterionResult pf_limit(const ValidationOptions& o) {
  CriterionResult r;
  const auto b = random_instance(10, derive_seed(o.seed + 400, 0), 1e6);
  const auto rep = prop_fair_global(b);
  double worst = 0.0;
  for (double p : rep.p) worst = std::max(worst, std::abs(p - 0.1));
  r.passed = rep.converged && worst <= 1e-3;
  r.metrics = {{"max_abs_dev", worst}, {"limit", 1e-3}};
  return r;
}

// c5: Gibbs against brute force, best response bounds
CriterionResult gibbs_bruteforce(const ValidationOptions& o) {
  CriterionResult r;
  const std::size_t n = o.n_instances.value_or(100);
  std::size_t hits = 0, br_ok = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t N = 3 + k % 10;
    const std::uint64_t seed = derive_seed(o.seed + 500, k);
    const auto b = random_instance(N, seed);
    const auto bf = max_throughput_bruteforce(b);
    GibbsOptions g;
    g.schedule = CoolingSchedule::logarithmic(1.0);
    g.seed = derive_seed(seed, 1);
    g.n_sweeps = 5000;
    const auto gb = max_throughput_gibbs(b, g);
    if (std::abs(gb.objective_value - bf.objective_value) <= 1e-9) ++hits;
    const auto br = max_throughput_best_response(b, ActionVector(N, 0));
    bool mono = true;
    for (std::size_t t = 1; t < br.trace.size(); ++t)
      if (br.trace[t] < br.trace[t - 1]) mono = false;
    if (mono && br.converged && br.objective_value <= bf.objective_value + 1e-12) ++br_ok;
  }
  const std::size_t need = (95 * n + 99) / 100;
  r.passed = hits >= need && br_ok == n;
  r.metrics = {{"gibbs_hits", static_cast<double>(hits)},
               {"required", static_cast<double>(need)},
               {"instances", static_cast<double>(n)},
               {"best_response_ok", static_cast<double>(br_ok)}};
  return r;
}

// c6: max-min equal rates
CriterionResult maxmin(const ValidationOptions& o) {
  CriterionResult r;
  const std::size_t n = o.n_instances.value_or(50);
  std::size_t ok = 0, conv = 0;
  double worst_spread = 0.0, worst_gain = std::numeric_limits<double>::infinity();
  ChannelParams ch;
  for (std::size_t k = 0; k < n; ++k) {
    const auto b = random_instance(6, derive_seed(o.seed + 600, k));
    const auto mm = max_min_global(b);
    const auto pf = prop_fair_global(b);
    const auto rm = rate_report(MapVector(mm.p), b, ch, 1.0);
    const auto rp = rate_report(MapVector(pf.p), b, ch, 1.0);
    const double hi = *std::max_element(rm.rate.begin(), rm.rate.end());
    const double spread = (hi - rm.min_rate) / rm.min_rate;
    const double gain = rm.min_rate / rp.min_rate;
    if (mm.converged) {
      ++conv;
      worst_spread = std::max(worst_spread, spread);
      worst_gain = std::min(worst_gain, gain);
    }
    if (mm.converged && spread <= 1e-2 && rm.min_rate >= rp.min_rate) ++ok;
  }
  r.passed = ok == n;
  r.metrics = {{"instances_ok", static_cast<double>(ok)},
               {"converged", static_cast<double>(conv)},
               {"instances", static_cast<double>(n)},
               {"max_rel_spread", worst_spread},
               {"min_ratio_to_pf_min_rate", worst_gain}};
  r.detail = "aggregate-interference link graphs are complete, hence connected";
  return r;
}

// c7: transform routes and characteristic-function properties
CriterionResult laplace(const ValidationOptions&) {
  CriterionResult r;
  const AnalyticModel m = reference_model();
  const std::vector<double> rhos{0.1, 0.3, 0.5, 0.7, 0.9};
  const std::vector<cplx> ss{{0.5, 0.0}, {1.0, 0.0}, {2.0, 3.0}, {0.0, 2.0}, {0.0, 10.0}};
  double route = 0.0, kernel = 0.0, modulus = 0.0, conj = 0.0;
  for (double rho : rhos)
    for (cplx s : ss) {
      const cplx g = laplace_shotnoise(rho, s, m);
      const cplx a = laplace_shotnoise_alpha4(rho, s, m);
      const cplx f = laplace_shotnoise_fast(rho, s, m);
      route = std::max(route, std::abs(g - a) / std::abs(a));
      kernel = std::max(kernel, std::abs(f - a) / std::abs(a));
      const double w = std::abs(s);
      const cplx up = laplace_shotnoise(rho, cplx(0.0, w), m);
      const cplx down = laplace_shotnoise(rho, cplx(0.0, -w), m);
      modulus = std::max(modulus, std::abs(up) - 1.0);
      conj = std::max(conj, std::abs(down - std::conj(up)));
    }
  r.passed = route <= 1e-6 && kernel <= 1e-6 && modulus <= 1e-12 && conj <= 1e-12;
  r.metrics = {{"max_rel_generic_vs_alpha4", route},
               {"max_rel_kernel_vs_alpha4", kernel},
               {"max_modulus_excess", std::max(0.0, modulus)},
               {"max_conjugate_error", conj}};
  return r;
}

// c8: mean utility against simulation
CriterionResult mean_utility_check(const ValidationOptions& o) {
  CriterionResult r;
  const auto cfg = reference_config(o, 1000);
  const MeanUtility a = mean_utility(reference_model(), cfg.quadrature, o.threads);
  const MeanUtilityEstimate s = run_mean_utility_experiment(cfg);
  auto rel = [](double x, double ref) { return std::abs(x - ref) / std::abs(ref); };
  const double dt = rel(a.total, s.total), dp = rel(a.log_map_term, s.log_map_term),
               dq = rel(a.interference_term, s.interference_term);
  r.passed = dt <= 0.05 && dp <= 0.10 && dq <= 0.10 && s.n_failed == 0;
  r.metrics = {{"analytic_total", a.total},
               {"simulated_total", s.total},
               {"simulated_stderr", s.total_stderr},
               {"rel_total", dt},
               {"analytic_log_map", a.log_map_term},
               {"simulated_log_map", s.log_map_term},
               {"rel_log_map", dp},
               {"analytic_interference", a.interference_term},
               {"simulated_interference", s.interference_term},
               {"rel_interference", dq}};
  return r;
}

// c9: throughput orderings
CriterionResult sweep(const ValidationOptions& o) {
  CriterionResult r;
  ExperimentConfig c = reference_config(o, 200);
  c.region_side = 20.0;
  c.schemes = {parse_scheme("PF-AI"), parse_scheme("PF-CI"), parse_scheme("MT-CI"),
               parse_scheme("MT-CI-improved"), parse_scheme("plain-aloha(best)")};
  std::vector<std::size_t> ns;
  for (std::size_t n = 10; n <= 100; n += 10) ns.push_back(n);
  const SweepResult res = run_throughput_sweep(c, ns);
  auto value = [&](std::size_t n, const std::string& s) {
    for (const auto& row : res.rows)
      if (row.n_nodes == n && row.scheme == s) return row.mean_aggregate;
    throw NumericalError("missing sweep row", 0.0);
  };
  const double mt10 = value(10, "MT-CI"), pa10 = value(10, "plain-aloha(best)");
  const double a = std::abs(mt10 - pa10) / pa10;
  const double pf100 = value(100, "PF-AI"), pa100 = value(100, "plain-aloha(best)");
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t n : ns)
    for (const auto& spec : c.schemes) {
      const std::string s = spec.label();
      if (s == "MT-CI-improved") continue;
      margin = std::min(margin, value(n, "MT-CI-improved") - value(n, s));
    }
  r.passed = a <= 0.05 && pf100 > pa100 && margin >= 0.0 && res.failures.empty();
  r.metrics = {{"a_rel_gap_mtci_vs_plain_n10", a},
               {"b_pf_ai_n100", pf100},
               {"b_plain_best_n100", pa100},
               {"c_min_margin_improved", margin},
               {"failures", static_cast<double>(res.failures.size())},
               {"realizations", static_cast<double>(c.n_realizations)}};
  return r;
}

// c10: byte-identical reruns of every command across thread counts
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CriterionResult determinism(const ValidationOptions& o) {
  namespace fs = std::filesystem;
  CriterionResult r;
  fs::path root = o.work_dir.empty() ? fs::temp_directory_path() / ("aloha-determinism-" + std::to_string(o.seed))
                                     : fs::path(o.work_dir);
  fs::remove_all(root);
  fs::create_directories(root);

  const std::string small = (root / "small.json").string();
  io::write_text_file(small, R"cfg({
  "seed": 7,
  "model": {"intensity": 0.25, "region_side": 12},
  "n_realizations": 3,
  "experiments": ["map_cdf", "conditional_cdf", "throughput_sweep"],
  "schemes": ["PF-AI", "MT-CI-improved", "plain-aloha(best)"],
  "n_values": [10, 20],
  "conditional": {"distances": [1, 3], "half_width": 0.5},
  "gibbs": {"n_sweeps": 200},
  "quadrature": {"rho_grid": [0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1],
                 "radial_grid": [0, 1, 2, 4, 8], "spatial_r_max": 8}
}
)cfg");

  struct Run {
    std::string name;
    std::vector<std::string> args;  // {out} is replaced by the output path
    bool directory = false;
  };
  const std::vector<Run> runs{
      {"generate", {"generate", "--config", small, "--seed", "11", "--out", "{out}"}},
      {"generate-csv", {"generate", "--config", small, "--format", "csv", "--out", "{out}"}},
      {"optimize-pf", {"optimize", "--input", "{gen}", "--scheme", "PF-AI", "--out", "{out}"}},
      {"optimize-mt",
       {"optimize", "--input", "{gen}", "--scheme", "MT-AI", "--config", small, "--seed", "5", "--out", "{out}"}},
      {"optimize-mm", {"optimize", "--input", "{gen}", "--scheme", "MM-AI", "--format", "csv", "--out", "{out}"}},
      {"analyze-curve", {"analyze", "--config", small, "--target", "curve", "--out", "{out}"}},
      {"analyze-mean", {"analyze", "--config", small, "--target", "mean-utility", "--out", "{out}"}},
      {"experiment", {"experiment", "--config", small, "--out", "{out}"}, true},
      {"validate", {"validate", "laplace-consistency", "--format", "json", "--out", "{out}"}},
  };

  // reference realization used by optimize
  const std::string gen = (root / "gen.json").string();
  {
    std::ostringstream so, se;
    if (run_cli({"generate", "--config", small, "--out", gen}, so, se) != kExitOk)
      throw NumericalError("determinism setup failed: " + se.str(), 0.0);
  }

  std::size_t ok = 0;
  std::string bad;
  for (const auto& run : runs) {
    std::vector<std::string> outputs;
    bool good = true;
    std::vector<int> codes;
    for (const char* threads : {"1", "3", "1"}) {
      const fs::path out = root / (run.name + "-" + std::to_string(outputs.size()) + (run.directory ? "" : ".out"));
      std::vector<std::string> args;
      for (const auto& a : run.args) {
        if (a == "{out}")
          args.push_back(out.string());
        else if (a == "{gen}")
          args.push_back(gen);
        else
          args.push_back(a);
      }
      args.push_back("--threads");
      args.push_back(threads);
      std::ostringstream so, se;
      codes.push_back(run_cli(args, so, se));
      std::string content;
      if (run.directory) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(out))
          if (e.path().filename() != "manifest.json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) content += f.filename().string() + "\n" + slurp(f);
      } else {
        content = slurp(out);
      }
      if (content.empty()) good = false;
      outputs.push_back(content);
    }
    for (std::size_t k = 1; k < outputs.size(); ++k)
      if (outputs[k] != outputs[0] || codes[k] != codes[0]) good = false;
    if (codes[0] != kExitOk) good = false;
    if (good)
      ++ok;
    else
      bad += (bad.empty() ? "" : ",") + run.name;
  }
  r.passed = ok == runs.size();
  r.metrics = {{"commands_identical", static_cast<double>(ok)}, {"commands", static_cast<double>(runs.size())}};
  r.detail = bad.empty() ? "threads 1, 3, 1" : "mismatch: " + bad;
  if (o.work_dir.empty()) fs::remove_all(root);
  return r;
}

struct Entry {
  PresetInfo info;
  std::function<CriterionResult(const ValidationOptions&)> run;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e{
      {{"cdf-lambda-0.25", 1, "analytic MAP ccdf vs PF-AI simulation, Kolmogorov <= 0.03"}, map_cdf},
      {{"conditional", 2, "conditional law ordering r=1 vs r=10 and simulation fit <= 0.05"}, conditional},
      {{"contraction", 3, "PF fixed points on 100 20-node instances, restart invariance"}, contraction},
      {{"pf-limit", 4, "N=10, T=1e6 gives p = 1/N within 1e-3"}, pf_limit},
      {{"gibbs-bruteforce", 5, "Gibbs hits the brute-force optimum on >= 95 of 100 instances"}, gibbs_bruteforce},
      {{"maxmin-equal-rates", 6, "MM-AI equal rates and min rate >= PF-AI on 50 instances"}, maxmin},
      {{"laplace-consistency", 7, "transform routes agree, |L(iw)| <= 1, conjugate symmetry"}, laplace},
      {{"mean-utility", 8, "analytic mean utility vs simulation within 5%"}, mean_utility_check},
      {{"throughput-sweep", 9, "L=20 throughput orderings over N = 10..100"}, sweep},
      {{"determinism", 10, "byte-identical CLI reruns across thread counts"}, determinism},
  };
  return e;
}

}  // namespace

std::string CriterionResult::line() const {
  std::string s = std::string(passed ? "PASS" : "FAIL") + " [" + std::to_string(id) + "] " + preset + ":";
  for (const auto& [k, v] : metrics) s += " " + k + "=" + fmt(v);
  if (!detail.empty()) s += " (" + detail + ")";
  return s;
}

const std::vector<PresetInfo>& validation_presets() {
  static const std::vector<PresetInfo> p = [] {
    std::vector<PresetInfo> v;
    for (const auto& e : entries()) v.push_back(e.info);
    return v;
  }();
  return p;
}

CriterionResult run_validation(const std::string& preset, const ValidationOptions& opts) {
  for (const auto& e : entries()) {
    if (e.info.name != preset) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = e.run(opts);
    } catch (const NumericalError& err) {
      r.passed = false;
      r.detail = std::string("numerical failure: ") + err.what();
    }
    r.id = e.info.criterion;
    r.preset = e.info.name;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }
  throw ParameterError("unknown preset '" + preset + "'");
}

}  // namespace aloha
