#include "aloha/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "aloha/error.hpp"

namespace aloha::io {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

json number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

double parse_number(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ParameterError("field '" + field + "' must be a number");
}

namespace {

json number_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

// Object reader that tracks consumed keys so leftovers can be reported.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ParameterError("field '" + label() + "' must be an object");
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) throw ParameterError("missing field '" + name(key) + "'");
    return *v;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = parse_number(*v, name(key));
  }

  void count(const std::string& key, std::size_t& out) {
    if (const json* v = get(key)) out = to_count(*v, name(key));
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_unsigned()) throw ParameterError("field '" + name(key) + "' must be a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void text(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ParameterError("field '" + name(key) + "' must be a string");
      out = v->get<std::string>();
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw ParameterError("field '" + name(key) + "' must be an array");
      out.clear();
      for (std::size_t k = 0; k < v->size(); ++k)
        out.push_back(parse_number((*v)[k], name(key) + "[" + std::to_string(k) + "]"));
    }
  }

  void counts(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw ParameterError("field '" + name(key) + "' must be an array");
      out.clear();
      for (std::size_t k = 0; k < v->size(); ++k)
        out.push_back(to_count((*v)[k], name(key) + "[" + std::to_string(k) + "]"));
    }
  }

  void texts(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = get(key)) {
      if (!v->is_array()) throw ParameterError("field '" + name(key) + "' must be an array");
      out.clear();
      for (std::size_t k = 0; k < v->size(); ++k) {
        if (!(*v)[k].is_string())
          throw ParameterError("field '" + name(key) + "[" + std::to_string(k) + "]' must be a string");
        out.push_back((*v)[k].get<std::string>());
      }
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ParameterError("unknown field '" + name(it.key()) + "'");
  }

 private:
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  static std::size_t to_count(const json& v, const std::string& field) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && std::floor(d) == d && d < 1e15) return static_cast<std::size_t>(d);
    }
    throw ParameterError("field '" + field + "' must be a nonnegative integer");
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Realizations

json to_json(const NetworkRealization& r) {
  json j;
  j["format"] = "aloha.realization";
  j["version"] = kFormatVersion;
  j["seed"] = r.seed;
  j["L"] = r.region_side;
  j["r0"] = r.link_distance;
  json nodes = json::array();
  for (const auto& b : r.bipoles) nodes.push_back({{"x", b.tx.x}, {"y", b.tx.y}, {"phi", b.rx_angle}});
  j["nodes"] = std::move(nodes);
  return j;
}

NetworkRealization realization_from_json(const json& j) {
  Fields f(j, "");
  std::string format = "aloha.realization";
  f.text("format", format);
  if (format != "aloha.realization") throw ParameterError("field 'format' must be aloha.realization");
  double version = kFormatVersion;
  f.number("version", version);
  if (version != kFormatVersion) throw ParameterError("unsupported realization version");
  NetworkRealization r;
  f.seed("seed", r.seed);
  r.region_side = parse_number(f.require("L"), "L");
  r.link_distance = parse_number(f.require("r0"), "r0");
  if (!(r.region_side > 0.0)) throw ParameterError("field 'L' must be positive");
  if (!(r.link_distance > 0.0)) throw ParameterError("field 'r0' must be positive");
  const json& nodes = f.require("nodes");
  if (!nodes.is_array()) throw ParameterError("field 'nodes' must be an array");
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    Fields n(nodes[k], "nodes[" + std::to_string(k) + "]");
    Bipole b;
    b.tx.x = parse_number(n.require("x"), n.name("x"));
    b.tx.y = parse_number(n.require("y"), n.name("y"));
    b.rx_angle = parse_number(n.require("phi"), n.name("phi"));
    b.link_distance = r.link_distance;
    n.finish();
    r.bipoles.push_back(b);
  }
  f.finish();
  return r;
}

// ---------------------------------------------------------------------------
// Reports

json to_json(const RateReport& r) {
  json j;
  j["format"] = "aloha.rate_report";
  j["version"] = kFormatVersion;
  j["aggregate"] = number(r.aggregate);
  j["log_utility"] = number(r.log_utility);
  j["min_rate"] = number(r.min_rate);
  j["has_zero_rate"] = r.has_zero_rate;
  j["p"] = number_array(r.p);
  j["q"] = number_array(r.q);
  j["rate"] = number_array(r.rate);
  return j;
}

std::string rate_report_csv(const RateReport& r) {
  std::string out = "i,p,q,rate\n";
  for (std::size_t i = 0; i < r.p.size(); ++i)
    out += std::to_string(i) + "," + format_number(r.p[i]) + "," + format_number(r.q[i]) + "," +
           format_number(r.rate[i]) + "\n";
  return out;
}

json to_json(const OptimizerReport& r) {
  json j;
  j["format"] = "aloha.optimizer_report";
  j["version"] = kFormatVersion;
  j["scheme"] = r.scheme;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["residual"] = number(r.residual);
  j["objective_value"] = number(r.objective_value);
  if (r.seed) j["seed"] = *r.seed;
  json s = json::object();
  for (const auto& [k, v] : r.settings) s[k] = number(v);
  j["settings"] = std::move(s);
  j["p"] = number_array(r.p);
  if (r.dual) {
    json d;
    d["lambda"] = number_array(r.dual->lambda);
    json mu = json::array();
    for (const auto& e : r.dual->mu) mu.push_back({{"from", e.from}, {"to", e.to}, {"value", number(e.value)}});
    d["mu"] = std::move(mu);
    d["theta"] = number_array(r.dual->theta);
    d["log_rate"] = number_array(r.dual->log_rate);
    d["min_rate"] = number(r.dual->min_rate);
    j["dual"] = std::move(d);
  }
  j["trace_length"] = r.trace.size();
  return j;
}

std::string trace_csv(const OptimizerReport& r) {
  std::string out = "iteration,objective\n";
  for (std::size_t k = 0; k < r.trace.size(); ++k)
    out += std::to_string(k + 1) + "," + format_number(r.trace[k]) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Analytics

json to_json(const AnalyticModel& m) {
  return {{"intensity", m.intensity},   {"sinr_threshold", m.sinr_threshold},
          {"link_distance", m.link_distance}, {"alpha", m.alpha},
          {"rbar0", m.rbar0()}};
}

json to_json(const QuadratureSettings& q) {
  json j;
  j["radial_rel_tol"] = q.radial_rel_tol;
  j["contour_w_max"] = q.contour_w_max;
  j["contour_rel_tol"] = q.contour_rel_tol;
  j["spatial_r_max"] = q.spatial_r_max;
  if (q.rho_grid == default_rho_grid())
    j["rho_grid"] = "default";
  else
    j["rho_grid"] = number_array(q.rho_grid);
  if (q.radial_grid.empty())
    j["radial_grid"] = "default";
  else
    j["radial_grid"] = number_array(q.radial_grid);
  return j;
}

std::string curve_csv(const CdfCurve& c, const AnalyticModel& m) {
  std::string out = "# model intensity=" + format_number(m.intensity) +
                    " sinr_threshold=" + format_number(m.sinr_threshold) +
                    " link_distance=" + format_number(m.link_distance) + " alpha=" + format_number(m.alpha) +
                    " rbar0=" + format_number(m.rbar0()) + "\n";
  out += "rho,ccdf\n";
  for (std::size_t k = 0; k < c.rho.size(); ++k)
    out += format_number(c.rho[k]) + "," + format_number(c.ccdf[k]) + "\n";
  return out;
}

json to_json(const CdfCurve& c) {
  return {{"rho", number_array(c.rho)}, {"ccdf", number_array(c.ccdf)}, {"atom_at_one", number(c.atom_at_one)}};
}

json to_json(const MeanUtility& u, const AnalyticModel& m) {
  json j;
  j["format"] = "aloha.mean_utility";
  j["version"] = kFormatVersion;
  j["model"] = to_json(m);
  j["log_map_term"] = number(u.log_map_term);
  j["interference_term"] = number(u.interference_term);
  j["tail"] = number(u.tail);
  j["total"] = number(u.total);
  j["cached_curves"] = u.cached_curves;
  return j;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string count_mode_name(CountMode m) { return m == CountMode::fixed ? "fixed" : "poisson"; }

std::string variant_name(ConditionalVariant v) {
  return v == ConditionalVariant::transmitter_distance ? "transmitter" : "receiver";
}

void read_quadrature(Fields& parent, QuadratureSettings& q) {
  const json* v = parent.get("quadrature");
  if (!v) return;
  Fields f(*v, "quadrature");
  f.number("radial_rel_tol", q.radial_rel_tol);
  f.number("contour_w_max", q.contour_w_max);
  f.number("contour_rel_tol", q.contour_rel_tol);
  f.number("spatial_r_max", q.spatial_r_max);
  for (const char* key : {"rho_grid", "radial_grid"}) {
    const json* g = f.get(key);
    if (!g) continue;
    auto& target = std::string(key) == "rho_grid" ? q.rho_grid : q.radial_grid;
    if (g->is_string()) {
      if (g->get<std::string>() != "default")
        throw ParameterError("field '" + f.name(key) + "' must be \"default\" or an array");
      target = std::string(key) == "rho_grid" ? default_rho_grid() : std::vector<double>{};
    } else {
      f.numbers(key, target);
    }
  }
  f.finish();
  try {
    q.validate();
  } catch (const ParameterError& e) {
    throw ParameterError(std::string("quadrature: ") + e.what());
  }
}

}  // namespace

AnalyticModel RunConfig::analytic_model() const {
  AnalyticModel m;
  m.intensity = experiment.effective_intensity();
  m.sinr_threshold = experiment.channel.sinr_threshold;
  m.link_distance = experiment.link_distance;
  m.alpha = experiment.channel.alpha;
  return m;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  ExperimentConfig& e = c.experiment;
  Fields f(j, "");
  f.seed("seed", e.master_seed);
  f.count("n_realizations", e.n_realizations);
  f.number("window_fraction", e.window_fraction);
  if (const json* v = f.get("threads")) {
    if (!v->is_number_unsigned()) throw ParameterError("field 'threads' must be a nonnegative integer");
    e.threads = v->get<unsigned>();
  }

  if (const json* v = f.get("model")) {
    Fields m(*v, "model");
    m.number("intensity", e.intensity);
    if (const json* n = m.get("n_nodes")) {
      if (!n->is_number_unsigned()) throw ParameterError("field 'model.n_nodes' must be a nonnegative integer");
      e.n_nodes = n->get<std::size_t>();
    }
    m.number("region_side", e.region_side);
    m.number("link_distance", e.link_distance);
    m.number("alpha", e.channel.alpha);
    m.number("sinr_threshold", e.channel.sinr_threshold);
    m.number("fading_rate", e.channel.fading_rate);
    m.number("noise", e.channel.noise);
    std::string mode = count_mode_name(e.count_mode);
    m.text("count_mode", mode);
    if (mode == "fixed")
      e.count_mode = CountMode::fixed;
    else if (mode == "poisson")
      e.count_mode = CountMode::poisson;
    else
      throw ParameterError("field 'model.count_mode' must be fixed or poisson");
    m.finish();
  }

  if (f.get("schemes")) {
    std::vector<std::string> names;
    f.texts("schemes", names);
    e.schemes.clear();
    for (std::size_t k = 0; k < names.size(); ++k) {
      try {
        e.schemes.push_back(parse_scheme(names[k]));
      } catch (const ParameterError& err) {
        throw ParameterError("field 'schemes[" + std::to_string(k) + "]': " + err.what());
      }
    }
  }
  f.texts("experiments", c.experiments);
  for (std::size_t k = 0; k < c.experiments.size(); ++k) {
    const auto& x = c.experiments[k];
    if (x != "map_cdf" && x != "conditional_cdf" && x != "mean_utility" && x != "throughput_sweep")
      throw ParameterError("field 'experiments[" + std::to_string(k) + "]' must be one of map_cdf, "
                           "conditional_cdf, mean_utility, throughput_sweep");
  }
  f.counts("n_values", c.n_values);

  if (const json* v = f.get("conditional")) {
    Fields m(*v, "conditional");
    m.numbers("distances", c.conditional_distances);
    m.number("half_width", c.conditional_half_width);
    m.finish();
    if (!(c.conditional_half_width > 0.0)) throw ParameterError("field 'conditional.half_width' must be positive");
  }

  if (const json* v = f.get("fixed_point")) {
    Fields m(*v, "fixed_point");
    m.number("tol", e.fixed_point.tol);
    m.count("max_iter", e.fixed_point.max_iter);
    m.number("start", e.fixed_point.start);
    m.number("relaxation", e.fixed_point.relaxation);
    m.finish();
    if (!(e.fixed_point.tol > 0.0)) throw ParameterError("field 'fixed_point.tol' must be positive");
    if (!(e.fixed_point.start >= 0.0 && e.fixed_point.start <= 1.0))
      throw ParameterError("field 'fixed_point.start' must lie in [0, 1]");
    if (!(e.fixed_point.relaxation > 0.0 && e.fixed_point.relaxation <= 1.0))
      throw ParameterError("field 'fixed_point.relaxation' must lie in (0, 1]");
  }

  if (const json* v = f.get("gibbs")) {
    Fields m(*v, "gibbs");
    m.count("n_sweeps", e.gibbs.n_sweeps);
    std::string kind = e.gibbs.schedule.kind == CoolingSchedule::Kind::log_cooling ? "log" : "fixed";
    m.text("cooling", kind);
    m.number("tau", e.gibbs.schedule.tau);
    if (kind == "log")
      e.gibbs.schedule.kind = CoolingSchedule::Kind::log_cooling;
    else if (kind == "fixed")
      e.gibbs.schedule.kind = CoolingSchedule::Kind::fixed_temperature;
    else
      throw ParameterError("field 'gibbs.cooling' must be log or fixed");
    m.finish();
    try {
      e.gibbs.schedule.validate();
    } catch (const ParameterError& err) {
      throw ParameterError(std::string("field 'gibbs.tau': ") + err.what());
    }
  }

  if (const json* v = f.get("dual")) {
    Fields m(*v, "dual");
    std::string step = e.dual.step.kind == StepSchedule::Kind::inverse_sqrt ? "inverse_sqrt" : "constant";
    m.text("step", step);
    if (step == "inverse_sqrt")
      e.dual.step.kind = StepSchedule::Kind::inverse_sqrt;
    else if (step == "constant")
      e.dual.step.kind = StepSchedule::Kind::constant;
    else
      throw ParameterError("field 'dual.step' must be inverse_sqrt or constant");
    m.number("beta0", e.dual.step.beta0);
    m.number("tol", e.dual.tol);
    m.count("max_iter", e.dual.max_iter);
    m.number("inner_tol_factor", e.dual.inner_tol_factor);
    m.number("initial_lambda", e.dual.initial_lambda);
    m.number("p_floor", e.dual.p_floor);
    m.finish();
    if (!(e.dual.step.beta0 > 0.0)) throw ParameterError("field 'dual.beta0' must be positive");
    if (!(e.dual.tol > 0.0)) throw ParameterError("field 'dual.tol' must be positive");
  }

  read_quadrature(f, e.quadrature);

  if (const json* v = f.get("analysis")) {
    Fields m(*v, "analysis");
    m.text("target", c.analysis_target);
    if (c.analysis_target != "curve" && c.analysis_target != "conditional" &&
        c.analysis_target != "mean-utility" && c.analysis_target != "laplace")
      throw ParameterError("field 'analysis.target' must be curve, conditional, mean-utility or laplace");
    m.text("route", c.analysis_route);
    if (c.analysis_route != "kernel" && c.analysis_route != "generic" && c.analysis_route != "alpha4")
      throw ParameterError("field 'analysis.route' must be kernel, generic or alpha4");
    m.number("distance", c.analysis_distance);
    if (!(c.analysis_distance >= 0.0)) throw ParameterError("field 'analysis.distance' must be nonnegative");
    std::string variant = variant_name(c.analysis_variant);
    m.text("variant", variant);
    if (variant == "transmitter")
      c.analysis_variant = ConditionalVariant::transmitter_distance;
    else if (variant == "receiver")
      c.analysis_variant = ConditionalVariant::receiver_distance;
    else
      throw ParameterError("field 'analysis.variant' must be transmitter or receiver");
    m.numbers("rho", c.laplace_rho);
    if (const json* s = m.get("s")) {
      if (!s->is_array()) throw ParameterError("field 'analysis.s' must be an array of [re, im] pairs");
      c.laplace_s.clear();
      for (std::size_t k = 0; k < s->size(); ++k) {
        const json& z = (*s)[k];
        const std::string name = "analysis.s[" + std::to_string(k) + "]";
        if (!z.is_array() || z.size() != 2) throw ParameterError("field '" + name + "' must be [re, im]");
        c.laplace_s.emplace_back(parse_number(z[0], name), parse_number(z[1], name));
      }
    }
    m.finish();
  }

  if (const json* v = f.get("optimize")) {
    Fields m(*v, "optimize");
    std::string scheme;
    m.text("scheme", scheme);
    if (!scheme.empty()) c.scheme = scheme;
    if (const json* init = m.get("init")) {
      if (!init->is_array()) throw ParameterError("field 'optimize.init' must be an array of 0/1");
      for (std::size_t k = 0; k < init->size(); ++k) {
        const json& a = (*init)[k];
        if (!a.is_number_integer() || (a.get<int>() != 0 && a.get<int>() != 1))
          throw ParameterError("field 'optimize.init[" + std::to_string(k) + "]' must be 0 or 1");
        c.best_response_init.push_back(static_cast<std::uint8_t>(a.get<int>()));
      }
    }
    m.finish();
  }

  f.finish();
  try {
    e.validate();
  } catch (const ParameterError& err) {
    throw ParameterError(std::string("model: ") + err.what());
  }
  return c;
}

json to_json(const ExperimentConfig& e) {
  json j;
  j["seed"] = e.master_seed;
  j["n_realizations"] = e.n_realizations;
  j["window_fraction"] = e.window_fraction;
  json m;
  m["intensity"] = e.intensity;
  if (e.n_nodes) m["n_nodes"] = *e.n_nodes;
  m["effective_intensity"] = e.effective_intensity();
  m["region_side"] = e.region_side;
  m["link_distance"] = e.link_distance;
  m["alpha"] = e.channel.alpha;
  m["sinr_threshold"] = e.channel.sinr_threshold;
  m["fading_rate"] = e.channel.fading_rate;
  m["noise"] = e.channel.noise;
  m["count_mode"] = count_mode_name(e.count_mode);
  j["model"] = std::move(m);
  json s = json::array();
  for (const auto& spec : e.schemes) s.push_back(spec.label());
  j["schemes"] = std::move(s);
  j["fixed_point"] = {{"tol", e.fixed_point.tol},
                      {"max_iter", e.fixed_point.max_iter},
                      {"start", e.fixed_point.start},
                      {"relaxation", e.fixed_point.relaxation}};
  j["gibbs"] = {{"n_sweeps", e.gibbs.n_sweeps},
                {"cooling", e.gibbs.schedule.kind == CoolingSchedule::Kind::log_cooling ? "log" : "fixed"},
                {"tau", number(e.gibbs.schedule.tau)}};
  j["dual"] = {{"step", e.dual.step.kind == StepSchedule::Kind::inverse_sqrt ? "inverse_sqrt" : "constant"},
               {"beta0", e.dual.step.beta0},
               {"tol", e.dual.tol},
               {"max_iter", e.dual.max_iter},
               {"inner_tol_factor", e.dual.inner_tol_factor},
               {"initial_lambda", e.dual.initial_lambda},
               {"p_floor", e.dual.p_floor}};
  j["quadrature"] = to_json(e.quadrature);
  return j;
}

json to_json(const RunConfig& c) {
  json j = to_json(c.experiment);
  json x = json::array();
  for (const auto& name : c.experiments) x.push_back(name);
  j["experiments"] = std::move(x);
  j["n_values"] = c.n_values;
  j["conditional"] = {{"distances", number_array(c.conditional_distances)},
                      {"half_width", c.conditional_half_width}};
  json s = json::array();
  for (const auto& z : c.laplace_s) s.push_back({z.real(), z.imag()});
  j["analysis"] = {{"target", c.analysis_target},
                   {"route", c.analysis_route},
                   {"distance", c.analysis_distance},
                   {"variant", variant_name(c.analysis_variant)},
                   {"rho", number_array(c.laplace_rho)},
                   {"s", std::move(s)}};
  json o = json::object();
  if (c.scheme) o["scheme"] = *c.scheme;
  if (!c.best_response_init.empty()) {
    json init = json::array();
    for (auto a : c.best_response_init) init.push_back(static_cast<int>(a));
    o["init"] = std::move(init);
  }
  j["optimize"] = std::move(o);
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParameterError("'" + path + "' is not valid JSON: " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ParameterError("failed writing '" + path + "'");
}

}  // namespace aloha::io
