#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aloha/error.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rate_model.hpp"

namespace aloha {

namespace {

struct Term {
  std::size_t j;
  double b;  // b_ij, effect of i on receiver j
};

// Root in (0, 1) of w0 = p sum_k w_k / (1 + b_k - p); h is decreasing in p.
// Safeguarded Newton with a bisection fallback, warm-started at `guess`.
double weighted_root(double w0, const std::vector<Term>& terms, const std::vector<double>& w,
                     double guess, double tol) {
  auto h = [&](double p, double* dh) {
    double s = 0.0, ds = 0.0;
    for (const Term& t : terms) {
      const double c = 1.0 + t.b - p;
      s += w[t.j] / c;
      ds += w[t.j] / (c * c);
    }
    if (dh) *dh = -(s + p * ds);
    return w0 - p * s;
  };
  double lo = 0.0, hi = 1.0;
  double p = guess > 0.0 && guess < 1.0 ? guess : 0.5;
  for (int it = 0; it < 200; ++it) {
    double dh = 0.0;
    const double v = h(p, &dh);
    if (v > 0.0) lo = p; else hi = p;
    double next = p - v / dh;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - p) <= tol || hi - lo <= tol) return next;
    p = next;
  }
  return p;
}

// Node i's p given multipliers: the weighted interior fixed point, 1 when the
// interior condition fails, 0 when lambda_i = 0 and some weight is positive.
double p_update(std::size_t i, const std::vector<Term>& terms, const std::vector<double>& lambda,
                double guess, double tol) {
  double s = 0.0;
  for (const Term& t : terms) s += lambda[t.j] / t.b;
  const double li = lambda[i];
  if (li == 0.0) return s > 0.0 ? 0.0 : 1.0;
  if (!(s / li > 1.0)) return 1.0;
  return weighted_root(li, terms, lambda, guess, tol);
}

void check_dual(const DualOptions& opts) {
  if (!(opts.tol > 0.0)) throw ParameterError("tol must be positive");
  if (opts.max_iter < 1) throw ParameterError("max_iter must be at least 1");
  if (!(opts.step.beta0 > 0.0)) throw ParameterError("beta0 must be positive");
  if (!(opts.inner_tol_factor > 0.0)) throw ParameterError("inner_tol_factor must be positive");
  if (!(opts.p_floor > 0.0 && opts.p_floor < 1.0)) throw ParameterError("p_floor must lie in (0, 1)");
}

std::map<std::string, double> dual_settings(const DualOptions& opts) {
  return {{"tol", opts.tol},
          {"max_iter", static_cast<double>(opts.max_iter)},
          {"beta0", opts.step.beta0},
          {"inverse_sqrt_step", opts.step.kind == StepSchedule::Kind::inverse_sqrt ? 1.0 : 0.0},
          {"inner_tol_factor", opts.inner_tol_factor},
          {"p_floor", opts.p_floor}};
}

std::vector<double> safe_log(const std::vector<double>& q, const std::vector<double>& p) {
  std::vector<double> lr(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) lr[i] = std::log(p[i] * q[i]);
  return lr;
}

}  // namespace

double StepSchedule::at(std::size_t n) const {
  if (kind == Kind::constant) return beta0;
  return beta0 / std::sqrt(static_cast<double>(std::max<std::size_t>(n, 1)));
}

OptimizerReport max_min_global(const InterferenceMatrix& b, const DualOptions& opts) {
  check_dual(opts);
  const std::size_t n = b.size();
  if (n < 2) throw ParameterError("max_min_global needs N >= 2");

  std::vector<std::vector<Term>> terms(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) terms[i].push_back({j, b(i, j)});

  std::vector<double> lambda(n, opts.initial_lambda >= 0.0 ? opts.initial_lambda : 1.0 / n);
  std::vector<double> p(n, 1.0), lr(n), next(n);
  const double inner_tol = opts.tol * opts.inner_tol_factor;
  const ChannelParams params;

  OptimizerReport rep;
  rep.scheme = "MM-AI";
  double theta = 0.0, residual = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  bool converged = false;
  while (it < opts.max_iter) {
    ++it;
    for (std::size_t i = 0; i < n; ++i) p[i] = p_update(i, terms[i], lambda, p[i], inner_tol);
    theta = -std::accumulate(lambda.begin(), lambda.end(), 0.0);

    std::vector<double> pf(n);
    for (std::size_t i = 0; i < n; ++i) pf[i] = std::max(p[i], opts.p_floor);
    const auto q = success_probability(MapVector(pf), b, params, 1.0);
    const double beta = opts.step.at(it);
    double move = 0.0, viol = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lr[i] = std::log(pf[i]) + std::log(q[i]);
      const double g = theta - lr[i];
      next[i] = std::max(0.0, lambda[i] + beta * g);
      move = std::max(move, std::abs(next[i] - lambda[i]));
      viol = std::max(viol, g);
    }
    lambda.swap(next);
    residual = std::max(move, viol);
    if (opts.record_trace) rep.trace.push_back(*std::min_element(lr.begin(), lr.end()));
    if (move <= opts.tol && viol <= opts.tol) {
      converged = true;
      break;
    }
  }

  const auto q = success_probability(MapVector(p), b, params, 1.0);
  DualState ds;
  ds.lambda = lambda;
  ds.theta = {theta};
  ds.log_rate = safe_log(q, p);
  ds.min_rate = std::exp(*std::min_element(ds.log_rate.begin(), ds.log_rate.end()));

  rep.p = p;
  rep.objective_value = ds.min_rate;
  rep.iterations = it;
  rep.converged = converged;
  rep.residual = residual;
  rep.dual = std::move(ds);
  rep.settings = dual_settings(opts);
  return rep;
}

std::vector<std::vector<std::size_t>> link_graph_components(const NeighborStructure& nbr) {
  const std::size_t n = nbr.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = find(i), c = find(nbr.closest[i]);
    if (a != c) parent[std::max(a, c)] = std::min(a, c);
  }
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] == n) {
      slot[r] = out.size();
      out.emplace_back();
    }
    out[slot[r]].push_back(i);
  }
  return out;
}

namespace {

struct ComponentResult {
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

// Four-rule system on one component. Node indices are global; only members
// of `nodes` are touched.
ComponentResult solve_component(const InterferenceMatrix& b, const NeighborStructure& nbr,
                                const std::vector<std::size_t>& nodes, const DualOptions& opts,
                                std::vector<double>& p, std::vector<double>& lambda,
                                std::vector<double>& theta, std::vector<EdgeMultiplier>& mu_out,
                                std::vector<double>& trace) {
  const std::size_t n = b.size();
  const double lambda0 = opts.initial_lambda >= 0.0 ? opts.initial_lambda : 1.0 / nodes.size();
  const double inner_tol = opts.tol * opts.inner_tol_factor;

  std::vector<std::vector<Term>> terms(n);
  // neighborhood N(i) = C(i) + c(i), as edge ids into mu
  struct Edge {
    std::size_t i, j;
    double mu;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> out_edges(n), in_edges(n);
  for (std::size_t i : nodes) {
    for (std::size_t j : nbr.closest_of[i]) terms[i].push_back({j, b(i, j)});
    std::vector<std::size_t> nb(nbr.closest_of[i].begin(), nbr.closest_of[i].end());
    nb.push_back(nbr.closest[i]);
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    for (std::size_t j : nb) {
      out_edges[i].push_back(edges.size());
      edges.push_back({i, j, 0.0});
    }
  }
  for (std::size_t e = 0; e < edges.size(); ++e) in_edges[edges[e].j].push_back(e);

  for (std::size_t i : nodes) {
    lambda[i] = lambda0;
    p[i] = 1.0;
  }
  std::vector<double> lr(n), new_lambda(n), new_mu(edges.size());

  ComponentResult res;
  res.residual = std::numeric_limits<double>::infinity();
  while (res.iterations < opts.max_iter) {
    const std::size_t it = ++res.iterations;
    for (std::size_t i : nodes) p[i] = p_update(i, terms[i], lambda, p[i], inner_tol);
    for (std::size_t i : nodes) {
      double v = lambda[i];
      for (std::size_t e : out_edges[i]) v += edges[e].mu;
      for (std::size_t e : in_edges[i]) v -= edges[e].mu;
      theta[i] = v > 0.0 ? -v : 0.0;
    }
    for (std::size_t i : nodes) {
      const std::size_t c = nbr.closest[i];
      const double pc = std::max(p[c], opts.p_floor);
      lr[i] = std::log(std::max(p[i], opts.p_floor)) + std::log1p(-pc / (1.0 + b(c, i)));
    }
    const double beta = opts.step.at(it);
    double move = 0.0, viol = 0.0;
    for (std::size_t i : nodes) {
      const double g = theta[i] - lr[i];
      new_lambda[i] = std::max(0.0, lambda[i] + beta * g);
      move = std::max(move, std::abs(new_lambda[i] - lambda[i]));
      viol = std::max(viol, g);
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double g = theta[edges[e].i] - theta[edges[e].j];
      new_mu[e] = std::max(0.0, edges[e].mu + beta * g);
      move = std::max(move, std::abs(new_mu[e] - edges[e].mu));
      viol = std::max(viol, g);
    }
    for (std::size_t i : nodes) lambda[i] = new_lambda[i];
    for (std::size_t e = 0; e < edges.size(); ++e) edges[e].mu = new_mu[e];
    res.residual = std::max(move, viol);
    if (opts.record_trace) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t i : nodes) m = std::min(m, lr[i]);
      if (trace.size() < it) trace.resize(it, std::numeric_limits<double>::infinity());
      trace[it - 1] = std::min(trace[it - 1], m);
    }
    if (move <= opts.tol && viol <= opts.tol) {
      res.converged = true;
      break;
    }
  }
  for (const Edge& e : edges) mu_out.push_back({e.i, e.j, e.mu});
  return res;
}

}  // namespace

OptimizerReport max_min_nearest(const InterferenceMatrix& b, const NeighborStructure& nbr,
                                const DualOptions& opts) {
  check_dual(opts);
  const std::size_t n = b.size();
  if (n < 2) throw GeometryError("max_min_nearest needs N >= 2");
  if (nbr.size() != n) throw ParameterError("neighbor structure size differs from N");

  std::vector<double> p(n, 1.0), lambda(n, 0.0), theta(n, 0.0);
  DualState ds;
  OptimizerReport rep;
  rep.scheme = "MM-CI";
  rep.converged = true;
  const auto comps = link_graph_components(nbr);
  for (const auto& nodes : comps) {
    const auto r = solve_component(b, nbr, nodes, opts, p, lambda, theta, ds.mu, rep.trace);
    rep.iterations = std::max(rep.iterations, r.iterations);
    rep.residual = std::max(rep.residual, r.residual);
    rep.converged = rep.converged && r.converged;
  }
  std::sort(ds.mu.begin(), ds.mu.end(), [](const EdgeMultiplier& x, const EdgeMultiplier& y) {
    return x.from != y.from ? x.from < y.from : x.to < y.to;
  });

  const auto q = nearest_success_probability(MapVector(p), b, nbr);
  ds.lambda = lambda;
  ds.theta = theta;
  ds.log_rate = safe_log(q, p);
  ds.min_rate = std::exp(*std::min_element(ds.log_rate.begin(), ds.log_rate.end()));

  rep.p = p;
  rep.objective_value = ds.min_rate;
  rep.dual = std::move(ds);
  rep.settings = dual_settings(opts);
  rep.settings["components"] = static_cast<double>(comps.size());
  return rep;
}

}  // namespace aloha
