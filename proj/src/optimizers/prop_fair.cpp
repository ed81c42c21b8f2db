#include <algorithm>
#include <cmath>
#include <limits>

#include "aloha/error.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rate_model.hpp"

namespace aloha {

namespace {

// Coefficients b_ij seen by the fixed point of node i.
struct NodeTerms {
  std::vector<double> b;

  double f(double p) const {
    double s = 0.0;
    for (double v : b) s += 1.0 / (1.0 + v - p);
    return 1.0 / s;
  }
  bool interior() const {
    double s = 0.0;
    for (double v : b) s += 1.0 / v;
    return s > 1.0;
  }
};

struct NodeState {
  double p = 1.0;
  double residual = 0.0;
  std::size_t iterations = 0;
  bool done = false;
};

// Synchronous rounds of the relaxed map on every unfinished node.
OptimizerReport solve(const std::vector<NodeTerms>& terms, const FixedPointOptions& opts,
                      const std::function<double(const std::vector<double>&)>& objective,
                      std::string scheme) {
  if (!(opts.tol > 0.0)) throw ParameterError("tol must be positive");
  if (opts.max_iter < 1) throw ParameterError("max_iter must be at least 1");
  if (!(opts.start >= 0.0 && opts.start <= 1.0)) throw ParameterError("start must lie in [0, 1]");
  if (!(opts.relaxation > 0.0 && opts.relaxation <= 1.0))
    throw ParameterError("relaxation must lie in (0, 1]");

  const std::size_t n = terms.size();
  std::vector<NodeState> st(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!terms[i].interior()) {
      st[i].p = 1.0;
      st[i].done = true;
    } else {
      st[i].p = opts.start;
      st[i].residual = std::abs(st[i].p - terms[i].f(st[i].p));
      st[i].done = st[i].residual <= opts.tol;
    }
  }

  OptimizerReport rep;
  rep.scheme = std::move(scheme);
  auto current = [&] {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = st[i].p;
    return p;
  };
  if (opts.record_trace) rep.trace.push_back(objective(current()));

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      NodeState& s = st[i];
      if (s.done) continue;
      any = true;
      const double fp = terms[i].f(s.p);
      s.p = std::clamp((1.0 - opts.relaxation) * s.p + opts.relaxation * fp, 0.0, 1.0);
      ++s.iterations;
      s.residual = std::abs(s.p - terms[i].f(s.p));
      s.done = s.residual <= opts.tol;
    }
    if (!any) break;
    if (opts.record_trace) rep.trace.push_back(objective(current()));
  }

  rep.p = current();
  rep.converged = true;
  for (const auto& s : st) {
    rep.iterations = std::max(rep.iterations, s.iterations);
    rep.residual = std::max(rep.residual, s.residual);
    rep.converged = rep.converged && s.done;
  }
  rep.objective_value = objective(rep.p);
  rep.settings = {{"tol", opts.tol},
                  {"max_iter", static_cast<double>(opts.max_iter)},
                  {"start", opts.start},
                  {"relaxation", opts.relaxation}};
  return rep;
}

double log_utility(const std::vector<double>& q, const std::vector<double>& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::log(p[i] * q[i]);
  return s;
}

}  // namespace

double prop_fair_map(const InterferenceMatrix& b, std::size_t i, double p) {
  if (i >= b.size()) throw ParameterError("node index out of range");
  double s = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j)
    if (j != i) s += 1.0 / (1.0 + b(i, j) - p);
  return s == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / s;
}

OptimizerReport prop_fair_global(const InterferenceMatrix& b, const FixedPointOptions& opts) {
  const std::size_t n = b.size();
  if (n < 1) throw ParameterError("prop_fair_global needs N >= 1");
  std::vector<NodeTerms> terms(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) terms[i].b.push_back(b(i, j));
  ChannelParams params;
  auto objective = [&](const std::vector<double>& p) {
    return log_utility(success_probability(MapVector(p), b, params, 1.0), p);
  };
  return solve(terms, opts, objective, "PF-AI");
}

OptimizerReport prop_fair_nearest(const InterferenceMatrix& b, const NeighborStructure& nbr,
                                  const FixedPointOptions& opts) {
  const std::size_t n = b.size();
  if (n < 2) throw GeometryError("prop_fair_nearest needs N >= 2");
  if (nbr.size() != n) throw ParameterError("neighbor structure size differs from N");
  std::vector<NodeTerms> terms(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : nbr.closest_of[i]) terms[i].b.push_back(b(i, j));
  auto objective = [&](const std::vector<double>& p) {
    return log_utility(nearest_success_probability(MapVector(p), b, nbr), p);
  };
  return solve(terms, opts, objective, "PF-CI");
}

double prop_fair_singleton_closed_form(double b_ij) {
  if (!(b_ij > 0.0)) throw ParameterError("b_ij must be positive");
  return b_ij < 1.0 ? 0.5 * (1.0 + b_ij) : 1.0;
}

double prop_fair_linear_closed_form(double b_minus, double b_plus) {
  if (!(b_minus > 0.0 && b_plus > 0.0)) throw ParameterError("coefficients must be positive");
  if (!(1.0 / b_minus + 1.0 / b_plus > 1.0)) return 1.0;
  const double d = b_minus - b_plus;
  const double disc = d * d + (1.0 + b_minus) * (1.0 + b_plus);
  return (2.0 + b_minus + b_plus - std::sqrt(disc)) / 3.0;
}

}  // namespace aloha
