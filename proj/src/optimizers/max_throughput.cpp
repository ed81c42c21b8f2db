#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "aloha/error.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rng.hpp"

namespace aloha {

namespace {

double gfac(const InterferenceMatrix& b, std::size_t j, std::size_t i) {
  const double v = b(j, i);
  return v / (1.0 + v);
}

void check_actions(const InterferenceMatrix& b, std::span<const std::uint8_t> a) {
  if (a.size() != b.size()) throw ParameterError("action vector size differs from N");
  for (auto v : a)
    if (v > 1) throw ParameterError("actions must be 0 or 1");
}

std::vector<double> as_doubles(std::span<const std::uint8_t> a) {
  return std::vector<double>(a.begin(), a.end());
}

double logistic(double u, double tau) {
  if (std::isinf(tau)) return 0.5;
  const double x = u / tau;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
}

// Per-receiver products P_j = prod_{k active, k != j} g_kj and the exact
// marginal gain of switching node i on from the profile with a_i = 0.
class AggregateState {
 public:
  AggregateState(const InterferenceMatrix& b, ActionVector a) : b_(b), a_(std::move(a)) { refresh(); }

  void refresh() {
    const std::size_t n = b_.size();
    prod_.assign(n, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (!a_[k]) continue;
      for (std::size_t j = 0; j < n; ++j)
        if (j != k) prod_[j] *= gfac(b_, k, j);
    }
    theta_ = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (a_[j]) theta_ += prod_[j];
  }

  double gain(std::size_t i) const {
    double u = prod_[i];
    for (std::size_t j = 0; j < b_.size(); ++j) {
      if (j == i || !a_[j]) continue;
      const double g = gfac(b_, i, j);
      const double without_i = a_[i] ? prod_[j] / g : prod_[j];
      u -= (1.0 - g) * without_i;
    }
    return u;
  }

  void set(std::size_t i, std::uint8_t v, double u) {
    if (a_[i] == v) return;
    a_[i] = v;
    for (std::size_t j = 0; j < b_.size(); ++j) {
      if (j == i) continue;
      const double g = gfac(b_, i, j);
      prod_[j] = v ? prod_[j] * g : prod_[j] / g;
    }
    theta_ += v ? u : -u;
  }

  const ActionVector& actions() const { return a_; }
  double theta() const { return theta_; }

 private:
  const InterferenceMatrix& b_;
  ActionVector a_;
  std::vector<double> prod_;
  double theta_ = 0.0;
};

// Closest active interferer of every receiver, with w_j = 1/(1 + b_{c_j j}).
class ClosestActiveState {
 public:
  explicit ClosestActiveState(const InterferenceMatrix& b) : b_(b), n_(b.size()) {
    a_.assign(n_, 0);
    c_.assign(n_, n_);
  }

  double gain(std::size_t i) const {
    double u = 1.0 - weight(i, c_[i]);
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i || !a_[j]) continue;
      const std::size_t cj = c_[j] == i ? nearest_excluding(j, i) : c_[j];
      if (nearer(i, cj, j)) u -= 1.0 / (1.0 + b_(i, j)) - weight(j, cj);
    }
    return u;
  }

  void set(std::size_t i, std::uint8_t v) {
    if (a_[i] == v) return;
    a_[i] = v;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      if (v) {
        if (nearer(i, c_[j], j)) c_[j] = i;
      } else if (c_[j] == i) {
        c_[j] = nearest_excluding(j, n_);
      }
    }
  }

  const ActionVector& actions() const { return a_; }

 private:
  bool nearer(std::size_t k, std::size_t current, std::size_t j) const {
    if (current == n_) return true;
    const double bk = b_(k, j), bc = b_(current, j);
    return bk < bc || (bk == bc && k < current);
  }
  double weight(std::size_t j, std::size_t c) const { return c == n_ ? 0.0 : 1.0 / (1.0 + b_(c, j)); }
  std::size_t nearest_excluding(std::size_t j, std::size_t skip) const {
    std::size_t best = n_;
    for (std::size_t k = 0; k < n_; ++k)
      if (k != j && k != skip && a_[k] && nearer(k, best, j)) best = k;
    return best;
  }

  const InterferenceMatrix& b_;
  std::size_t n_;
  ActionVector a_;
  std::vector<std::size_t> c_;
};

std::map<std::string, double> gibbs_settings(const GibbsOptions& opts) {
  return {{"n_sweeps", static_cast<double>(opts.n_sweeps)},
          {"tau", opts.schedule.tau},
          {"log_cooling", opts.schedule.kind == CoolingSchedule::Kind::log_cooling ? 1.0 : 0.0}};
}

void check_gibbs(const GibbsOptions& opts) {
  opts.schedule.validate();
  if (opts.n_sweeps < 1) throw ParameterError("n_sweeps must be at least 1");
}

}  // namespace

double CoolingSchedule::at(std::size_t t) const {
  if (kind == Kind::fixed_temperature) return tau;
  return tau / std::log1p(static_cast<double>(std::max<std::size_t>(t, 1)));
}

void CoolingSchedule::validate() const {
  if (!(tau > 0.0)) throw ParameterError("temperature must be positive");
  if (kind == Kind::log_cooling && std::isinf(tau)) throw ParameterError("tau0 must be finite");
}

double aggregate_throughput(const InterferenceMatrix& b, std::span<const std::uint8_t> a) {
  check_actions(b, a);
  double theta = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!a[i]) continue;
    double prod = 1.0;
    for (std::size_t j = 0; j < b.size(); ++j)
      if (j != i && a[j]) prod *= gfac(b, j, i);
    theta += prod;
  }
  return theta;
}

double nearest_throughput(const InterferenceMatrix& b, const NeighborStructure& nbr,
                          std::span<const std::uint8_t> a) {
  check_actions(b, a);
  if (nbr.size() != b.size()) throw ParameterError("neighbor structure size differs from N");
  double theta = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!a[i]) continue;
    const std::size_t c = nbr.closest[i];
    theta += 1.0 - (a[c] ? 1.0 / (1.0 + b(c, i)) : 0.0);
  }
  return theta;
}

double closest_active_throughput(const InterferenceMatrix& b, std::span<const std::uint8_t> a) {
  check_actions(b, a);
  const std::size_t n = b.size();
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!a[i]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && a[j]) best = std::min(best, b(j, i));
    theta += std::isinf(best) ? 1.0 : 1.0 - 1.0 / (1.0 + best);
  }
  return theta;
}

OptimizerReport max_throughput_bruteforce(const InterferenceMatrix& b) {
  const std::size_t n = b.size();
  if (n > kBruteForceMaxNodes)
    throw ParameterError("brute force is limited to N <= " + std::to_string(kBruteForceMaxNodes) +
                         " nodes; use the Gibbs sampler for larger instances");

  std::vector<double> g(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) g[j * n + i] = gfac(b, j, i);

  // Depth-first over include/exclude decisions; level d holds the products of
  // the receivers given the decisions on nodes 0..d-1.
  std::vector<std::vector<double>> prod(n + 1, std::vector<double>(n, 1.0));
  std::vector<std::size_t> chosen, best_set;
  double best = -1.0;
  std::size_t visited = 0;

  auto consider = [&](double theta) {
    ++visited;
    const double scale = std::max(1.0, std::abs(best));
    if (theta > best + 1e-12 * scale) {
      best = theta;
      best_set = chosen;
    } else if (std::abs(theta - best) <= 1e-12 * scale &&
               std::lexicographical_compare(chosen.begin(), chosen.end(), best_set.begin(),
                                            best_set.end())) {
      best = std::max(best, theta);
      best_set = chosen;
    }
  };

  auto rec = [&](auto&& self, std::size_t d) -> void {
    if (d == n) {
      double theta = 0.0;
      for (std::size_t i : chosen) theta += prod[d][i];
      consider(theta);
      return;
    }
    // include d
    auto& next = prod[d + 1];
    const auto& cur = prod[d];
    for (std::size_t i = 0; i < n; ++i) next[i] = i == d ? cur[i] : cur[i] * g[d * n + i];
    chosen.push_back(d);
    self(self, d + 1);
    chosen.pop_back();
    // exclude d
    prod[d + 1] = prod[d];
    self(self, d + 1);
  };
  rec(rec, 0);

  ActionVector a(n, 0);
  for (std::size_t i : best_set) a[i] = 1;
  OptimizerReport rep;
  rep.scheme = "MT-BF";
  rep.p = as_doubles(a);
  rep.objective_value = n == 0 ? 0.0 : aggregate_throughput(b, a);
  rep.iterations = visited;
  rep.converged = true;
  return rep;
}

OptimizerReport max_throughput_gibbs(const InterferenceMatrix& b, const GibbsOptions& opts) {
  check_gibbs(opts);
  const std::size_t n = b.size();
  if (n < 1) throw ParameterError("max_throughput_gibbs needs N >= 1");

  Rng rng(opts.seed);
  AggregateState state(b, ActionVector(n, 0));
  ActionVector best = state.actions();
  double best_theta = 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  OptimizerReport rep;
  for (std::size_t t = 1; t <= opts.n_sweeps; ++t) {
    const double tau = opts.schedule.at(t);
    shuffle(order, rng);
    for (std::size_t i : order) {
      const double u = state.gain(i);
      const std::uint8_t v = rng.bernoulli(logistic(u, tau)) ? 1 : 0;
      state.set(i, v, u);
      if (state.theta() > best_theta) {
        best_theta = state.theta();
        best = state.actions();
      }
    }
    state.refresh();
    if (state.theta() > best_theta) {
      best_theta = state.theta();
      best = state.actions();
    }
    if (opts.record_trace) rep.trace.push_back(state.theta());
    if (opts.on_sweep) opts.on_sweep(state.actions());
  }

  rep.scheme = "MT-AI";
  rep.p = as_doubles(best);
  rep.objective_value = aggregate_throughput(b, best);
  rep.iterations = opts.n_sweeps;
  rep.converged = true;
  rep.settings = gibbs_settings(opts);
  rep.seed = opts.seed;
  return rep;
}

OptimizerReport max_throughput_best_response(const InterferenceMatrix& b, const ActionVector& init) {
  check_actions(b, init);
  const std::size_t n = b.size();
  AggregateState state(b, init);
  OptimizerReport rep;
  rep.scheme = "MT-BR";
  rep.trace.push_back(state.theta());

  const std::size_t max_passes = 100 * n + 100;
  bool stable = false;
  std::size_t passes = 0;
  while (!stable && passes < max_passes) {
    ++passes;
    stable = true;
    state.refresh();
    for (std::size_t i = 0; i < n; ++i) {
      const double u = state.gain(i);
      const std::uint8_t v = u > 0.0 ? 1 : 0;
      if (v == state.actions()[i]) continue;
      stable = false;
      state.set(i, v, u);
      rep.trace.push_back(aggregate_throughput(b, state.actions()));
    }
  }

  rep.p = as_doubles(state.actions());
  rep.objective_value = aggregate_throughput(b, state.actions());
  rep.iterations = passes;
  rep.converged = stable;
  return rep;
}

OptimizerReport max_throughput_nearest(const InterferenceMatrix& b, const NeighborStructure& nbr,
                                       NearestVariant variant, const GibbsOptions& opts) {
  check_gibbs(opts);
  const std::size_t n = b.size();
  if (n < 2) throw GeometryError("max_throughput_nearest needs N >= 2");
  if (nbr.size() != n) throw ParameterError("neighbor structure size differs from N");

  Rng rng(opts.seed);
  OptimizerReport rep;
  ActionVector best;
  double best_theta = -1.0;
  std::vector<std::size_t> order;

  auto run = [&](auto& state, auto&& gain, auto&& set, auto&& objective) {
    best = state.actions();
    best_theta = objective(best);
    for (std::size_t t = 1; t <= opts.n_sweeps; ++t) {
      const double tau = opts.schedule.at(t);
      shuffle(order, rng);
      for (std::size_t i : order) {
        const double u = gain(i);
        set(i, rng.bernoulli(logistic(u, tau)) ? 1 : 0);
      }
      const double theta = objective(state.actions());
      if (theta > best_theta) {
        best_theta = theta;
        best = state.actions();
      }
      if (opts.record_trace) rep.trace.push_back(theta);
      if (opts.on_sweep) opts.on_sweep(state.actions());
    }
  };

  if (variant == NearestVariant::static_nearest) {
    struct Plain {
      ActionVector a;
      const ActionVector& actions() const { return a; }
    } state{ActionVector(n, 0)};
    std::size_t forced = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nbr.closest[i];
      double worst = 1.0 - 1.0 / (1.0 + b(c, i));
      for (std::size_t j : nbr.closest_of[i]) worst -= 1.0 / (1.0 + b(i, j));
      if (worst > 0.0) {
        state.a[i] = 1;
        ++forced;
      } else {
        order.push_back(i);
      }
    }
    auto gain = [&](std::size_t i) {
      const std::size_t c = nbr.closest[i];
      double u = 1.0 - (state.a[c] ? 1.0 / (1.0 + b(c, i)) : 0.0);
      for (std::size_t j : nbr.closest_of[i])
        if (state.a[j]) u -= 1.0 / (1.0 + b(i, j));
      return u;
    };
    auto set = [&](std::size_t i, std::uint8_t v) { state.a[i] = v; };
    auto objective = [&](const ActionVector& a) { return nearest_throughput(b, nbr, a); };
    run(state, gain, set, objective);
    rep.scheme = "MT-CI";
    rep.settings["forced_on"] = static_cast<double>(forced);
  } else {
    ClosestActiveState state(b);
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto gain = [&](std::size_t i) { return state.gain(i); };
    auto set = [&](std::size_t i, std::uint8_t v) { state.set(i, v); };
    auto objective = [&](const ActionVector& a) { return closest_active_throughput(b, a); };
    run(state, gain, set, objective);
    rep.scheme = "MT-CI-improved";
  }

  rep.p = as_doubles(best);
  rep.objective_value = best_theta;
  rep.iterations = opts.n_sweeps;
  rep.converged = true;
  for (const auto& [k, v] : gibbs_settings(opts)) rep.settings[k] = v;
  rep.seed = opts.seed;
  return rep;
}

}  // namespace aloha
