#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "aloha/error.hpp"
#include "aloha/optimizers.hpp"
#include "aloha/rate_model.hpp"
#include "aloha/rng.hpp"
#include "helpers.hpp"

using namespace aloha;

namespace {

double pf_objective(const InterferenceMatrix& b, const std::vector<double>& p) {
  return rate_report(MapVector(p), b, {}, 1.0).log_utility;
}

// Sum log(p_i q_i) separates into per-transmitter terms
// log p_j + sum_i log(1 - p_j / (1 + b_ji)), so a per-coordinate scan
// is an exhaustive grid search over [0, 1]^N.
double pf_grid_optimum(const InterferenceMatrix& b, double step) {
  double total = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    double best = -INFINITY;
    for (double p = step; p <= 1.0 + 1e-12; p += step) {
      double v = std::log(std::min(p, 1.0));
      for (std::size_t i = 0; i < b.size(); ++i)
        if (i != j) v += std::log(1.0 - std::min(p, 1.0) / (1.0 + b(j, i)));
      best = std::max(best, v);
    }
    total += best;
  }
  return total;
}

ActionVector to_actions(const std::vector<double>& p) {
  ActionVector a(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) a[i] = p[i] > 0.5 ? 1 : 0;
  return a;
}

double nearest_bruteforce(const InterferenceMatrix& b, const NeighborStructure& nbr) {
  const std::size_t n = b.size();
  double best = 0.0;
  for (std::uint32_t m = 0; m < (1u << n); ++m) {
    ActionVector a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = (m >> i) & 1u;
    best = std::max(best, nearest_throughput(b, nbr, a));
  }
  return best;
}

}  // namespace

TEST_CASE("cooling and step schedules") {
  const auto c = CoolingSchedule::logarithmic(2.0);
  CHECK(c.at(5) == doctest::Approx(2.0 / std::log(6.0)));
  CHECK(c.at(0) > 0.0);
  CHECK(c.at(1) > c.at(100));
  CHECK(CoolingSchedule::fixed(0.3).at(77) == 0.3);
  CHECK_THROWS_AS(CoolingSchedule::fixed(0.0).validate(), ParameterError);
  StepSchedule s;
  CHECK(s.at(4) == doctest::Approx(0.05));
}

TEST_CASE("proportional fair closed forms") {
  CHECK(prop_fair_singleton_closed_form(0.2) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(prop_fair_singleton_closed_form(1.0) == 1.0);
  CHECK(prop_fair_singleton_closed_form(3.0) == 1.0);
  for (double b : {0.1, 0.5, 0.9}) CHECK(prop_fair_linear_closed_form(b, b) == doctest::Approx((1.0 + b) / 3.0).epsilon(1e-13));
  const double p = prop_fair_linear_closed_form(0.5, 0.25);
  CHECK(std::abs(1.0 / p - 1.0 / (1.5 - p) - 1.0 / (1.25 - p)) < 1e-12);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(prop_fair_linear_closed_form(2.0, 2.0) == 1.0);
}

TEST_CASE("proportional fair on hand-built instances") {
  SUBCASE("single node has full access") {
    const auto r = prop_fair_global(InterferenceMatrix(1, {0.0}));
    CHECK(r.p[0] == 1.0);
    CHECK(r.converged);
  }
  SUBCASE("singleton C(i) matches the closed form") {
    const auto b = testutil::make_matrix(2, [](std::size_t, std::size_t) { return 0.5; });
    const auto nbr = nearest_interferer_structure(b);
    const auto r = prop_fair_nearest(b, nbr);
    CHECK(r.converged);
    CHECK(r.p[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(std::abs(r.p[0] - prop_fair_singleton_closed_form(0.5)) < 1e-12);
  }
  SUBCASE("empty C(i) gives p = 1 and a line gives (1 + b)/3") {
    // node 1 sits between nodes 0 and 2 which both see it as nearest; node 3 is far away
    // and nobody's nearest interferer
    const auto b = testutil::make_matrix(4, [](std::size_t j, std::size_t i) {
      if (j == 1 && (i == 0 || i == 2)) return 0.5;
      if ((j == 0 || j == 2) && i == 1) return j == 0 ? 0.6 : 0.7;
      if (j == 3) return 1000.0;
      return 50.0;
    });
    const auto nbr = nearest_interferer_structure(b);
    REQUIRE(nbr.closest[0] == 1);
    REQUIRE(nbr.closest[2] == 1);
    REQUIRE(nbr.closest_of[3].empty());
    const auto r = prop_fair_nearest(b, nbr);
    CHECK(r.p[3] == 1.0);
    CHECK(r.p[1] == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("proportional fair T to infinity gives 1/N") {
  auto net = generate_realization(0.25, std::sqrt(10.0 / 0.25), 1.0, CountMode::fixed, 3);
  ChannelParams ch;
  ch.sinr_threshold = 1e6;
  const auto r = prop_fair_global(interference_coefficients(net, ch));
  CHECK(r.converged);
  for (double p : r.p) CHECK(std::abs(p - 0.1) <= 1e-3);
}

TEST_CASE("proportional fair matches the grid optimum") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto b = testutil::random_b(6, seed);
    const auto r = prop_fair_global(b);
    REQUIRE(r.converged);
    const double grid = pf_grid_optimum(b, 0.01);
    const double got = pf_objective(b, r.p);
    CHECK(got >= grid - 1e-12);
    CHECK(got - grid <= 1e-3);
    CHECK(r.objective_value == doctest::Approx(got).epsilon(1e-12));
  }
}

TEST_CASE("proportional fair fixed-point map is a contraction") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto b = testutil::random_b(12, seed);
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (prop_fair_map(b, i, 1.0) >= 1.0) continue;
      for (double p = 0.0; p < 1.0; p += 0.05) {
        const double h = 1e-6;
        const double d = (prop_fair_map(b, i, p + h) - prop_fair_map(b, i, p)) / h;
        CHECK(std::abs(d) < 1.0);
      }
    }
  }
}

TEST_CASE("proportional fair is independent of the starting point") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto b = testutil::random_b(20, seed);
    FixedPointOptions a, c;
    c.start = 0.5;
    a.start = 0.0;
    const auto r1 = prop_fair_global(b);
    const auto r2 = prop_fair_global(b, a);
    const auto r3 = prop_fair_global(b, c);
    CHECK(r1.converged);
    CHECK(r1.residual <= 1e-10);
    for (std::size_t i = 0; i < b.size(); ++i) {
      CHECK(std::abs(r1.p[i] - r2.p[i]) < 1e-8);
      CHECK(std::abs(r1.p[i] - r3.p[i]) < 1e-8);
    }
  }
}

TEST_CASE("proportional fair reports non-convergence without throwing") {
  const auto b = testutil::random_b(10, 4);
  FixedPointOptions o;
  o.max_iter = 1;
  const auto r = prop_fair_global(b, o);
  CHECK_FALSE(r.converged);
  CHECK(r.residual > o.tol);
}

TEST_CASE("brute-force throughput") {
  SUBCASE("one node") {
    const auto r = max_throughput_bruteforce(InterferenceMatrix(1, {0.0}));
    CHECK(r.p == std::vector<double>{1.0});
    CHECK(r.objective_value == 1.0);
  }
  SUBCASE("two nodes far apart both transmit") {
    const auto b = testutil::make_matrix(2, [](std::size_t, std::size_t) { return 100.0; });
    // {1,2}: 2 * (1 - 1/101) > 1
    CHECK(max_throughput_bruteforce(b).p == std::vector<double>{1.0, 1.0});
  }
  SUBCASE("two nodes close together pick one") {
    const auto b = testutil::make_matrix(2, [](std::size_t, std::size_t) { return 0.01; });
    // {1,2}: 2 * (1 - 1/1.01) < 1; tie between singletons goes to {1}
    CHECK(max_throughput_bruteforce(b).p == std::vector<double>{1.0, 0.0});
  }
  SUBCASE("refuses large instances") {
    const auto b = testutil::random_b(kBruteForceMaxNodes + 1, 1);
    CHECK_THROWS_AS(max_throughput_bruteforce(b), ParameterError);
  }
}

TEST_CASE("Gibbs sampler limits") {
  SUBCASE("zero temperature limit of the logistic rule") {
    // a lone node always gains 1, so it turns on at once and stays on
    GibbsOptions o;
    o.schedule = CoolingSchedule::fixed(1e-3);
    o.n_sweeps = 50;
    std::size_t on = 0;
    o.on_sweep = [&](std::span<const std::uint8_t> a) { on += a[0]; };
    max_throughput_gibbs(InterferenceMatrix(1, {0.0}), o);
    CHECK(on == 50);
  }
  SUBCASE("infinite temperature gives fair coins") {
    const auto b = testutil::random_b(3, 2);
    GibbsOptions o;
    o.schedule = CoolingSchedule::fixed(INFINITY);
    o.n_sweeps = 40000;
    o.seed = 3;
    std::vector<double> on(3, 0.0);
    o.on_sweep = [&](std::span<const std::uint8_t> a) {
      for (int i = 0; i < 3; ++i) on[i] += a[i];
    };
    max_throughput_gibbs(b, o);
    // standard error 0.0025
    for (double v : on) CHECK(std::abs(v / 40000.0 - 0.5) < 0.01);
  }
}

TEST_CASE("Gibbs visit law at fixed temperature is exp(Theta/tau)") {
  const auto b = testutil::make_matrix(3, [](std::size_t j, std::size_t i) { return 0.4 + 0.3 * j + 0.2 * i; });
  const double tau = 0.4;
  GibbsOptions o;
  o.schedule = CoolingSchedule::fixed(tau);
  o.n_sweeps = 1000000;
  o.seed = 11;
  std::vector<double> count(8, 0.0);
  std::size_t sweep = 0;
  // thinning keeps successive recorded states close to independent
  o.on_sweep = [&](std::span<const std::uint8_t> a) {
    if (++sweep % 10 == 0) count[a[0] | (a[1] << 1) | (a[2] << 2)] += 1.0;
  };
  max_throughput_gibbs(b, o);
  std::vector<double> w(8);
  for (int m = 0; m < 8; ++m) {
    const ActionVector a{std::uint8_t(m & 1), std::uint8_t((m >> 1) & 1), std::uint8_t((m >> 2) & 1)};
    w[m] = std::exp(aggregate_throughput(b, a) / tau);
  }
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  const double n = std::accumulate(count.begin(), count.end(), 0.0);
  double chi2 = 0.0;
  for (int m = 0; m < 8; ++m) {
    const double e = n * w[m] / z;
    chi2 += (count[m] - e) * (count[m] - e) / e;
  }
  // 1% critical value of chi-square with 7 degrees of freedom
  CHECK(chi2 < 18.475);
}

TEST_CASE("best response is a potential ascent bounded by brute force") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto b = testutil::random_b(10, seed);
    const auto br = max_throughput_best_response(b, ActionVector(10, 0));
    CHECK(br.converged);
    for (std::size_t k = 1; k < br.trace.size(); ++k) CHECK(br.trace[k] >= br.trace[k - 1] - 1e-12);
    CHECK(br.objective_value <= max_throughput_bruteforce(b).objective_value + 1e-12);
  }
  const auto lone = max_throughput_best_response(InterferenceMatrix(1, {0.0}), ActionVector{0});
  CHECK(lone.p == std::vector<double>{1.0});
}

TEST_CASE("closest-interferer throughput schemes") {
  SUBCASE("isolated far pair is forced on by the static rule") {
    const auto b = testutil::make_matrix(4, [](std::size_t j, std::size_t i) {
      const bool pair_a = j < 2 && i < 2, pair_b = j >= 2 && i >= 2;
      if (pair_a || pair_b) return 1e4;
      return 1e6;
    });
    const auto nbr = nearest_interferer_structure(b);
    GibbsOptions o;
    o.n_sweeps = 1;
    const auto r = max_throughput_nearest(b, nbr, NearestVariant::static_nearest, o);
    CHECK(r.p == std::vector<double>{1.0, 1.0, 1.0, 1.0});
    CHECK(r.settings.at("forced_on") == 4.0);
  }
  SUBCASE("static Gibbs matches brute force of its objective") {
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto b = testutil::random_b(3 + seed % 8, seed);
      const auto nbr = nearest_interferer_structure(b);
      GibbsOptions o;
      o.seed = seed;
      o.n_sweeps = 3000;
      const auto r = max_throughput_nearest(b, nbr, NearestVariant::static_nearest, o);
      const double got = nearest_throughput(b, nbr, to_actions(r.p));
      if (std::abs(got - nearest_bruteforce(b, nbr)) <= 1e-9) ++hits;
    }
    CHECK(hits == 20);
  }
  SUBCASE("closest-active variant scores at least as well as the static one") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const auto b = testutil::random_b(10, 1000 + seed);
      const auto nbr = nearest_interferer_structure(b);
      GibbsOptions o;
      o.seed = seed;
      o.n_sweeps = 2000;
      const auto s = max_throughput_nearest(b, nbr, NearestVariant::static_nearest, o);
      const auto c = max_throughput_nearest(b, nbr, NearestVariant::closest_active, o);
      if (aggregate_throughput(b, to_actions(c.p)) >= aggregate_throughput(b, to_actions(s.p)) - 1e-12) ++wins;
    }
    CHECK(wins >= 80);
  }
}

TEST_CASE("max-min global dual ascent") {
  SUBCASE("symmetric pair has equal MAPs and rates") {
    const auto b = testutil::make_matrix(2, [](std::size_t, std::size_t) { return 0.7; });
    const auto r = max_min_global(b);
    REQUIRE(r.converged);
    CHECK(r.p[0] == doctest::Approx(r.p[1]).epsilon(1e-6));
    CHECK(r.dual->log_rate[0] == doctest::Approx(r.dual->log_rate[1]).epsilon(1e-5));
  }
  SUBCASE("random five-node instances equalize rates and beat PF's minimum") {
    int checked = 0;
    for (std::uint64_t seed = 1; checked < 5 && seed < 50; ++seed) {
      const auto b = testutil::random_b(5, seed);
      const auto r = max_min_global(b);
      REQUIRE(r.converged);
      ++checked;
      const auto rates = rate_report(MapVector(r.p), b, {}, 1.0).rate;
      const double lo = *std::min_element(rates.begin(), rates.end());
      const double hi = *std::max_element(rates.begin(), rates.end());
      CHECK((hi - lo) / lo <= 1e-2);
      const auto pf = rate_report(MapVector(prop_fair_global(b).p), b, {}, 1.0);
      CHECK(lo >= pf.min_rate - 1e-9);
      // theta <= log rate within tol, multipliers nonnegative
      for (double lr : r.dual->log_rate) CHECK(r.dual->theta[0] <= lr + 1e-6);
      for (double l : r.dual->lambda) CHECK(l >= 0.0);
    }
  }
}

TEST_CASE("max-min closest-interferer dual ascent") {
  SUBCASE("symmetric pair") {
    const auto b = testutil::make_matrix(2, [](std::size_t, std::size_t) { return 0.7; });
    const auto r = max_min_nearest(b, nearest_interferer_structure(b));
    REQUIRE(r.converged);
    CHECK(r.p[0] == doctest::Approx(r.p[1]).epsilon(1e-6));
  }
  SUBCASE("connected four-node instance has equal theta") {
    // chain 0 - 1 - 2 - 3 with each node's nearest interferer its neighbor
    const auto b = testutil::make_matrix(4, [](std::size_t j, std::size_t i) {
      const double gap = std::abs(double(j) - double(i));
      return 0.6 * std::pow(gap, 4.0) + 0.05 * (i + j);
    });
    const auto nbr = nearest_interferer_structure(b);
    REQUIRE(link_graph_components(nbr).size() == 1);
    const auto r = max_min_nearest(b, nbr);
    REQUIRE(r.converged);
    const auto& th = r.dual->theta;
    const auto [lo, hi] = std::minmax_element(th.begin(), th.end());
    CHECK(*hi - *lo <= 1e-4);
    for (const auto& m : r.dual->mu) CHECK(m.value >= 0.0);
  }
  SUBCASE("two separated clusters decompose") {
    const auto cluster = [](std::size_t j, std::size_t i) { return 0.3 + 0.2 * double(j) + 0.1 * double(i); };
    const auto b = testutil::make_matrix(4, [&](std::size_t j, std::size_t i) {
      if ((j < 2) != (i < 2)) return 1e5;
      return cluster(j % 2, i % 2);
    });
    const auto nbr = nearest_interferer_structure(b);
    CHECK(link_graph_components(nbr).size() == 2);
    const auto whole = max_min_nearest(b, nbr);
    const auto part = testutil::make_matrix(2, cluster);
    const auto single = max_min_nearest(part, nearest_interferer_structure(part));
    REQUIRE(whole.converged);
    REQUIRE(single.converged);
    CHECK(whole.p[0] == doctest::Approx(single.p[0]).epsilon(1e-9));
    CHECK(whole.p[1] == doctest::Approx(single.p[1]).epsilon(1e-9));
    CHECK(whole.p[2] == doctest::Approx(single.p[0]).epsilon(1e-9));
    CHECK(whole.p[3] == doctest::Approx(single.p[1]).epsilon(1e-9));
  }
}

TEST_CASE("link graph components") {
  NeighborStructure nbr;
  nbr.closest = {1, 0, 3, 2, 2};
  const auto comps = link_graph_components(nbr);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0] == std::vector<std::size_t>{0, 1});
  CHECK(comps[1] == std::vector<std::size_t>{2, 3, 4});
}
