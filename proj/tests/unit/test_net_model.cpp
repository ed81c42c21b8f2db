#include <doctest.h>

#include <cmath>
#include <limits>

#include "aloha/error.hpp"
#include "aloha/net_model.hpp"
#include "helpers.hpp"

using namespace aloha;

TEST_CASE("channel params reject invalid values") {
  ChannelParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha = 2.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = {};
  p.sinr_threshold = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = {};
  p.noise = -1.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("receiver sits at link distance in its direction") {
  Bipole b{{2.0, 3.0}, 0.7, 1.5};
  const Point rx = b.rx();
  CHECK(rx.x == 2.0 + 1.5 * std::cos(0.7));
  CHECK(rx.y == 3.0 + 1.5 * std::sin(0.7));
}

TEST_CASE("generate_realization counts and determinism") {
  CHECK(generate_realization(0.0, 20.0, 1.0, CountMode::fixed, 3).size() == 0);
  CHECK(generate_realization(0.0, 20.0, 1.0, CountMode::poisson, 3).size() == 0);
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    CHECK(generate_realization(0.25, 40.0, 1.0, CountMode::fixed, seed).size() == 400);
  }
  const auto a = generate_realization(0.25, 40.0, 1.0, CountMode::fixed, 5);
  const auto b = generate_realization(0.25, 40.0, 1.0, CountMode::fixed, 5);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.bipoles[i].tx.x == b.bipoles[i].tx.x);
    CHECK(a.bipoles[i].tx.y == b.bipoles[i].tx.y);
    CHECK(a.bipoles[i].rx_angle == b.bipoles[i].rx_angle);
    CHECK(a.bipoles[i].tx.x >= 0.0);
    CHECK(a.bipoles[i].tx.x <= 40.0);
    CHECK(a.bipoles[i].tx.y >= 0.0);
    CHECK(a.bipoles[i].tx.y <= 40.0);
    CHECK(a.bipoles[i].rx_angle >= 0.0);
    CHECK(a.bipoles[i].rx_angle < 2.0 * M_PI);
  }
  const auto c = generate_realization(0.25, 40.0, 1.0, CountMode::fixed, 6);
  CHECK(c.bipoles[0].tx.x != a.bipoles[0].tx.x);
  CHECK_THROWS_AS(generate_realization(0.25, 0.0, 1.0, CountMode::fixed, 1), ParameterError);
  CHECK_THROWS_AS(generate_realization(0.25, 10.0, 0.0, CountMode::fixed, 1), ParameterError);
  CHECK_THROWS_AS(generate_realization(-1.0, 10.0, 1.0, CountMode::fixed, 1), ParameterError);
}

TEST_CASE("poisson mode counts have mean and variance near lambda L^2") {
  double sum = 0.0, sq = 0.0;
  const int reps = 400;
  for (int k = 0; k < reps; ++k) {
    const double n = static_cast<double>(generate_realization(0.25, 20.0, 1.0, CountMode::poisson, k).size());
    sum += n;
    sq += n * n;
  }
  const double mean = sum / reps;
  const double var = sq / reps - mean * mean;
  // mean 100, standard error 0.5
  CHECK(std::abs(mean - 100.0) < 2.5);
  CHECK(var > 70.0);
  CHECK(var < 135.0);
}

TEST_CASE("interference coefficients follow the defining formula") {
  SUBCASE("unit ratio with T = 1") {
    // transmitter 1 at the same distance from receiver 0 as transmitter 0
    auto net = testutil::make_net({{0.0, 0.0}, {2.0, 0.0}}, {0.0, M_PI / 2});
    ChannelParams p;
    p.sinr_threshold = 1.0;
    const auto b = interference_coefficients(net, p);
    CHECK(b(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("doubling r_ji multiplies b_ji by 16 when alpha = 4") {
    auto near = testutil::make_net({{0.0, 0.0}, {3.0, 0.0}}, {0.0, M_PI / 2});
    auto far = testutil::make_net({{0.0, 0.0}, {5.0, 0.0}}, {0.0, M_PI / 2});
    const auto b1 = interference_coefficients(near, {});
    const auto b2 = interference_coefficients(far, {});
    // receiver 0 at (1, 0): distances 2 and 4
    CHECK(b2(1, 0) / b1(1, 0) == doctest::Approx(16.0).epsilon(1e-13));
  }
  SUBCASE("three-node instance matches a scalar recomputation") {
    auto net = testutil::make_net({{0.0, 0.0}, {3.0, 1.0}, {-1.0, 4.0}}, {0.3, 2.0, 4.5}, 1.2);
    ChannelParams p;
    p.alpha = 3.5;
    p.sinr_threshold = 7.0;
    const auto b = interference_coefficients(net, p);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t i = 0; i < 3; ++i) {
        if (i == j) continue;
        const auto& bi = net.bipoles[i];
        const double rx = bi.tx.x + 1.2 * std::cos(bi.rx_angle);
        const double ry = bi.tx.y + 1.2 * std::sin(bi.rx_angle);
        const double dx = net.bipoles[j].tx.x - rx, dy = net.bipoles[j].tx.y - ry;
        const double expect = std::pow(std::sqrt(dx * dx + dy * dy) / 1.2, 3.5) / 7.0;
        CHECK(b(j, i) == doctest::Approx(expect).epsilon(1e-13));
        CHECK(b(j, i) > 0.0);
      }
  }
  SUBCASE("coincident transmitter and foreign receiver is a geometry error") {
    auto net = testutil::make_net({{0.0, 0.0}, {1.0, 0.0}}, {0.0, 0.0});
    CHECK_THROWS_AS(interference_coefficients(net, {}), GeometryError);
  }
}

TEST_CASE("common scaling of coordinates and r0 leaves b unchanged") {
  auto net = generate_realization(0.25, 8.0, 1.0, CountMode::fixed, 11);
  auto scaled = net;
  scaled.link_distance = 3.0;
  for (auto& bp : scaled.bipoles) {
    bp.tx.x *= 3.0;
    bp.tx.y *= 3.0;
    bp.link_distance = 3.0;
  }
  const auto b1 = interference_coefficients(net, {});
  const auto b2 = interference_coefficients(scaled, {});
  for (std::size_t j = 0; j < net.size(); ++j)
    for (std::size_t i = 0; i < net.size(); ++i)
      if (i != j) CHECK(b2(j, i) == doctest::Approx(b1(j, i)).epsilon(1e-11));
}

TEST_CASE("nearest interferer structure") {
  SUBCASE("two nodes point at each other") {
    auto net = testutil::make_net({{0.0, 0.0}, {5.0, 0.0}}, {0.0, 0.0});
    const auto s = nearest_interferer_structure(net);
    CHECK(s.closest[0] == 1);
    CHECK(s.closest[1] == 0);
    CHECK(s.closest_of[0] == std::vector<std::size_t>{1});
    CHECK(s.closest_of[1] == std::vector<std::size_t>{0});
  }
  SUBCASE("collinear line agrees with a brute-force argmin") {
    auto net = testutil::make_net({{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}}, {1.0, 2.0, 3.0, 4.0}, 0.1);
    const auto s = nearest_interferer_structure(net);
    for (std::size_t i = 0; i < 4; ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < 4; ++j) {
        if (j == i) continue;
        const double d = distance(net.bipoles[j].tx, net.bipoles[i].rx());
        if (d < best) best = d, arg = j;
      }
      CHECK(s.closest[i] == arg);
      for (std::size_t j : s.closest_of[i]) CHECK(s.closest[j] == i);
    }
  }
  SUBCASE("exact tie picks the smallest index and is flagged") {
    // receiver 0 at (1, 0); transmitters 1 and 2 mirror each other about y = 0
    auto net = testutil::make_net({{0.0, 0.0}, {1.0, 3.0}, {1.0, -3.0}}, {0.0, 0.0, 0.0});
    const auto s = nearest_interferer_structure(net);
    CHECK(s.closest[0] == 1);
    CHECK(s.tie[0]);
    CHECK(s.has_ties());
  }
  SUBCASE("fewer than two nodes is a geometry error") {
    auto net = testutil::make_net({{0.0, 0.0}}, {0.0});
    CHECK_THROWS_AS(nearest_interferer_structure(net), GeometryError);
  }
  SUBCASE("coefficient route matches the geometric route") {
    auto net = generate_realization(0.25, 10.0, 1.0, CountMode::fixed, 4);
    const auto g = nearest_interferer_structure(net);
    const auto m = nearest_interferer_structure(interference_coefficients(net, {}));
    CHECK(g.closest == m.closest);
    CHECK(g.closest_of == m.closest_of);
  }
}

TEST_CASE("window nodes lie in the central square") {
  auto net = generate_realization(0.25, 40.0, 1.0, CountMode::fixed, 8);
  const auto w = window_nodes(net, 0.5);
  CHECK(!w.empty());
  std::size_t inside = 0;
  for (const auto& bp : net.bipoles)
    if (bp.tx.x >= 10.0 && bp.tx.x <= 30.0 && bp.tx.y >= 10.0 && bp.tx.y <= 30.0) ++inside;
  CHECK(w.size() == inside);
  for (std::size_t i : w) {
    CHECK(net.bipoles[i].tx.x >= 10.0);
    CHECK(net.bipoles[i].tx.x <= 30.0);
  }
  CHECK(window_nodes(net, 1.0).size() == net.size());
}
