#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "aloha/error.hpp"
#include "aloha/quadrature.hpp"
#include "aloha/stochgeo.hpp"

using namespace aloha;
using cd = std::complex<double>;

namespace {

const AnalyticModel kModel{};  // lambda 0.25, T 10, r0 1, alpha 4

double rel(cd a, cd b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// At rho = 1 and alpha = 4, J is Levy distributed: L(s) = exp(-a sqrt(s)) with
// a = lambda pi Gamma(1/2) sqrt(rbar0), so P(J < t) = erfc(a / (2 sqrt t)).
double levy_scale(const AnalyticModel& m) {
  return m.intensity * M_PI * std::sqrt(M_PI) * std::sqrt(m.rbar0());
}

QuadratureSettings coarse() {
  QuadratureSettings q;
  q.rho_grid.clear();
  for (int k = 0; k <= 20; ++k) q.rho_grid.push_back(k / 20.0);
  return q;
}

}  // namespace

TEST_CASE("analytic model and settings validation") {
  CHECK(kModel.rbar0() == 10.0);
  AnalyticModel m;
  m.alpha = 2.0;
  CHECK_THROWS_AS(m.validate(), ParameterError);
  QuadratureSettings q;
  CHECK_NOTHROW(q.validate());
  q.rho_grid = {0.0, 0.5, 0.4};
  CHECK_THROWS_AS(q.validate(), ParameterError);
  q = {};
  q.contour_rel_tol = 0.0;
  CHECK_THROWS_AS(q.validate(), ParameterError);
  const auto g = default_rho_grid();
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 1.0);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(std::adjacent_find(g.begin(), g.end()) == g.end());
}

TEST_CASE("Gauss rules integrate polynomials exactly") {
  const auto r = quad::gauss_legendre(8);
  double s = 0.0;
  for (std::size_t k = 0; k < r.nodes.size(); ++k) s += r.weights[k] * std::pow(r.nodes[k], 14);
  CHECK(s == doctest::Approx(2.0 / 15.0).epsilon(1e-13));
  const auto q = quad::integrate<double>([](double x) { return std::exp(-x) * std::sin(3 * x); }, 0.0, 20.0, 1e-12);
  CHECK(q.converged);
  CHECK(q.value == doctest::Approx((3.0 - std::exp(-20.0) * (std::sin(60.0) + 3 * std::cos(60.0))) / 10.0).epsilon(1e-11));
}

TEST_CASE("Laplace transform trivial values") {
  for (double rho : {0.2, 0.9, 1.0}) {
    CHECK(laplace_shotnoise(rho, 0.0, kModel) == cd(1.0));
    CHECK(laplace_shotnoise_alpha4(rho, 0.0, kModel) == cd(1.0));
    CHECK(laplace_shotnoise_fast(rho, 0.0, kModel) == cd(1.0));
  }
  CHECK(laplace_shotnoise(0.0, cd(2.0, 1.0), kModel) == cd(1.0));
  AnalyticModel empty = kModel;
  empty.intensity = 0.0;
  CHECK(laplace_shotnoise_alpha4(0.4, cd(3.0, -2.0), empty) == cd(1.0));
}

TEST_CASE("generic and alpha = 4 transforms agree") {
  for (double rho : {0.3, 0.7})
    for (cd s : {cd(1.0), cd(2.0, 3.0)}) {
      const cd g = laplace_shotnoise(rho, s, kModel);
      CHECK(rel(g, laplace_shotnoise_alpha4(rho, s, kModel)) < 1e-8);
      CHECK(rel(g, laplace_shotnoise_fast(rho, s, kModel)) < 1e-8);
    }
  const cd s(0.0, 2.0);
  CHECK(rel(laplace_shotnoise(0.5, s, kModel), laplace_shotnoise_alpha4(0.5, s, kModel)) < 1e-8);
}

TEST_CASE("generic and kernel transforms agree off alpha = 4") {
  AnalyticModel m = kModel;
  m.alpha = 3.2;
  for (double rho : {0.25, 0.6, 1.0})
    for (cd s : {cd(0.5), cd(0.0, 4.0), cd(1.0, -2.0)})
      CHECK(rel(laplace_shotnoise(rho, s, m), laplace_shotnoise_fast(rho, s, m)) < 1e-8);
}

TEST_CASE("shot-noise kernel matches its defining integral") {
  for (cd kappa : {cd(0.7), cd(0.0, 5.0), cd(2.0, -1.5)})
    for (double delta : {0.5, 0.625}) {
      // [0, 1] directly, then x = v^-5 on [1, inf) makes the tail smooth in v
      auto head = [&](double x) {
        const cd z = kappa / (1.0 + std::pow(x, 1.0 / delta));
        if (std::abs(z) < 1e-3) return z * (1.0 - z * (0.5 - z * (1.0 / 6.0 - z / 24.0)));
        return 1.0 - std::exp(-z);
      };
      auto tail = [&](double v) {
        if (v == 0.0) return cd(0.0);
        return head(std::pow(v, -5.0)) * 5.0 * std::pow(v, -6.0);
      };
      const cd total = quad::integrate<cd>(head, 0.0, 1.0, 1e-13).value +
                       quad::integrate<cd>(tail, 0.0, 1.0, 1e-13).value;
      const struct { cd value; } q{total};
      CHECK(rel(shot_noise_kernel(kappa, delta), q.value) < 1e-8);
    }
}

TEST_CASE("characteristic function bounds and conjugate symmetry") {
  for (double rho : {0.1, 0.5, 0.9, 1.0})
    for (double w : {0.5, 2.0, 10.0, 100.0}) {
      const cd a = laplace_shotnoise_fast(rho, cd(0.0, w), kModel);
      const cd b = laplace_shotnoise_fast(rho, cd(0.0, -w), kModel);
      CHECK(std::abs(a) <= 1.0 + 1e-12);
      CHECK(std::abs(a - std::conj(b)) <= 1e-12);
    }
}

TEST_CASE("inversion reproduces the Levy law") {
  const double a = levy_scale(kModel);
  auto transform = [&](double w) { return std::exp(-a * std::sqrt(cd(0.0, w))); };
  const std::vector<double> ts{0.5, 1.0, 3.0, 20.0, 200.0};
  QuadratureSettings q;
  const auto got = invert_cdf(1.0, transform, ts, 0.5, q);
  for (std::size_t k = 0; k < ts.size(); ++k)
    CHECK(std::abs(got[k] - std::erfc(a / (2.0 * std::sqrt(ts[k])))) < 1e-6);
  CHECK(invert_ccdf(1.0, transform, 0.5, q) == doctest::Approx(std::erfc(a / 2.0)).epsilon(1e-3));
}

TEST_CASE("inversion of a sparse Levy law at small thresholds") {
  // slow decay of L: small thresholds need the oscillatory tail
  AnalyticModel sparse = kModel;
  sparse.intensity = 1e-8;
  const double a = levy_scale(sparse);
  auto transform = [&](double w) { return std::exp(-a * std::sqrt(cd(0.0, w))); };
  const std::vector<double> ts{1e-6, 1e-4, 1e-2, 1.0};
  const auto got = invert_cdf(1.0, transform, ts, 0.5, QuadratureSettings{});
  for (std::size_t k = 0; k < ts.size(); ++k)
    CHECK(std::abs(got[k] - std::erfc(a / (2.0 * std::sqrt(ts[k])))) < 1e-6);
}

TEST_CASE("MAP ccdf values") {
  CHECK(map_ccdf(0.0, kModel) == 1.0);
  // atom at one is the Levy cdf at t = 1
  CHECK(std::abs(map_ccdf(1.0, kModel) - std::erfc(levy_scale(kModel) / 2.0)) < 1e-6);
  AnalyticModel sparse = kModel;
  sparse.intensity = 1e-8;
  for (double rho : {0.1, 0.5, 0.99}) CHECK(map_ccdf(rho, sparse) > 1.0 - 1e-5);
}

TEST_CASE("MAP ccdf curve is a valid ccdf") {
  const auto q = coarse();
  const auto c = map_ccdf_curve(kModel, q, 2);
  REQUIRE(c.rho.size() == q.rho_grid.size());
  CHECK(c.ccdf.front() == 1.0);
  for (std::size_t k = 0; k < c.ccdf.size(); ++k) {
    CHECK(c.ccdf[k] >= 0.0);
    CHECK(c.ccdf[k] <= 1.0);
    if (k > 0) CHECK(c.ccdf[k] <= c.ccdf[k - 1] + 1e-4);
    CHECK(c.ccdf[k] >= c.atom_at_one - 1e-6);
  }
  CHECK(c.atom_at_one == doctest::Approx(c.ccdf.back()));
}

TEST_CASE("scale covariance of the MAP law") {
  // r0 -> c r0 and lambda -> lambda / c^2 keep lambda r0^2 fixed
  AnalyticModel scaled = kModel;
  scaled.link_distance = 2.0;
  scaled.intensity = kModel.intensity / 4.0;
  for (double rho : {0.2, 0.5, 0.8, 1.0})
    CHECK(std::abs(map_ccdf(rho, scaled) - map_ccdf(rho, kModel)) < 1e-5);
}

TEST_CASE("conditional MAP law") {
  SUBCASE("prefactor at s = 0 is one") {
    for (auto v : {ConditionalVariant::transmitter_distance, ConditionalVariant::receiver_distance})
      CHECK(std::abs(conditional_prefactor(0.4, 0.0, 2.0, kModel, v) - 1.0) < 1e-15);
  }
  SUBCASE("far node decouples") {
    for (double rho : {0.1, 0.3, 0.5, 0.8})
      CHECK(std::abs(conditional_map_ccdf(rho, 1e3, kModel) - map_ccdf(rho, kModel)) < 1e-3);
  }
  SUBCASE("nondecreasing in distance") {
    for (double rho : {0.1, 0.3, 0.6, 0.9}) {
      double prev = 0.0;
      for (double r : {0.25, 0.5, 1.0, 2.0, 4.0, 10.0}) {
        const double v = conditional_map_ccdf(rho, r, kModel);
        CHECK(v >= prev - 2e-6);
        prev = v;
      }
    }
  }
  SUBCASE("matches Parseval inversion of the product transform") {
    QuadratureSettings q;
    for (auto v : {ConditionalVariant::transmitter_distance, ConditionalVariant::receiver_distance})
      for (double rho : {0.3, 0.5}) {
        auto transform = [&](double w) {
          const cd s(0.0, w);
          return laplace_shotnoise_fast(rho, s, kModel) * conditional_prefactor(rho, s, 1.0, kModel, v, q);
        };
        const double product = invert_ccdf(rho, transform, 0.5, q);
        CHECK(std::abs(conditional_map_ccdf(rho, 1.0, kModel, q, v) - product) < 1e-5);
      }
  }
}

TEST_CASE("Stieltjes measure from a curve") {
  const auto q = coarse();
  const auto m = map_pdf_on_grid(kModel, q);
  CHECK(std::abs(m.total() - 1.0) <= 1e-3);
  for (double w : m.mass) CHECK(w >= 0.0);
  CHECK(m.location.back() == 1.0);
  CHECK(m.mass.back() == doctest::Approx(map_ccdf(1.0, kModel)).epsilon(1e-6));
  AnalyticModel sparse = kModel;
  sparse.intensity = 1e-8;
  const auto s = map_pdf_on_grid(sparse, q);
  CHECK(s.mass.back() > 1.0 - 1e-5);

  CdfCurve bad{{0.0, 0.5, 1.0}, {1.0, 0.2, 0.3}, 0.3};
  CHECK_THROWS_AS(measure_from_curve(bad, 1e-6), NumericalError);
  CdfCurve ok{{0.0, 0.5, 1.0}, {1.0, 0.6, 0.2}, 0.2};
  const auto mm = measure_from_curve(ok, 1e-6);
  CHECK(mm.expect([](double x) { return x; }) == doctest::Approx(0.4 * 0.25 + 0.4 * 0.75 + 0.2));
}

TEST_CASE("mean utility in the sparse limit") {
  AnalyticModel sparse = kModel;
  sparse.intensity = 1e-8;
  auto q = coarse();
  q.spatial_r_max = 8.0;
  const auto u = mean_utility(sparse, q, 2);
  CHECK(u.log_map_term <= 0.0);
  CHECK(u.interference_term <= 0.0);
  CHECK(u.total <= 0.0);
  CHECK(u.total > -1e-5);
  CHECK(u.total == doctest::Approx(u.log_map_term + u.interference_term));
}
