#include "aloha/stochgeo.hpp"

#include <algorithm>
#include <array>
#include <queue>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "aloha/error.hpp"
#include "aloha/parallel.hpp"
#include "aloha/quadrature.hpp"

namespace aloha {

using cplx = std::complex<double>;

namespace {

constexpr double pi = std::numbers::pi;

double delta_of(const AnalyticModel& m) { return 2.0 / m.alpha; }

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ParameterError("rho must lie in [0, 1]");
}

// 1F1(a; 2; z) by its power series in extended precision.
cplx kummer_series(double a, cplx z) {
  using lc = std::complex<long double>;
  const lc zz(z.real(), z.imag());
  lc term = 1.0L, sum = 1.0L;
  const long double az = std::abs(zz);
  for (int n = 0; n < 2000; ++n) {
    term *= (static_cast<long double>(a) + n) * zz /
            ((2.0L + n) * (static_cast<long double>(n) + 1.0L));
    sum += term;
    if (n > az && std::abs(term) < 1e-21L * std::abs(sum)) break;
  }
  return {static_cast<double>(sum.real()), static_cast<double>(sum.imag())};
}

// Large |z| expansion of 1F1(a; 2; z) (both exponential branches).
cplx kummer_asymptotic(double a, cplx z) {
  const double b = 2.0;
  cplx s1 = 1.0, s2 = 1.0, t1 = 1.0, t2 = 1.0;
  for (int s = 0; s < 40; ++s) {
    const cplx n1 = t1 * ((1.0 - a + s) * (b - a + s) / (s + 1.0)) / z;
    const cplx n2 = t2 * ((a + s) * (a - b + 1.0 + s) / (s + 1.0)) / (-z);
    if (std::abs(n2) > std::abs(t2) && s > 2) break;  // past the smallest term
    t1 = n1;
    t2 = n2;
    s1 += t1;
    s2 += t2;
    if (std::abs(t1) < 1e-17 * std::abs(s1) && std::abs(t2) < 1e-17 * std::abs(s2)) break;
  }
  const double ph = std::arg(z);
  const cplx rot = std::exp(cplx(0.0, (ph > -pi / 2.0 ? 1.0 : -1.0) * pi * a));
  // Gamma(b) = 1
  return std::exp(z) * std::pow(z, a - b) / std::tgamma(a) * s1 +
         rot * std::pow(z, -a) / std::tgamma(b - a) * s2;
}

// 1 - exp(-x) without cancellation for small |x|.
cplx one_minus_exp_neg(cplx x) {
  if (std::abs(x) < 1e-3) return x * (1.0 - x * (0.5 - x * (1.0 / 6.0 - x / 24.0)));
  return 1.0 - std::exp(-x);
}

double exponent_scale(const AnalyticModel& m, double rho) {
  return pi * m.intensity * std::pow((1.0 - rho) * m.rbar0(), delta_of(m));
}

}  // namespace

double AnalyticModel::rbar0() const { return sinr_threshold * std::pow(link_distance, alpha); }

void AnalyticModel::validate() const {
  if (!(intensity >= 0.0)) throw ParameterError("intensity must be nonnegative");
  if (!(sinr_threshold > 0.0)) throw ParameterError("sinr_threshold must be positive");
  if (!(link_distance > 0.0)) throw ParameterError("link_distance must be positive");
  if (!(alpha > 2.0)) throw ParameterError("alpha must exceed 2");
}

std::vector<double> default_rho_grid() {
  std::vector<double> g;
  for (int k = 0; k <= 200; ++k) g.push_back(k * 0.005);
  for (int j = 0; j < 8; ++j) {
    const double f = std::pow(5.0, j / 8.0);
    g.push_back(1e-3 * f);
    g.push_back(1.0 - 1e-4 * std::pow(50.0, j / 8.0));
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  g.back() = 1.0;
  return g;
}

std::vector<double> default_radial_grid(double r_max) {
  std::vector<double> g;
  for (int k = 0; k * 0.1 < 5.0 && k * 0.1 < r_max; ++k) g.push_back(k * 0.1);
  for (double r = 5.0; r < r_max; r += 0.5) g.push_back(r);
  g.push_back(r_max);
  return g;
}

void QuadratureSettings::validate() const {
  if (!(radial_rel_tol > 0.0)) throw ParameterError("radial_rel_tol must be positive");
  if (!(contour_w_max > 0.0)) throw ParameterError("contour_w_max must be positive");
  if (!(contour_rel_tol > 0.0)) throw ParameterError("contour_rel_tol must be positive");
  if (!(spatial_r_max > 0.0)) throw ParameterError("spatial_r_max must be positive");
  if (rho_grid.empty()) throw ParameterError("rho_grid must not be empty");
  for (std::size_t k = 0; k < rho_grid.size(); ++k) {
    if (!(rho_grid[k] >= 0.0 && rho_grid[k] <= 1.0)) throw ParameterError("rho_grid outside [0, 1]");
    if (k > 0 && !(rho_grid[k] > rho_grid[k - 1]))
      throw ParameterError("rho_grid must be strictly increasing");
  }
  for (std::size_t k = 1; k < radial_grid.size(); ++k)
    if (!(radial_grid[k] > radial_grid[k - 1]))
      throw ParameterError("radial_grid must be strictly increasing");
}

cplx shot_noise_kernel(cplx kappa, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (kappa == 0.0) return 0.0;
  const double a = 1.0 - delta;
  const cplx m = std::abs(kappa) <= 30.0 ? kummer_series(a, -kappa) : kummer_asymptotic(a, -kappa);
  return delta * pi / std::sin(pi * delta) * kappa * m;
}

cplx laplace_shotnoise_fast(double rho, cplx s, const AnalyticModel& model) {
  check_rho(rho);
  model.validate();
  if (rho == 0.0 || s == 0.0 || model.intensity == 0.0) return 1.0;
  const double d = delta_of(model);
  if (rho == 1.0)
    return std::exp(-pi * model.intensity * std::tgamma(1.0 - d) * std::pow(s * model.rbar0(), d));
  const cplx kappa = s * (rho / (1.0 - rho));
  return std::exp(-exponent_scale(model, rho) * shot_noise_kernel(kappa, d));
}

cplx laplace_shotnoise(double rho, cplx s, const AnalyticModel& model, const QuadratureSettings& quad) {
  check_rho(rho);
  model.validate();
  if (rho == 0.0 || s == 0.0 || model.intensity == 0.0) return 1.0;
  const double rb = model.rbar0();
  const double a = (1.0 - rho) * rb;
  const double alpha = model.alpha;
  const cplx num = s * rho * rb;
  if (rho == 1.0) {
    // y = r^-alpha gives (2 pi / alpha) int (1 - e^{-num y}) y^{-1-delta} dy; rotating
    // the ray to y = e^{-i arg num} u (valid for Re s >= 0) removes the oscillation
    const double d = 2.0 / alpha;
    const double mag = std::abs(num);
    auto g = [&](double t) -> double {
      const double u = 1.0 - t;
      const double v = t / u;  // v = |num| y
      if (v == 0.0) return 0.0;
      return -std::expm1(-v) * std::pow(v, -1.0 - d) / (u * u);
    };
    const auto res = quad::integrate<double>(g, 0.0, 1.0, quad.radial_rel_tol, 0.0, 20000);
    if (!res.converged)
      throw NumericalError("radial quadrature of the shot-noise transform did not converge", res.error);
    const cplx phase = std::exp(cplx(0.0, d * std::arg(num)));
    return std::exp(-model.intensity * (2.0 * pi / alpha) * std::pow(mag, d) * phase * res.value);
  }
  // r = c t / (1 - t) maps [0, 1) onto [0, inf)
  const double c = std::pow(std::abs(num) + a, 1.0 / alpha);
  auto f = [&](double t) -> cplx {
    const double u = 1.0 - t;
    const double r = c * t / u;
    const double jac = c / (u * u);
    return one_minus_exp_neg(num / (std::pow(r, alpha) + a)) * (2.0 * pi * r * jac);
  };
  const auto res = quad::integrate<cplx>(f, 0.0, 1.0, quad.radial_rel_tol, 0.0, 20000);
  if (!res.converged)
    throw NumericalError("radial quadrature of the shot-noise transform did not converge", res.error);
  return std::exp(-model.intensity * res.value);
}

cplx laplace_shotnoise_alpha4(double rho, cplx s, const AnalyticModel& model,
                              const QuadratureSettings& quad) {
  check_rho(rho);
  model.validate();
  if (model.alpha != 4.0) throw ParameterError("laplace_shotnoise_alpha4 requires alpha = 4");
  if (rho == 1.0) return laplace_shotnoise(rho, s, model, quad);
  if (rho == 0.0 || s == 0.0 || model.intensity == 0.0) return 1.0;
  const cplx kappa = s * (rho / (1.0 - rho));
  auto f = [&](double u) -> cplx {
    const double v = std::sin(u);
    const double v2 = v * v;
    const cplx x = kappa * v2;
    if (std::abs(x) < 1e-3) return kappa * (1.0 - x * (0.5 - x * (1.0 / 6.0 - x / 24.0)));
    return (1.0 - std::exp(-x)) / v2;
  };
  const auto res = quad::integrate<cplx>(f, 0.0, pi / 2.0, quad.radial_rel_tol, 0.0, 20000);
  if (!res.converged)
    throw NumericalError("alpha = 4 quadrature of the shot-noise transform did not converge", res.error);
  const double scale = pi * model.intensity * std::sqrt((1.0 - rho) * model.sinr_threshold) *
                       model.link_distance * model.link_distance;
  return std::exp(-scale * res.value);
}

namespace {

// Angular average for the tagged-transmitter variant, to absolute accuracy abs_tol.
cplx angular_prefactor(cplx num, double a, double distance, const AnalyticModel& model, double rel_tol,
                       double abs_tol) {
  const double r0 = model.link_distance;
  const double alpha = model.alpha;
  auto f = [&](double phi) -> cplx {
    const double d2 = distance * distance + r0 * r0 - 2.0 * distance * r0 * std::cos(phi);
    const double den = std::pow(std::max(d2, 0.0), alpha / 2.0) + a;
    if (den == 0.0) return 0.0;
    return std::exp(-num / den);
  };
  const auto res = quad::integrate<cplx>(f, 0.0, pi, rel_tol, pi * abs_tol, 20000);
  if (!res.converged)
    throw NumericalError("angular quadrature of the conditional prefactor did not converge", res.error);
  return res.value / pi;
}

}  // namespace

cplx conditional_prefactor(double rho, cplx s, double distance, const AnalyticModel& model,
                           ConditionalVariant variant, const QuadratureSettings& quad) {
  check_rho(rho);
  if (!(distance >= 0.0)) throw ParameterError("distance must be nonnegative");
  if (rho == 0.0 || s == 0.0) return 1.0;
  const double rb = model.rbar0();
  const double a = (1.0 - rho) * rb;
  const cplx num = s * rho * rb;
  if (variant == ConditionalVariant::receiver_distance) {
    const double den = std::pow(distance, model.alpha) + a;
    if (den == 0.0) return 0.0;  // rho = 1 with the receiver on top of the transmitter
    return std::exp(-num / den);
  }
  return angular_prefactor(num, a, distance, model, std::max(quad.radial_rel_tol, 1e-12), 1e-14);
}

namespace {

// GK15 on one segment for every threshold at once; the transform is
// evaluated once per node. The error is the worst over thresholds.
struct MultiSegment {
  double lo = 0.0, hi = 0.0;
  std::vector<double> a, b;
  double error = 0.0;
  bool operator<(const MultiSegment& o) const { return error < o.error; }
};

MultiSegment multi_gk15(const std::function<cplx(double)>& transform, double lo, double hi,
                        const std::vector<double>& ts) {
  const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
  std::array<double, 15> w{};
  std::array<cplx, 15> l{};
  for (int k = 0; k < 7; ++k) {
    w[2 * k] = c - h * quad::detail::xgk[k];
    w[2 * k + 1] = c + h * quad::detail::xgk[k];
  }
  w[14] = c;
  for (int k = 0; k < 15; ++k) l[k] = transform(w[k]);

  const std::size_t nt = ts.size();
  MultiSegment seg{lo, hi, std::vector<double>(nt), std::vector<double>(nt), 0.0};
  for (std::size_t m = 0; m < nt; ++m) {
    double kra = 0.0, gra = 0.0, krb = 0.0, grb = 0.0;
    for (int k = 0; k < 15; ++k) {
      const double x = w[k] * ts[m];
      const double sn = std::sin(x), cs = std::cos(x);
      // Im(L e^{ixt}) and Im((L - 1) e^{ixt})
      const double ia = l[k].real() * sn + l[k].imag() * cs;
      const double fa = ia / w[k];
      const double fb = (ia - sn) / w[k];
      const int node = k / 2;
      const double wk = k == 14 ? quad::detail::wgk[7] : quad::detail::wgk[node];
      double wg = 0.0;
      if (k == 14) {
        wg = quad::detail::wg[3];
      } else if (node % 2 == 1) {
        wg = quad::detail::wg[node / 2];
      }
      kra += wk * fa;
      krb += wk * fb;
      gra += wg * fa;
      grb += wg * fb;
    }
    seg.a[m] = kra * h;
    seg.b[m] = krb * h;
    seg.error = std::max(seg.error, (std::abs(kra - gra) + std::abs(krb - grb)) * h);
  }
  return seg;
}

// Adaptive bisection of [lo, hi] until the summed error is below tol or the
// segment budget is spent; adds the integrals and returns the error.
double panel_integrate(const std::function<cplx(double)>& transform, double lo, double hi,
                       const std::vector<double>& ts, double tol, std::vector<double>& acc_a,
                       std::vector<double>& acc_b) {
  constexpr std::size_t max_segments = 500;
  std::priority_queue<MultiSegment> heap;
  heap.push(multi_gk15(transform, lo, hi, ts));
  double err = heap.top().error;
  while (err > tol && heap.size() < max_segments) {
    MultiSegment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    MultiSegment left = multi_gk15(transform, worst.lo, mid, ts);
    MultiSegment right = multi_gk15(transform, mid, worst.hi, ts);
    err += left.error + right.error - worst.error;
    heap.push(std::move(left));
    heap.push(std::move(right));
  }
  err = 0.0;
  while (!heap.empty()) {
    const MultiSegment& seg = heap.top();
    for (std::size_t m = 0; m < ts.size(); ++m) {
      acc_a[m] += seg.a[m];
      acc_b[m] += seg.b[m];
    }
    err += seg.error;
    heap.pop();
  }
  return err;
}

// Frequency beyond which unfinished thresholds switch to the oscillatory tail.
constexpr double kTailSwitch = 1e4;

struct TailIntegrand {
  const std::function<cplx(double)>* transform;
  bool sine;
};

double tail_integrand(double w, void* params) {
  const auto* p = static_cast<const TailIntegrand*>(params);
  const cplx l = (*p->transform)(w);
  return (p->sine ? l.real() - 1.0 : l.imag()) / w;
}

// int_W^inf Im((L - 1) e^{iwt}) / w dw = int Re(L - 1) sin(wt) / w + int Im(L) cos(wt) / w,
// each by QAWF (cycle-wise integration with epsilon extrapolation).
double oscillatory_tail(const std::function<cplx(double)>& transform, double from, double t,
                        double abs_tol, double& err) {
  static std::once_flag quiet;
  std::call_once(quiet, [] { gsl_set_error_handler_off(); });
  constexpr std::size_t limit = 1000;
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(limit);
  gsl_integration_workspace* cycles = gsl_integration_workspace_alloc(limit);
  gsl_integration_qawo_table* table = gsl_integration_qawo_table_alloc(t, 1.0, GSL_INTEG_SINE, 50);
  double total = 0.0;
  int status = GSL_SUCCESS;
  for (bool sine : {true, false}) {
    TailIntegrand par{&transform, sine};
    gsl_function f{&tail_integrand, &par};
    gsl_integration_qawo_table_set(table, t, 1.0, sine ? GSL_INTEG_SINE : GSL_INTEG_COSINE);
    double value = 0.0, e = 0.0;
    const int st = gsl_integration_qawf(&f, from, 0.5 * abs_tol, limit, ws, cycles, table, &value, &e);
    if (st != GSL_SUCCESS) status = st;
    total += value;
    err += e;
  }
  gsl_integration_qawo_table_free(table);
  gsl_integration_workspace_free(cycles);
  gsl_integration_workspace_free(ws);
  if (status != GSL_SUCCESS)
    throw NumericalError(std::string("oscillatory tail of the inversion integral failed: ") +
                             gsl_strerror(status),
                         err);
  return total;
}

}  // namespace

std::vector<double> invert_cdf(double rho, const std::function<cplx(double)>& transform_at_iw,
                               std::span<const double> thresholds, double decay_exponent,
                               const QuadratureSettings& quad) {
  const double tol = quad.contour_rel_tol;
  std::vector<double> out(thresholds.size(), 0.0);
  std::vector<double> ts;
  std::vector<std::size_t> where;
  for (std::size_t m = 0; m < thresholds.size(); ++m) {
    if (thresholds[m] > 0.0) {
      ts.push_back(thresholds[m]);
      where.push_back(m);
    }
  }
  if (ts.empty()) return out;
  const double t_max = *std::max_element(ts.begin(), ts.end());

  const double ratio = rho < 1.0 ? rho / (1.0 - rho) : 1.0;
  const double h = pi / (2.0 * std::max({1.0, std::sqrt(ratio), t_max}));
  const double panel_tol = 1e-3 * tol * h;

  const std::size_t nt = ts.size();
  std::vector<double> acc_a(nt, 0.0), acc_b(nt, 0.0);
  std::vector<int> form(nt, 0);  // 0 undecided, 1 A-form, 2 B-form
  double quad_err = 0.0;
  const double target = 0.5 * tol;
  for (std::size_t k = 0;; ++k) {
    const double lo = k * h, hi = (k + 1) * h;
    quad_err += panel_integrate(transform_at_iw, lo, hi, ts, panel_tol, acc_a, acc_b);

    const cplx l = transform_at_iw(hi);
    const double mod = std::abs(l);
    const double d = std::log(1.0 / std::max(mod, 1e-300));
    const double tail_a =
        mod < 1.0 && d > 0.0 ? std::exp(-d) / (pi * decay_exponent * d) : std::numeric_limits<double>::infinity();
    const double gap = std::abs(l - 1.0);
    bool all = true;
    for (std::size_t m = 0; m < nt; ++m) {
      if (form[m] != 0) continue;
      const double tail_b = 2.0 * gap / (pi * hi * ts[m]);
      if (tail_a <= target || tail_b <= target) {
        form[m] = tail_a <= tail_b ? 1 : 2;
        const double v = form[m] == 1 ? 0.5 + acc_a[m] / pi : 1.0 + acc_b[m] / pi;
        if (v < -tol || v > 1.0 + tol)
          throw NumericalError("inverted probability outside [0, 1]",
                               std::max(-v, v - 1.0) + quad_err / pi);
        out[where[m]] = std::clamp(v, 0.0, 1.0);
      } else {
        all = false;
      }
    }
    if (all) break;
    if (hi >= std::min(quad.contour_w_max, kTailSwitch)) {
      // each probability carries its own tail error; the worst one counts
      double worst = 0.0;
      for (std::size_t m = 0; m < nt; ++m) {
        if (form[m] != 0) continue;
        double tail_err = 0.0;
        const double tail = oscillatory_tail(transform_at_iw, hi, ts[m], 0.1 * pi * tol, tail_err);
        worst = std::max(worst, tail_err);
        const double v = 1.0 + (acc_b[m] + tail) / pi;
        if (v < -tol || v > 1.0 + tol)
          throw NumericalError("inverted probability outside [0, 1]",
                               std::max(-v, v - 1.0) + quad_err / pi);
        out[where[m]] = std::clamp(v, 0.0, 1.0);
      }
      quad_err += worst;
      break;
    }
  }
  if (quad_err / pi > tol)
    throw NumericalError("inversion quadrature error above tolerance", quad_err / pi);
  return out;
}

double invert_ccdf(double rho, const std::function<cplx(double)>& transform_at_iw,
                   double decay_exponent, const QuadratureSettings& quad) {
  const double one = 1.0;
  return invert_cdf(rho, transform_at_iw, std::span<const double>(&one, 1), decay_exponent, quad)[0];
}

std::vector<double> shot_noise_cdf(double rho, std::span<const double> thresholds,
                                   const AnalyticModel& model, const QuadratureSettings& quad) {
  check_rho(rho);
  model.validate();
  if (rho == 0.0 || model.intensity == 0.0) {
    // J = 0
    std::vector<double> out;
    for (double t : thresholds) out.push_back(t > 0.0 ? 1.0 : 0.0);
    return out;
  }
  return invert_cdf(rho, [&](double w) { return laplace_shotnoise_fast(rho, cplx(0.0, w), model); },
                    thresholds, delta_of(model), quad);
}

double map_ccdf(double rho, const AnalyticModel& model, const QuadratureSettings& quad) {
  check_rho(rho);
  model.validate();
  quad.validate();
  if (rho == 0.0) return 1.0;
  const double one = 1.0;
  return shot_noise_cdf(rho, std::span<const double>(&one, 1), model, quad)[0];
}

namespace {

// Angle phi* beyond which the tagged receiver's contribution stays below 1,
// and the composite Gauss-Legendre rule on [phi*, pi].
struct AngularRule {
  std::vector<double> phi;
  std::vector<double> weight;  // already divided by pi
};

AngularRule angular_rule(double rho, double r, const AnalyticModel& model) {
  const double rb = model.rbar0();
  const double a = (1.0 - rho) * rb;
  const double r0 = model.link_distance;
  double lo = 0.0;
  const double reach = rho * rb - a;  // X(phi) >= 1 iff d^alpha <= reach
  if (reach > 0.0) {
    const double dstar = std::pow(reach, 1.0 / model.alpha);
    if (r == 0.0) {
      if (r0 <= dstar) return {};
    } else {
      const double c = (r * r + r0 * r0 - dstar * dstar) / (2.0 * r * r0);
      if (c <= -1.0) return {};
      lo = c >= 1.0 ? 0.0 : std::acos(c);
    }
  }
  const auto gl = quad::gauss_legendre(8);
  const int panels = 16;
  const double width = (pi - lo) / panels;
  AngularRule rule;
  for (int k = 0; k < panels; ++k) {
    const double c = lo + (k + 0.5) * width;
    for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
      rule.phi.push_back(c + 0.5 * width * gl.nodes[j]);
      rule.weight.push_back(0.5 * width * gl.weights[j] / pi);
    }
  }
  return rule;
}

// Threshold 1 - X for the extra node at transmitter-receiver distance d.
double residual_threshold(double rho, double d, const AnalyticModel& model) {
  const double den = std::pow(d, model.alpha) + (1.0 - rho) * model.rbar0();
  if (den == 0.0) return -1.0;
  return 1.0 - rho * model.rbar0() / den;
}

double receiver_distance(double r, double phi, const AnalyticModel& model) {
  const double r0 = model.link_distance;
  return std::sqrt(std::max(0.0, r * r + r0 * r0 - 2.0 * r * r0 * std::cos(phi)));
}

}  // namespace

double conditional_map_ccdf(double rho, double distance, const AnalyticModel& model,
                            const QuadratureSettings& quad, ConditionalVariant variant) {
  check_rho(rho);
  model.validate();
  quad.validate();
  if (!(distance >= 0.0)) throw ParameterError("distance must be nonnegative");
  if (rho == 0.0) return 1.0;
  if (variant == ConditionalVariant::receiver_distance) {
    const double t = residual_threshold(rho, distance, model);
    return shot_noise_cdf(rho, std::span<const double>(&t, 1), model, quad)[0];
  }
  // Given the receiver direction phi the extra term is deterministic, so
  // P(J + X(phi) < 1) = P(J < 1 - X(phi)); average over phi.
  const AngularRule rule = angular_rule(rho, distance, model);
  if (rule.phi.empty()) return 0.0;
  std::vector<double> ts;
  for (double phi : rule.phi) ts.push_back(residual_threshold(rho, receiver_distance(distance, phi, model), model));
  const auto g = shot_noise_cdf(rho, ts, model, quad);
  double v = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) v += rule.weight[k] * g[k];
  return std::clamp(v, 0.0, 1.0);
}

namespace {

CdfCurve build_curve(const QuadratureSettings& quad, unsigned threads,
                     const std::function<double(double)>& ccdf) {
  quad.validate();
  CdfCurve c;
  c.rho = quad.rho_grid;
  c.ccdf.assign(c.rho.size(), 0.0);
  parallel_for(c.rho.size(), threads, [&](std::size_t k) { c.ccdf[k] = ccdf(c.rho[k]); });
  c.atom_at_one = c.rho.back() == 1.0 ? c.ccdf.back() : ccdf(1.0);
  return c;
}

}  // namespace

CdfCurve map_ccdf_curve(const AnalyticModel& model, const QuadratureSettings& quad, unsigned threads) {
  model.validate();
  return build_curve(quad, threads, [&](double rho) { return map_ccdf(rho, model, quad); });
}

CdfCurve conditional_map_ccdf_curve(double distance, const AnalyticModel& model,
                                    const QuadratureSettings& quad, ConditionalVariant variant,
                                    unsigned threads) {
  model.validate();
  return build_curve(quad, threads, [&](double rho) {
    return conditional_map_ccdf(rho, distance, model, quad, variant);
  });
}

double StieltjesMeasure::total() const {
  double s = 0.0;
  for (double m : mass) s += m;
  return s;
}

double StieltjesMeasure::expect(const std::function<double(double)>& g) const {
  double s = 0.0;
  for (std::size_t k = 0; k < mass.size(); ++k)
    if (mass[k] > 0.0) s += mass[k] * g(location[k]);
  return s;
}

StieltjesMeasure measure_from_curve(const CdfCurve& curve, double tol) {
  const auto& rho = curve.rho;
  const auto& cc = curve.ccdf;
  if (rho.empty() || rho.size() != cc.size()) throw ParameterError("malformed ccdf curve");
  StieltjesMeasure m;
  // mass below the first grid point
  if (rho.front() > 0.0) {
    m.location.push_back(0.5 * rho.front());
    m.mass.push_back(1.0 - cc.front());
  }
  const std::size_t last = rho.back() == 1.0 ? rho.size() - 1 : rho.size();
  for (std::size_t k = 0; k + 1 < last; ++k) {
    double dm = cc[k] - cc[k + 1];
    if (dm < -tol)
      throw NumericalError("ccdf increases between grid points", -dm);
    m.location.push_back(0.5 * (rho[k] + rho[k + 1]));
    m.mass.push_back(std::max(dm, 0.0));
  }
  // (rho_last, 1): remaining mass of the continuous part
  const double top = last > 0 ? cc[last - 1] : 1.0;
  const double rest = top - curve.atom_at_one;
  if (rest < -tol) throw NumericalError("atom at 1 exceeds the ccdf below 1", -rest);
  if (last > 0) {
    m.location.push_back(0.5 * (rho[last - 1] + 1.0));
    m.mass.push_back(std::max(rest, 0.0));
  }
  m.location.push_back(1.0);
  m.mass.push_back(curve.atom_at_one);
  const double total = m.total();
  if (std::abs(total - 1.0) > std::max(tol, 1e-3))
    throw NumericalError("measure total mass differs from 1", std::abs(total - 1.0));
  return m;
}

StieltjesMeasure map_pdf_on_grid(const AnalyticModel& model, const QuadratureSettings& quad,
                                 std::optional<double> conditional_distance, unsigned threads) {
  const CdfCurve c = conditional_distance
                         ? conditional_map_ccdf_curve(*conditional_distance, model, quad,
                                                      ConditionalVariant::receiver_distance, threads)
                         : map_ccdf_curve(model, quad, threads);
  return measure_from_curve(c, 10.0 * quad.contour_rel_tol);
}

MeanUtility mean_utility(const AnalyticModel& model, const QuadratureSettings& quad, unsigned threads) {
  model.validate();
  quad.validate();
  MeanUtility out;
  if (model.intensity == 0.0) return out;
  const double tol = 10.0 * quad.contour_rel_tol;
  const double rb = model.rbar0();
  const double alpha = model.alpha;
  const double lambda = model.intensity;
  const double R = quad.spatial_r_max;

  const CdfCurve base = map_ccdf_curve(model, quad, threads);
  const StieltjesMeasure f = measure_from_curve(base, tol);
  out.log_map_term = f.expect([](double u) { return std::log(u); });

  std::vector<double> radii = quad.radial_grid.empty() ? default_radial_grid(R) : quad.radial_grid;
  if (radii.front() != 0.0 || radii.back() < R)
    throw ParameterError("radial_grid must start at 0 and reach spatial_r_max");

  // conditional curves, one task per (radius, rho) pair
  const std::size_t nr = radii.size(), ng = quad.rho_grid.size();
  std::vector<CdfCurve> curves(nr);
  for (auto& c : curves) {
    c.rho = quad.rho_grid;
    c.ccdf.assign(ng, 0.0);
  }
  // one inversion per rho serves every radius
  parallel_for(ng, threads, [&](std::size_t k) {
    const double rho = quad.rho_grid[k];
    if (rho == 0.0) {
      for (auto& c : curves) c.ccdf[k] = 1.0;
      return;
    }
    std::vector<double> ts(nr);
    for (std::size_t i = 0; i < nr; ++i) ts[i] = residual_threshold(rho, radii[i], model);
    const auto g = shot_noise_cdf(rho, ts, model, quad);
    for (std::size_t i = 0; i < nr; ++i) curves[i].ccdf[k] = g[i];
  });
  for (auto& c : curves) c.atom_at_one = c.rho.back() == 1.0 ? c.ccdf.back() : 0.0;
  if (quad.rho_grid.back() != 1.0)
    throw ParameterError("rho_grid must end at 1 for mean_utility");
  out.cached_curves = nr;

  std::vector<StieltjesMeasure> measures;
  measures.reserve(nr);
  for (const auto& c : curves) measures.push_back(measure_from_curve(c, tol));

  // E_r log(1 - v rb / (r^alpha + rb)) with f_r interpolated linearly between cached radii
  auto inner = [&](double r) {
    const auto it = std::upper_bound(radii.begin(), radii.end(), r);
    std::size_t hi = static_cast<std::size_t>(it - radii.begin());
    if (hi >= nr) hi = nr - 1;
    const std::size_t lo = hi == 0 ? 0 : hi - 1;
    const double t = hi == lo ? 0.0 : std::clamp((r - radii[lo]) / (radii[hi] - radii[lo]), 0.0, 1.0);
    const double scale = rb / (std::pow(r, alpha) + rb);
    auto g = [&](double v) { return std::log1p(-v * scale); };
    return (1.0 - t) * measures[lo].expect(g) + t * measures[hi].expect(g);
  };

  double integral = 0.0;
  for (std::size_t i = 0; i + 1 < nr; ++i) {
    const double a = radii[i], b = std::min(radii[i + 1], R);
    if (!(b > a)) continue;
    const auto res = quad::integrate<double>([&](double r) { return r * inner(r); }, a, b, 1e-8, 1e-12);
    if (!res.converged) throw NumericalError("radial integral of the mean utility did not converge", res.error);
    integral += res.value;
  }
  const double mean_p = f.expect([](double u) { return u; });
  out.tail = -2.0 * pi * lambda * mean_p * rb * std::pow(R, 2.0 - alpha) / (alpha - 2.0);
  out.interference_term = 2.0 * pi * lambda * integral + out.tail;
  out.total = out.log_map_term + out.interference_term;
  return out;
}

}  // namespace aloha
