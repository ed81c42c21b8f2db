#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <queue>
#include <vector>

namespace aloha::quad {

template <class T>
struct Result {
  T value{};
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1, 1] (nonnegative half).
inline constexpr std::array<double, 8> xgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double v) { return std::abs(v); }
inline double magnitude(const std::complex<double>& v) { return std::abs(v); }

template <class T>
struct Segment {
  double a, b;
  T value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class T, class F>
Segment<T> gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const T fc = f(c);
  T kron = fc * wgk[7];
  T gauss = fc * wg[3];
  for (int k = 0; k < 7; ++k) {
    const double dx = h * xgk[k];
    const T s = f(c - dx) + f(c + dx);
    kron += s * wgk[k];
    if (k % 2 == 1) gauss += s * wg[k / 2];
  }
  kron *= h;
  gauss *= h;
  return {a, b, kron, magnitude(kron - gauss)};
}

}  // namespace detail

/// Adaptive Gauss-Kronrod 7/15 on [a, b], bisecting the segment with the
/// largest error estimate until error <= max(abs_tol, rel_tol * |I|).
template <class T, class F>
Result<T> integrate(F&& f, double a, double b, double rel_tol, double abs_tol = 0.0,
                    std::size_t max_segments = 2000) {
  using Seg = detail::Segment<T>;
  Result<T> r;
  if (a == b) {
    r.converged = true;
    return r;
  }
  std::priority_queue<Seg> heap;
  Seg first = detail::gk15<T>(f, a, b);
  r.evaluations = 15;
  T total = first.value;
  double err = first.error;
  heap.push(first);
  while (true) {
    const double target = std::max(abs_tol, rel_tol * detail::magnitude(total));
    if (err <= target) {
      r.converged = true;
      break;
    }
    if (heap.size() >= max_segments) break;
    Seg s = heap.top();
    const double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) break;  // cannot split further
    heap.pop();
    Seg left = detail::gk15<T>(f, s.a, mid);
    Seg right = detail::gk15<T>(f, mid, s.b);
    r.evaluations += 30;
    total += left.value + right.value - s.value;
    err += left.error + right.error - s.error;
    heap.push(left);
    heap.push(right);
  }
  // re-sum to shed the running-update drift
  T sum{};
  double esum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  r.value = sum;
  r.error = esum;
  return r;
}

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double pi = 3.14159265358979323846;
  for (int i = 0; i < n; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.nodes[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

}  // namespace aloha::quad
