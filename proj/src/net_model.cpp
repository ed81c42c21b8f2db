#include "aloha/net_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "aloha/error.hpp"
#include "aloha/rng.hpp"

namespace aloha {

void ChannelParams::validate() const {
  if (!(alpha > 2.0)) throw ParameterError("alpha must exceed 2");
  if (!(sinr_threshold > 0.0)) throw ParameterError("sinr_threshold must be positive");
  if (!(fading_rate > 0.0)) throw ParameterError("fading_rate must be positive");
  if (!(noise >= 0.0)) throw ParameterError("noise must be nonnegative");
}

double distance(const Point& a, const Point& b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

Point Bipole::rx() const noexcept {
  return {tx.x + link_distance * std::cos(rx_angle), tx.y + link_distance * std::sin(rx_angle)};
}

NetworkRealization generate_realization(double intensity, double region_side, double link_distance,
                                        CountMode mode, std::uint64_t seed) {
  if (!(intensity >= 0.0)) throw ParameterError("intensity must be nonnegative");
  if (!(region_side > 0.0)) throw ParameterError("region side L must be positive");
  if (!(link_distance > 0.0)) throw ParameterError("link distance r0 must be positive");

  Rng rng(seed);
  const double mean = intensity * region_side * region_side;
  const std::size_t count = mode == CountMode::fixed ? static_cast<std::size_t>(std::llround(mean))
                                                     : static_cast<std::size_t>(rng.poisson(mean));

  NetworkRealization out;
  out.region_side = region_side;
  out.link_distance = link_distance;
  out.seed = seed;
  out.bipoles.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Bipole b;
    b.tx.x = rng.uniform(0.0, region_side);
    b.tx.y = rng.uniform(0.0, region_side);
    b.rx_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    b.link_distance = link_distance;
    out.bipoles.push_back(b);
  }
  return out;
}

InterferenceMatrix::InterferenceMatrix(std::size_t n, std::vector<double> values)
    : n_(n), b_(std::move(values)) {
  if (b_.size() != n_ * n_) throw ParameterError("interference matrix must hold n*n values");
  for (std::size_t j = 0; j < n_; ++j)
    for (std::size_t i = 0; i < n_; ++i)
      if (j != i && !(b_[j * n_ + i] > 0.0))
        throw ParameterError("interference coefficients must be strictly positive");
}

InterferenceMatrix InterferenceMatrix::restricted(std::span<const std::size_t> nodes) const {
  const std::size_t m = nodes.size();
  std::vector<double> v(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t c = 0; c < m; ++c)
      if (a != c) v[a * m + c] = (*this)(nodes[a], nodes[c]);
  return InterferenceMatrix(m, std::move(v));
}

InterferenceMatrix interference_coefficients(const NetworkRealization& realization,
                                             const ChannelParams& params) {
  params.validate();
  const std::size_t n = realization.size();
  std::vector<Point> rx(n);
  for (std::size_t i = 0; i < n; ++i) rx[i] = realization.bipoles[i].rx();

  const double half_alpha = params.alpha / 2.0;
  const bool square = params.alpha == 4.0;
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double rii = realization.bipoles[i].link_distance;
    const double scale = 1.0 / (params.sinr_threshold * std::pow(rii * rii, half_alpha));
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Point& t = realization.bipoles[j].tx;
      const double dx = t.x - rx[i].x;
      const double dy = t.y - rx[i].y;
      const double d2 = dx * dx + dy * dy;
      if (!(d2 > 0.0))
        throw GeometryError("transmitter " + std::to_string(j) + " coincides with receiver " +
                            std::to_string(i));
      v[j * n + i] = (square ? d2 * d2 : std::pow(d2, half_alpha)) * scale;
    }
  }
  return InterferenceMatrix(n, std::move(v));
}

bool NeighborStructure::has_ties() const noexcept {
  for (bool t : tie)
    if (t) return true;
  return false;
}

namespace {

template <class Key>
NeighborStructure build_structure(std::size_t n, Key key) {
  if (n < 2) throw GeometryError("closest-interferer structure needs at least 2 nodes");
  NeighborStructure s;
  s.closest.assign(n, 0);
  s.closest_of.assign(n, {});
  s.tie.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    double best_key = 0.0;
    bool tie = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double k = key(j, i);
      if (best == n || k < best_key) {
        best = j;
        best_key = k;
        tie = false;
      } else if (k == best_key) {
        tie = true;
      }
    }
    s.closest[i] = best;
    s.tie[i] = tie;
    s.closest_of[best].push_back(i);
  }
  return s;
}

}  // namespace

NeighborStructure nearest_interferer_structure(const NetworkRealization& realization) {
  const std::size_t n = realization.size();
  std::vector<Point> rx(n);
  for (std::size_t i = 0; i < n; ++i) rx[i] = realization.bipoles[i].rx();
  return build_structure(n, [&](std::size_t j, std::size_t i) {
    const double dx = realization.bipoles[j].tx.x - rx[i].x;
    const double dy = realization.bipoles[j].tx.y - rx[i].y;
    return dx * dx + dy * dy;
  });
}

NeighborStructure nearest_interferer_structure(const InterferenceMatrix& b) {
  return build_structure(b.size(), [&](std::size_t j, std::size_t i) { return b(j, i); });
}

std::vector<std::size_t> window_nodes(const NetworkRealization& realization, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("window fraction must lie in (0, 1]");
  const double margin = 0.5 * (1.0 - fraction) * realization.region_side;
  const double lo = margin;
  const double hi = realization.region_side - margin;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < realization.size(); ++i) {
    const Point& p = realization.bipoles[i].tx;
    if (p.x >= lo && p.x <= hi && p.y >= lo && p.y <= hi) out.push_back(i);
  }
  return out;
}

}  // namespace aloha
