#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aloha/net_model.hpp"
#include "aloha/rng.hpp"

namespace testutil {

/// Hand-built realization: transmitter coordinates and receiver angles.
inline aloha::NetworkRealization make_net(const std::vector<aloha::Point>& tx,
                                          const std::vector<double>& angles, double r0 = 1.0) {
  aloha::NetworkRealization r;
  r.link_distance = r0;
  r.region_side = 1.0;
  for (std::size_t i = 0; i < tx.size(); ++i) r.bipoles.push_back({tx[i], angles[i], r0});
  return r;
}

/// Matrix from a callable b(j, i).
template <class F>
aloha::InterferenceMatrix make_matrix(std::size_t n, F&& f) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) v[j * n + i] = f(j, i);
  return aloha::InterferenceMatrix(n, std::move(v));
}

/// Random uniform instance at intensity 0.25 with T = 10, alpha = 4.
inline aloha::InterferenceMatrix random_b(std::size_t n, std::uint64_t seed) {
  const double side = std::sqrt(static_cast<double>(n) / 0.25);
  auto net = aloha::generate_realization(0.25, side, 1.0, aloha::CountMode::fixed, seed);
  return aloha::interference_coefficients(net, aloha::ChannelParams{});
}

}  // namespace testutil
