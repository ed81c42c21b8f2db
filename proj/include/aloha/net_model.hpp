#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace aloha {

/// Path loss, SINR threshold, Rayleigh fading rate and thermal noise.
struct ChannelParams {
  double alpha = 4.0;           ///< path-loss exponent, > 2
  double sinr_threshold = 10.0; ///< T, linear scale
  double fading_rate = 1.0;     ///< mu, fading powers are Exp(mu)
  double noise = 0.0;           ///< w, thermal noise variance

  /// Throws ParameterError naming the offending field.
  void validate() const;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Point& a, const Point& b) noexcept;

/// Transmitter with its dedicated receiver at `link_distance` in direction `rx_angle`.
struct Bipole {
  Point tx;
  double rx_angle = 0.0;
  double link_distance = 1.0;

  Point rx() const noexcept;
};

enum class CountMode { fixed, poisson };

/// Sampled topology. Bipole order is the node index used everywhere downstream.
struct NetworkRealization {
  std::vector<Bipole> bipoles;
  double region_side = 0.0;
  double link_distance = 1.0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return bipoles.size(); }
};

/// Bipoles placed i.i.d. uniformly on [0, side]^2 with uniform receiver angles.
/// In fixed mode the count is round(intensity * side^2); in poisson mode it is
/// Poisson with that mean.
NetworkRealization generate_realization(double intensity, double region_side, double link_distance,
                                        CountMode mode, std::uint64_t seed);

/// Normalized interference coefficients b_ji = (1/T) (r_ji / r_ii)^alpha,
/// where r_ji is the distance from transmitter j to receiver i.
class InterferenceMatrix {
 public:
  InterferenceMatrix() = default;

  /// `values` is row-major over (j, i); diagonal entries are ignored.
  InterferenceMatrix(std::size_t n, std::vector<double> values);

  std::size_t size() const noexcept { return n_; }

  /// Effect of transmitter j on receiver i.
  double operator()(std::size_t j, std::size_t i) const noexcept { return b_[j * n_ + i]; }

  /// b_{j,*}: how strongly transmitter j reaches every receiver.
  std::span<const double> row(std::size_t j) const noexcept { return {b_.data() + j * n_, n_}; }

  /// Sub-instance on the given nodes, in the given order.
  InterferenceMatrix restricted(std::span<const std::size_t> nodes) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> b_;
};

InterferenceMatrix interference_coefficients(const NetworkRealization& realization,
                                             const ChannelParams& params);

/// Closest interferer map c(i) and its inverse sets C(i) = {j : c(j) = i}.
struct NeighborStructure {
  std::vector<std::size_t> closest;
  std::vector<std::vector<std::size_t>> closest_of;
  /// tie[i] is set when c(i) was chosen among equidistant candidates.
  std::vector<bool> tie;

  std::size_t size() const noexcept { return closest.size(); }
  bool has_ties() const noexcept;
};

/// c(i) = argmin_{j != i} r_ji; ties go to the smallest index.
NeighborStructure nearest_interferer_structure(const NetworkRealization& realization);

/// Same structure from coefficients. For a fixed receiver i, b_ji is increasing
/// in r_ji, so this agrees with the geometric version.
NeighborStructure nearest_interferer_structure(const InterferenceMatrix& b);

/// Indices of transmitters inside the central square of side fraction * side.
std::vector<std::size_t> window_nodes(const NetworkRealization& realization, double fraction);

}  // namespace aloha
