#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace aloha {

/// Poisson bipole model: intensity lambda, threshold T, link distance r0, exponent alpha.
struct AnalyticModel {
  double intensity = 0.25;
  double sinr_threshold = 10.0;
  double link_distance = 1.0;
  double alpha = 4.0;

  /// rbar0 = T r0^alpha.
  double rbar0() const;
  void validate() const;
};

/// 201 uniform points on [0, 1] plus 8 geometric points in (0, 0.005) and 8 in (0.995, 1).
std::vector<double> default_rho_grid();

/// Radii at which conditional curves are cached for mean_utility.
std::vector<double> default_radial_grid(double r_max);

struct QuadratureSettings {
  double radial_rel_tol = 1e-10;
  /// Largest frequency of the direct inversion pass (at most 1e4 is used);
  /// thresholds still open there get an oscillatory tail integration.
  double contour_w_max = 1e6;
  /// Absolute accuracy target on each probability.
  double contour_rel_tol = 1e-6;
  std::vector<double> rho_grid = default_rho_grid();
  double spatial_r_max = 20.0;
  /// Empty: default_radial_grid(spatial_r_max).
  std::vector<double> radial_grid;

  void validate() const;
};

/// ccdf[k] = P(p > rho[k]) for rho[k] < 1. At rho = 1 the entry holds P(p = 1).
struct CdfCurve {
  std::vector<double> rho;
  std::vector<double> ccdf;
  double atom_at_one = 0.0;
};

/// K(kappa) = int_0^inf (1 - exp(-kappa / (1 + x^(1/delta)))) dx
///          = delta pi / sin(pi delta) * kappa * 1F1(1 - delta; 2; -kappa).
std::complex<double> shot_noise_kernel(std::complex<double> kappa, double delta);

/// Laplace transform of J(rho, 0) by adaptive quadrature of the radial integral,
/// for Re s >= 0. At rho = 1 the integral is taken along a rotated ray.
std::complex<double> laplace_shotnoise(double rho, std::complex<double> s, const AnalyticModel& model,
                                       const QuadratureSettings& quad = {});

/// alpha = 4 route: exp(-pi lambda sqrt((1 - rho) T) r0^2 * int_0^{pi/2} (1 - e^{-k sin^2 u}) / sin^2 u du),
/// k = s rho / (1 - rho). rho = 1 falls back to laplace_shotnoise.
std::complex<double> laplace_shotnoise_alpha4(double rho, std::complex<double> s,
                                              const AnalyticModel& model,
                                              const QuadratureSettings& quad = {});

/// Same transform through shot_noise_kernel; used by the inversion routines.
std::complex<double> laplace_shotnoise_fast(double rho, std::complex<double> s,
                                            const AnalyticModel& model);

/// How the extra node enters the conditional law.
enum class ConditionalVariant {
  /// Tagged transmitter at distance r; its receiver direction is averaged out.
  transmitter_distance,
  /// The extra receiver sits at distance r from the node's transmitter.
  receiver_distance,
};

/// Multiplicative factor that the extra node contributes to the transform.
std::complex<double> conditional_prefactor(double rho, std::complex<double> s, double distance,
                                           const AnalyticModel& model, ConditionalVariant variant,
                                           const QuadratureSettings& quad = {});

/// P(J < 1) for J > 0 given its transform at s = i w, when |L(iw)| decays
/// like exp(-C w^decay_exponent). rho only sets the panel width.
double invert_ccdf(double rho, const std::function<std::complex<double>(double)>& transform_at_iw,
                   double decay_exponent, const QuadratureSettings& quad);

/// P(J < t) for every threshold t (0 when t <= 0), one pass over the contour.
std::vector<double> invert_cdf(double rho,
                               const std::function<std::complex<double>(double)>& transform_at_iw,
                               std::span<const double> thresholds, double decay_exponent,
                               const QuadratureSettings& quad);

/// P(J(rho) < t) for the typical receiver's shot noise.
std::vector<double> shot_noise_cdf(double rho, std::span<const double> thresholds,
                                   const AnalyticModel& model, const QuadratureSettings& quad = {});

/// P(p > rho) for the typical node (P(p = 1) at rho = 1).
double map_ccdf(double rho, const AnalyticModel& model, const QuadratureSettings& quad = {});

CdfCurve map_ccdf_curve(const AnalyticModel& model, const QuadratureSettings& quad = {},
                        unsigned threads = 1);

double conditional_map_ccdf(double rho, double distance, const AnalyticModel& model,
                            const QuadratureSettings& quad = {},
                            ConditionalVariant variant = ConditionalVariant::transmitter_distance);

CdfCurve conditional_map_ccdf_curve(double distance, const AnalyticModel& model,
                                    const QuadratureSettings& quad = {},
                                    ConditionalVariant variant = ConditionalVariant::transmitter_distance,
                                    unsigned threads = 1);

/// Point masses: mass[k] sits at location[k]; the last entry is the atom at 1.
struct StieltjesMeasure {
  std::vector<double> location;
  std::vector<double> mass;

  double total() const;
  double expect(const std::function<double(double)>& g) const;
};

/// Measure from a ccdf curve: grid decrements placed at interval midpoints,
/// plus the atom. Decrements below -tol throw NumericalError; smaller ones are
/// set to zero.
StieltjesMeasure measure_from_curve(const CdfCurve& curve, double tol);

/// f, or f_r when `conditional_distance` is set (receiver-distance conditioning).
StieltjesMeasure map_pdf_on_grid(const AnalyticModel& model, const QuadratureSettings& quad = {},
                                 std::optional<double> conditional_distance = std::nullopt,
                                 unsigned threads = 1);

struct MeanUtility {
  double log_map_term = 0.0;           ///< E log p0
  double interference_term = 0.0;      ///< E log q0
  double tail = 0.0;                   ///< part of interference_term beyond spatial_r_max
  double total = 0.0;
  std::size_t cached_curves = 0;
};

MeanUtility mean_utility(const AnalyticModel& model, const QuadratureSettings& quad = {},
                         unsigned threads = 1);

}  // namespace aloha
