#include "aloha/rate_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aloha/error.hpp"
#include "aloha/parallel.hpp"
#include "aloha/rng.hpp"

namespace aloha {

namespace {

void check_probability(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("access probability outside [0, 1]");
}

void check_dims(const MapVector& p, const InterferenceMatrix& b) {
  if (p.size() != b.size()) throw ParameterError("MAP vector and interference matrix sizes differ");
}

}  // namespace

MapVector::MapVector(std::vector<double> p) : p_(std::move(p)) {
  for (double v : p_) check_probability(v);
}

MapVector MapVector::constant(std::size_t n, double value) {
  check_probability(value);
  MapVector m;
  m.p_.assign(n, value);
  return m;
}

void MapVector::set(std::size_t i, double value) {
  check_probability(value);
  p_.at(i) = value;
}

std::vector<double> success_probability(const MapVector& p, const InterferenceMatrix& b,
                                        const ChannelParams& params, double link_distance) {
  check_dims(p, b);
  const std::size_t n = p.size();
  const double prefactor =
      params.noise == 0.0
          ? 1.0
          : std::exp(-params.fading_rate * params.noise * params.sinr_threshold *
                     std::pow(link_distance, params.alpha));
  std::vector<double> q(n, prefactor);
  for (std::size_t j = 0; j < n; ++j) {
    if (p[j] == 0.0) continue;
    const auto row = b.row(j);
    for (std::size_t i = 0; i < n; ++i)
      if (i != j) q[i] *= 1.0 - p[j] / (1.0 + row[i]);
  }
  return q;
}

std::vector<double> nearest_success_probability(const MapVector& p, const InterferenceMatrix& b,
                                                const NeighborStructure& nbr) {
  check_dims(p, b);
  if (p.size() < 2) throw GeometryError("closest-interferer success probability needs N >= 2");
  if (nbr.size() != p.size()) throw ParameterError("neighbor structure size differs from MAP size");
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::size_t c = nbr.closest[i];
    q[i] = 1.0 - p[c] / (1.0 + b(c, i));
  }
  return q;
}

RateReport make_rate_report(const MapVector& p, std::span<const double> q) {
  if (q.size() != p.size()) throw ParameterError("success probability size differs from MAP size");
  RateReport r;
  r.p = p.vector();
  r.q.assign(q.begin(), q.end());
  r.rate.resize(p.size());
  r.min_rate = p.size() == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double rt = p[i] * q[i];
    r.rate[i] = rt;
    r.aggregate += rt;
    r.min_rate = std::min(r.min_rate, rt);
    if (rt > 0.0) {
      r.log_utility += std::log(rt);
    } else {
      r.has_zero_rate = true;
    }
  }
  if (r.has_zero_rate) r.log_utility = -std::numeric_limits<double>::infinity();
  return r;
}

RateReport rate_report(const MapVector& p, const InterferenceMatrix& b, const ChannelParams& params,
                       double link_distance) {
  const auto q = success_probability(p, b, params, link_distance);
  return make_rate_report(p, q);
}

RateReport restrict_report(const RateReport& full, std::span<const std::size_t> nodes) {
  std::vector<double> p, q;
  p.reserve(nodes.size());
  q.reserve(nodes.size());
  for (std::size_t i : nodes) {
    p.push_back(full.p.at(i));
    q.push_back(full.q.at(i));
  }
  return make_rate_report(MapVector(std::move(p)), q);
}

std::vector<double> SlotStatistics::rate() const {
  std::vector<double> r(successes.size(), 0.0);
  if (n_slots == 0) return r;
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = static_cast<double>(successes[i]) / static_cast<double>(n_slots);
  return r;
}

std::vector<double> SlotStatistics::success_given_attempt() const {
  std::vector<double> r(successes.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i)
    if (attempts[i] > 0)
      r[i] = static_cast<double>(successes[i]) / static_cast<double>(attempts[i]);
  return r;
}

SlotStatistics simulate_slots(const NetworkRealization& realization, const MapVector& p,
                              const ChannelParams& params, std::uint64_t n_slots, std::uint64_t seed,
                              unsigned threads) {
  params.validate();
  if (n_slots < 1) throw ParameterError("n_slots must be at least 1");
  const std::size_t n = realization.size();
  if (p.size() != n) throw ParameterError("MAP vector size differs from realization size");

  // gain[j * n + i] = r_ji^-alpha
  std::vector<double> gain(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point rx = realization.bipoles[i].rx();
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distance(realization.bipoles[j].tx, rx);
      if (!(d > 0.0)) throw GeometryError("transmitter coincides with a receiver");
      gain[j * n + i] = std::pow(d, -params.alpha);
    }
  }

  constexpr std::uint64_t chunk = 1 << 14;
  const std::uint64_t n_chunks = (n_slots + chunk - 1) / chunk;
  std::vector<SlotStatistics> parts(n_chunks);

  parallel_for(n_chunks, threads, [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    SlotStatistics& s = parts[c];
    s.attempts.assign(n, 0);
    s.successes.assign(n, 0);
    const std::uint64_t begin = c * chunk;
    const std::uint64_t end = std::min(n_slots, begin + chunk);
    s.n_slots = end - begin;
    std::vector<std::size_t> active;
    active.reserve(n);
    for (std::uint64_t slot = begin; slot < end; ++slot) {
      active.clear();
      for (std::size_t j = 0; j < n; ++j)
        if (rng.bernoulli(p[j])) active.push_back(j);
      for (std::size_t i : active) {
        ++s.attempts[i];
        const double signal = rng.exponential(params.fading_rate) * gain[i * n + i];
        double interference = params.noise;
        for (std::size_t j : active)
          if (j != i) interference += rng.exponential(params.fading_rate) * gain[j * n + i];
        if (signal >= params.sinr_threshold * interference) ++s.successes[i];
      }
    }
  });

  SlotStatistics total;
  total.attempts.assign(n, 0);
  total.successes.assign(n, 0);
  for (const auto& s : parts) {
    total.n_slots += s.n_slots;
    for (std::size_t i = 0; i < n; ++i) {
      total.attempts[i] += s.attempts[i];
      total.successes[i] += s.successes[i];
    }
  }
  return total;
}

}  // namespace aloha
