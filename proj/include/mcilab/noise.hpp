#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "mcilab/error.hpp"
#include "mcilab/parallel.hpp"
#include "mcilab/ssi.hpp"

namespace mcilab::noise {

using Complex = std::complex<double>;

struct NoiseSpec {
  double level = 1;             // n: per-cell standard deviation of the complex noise
  std::size_t correlation = 1;  // correlation length in cells
};

// A flat-topped short-wavelength packet on a periodic 1-d grid.
struct PacketParams {
  std::size_t cells = 4096;
  double half_width = 1400;    // envelope exp(-((x - c)/w)^order)
  int order = 8;
  double wavelength = 8;       // carrier wavelength in cells
  double travel_time = 64;     // free propagation time (unit mass, cell units)
  double flat_level = 0.95;    // usable support: |psi_clean| >= flat_level * A
  double min_support_fraction = 0.5;
};

struct CountParams {
  std::vector<double> thresholds = {5};
  std::size_t max_tilings = 8;
};

struct TrialResult {
  double amplitude = 0;
  double noise = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool discarded = false;
  std::string reason;
  std::size_t support = 0;
  std::vector<double> v_min;   // per threshold; 0 when no volume reaches it
  std::vector<double> count;   // support / v_min
  std::vector<bool> saturated; // a single cell already meets the threshold
};

namespace detail {

inline std::vector<Complex> packet(double A, const PacketParams& p) {
  std::vector<Complex> psi(p.cells);
  const double c = static_cast<double>(p.cells) / 2, k0 = 2 * M_PI / p.wavelength;
  for (std::size_t x = 0; x < p.cells; ++x) {
    const double u = (static_cast<double>(x) - c) / p.half_width;
    psi[x] = A * std::exp(-std::pow(std::fabs(u), p.order)) * std::polar(1.0, k0 * static_cast<double>(x));
  }
  return psi;
}

inline std::vector<Complex> noise_field(const NoiseSpec& n, std::size_t cells, std::uint64_t seed) {
  std::vector<Complex> white(cells);
  if (n.level == 0) return white;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, n.level / std::sqrt(2.0));
  for (auto& z : white) z = Complex(g(rng), g(rng));
  const std::size_t l = std::max<std::size_t>(1, n.correlation);
  if (l == 1) return white;
  std::vector<Complex> out(cells);
  for (std::size_t x = 0; x < cells; ++x) {
    Complex s = 0;
    for (std::size_t j = 0; j < l; ++j) s += white[(x + j) % cells];
    out[x] = s / std::sqrt(static_cast<double>(l));
  }
  return out;
}

// Free Schroedinger propagation by FFT.
inline std::vector<Complex> propagate(const std::vector<Complex>& psi, double t) {
  Eigen::FFT<double> fft;
  std::vector<Complex> spec;
  fft.fwd(spec, psi);
  const std::size_t n = psi.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double f = j <= n / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
    const double k = 2 * M_PI * f / static_cast<double>(n);
    spec[j] *= std::polar(1.0, -0.5 * k * k * t);
  }
  std::vector<Complex> out;
  fft.inv(out, spec);
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double hi = *mid;
  if (v.size() % 2) return hi;
  double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Propagates one noisy packet and counts the disjoint aggregation volumes that reach each SNR threshold.
inline TrialResult run_trial(double A, const NoiseSpec& n, const PacketParams& p, const CountParams& c,
                             std::uint64_t seed, std::size_t trial = 0) {
  if (A <= 0) throw Error(Errc::invalid_argument, "packet amplitude must be positive");
  if (n.level < 0) throw Error(Errc::invalid_argument, "noise level must be nonnegative");
  if (p.cells < 16) throw Error(Errc::invalid_argument, "grid too small");
  if (c.thresholds.empty()) throw Error(Errc::invalid_argument, "no SNR thresholds");
  TrialResult r;
  r.amplitude = A;
  r.noise = n.level;
  r.trial = trial;
  r.seed = seed;
  const auto initial = detail::packet(A, p);
  std::size_t initial_support = 0;
  for (auto& z : initial) initial_support += std::abs(z) >= p.flat_level * A;
  const auto clean = detail::propagate(initial, p.travel_time);
  std::vector<std::size_t> support;
  for (std::size_t x = 0; x < p.cells; ++x)
    if (std::abs(clean[x]) >= p.flat_level * A) support.push_back(x);
  r.support = support.size();
  r.v_min.assign(c.thresholds.size(), 0);
  r.count.assign(c.thresholds.size(), 0);
  r.saturated.assign(c.thresholds.size(), false);
  if (support.size() < p.min_support_fraction * static_cast<double>(initial_support) || support.size() < 4) {
    r.discarded = true;
    r.reason = "dispersion destroyed the mapping before the final step";
    return r;
  }
  auto field = initial;
  const auto eta = detail::noise_field(n, p.cells, seed);
  for (std::size_t x = 0; x < p.cells; ++x) field[x] += eta[x];
  const auto noisy = detail::propagate(field, p.travel_time);

  // matched-filter prefix sums along the support (cells in order; runs are contiguous)
  const std::size_t S = support.size();
  std::vector<Complex> prefix(S + 1, 0);
  std::vector<std::size_t> run_start(S);
  for (std::size_t i = 0; i < S; ++i) {
    const auto x = support[i];
    prefix[i + 1] = prefix[i] + std::conj(clean[x] / std::abs(clean[x])) * noisy[x];
    run_start[i] = (i > 0 && support[i - 1] + 1 == x) ? run_start[i - 1] : i;
  }
  const double sigma = n.level * std::sqrt(static_cast<double>(std::max<std::size_t>(1, n.correlation)));
  auto median_snr2 = [&](std::size_t V) {
    std::vector<double> snr;
    const std::size_t tilings = std::min(V, c.max_tilings);
    for (std::size_t t = 0; t < tilings; ++t) {
      const std::size_t off = t * V / tilings;
      for (std::size_t b = off; b + V <= S; b += V) {
        if (run_start[b + V - 1] > b) continue;  // block would straddle a gap
        const double s = std::abs(prefix[b + V] - prefix[b]);
        snr.push_back(sigma > 0 ? s * s / (sigma * sigma * static_cast<double>(V)) : std::numeric_limits<double>::infinity());
      }
    }
    return detail::median(std::move(snr));
  };
  const double top = *std::max_element(c.thresholds.begin(), c.thresholds.end());
  std::vector<double> curve = {0};  // curve[V] = median SNR^2 at volume V
  for (std::size_t V = 1; V <= S / 2; ++V) {
    curve.push_back(median_snr2(V));
    if (curve.back() >= top * top) break;
  }
  for (std::size_t k = 0; k < c.thresholds.size(); ++k) {
    const double t2 = c.thresholds[k] * c.thresholds[k];
    for (std::size_t V = 1; V < curve.size(); ++V) {
      if (curve[V] < t2) continue;
      double v = static_cast<double>(V);
      if (V == 1) {
        r.saturated[k] = true;
      } else if (curve[V] > curve[V - 1]) {
        v = static_cast<double>(V - 1) + (t2 - curve[V - 1]) / (curve[V] - curve[V - 1]);
      }
      r.v_min[k] = v;
      r.count[k] = static_cast<double>(S) / v;
      break;
    }
  }
  return r;
}

struct Fit {
  double slope = 0;
  double intercept = 0;
  double std_error = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::size_t points = 0;
};

// Ordinary least squares with a Student-t confidence interval on the slope.
inline Fit ols_fit(const std::vector<double>& x, const std::vector<double>& y, double confidence = 0.95) {
  if (x.size() != y.size() || x.size() < 3) throw Error(Errc::invalid_argument, "fit needs at least three points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  if (sxx == 0) throw Error(Errc::invalid_argument, "fit needs at least two distinct regressor values");
  Fit f;
  f.points = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) rss += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
  f.std_error = std::sqrt(rss / (n - 2) / sxx);
  boost::math::students_t t(n - 2);
  const double q = boost::math::quantile(t, 0.5 + confidence / 2);
  f.ci_low = f.slope - q * f.std_error;
  f.ci_high = f.slope + q * f.std_error;
  return f;
}

enum class Sweep { amplitude, noise };

struct Experiment {
  std::vector<double> amplitudes = {1, 2, 4, 8};
  std::vector<double> noise_levels = {3};
  Sweep sweep = Sweep::amplitude;
  std::size_t correlation = 1;
  std::size_t trials = 20;
  PacketParams packet;
  CountParams count;
  std::uint64_t seed = 0;
};

struct ThresholdFit {
  double threshold = 0;
  Fit fit;
  std::vector<double> mean_count;  // per sweep point, over kept trials
  bool saturated = false;
};

struct Report {
  std::vector<TrialResult> trials;
  std::vector<ThresholdFit> fits;
  double cap = 0;  // support over the minimum stable volume of a noiseless run
  std::size_t discarded = 0;
};

inline Report run_experiment(const Experiment& e) {
  const auto& sweep_values = e.sweep == Sweep::amplitude ? e.amplitudes : e.noise_levels;
  const auto& fixed = e.sweep == Sweep::amplitude ? e.noise_levels : e.amplitudes;
  if (fixed.size() != 1) throw Error(Errc::invalid_argument, "exactly one value of the fixed parameter is required");
  std::vector<double> distinct = sweep_values;
  std::sort(distinct.begin(), distinct.end());
  if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 3)
    throw Error(Errc::invalid_argument, "at least three distinct sweep values are required");
  if (e.trials < 20) throw Error(Errc::invalid_argument, "at least 20 trials are required");
  for (double v : sweep_values)
    if (!(v > 0)) throw Error(Errc::invalid_argument, "sweep values must be positive");

  Report rep;
  const std::size_t points = sweep_values.size();
  rep.trials.resize(points * e.trials);
  parallel_for(rep.trials.size(), [&](std::size_t i) {
    const std::size_t p = i / e.trials, t = i % e.trials;
    const double A = e.sweep == Sweep::amplitude ? sweep_values[p] : fixed[0];
    const double n = e.sweep == Sweep::amplitude ? fixed[0] : sweep_values[p];
    const auto seed = derive_seed(e.seed, "noise/" + std::to_string(p) + "/" + std::to_string(t));
    rep.trials[i] = run_trial(A, NoiseSpec{n, e.correlation}, e.packet, e.count, seed, t);
  });
  auto clean = run_trial(1.0, NoiseSpec{0, 1}, e.packet, CountParams{{1}, 1}, 0);
  rep.cap = clean.discarded ? 0 : clean.count[0];
  for (auto& t : rep.trials) rep.discarded += t.discarded;

  for (std::size_t k = 0; k < e.count.thresholds.size(); ++k) {
    ThresholdFit tf;
    tf.threshold = e.count.thresholds[k];
    std::vector<double> xs, ys;
    for (std::size_t p = 0; p < points; ++p) {
      double sum = 0;
      std::size_t kept = 0;
      for (std::size_t t = 0; t < e.trials; ++t) {
        auto& tr = rep.trials[p * e.trials + t];
        if (tr.discarded || tr.count[k] <= 0) continue;
        tf.saturated = tf.saturated || tr.saturated[k];
        xs.push_back(std::log(sweep_values[p]));
        ys.push_back(std::log(tr.count[k]));
        sum += tr.count[k];
        ++kept;
      }
      tf.mean_count.push_back(kept ? sum / static_cast<double>(kept) : 0);
    }
    if (xs.size() >= 3) tf.fit = ols_fit(xs, ys);
    rep.fits.push_back(tf);
  }
  return rep;
}

}  // namespace mcilab::noise
