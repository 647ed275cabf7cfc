#pragma once

// Direct-detection receiver: photodiode with noise, low-pass filter, the
// buffered-copy cancellation that decodes the superposed signal, and eye/BER
// measurement.
//
// Electrical quantities are photocurrents in mA (R in A/W times P in mW).

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pncpon/lowpass.hpp"
#include "pncpon/optics.hpp"
#include "pncpon/waveform.hpp"

namespace pncpon {

inline constexpr double kSpeedOfLight = 299792458.0;       // m/s
inline constexpr double kElectronCharge = 1.602176634e-19;  // C

// Values frozen by `pncpon calibrate`; see configs/calibrated.ini.
namespace calibrated {
inline constexpr double kThermalNoiseAPerRtHz = 1.78e-11;
inline constexpr double kRbsBeatWeight = 70.80078125;
inline constexpr double kRiseFractionRx = 0.6171875;
}  // namespace calibrated

struct ReceiverParams {
  double responsivity = 0.8;  // A/W
  double thermal_noise_a_per_rthz = calibrated::kThermalNoiseAPerRtHz;
  bool shot_noise_enabled = true;
  double rbs_beat_weight = calibrated::kRbsBeatWeight;
  double lpf_cutoff_hz = 2.34e9;
  int lpf_order = 4;
  double beat_guard_hz = 10e9;  // beat tones above this fall outside the p-i-n bandwidth

  static ReceiverParams noiseless() {
    ReceiverParams p;
    p.thermal_noise_a_per_rthz = 0.0;
    p.shot_noise_enabled = false;
    p.rbs_beat_weight = 0.0;
    return p;
  }
};

// Frequency difference between two optical carriers.
inline double beat_frequency(double l1_nm, double l2_nm) {
  if (!(l1_nm > 0.0 && l2_nm > 0.0))
    throw std::invalid_argument("beat_frequency: wavelengths must be positive");
  return kSpeedOfLight * std::abs(l1_nm - l2_nm) / (l1_nm * l2_nm) * 1e9;
}

// Backscattered light returning to a receiver, tagged with its wavelength so
// it beats only with co-wavelength tracks.
struct RbsInput {
  double wavelength_nm = 0.0;
  double power_mw = 0.0;
};

// Photodiode followed by the integrated inverter. Noise variance per sample:
//   thermal  N^2 * fs/2
//   shot     q * I(t) * fs          (2qI over the fs/2 simulation bandwidth)
//   RBS beat w * R^2 * P_track(t) * P_rbs for co-wavelength pairs
// plus a deterministic beat tone 2R sqrt(P1 P2) cos(2 pi f t + phi) for any
// track pair closer than the beat guard.
inline SampledWaveform photodetect(const std::vector<OpticalEnvelope>& tracks,
                                   const std::vector<RbsInput>& rbs_inputs,
                                   const ReceiverParams& params, std::uint64_t rng_seed) {
  if (tracks.empty()) throw std::invalid_argument("photodetect: no optical tracks");
  if (!(params.responsivity > 0.0))
    throw std::invalid_argument("photodetect: responsivity must be positive");
  const SampledWaveform& grid = tracks.front().power_mw;
  for (const auto& t : tracks)
    if (t.power_mw.size() != grid.size() || t.power_mw.sample_rate != grid.sample_rate)
      throw std::invalid_argument("photodetect: tracks are not on a common sample grid");

  const double r = params.responsivity;
  const double fs = grid.sample_rate;
  const std::size_t n = grid.size();
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);

  std::vector<double> current(n, 0.0);  // mA, before inversion
  for (const auto& t : tracks)
    for (std::size_t i = 0; i < n; ++i) current[i] += r * t.power_mw.samples[i];
  for (const auto& b : rbs_inputs) {
    if (b.power_mw < 0.0) throw std::invalid_argument("photodetect: negative backscatter power");
    for (double& v : current) v += r * b.power_mw;
  }

  // Wavelength collisions leave an in-band beat tone.
  for (std::size_t a = 0; a < tracks.size(); ++a) {
    for (std::size_t b = a + 1; b < tracks.size(); ++b) {
      const double f = beat_frequency(tracks[a].wavelength_nm, tracks[b].wavelength_nm);
      if (f >= params.beat_guard_hz) continue;
      if (f >= fs / 2.0)
        throw std::invalid_argument("photodetect: beat tone inside the guard is above Nyquist");
      const double phase = uniform(rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double amp = 2.0 * r *
                           std::sqrt(tracks[a].power_mw.samples[i] * tracks[b].power_mw.samples[i]);
        const double t = static_cast<double>(i) / fs;
        current[i] += amp * std::cos(2.0 * std::numbers::pi * f * t + phase);
      }
    }
  }

  // The three Gaussian terms are independent, so one draw per sample with the
  // summed variance is equivalent.
  std::vector<double> variance(n, 0.0);
  const double thermal_ma = params.thermal_noise_a_per_rthz * 1e3;
  for (double& v : variance) v += thermal_ma * thermal_ma * fs / 2.0;
  if (params.shot_noise_enabled) {
    for (std::size_t i = 0; i < n; ++i) {
      const double amps = std::max(current[i], 0.0) * 1e-3;
      variance[i] += kElectronCharge * amps * fs * 1e6;
    }
  }
  if (params.rbs_beat_weight > 0.0) {
    for (const auto& b : rbs_inputs) {
      for (const auto& t : tracks) {
        if (std::abs(t.wavelength_nm - b.wavelength_nm) > 1e-9) continue;
        for (std::size_t i = 0; i < n; ++i)
          variance[i] += params.rbs_beat_weight * r * r * std::max(t.power_mw.samples[i], 0.0) * b.power_mw;
      }
    }
  }
  std::vector<double> noise(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (variance[i] > 0.0) noise[i] = std::sqrt(variance[i]) * gauss(rng);

  SampledWaveform out = grid;
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = -(current[i] + noise[i]);
  return out;
}

inline SampledWaveform lowpass(const SampledWaveform& w, const ReceiverParams& params,
                               Boundary boundary = Boundary::kHold) {
  const BesselLowpass filter(params.lpf_order, params.lpf_cutoff_hz, w.sample_rate);
  SampledWaveform out = w;
  out.samples = filter.apply(w.samples, boundary);
  return out;
}

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodeResult {
  SampledWaveform decoded;
  double gain = 0.0;
  double lag_s = 0.0;
  double peak_correlation = 0.0;  // normalised, in [-1, 1]
};

// Subtract the buffered self-signal. The received and buffered records are
// treated as periodic. The lag is the cross-correlation peak of -received
// against the copy within +/- search_window, refined by a parabola through the
// peak and its neighbours; the gain is the least-squares attenuator setting.
// decoded = received + gain * copy(t - lag), both AC-coupled.
inline DecodeResult pnc_decode(const SampledWaveform& received, const SampledWaveform& own_copy,
                               double search_window_s, double confidence_floor = 0.1) {
  if (received.size() == 0) throw std::invalid_argument("pnc_decode: empty received waveform");
  if (received.sample_rate != own_copy.sample_rate)
    throw std::invalid_argument("pnc_decode: sample rates differ");
  if (own_copy.size() < received.size())
    throw std::invalid_argument("pnc_decode: own copy shorter than the received record");
  if (!(search_window_s >= 0.0)) throw std::invalid_argument("pnc_decode: negative search window");

  const std::size_t n = received.size();
  const double fs = received.sample_rate;
  const auto window = static_cast<long long>(std::ceil(search_window_s * fs));
  if (2 * window + 1 > static_cast<long long>(n))
    throw std::invalid_argument("pnc_decode: search window longer than the record");

  std::vector<double> rx(n);
  const double rx_mean = mean(received.samples);
  for (std::size_t i = 0; i < n; ++i) rx[i] = -(received.samples[i] - rx_mean);
  std::vector<double> copy(own_copy.samples.begin(), own_copy.samples.begin() + static_cast<long>(n));
  const double copy_mean = mean(copy);
  for (double& v : copy) v -= copy_mean;

  double rx_energy = 0.0, copy_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rx_energy += rx[i] * rx[i];
    copy_energy += copy[i] * copy[i];
  }
  if (rx_energy <= 0.0 || copy_energy <= 0.0)
    throw DecodeError("pnc_decode: received or buffered signal has no AC content");

  // copy extended by `window` samples on both sides so every lag is a plain slice
  std::vector<double> ext(n + 2 * static_cast<std::size_t>(window));
  for (std::size_t j = 0; j < ext.size(); ++j)
    ext[j] = detail::cyclic_at(copy, static_cast<long long>(j) - window);
  auto corr_at = [&](long long k) {
    const double* c = ext.data() + (window - k);
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      a0 += rx[i] * c[i];
      a1 += rx[i + 1] * c[i + 1];
      a2 += rx[i + 2] * c[i + 2];
      a3 += rx[i + 3] * c[i + 3];
    }
    for (; i < n; ++i) a0 += rx[i] * c[i];
    return (a0 + a1) + (a2 + a3);
  };
  std::vector<double> corr(static_cast<std::size_t>(2 * window + 1));
  for (long long k = -window; k <= window; ++k) corr[static_cast<std::size_t>(k + window)] = corr_at(k);
  const auto best = std::max_element(corr.begin(), corr.end()) - corr.begin();
  const double peak = corr[static_cast<std::size_t>(best)];
  const double norm_peak = peak / std::sqrt(rx_energy * copy_energy);
  if (norm_peak < confidence_floor)
    throw DecodeError("pnc_decode: own signal not found in the received waveform");

  double lag = static_cast<double>(best - window);
  if (best > 0 && best + 1 < static_cast<long>(corr.size())) {
    const double cm = corr[static_cast<std::size_t>(best - 1)];
    const double cp = corr[static_cast<std::size_t>(best + 1)];
    const double denom = cm - 2.0 * peak + cp;
    if (denom < 0.0) lag += 0.5 * (cm - cp) / denom;
  }

  std::vector<double> shifted(n);
  for (std::size_t i = 0; i < n; ++i)
    shifted[i] = detail::interp_at(copy, static_cast<double>(i) - lag, Boundary::kPeriodic);
  const double shifted_mean = mean(shifted);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    shifted[i] -= shifted_mean;
    num += rx[i] * shifted[i];
    den += shifted[i] * shifted[i];
  }
  const double gain = num / den;  // rx was negated, so this is -<received, copy>/<copy, copy>

  DecodeResult res;
  res.decoded = received;
  for (std::size_t i = 0; i < n; ++i) res.decoded.samples[i] += gain * shifted[i];
  res.gain = gain;
  res.lag_s = lag / fs;
  res.peak_correlation = norm_peak;
  return res;
}

struct EyeStats {
  double mu1 = 0.0, mu0 = 0.0;
  double sigma1 = 0.0, sigma0 = 0.0;
  double q_factor = 0.0;  // +/-inf when both sigmas vanish
  bool inverted = false;  // mu1 < mu0
  double sampling_phase = 0.0;

  // Decision threshold that balances the two Gaussian tails.
  double optimal_threshold() const {
    if (sigma0 + sigma1 <= 0.0) return 0.5 * (mu0 + mu1);
    return (sigma0 * mu1 + sigma1 * mu0) / (sigma0 + sigma1);
  }
};

namespace detail {

// Decision-instant samples: bit k is sampled at (k + 0.5 + phase) / bit_rate,
// measured from the reference frame in which the waveform starts at w.t0.
// The waveform is read periodically.
inline std::vector<double> decision_samples(const SampledWaveform& w, std::size_t n_bits,
                                            double bit_rate, double phase) {
  if (!(bit_rate > 0.0)) throw std::invalid_argument("eye: bit_rate must be positive");
  const double spb = w.sample_rate / bit_rate;
  const double covered = static_cast<double>(w.size()) / spb;
  if (std::abs(covered - static_cast<double>(n_bits)) > 1e-6)
    throw std::invalid_argument("eye: waveform must cover exactly the reference bits");
  std::vector<double> out(n_bits);
  for (std::size_t k = 0; k < n_bits; ++k) {
    const double t = (static_cast<double>(k) + 0.5 + phase) / bit_rate;
    out[k] = interp_at(w.samples, (t - w.t0) * w.sample_rate, Boundary::kPeriodic);
  }
  return out;
}

}  // namespace detail

inline EyeStats eye_stats(const SampledWaveform& w, const BitSequence& reference, double bit_rate,
                          double sampling_phase) {
  const auto samples = detail::decision_samples(w, reference.size(), bit_rate, sampling_phase);
  double s1 = 0, s0 = 0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (reference[k]) {
      s1 += samples[k];
      ++n1;
    } else {
      s0 += samples[k];
      ++n0;
    }
  }
  if (n1 < 10 || n0 < 10) throw std::invalid_argument("eye_stats: fewer than 10 bits per class");

  EyeStats e;
  e.sampling_phase = sampling_phase;
  e.mu1 = s1 / static_cast<double>(n1);
  e.mu0 = s0 / static_cast<double>(n0);
  double v1 = 0, v0 = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double d = samples[k] - (reference[k] ? e.mu1 : e.mu0);
    (reference[k] ? v1 : v0) += d * d;
  }
  e.sigma1 = std::sqrt(v1 / static_cast<double>(n1 - 1));
  e.sigma0 = std::sqrt(v0 / static_cast<double>(n0 - 1));
  // Spreads below round-off of the eye levels count as noiseless.
  const double scale = std::max({std::abs(e.mu1), std::abs(e.mu0), 1e-300});
  if (e.sigma1 < 1e-12 * scale) e.sigma1 = 0.0;
  if (e.sigma0 < 1e-12 * scale) e.sigma0 = 0.0;

  const double opening = e.mu1 - e.mu0;
  const double spread = e.sigma1 + e.sigma0;
  if (spread > 0.0)
    e.q_factor = opening / spread;
  else if (opening != 0.0)
    e.q_factor = std::copysign(std::numeric_limits<double>::infinity(), opening);
  e.inverted = opening < 0.0;
  return e;
}

// Eye at the best of n_phases evenly spaced sampling phases in [-0.5, 0.5).
inline EyeStats best_phase_eye(const SampledWaveform& w, const BitSequence& reference,
                               double bit_rate, int n_phases = 16) {
  EyeStats best;
  bool first = true;
  for (int j = 0; j < n_phases; ++j) {
    const double phase = -0.5 + static_cast<double>(j) / n_phases;
    const EyeStats e = eye_stats(w, reference, bit_rate, phase);
    if (first || e.q_factor > best.q_factor) {
      best = e;
      first = false;
    }
  }
  return best;
}

inline double ber_from_q(double q) {
  if (std::isnan(q)) throw std::invalid_argument("ber_from_q: q is NaN");
  if (std::isinf(q)) return q > 0 ? 0.0 : 1.0;
  return 0.5 * std::erfc(q / std::numbers::sqrt2);
}

// log10 of ber_from_q that stays finite where the BER itself underflows.
inline double log10_ber_from_q(double q) {
  if (std::isnan(q)) throw std::invalid_argument("log10_ber_from_q: q is NaN");
  if (q < 20.0) return std::log10(ber_from_q(q));
  if (std::isinf(q)) return -std::numeric_limits<double>::infinity();
  // Asymptotic expansion of erfc(x) for large x, x = q / sqrt 2.
  const double x = q / std::numbers::sqrt2;
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) - 15.0 / (8.0 * x2 * x2 * x2);
  return (-x2 - std::log(x * std::sqrt(std::numbers::pi)) + std::log(series) + std::log(0.5)) /
         std::numbers::ln10;
}

struct ErrorCount {
  std::size_t errors = 0;
  std::size_t bits = 0;
  double ber = 0.0;
};

inline ErrorCount count_errors(const SampledWaveform& w, const BitSequence& reference,
                               double bit_rate, double threshold, double sampling_phase) {
  const auto samples = detail::decision_samples(w, reference.size(), bit_rate, sampling_phase);
  ErrorCount c;
  c.bits = samples.size();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const bool decided = samples[k] > threshold;
    if (decided != static_cast<bool>(reference[k])) ++c.errors;
  }
  c.ber = static_cast<double>(c.errors) / static_cast<double>(c.bits);
  return c;
}

class BracketError : public std::runtime_error {
 public:
  enum class Kind { kNotMonotone, kFloor, kMetAtLowEnd };
  BracketError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct PowerBracket {
  double lo_dbm = -40.0;
  double hi_dbm = 0.0;
};

// Received power at which ber_at(P) reaches target_ber, by bisection on P.
// ber_at must be non-increasing in P over the bracket; the endpoints are
// probed and a BracketError is raised when the target is not inside.
template <std::invocable<double> BerAt>
double required_power(BerAt&& ber_at, double target_ber = 1e-9, double tol_db = 0.05,
                      PowerBracket bracket = {}) {
  if (!(target_ber > 0.0 && target_ber < 0.5))
    throw std::invalid_argument("required_power: target BER must lie in (0, 0.5)");
  if (!(tol_db > 0.0)) throw std::invalid_argument("required_power: tolerance must be positive");
  double lo = bracket.lo_dbm, hi = bracket.hi_dbm;
  const double ber_lo = ber_at(lo);
  const double ber_hi = ber_at(hi);
  if (ber_hi > ber_lo)
    throw BracketError(BracketError::Kind::kNotMonotone, "required_power: BER increases with power across the bracket");
  if (ber_hi > target_ber)
    throw BracketError(BracketError::Kind::kFloor, "required_power: target BER unreachable (error floor) within the bracket");
  if (ber_lo <= target_ber)
    throw BracketError(BracketError::Kind::kMetAtLowEnd, "required_power: target BER already met at the low end of the bracket");
  while (hi - lo > tol_db) {
    const double mid = 0.5 * (lo + hi);
    if (ber_at(mid) > target_ber)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace pncpon
