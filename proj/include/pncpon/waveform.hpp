#pragma once

// Bit sequences and uniformly sampled waveforms shared by the optical and
// electrical halves of the link.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace pncpon {

inline constexpr std::size_t kPrbs7Period = 127;

struct BitSequence {
  std::vector<std::uint8_t> bits;
  std::size_t period_len = 0;  // 0 when the sequence is not periodic

  std::size_t size() const { return bits.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits[i]; }
};

// How samples outside a finite record are treated when shifting or filtering.
// kHold repeats the edge sample; kPeriodic treats the record as one period of
// an infinitely repeating signal.
enum class Boundary { kHold, kPeriodic };

struct SampledWaveform {
  std::vector<double> samples;
  double sample_rate = 0.0;  // samples per second
  double t0 = 0.0;           // time of samples[0], seconds

  std::size_t size() const { return samples.size(); }
  double dt() const { return 1.0 / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// PRBS-7 from a Fibonacci LFSR with feedback polynomial x^7 + x^6 + 1.
inline BitSequence prbs7(std::uint8_t seed, std::size_t n_bits) {
  std::uint8_t state = seed & 0x7f;
  if (state == 0) throw std::invalid_argument("prbs7: seed must be a nonzero 7-bit state");
  if (n_bits == 0) throw std::invalid_argument("prbs7: n_bits must be >= 1");
  BitSequence seq;
  seq.period_len = kPrbs7Period;
  seq.bits.reserve(n_bits);
  for (std::size_t i = 0; i < n_bits; ++i) {
    const std::uint8_t fb = ((state >> 6) ^ (state >> 5)) & 1u;
    state = static_cast<std::uint8_t>(((state << 1) | fb) & 0x7f);
    seq.bits.push_back(fb);
  }
  return seq;
}

// Cyclic rotation: out[i] = in[(i + offset) mod n].
inline BitSequence rotate_bits(const BitSequence& in, std::size_t offset) {
  BitSequence out = in;
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) out.bits[i] = in.bits[(i + offset) % n];
  return out;
}

// NRZ drive in [0, 1] with raised-cosine transitions of width
// rise_fraction * T centred on each bit boundary. Sample j sits at
// t = j / samples_per_bit bit periods, so the mid-bit sample is j = k*spb + spb/2.
inline SampledWaveform nrz_shape(const BitSequence& bits, std::size_t samples_per_bit,
                                 double rise_fraction, double bit_rate = 2.5e9,
                                 Boundary boundary = Boundary::kHold) {
  if (!(rise_fraction >= 0.0 && rise_fraction <= 1.0))
    throw std::invalid_argument("nrz_shape: rise_fraction must lie in [0, 1]");
  if (samples_per_bit < 8) throw std::invalid_argument("nrz_shape: samples_per_bit must be >= 8");
  if (bits.size() == 0) throw std::invalid_argument("nrz_shape: empty bit sequence");
  if (!(bit_rate > 0.0)) throw std::invalid_argument("nrz_shape: bit_rate must be positive");

  const std::size_t n = bits.size();
  SampledWaveform w;
  w.sample_rate = bit_rate * static_cast<double>(samples_per_bit);
  w.samples.resize(n * samples_per_bit);

  const double half = rise_fraction / 2.0;
  auto prev_bit = [&](std::size_t k) -> double {
    if (k > 0) return bits[k - 1];
    return boundary == Boundary::kPeriodic ? bits[n - 1] : bits[0];
  };
  auto next_bit = [&](std::size_t k) -> double {
    if (k + 1 < n) return bits[k + 1];
    return boundary == Boundary::kPeriodic ? bits[0] : bits[n - 1];
  };
  // Rising part of a transition centred at u = 0 (u in bit periods).
  auto edge = [&](double from, double to, double u) {
    const double x = (u + half) / rise_fraction;  // 0..1 across the edge
    return from + (to - from) * 0.5 * (1.0 - std::cos(std::numbers::pi * x));
  };

  for (std::size_t k = 0; k < n; ++k) {
    const double b = bits[k];
    for (std::size_t j = 0; j < samples_per_bit; ++j) {
      const double u = static_cast<double>(j) / static_cast<double>(samples_per_bit);
      double v = b;
      if (rise_fraction > 0.0) {
        if (u < half)
          v = edge(prev_bit(k), b, u);
        else if (1.0 - u < half)
          v = edge(b, next_bit(k), u - 1.0);
      }
      w.samples[k * samples_per_bit + j] = v;
    }
  }
  return w;
}

namespace detail {

inline double cyclic_at(const std::vector<double>& x, long long idx) {
  const long long n = static_cast<long long>(x.size());
  long long m = idx % n;
  if (m < 0) m += n;
  return x[static_cast<std::size_t>(m)];
}

inline double held_at(const std::vector<double>& x, long long idx) {
  if (idx < 0) return x.front();
  if (idx >= static_cast<long long>(x.size())) return x.back();
  return x[static_cast<std::size_t>(idx)];
}

// Linear interpolation of x at fractional index pos.
inline double interp_at(const std::vector<double>& x, double pos, Boundary boundary) {
  const double fl = std::floor(pos);
  const double f = pos - fl;
  const auto i = static_cast<long long>(fl);
  auto at = [&](long long k) {
    return boundary == Boundary::kPeriodic ? cyclic_at(x, k) : held_at(x, k);
  };
  if (f == 0.0) return at(i);
  return (1.0 - f) * at(i) + f * at(i + 1);
}

}  // namespace detail

// Delay by dt seconds: out(t) = w(t - dt). Integer-sample shifts are exact,
// fractional ones use linear interpolation.
inline SampledWaveform time_shift(const SampledWaveform& w, double dt,
                                  Boundary boundary = Boundary::kHold) {
  if (w.size() == 0) throw std::invalid_argument("time_shift: empty waveform");
  if (!(std::abs(dt) < w.duration()))
    throw std::invalid_argument("time_shift: |dt| must be shorter than the waveform");
  double shift = dt * w.sample_rate;
  const double nearest = std::round(shift);
  if (std::abs(shift - nearest) < 1e-9) shift = nearest;

  SampledWaveform out = w;
  for (std::size_t i = 0; i < w.size(); ++i)
    out.samples[i] = detail::interp_at(w.samples, static_cast<double>(i) - shift, boundary);
  return out;
}

inline double dbm_to_mw(double p_dbm) { return std::pow(10.0, p_dbm / 10.0); }

inline double mw_to_dbm(double p_mw) {
  if (!(p_mw > 0.0)) throw std::invalid_argument("mw_to_dbm: power must be positive");
  return 10.0 * std::log10(p_mw);
}

inline double mean(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace pncpon
