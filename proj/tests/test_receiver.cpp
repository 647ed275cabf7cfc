#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "pncpon/receiver.hpp"

using namespace pncpon;

namespace {

SampledWaveform constant(double v, std::size_t n, double fs = 40e9) {
  return {std::vector<double>(n, v), fs, 0.0};
}

double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Composite Simpson integration of the standard normal density over
// [q, q + 40], an oracle independent of erfc.
double gaussian_tail_simpson(double q) {
  const int n = 400000;
  const double a = q, b = q + 40.0, h = (b - a) / n;
  auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); };
  double s = phi(a) + phi(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * phi(a + i * h);
  return s * h / 3.0;
}

SampledWaveform prbs_wave(std::uint8_t seed, std::size_t periods, double rise = 0.2) {
  return nrz_shape(prbs7(seed, periods * 127), 16, rise, 2.5e9, Boundary::kPeriodic);
}

}  // namespace

TEST(BeatFrequency, Values) {
  EXPECT_EQ(beat_frequency(1550.0, 1550.0), 0.0);
  EXPECT_NEAR(beat_frequency(1550.0, 1550.5), 62.3717e9, 0.001e9);
  EXPECT_NEAR(beat_frequency(1548.73, 1552.00), 407.85e9, 0.01e9);
  EXPECT_NEAR(beat_frequency(1550.0, 1550.01), 1.2478e9, 0.0002e9);
  EXPECT_THROW(beat_frequency(0.0, 1550.0), std::invalid_argument);
}

TEST(Photodetect, NoiselessSingleTrackIsInvertedCurrent) {
  OpticalEnvelope t{1548.73, constant(0.0, 64)};
  for (std::size_t i = 0; i < 64; ++i) t.power_mw.samples[i] = 0.1 * (i % 5);
  const auto p = ReceiverParams::noiseless();
  const auto out = photodetect({t}, {}, p, 1);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(out.samples[i], -p.responsivity * t.power_mw.samples[i]);
}

TEST(Photodetect, SeparatedWavelengthsAddInPower) {
  const OpticalEnvelope a{1548.73, constant(0.3, 256)};
  const OpticalEnvelope b{1552.00, constant(0.5, 256)};
  const auto p = ReceiverParams::noiseless();
  const auto out = photodetect({a, b}, {}, p, 1);
  for (double v : out.samples) EXPECT_NEAR(v, -0.8 * 0.8, 1e-15);
}

TEST(Photodetect, CollidingWavelengthsBeat) {
  const OpticalEnvelope a{1550.00, constant(0.3, 4096)};
  const OpticalEnvelope b{1550.01, constant(0.5, 4096)};
  const auto p = ReceiverParams::noiseless();
  const auto out = photodetect({a, b}, {}, p, 1);
  double lo = 1e9, hi = -1e9;
  for (double v : out.samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double amp = 2 * 0.8 * std::sqrt(0.3 * 0.5);
  EXPECT_NEAR(0.5 * (hi - lo), amp, 0.01 * amp);
  EXPECT_NEAR(mean(out.samples), -0.8 * 0.8, 0.02);
}

TEST(Photodetect, ThermalVarianceMatchesDensity) {
  ReceiverParams p = ReceiverParams::noiseless();
  p.thermal_noise_a_per_rthz = 2e-11;
  const auto out = photodetect({{1550.0, constant(0.0, 200000)}}, {}, p, 9);
  const double expect = std::pow(2e-11 * 1e3, 2) * 40e9 / 2;  // mA^2
  EXPECT_NEAR(variance(out.samples) / expect, 1.0, 0.02);
}

TEST(Photodetect, ShotVarianceTracksCurrent) {
  ReceiverParams p = ReceiverParams::noiseless();
  p.shot_noise_enabled = true;
  const auto out = photodetect({{1550.0, constant(1.0, 200000)}}, {}, p, 9);
  const double amps = 0.8e-3;
  const double expect = kElectronCharge * amps * 40e9 * 1e6;
  EXPECT_NEAR(variance(out.samples) / expect, 1.0, 0.02);
}

TEST(Photodetect, RbsBeatOnlyWithSameWavelength) {
  ReceiverParams p = ReceiverParams::noiseless();
  p.rbs_beat_weight = 50.0;
  const OpticalEnvelope t{1548.73, constant(0.02, 200000)};
  const auto hit = photodetect({t}, {{1548.73, 1e-4}}, p, 4);
  const double expect = 50.0 * 0.64 * 0.02 * 1e-4;
  EXPECT_NEAR(variance(hit.samples) / expect, 1.0, 0.02);
  const auto miss = photodetect({t}, {{1552.00, 1e-4}}, p, 4);
  EXPECT_LT(variance(miss.samples), 1e-24);
  EXPECT_NEAR(mean(miss.samples), -0.8 * (0.02 + 1e-4), 1e-12);
}

TEST(Photodetect, SeededAndReproducible) {
  ReceiverParams p;
  const OpticalEnvelope t{1548.73, constant(0.02, 1000)};
  const auto a = photodetect({t}, {{1548.73, 1e-4}}, p, 42);
  const auto b = photodetect({t}, {{1548.73, 1e-4}}, p, 42);
  const auto c = photodetect({t}, {{1548.73, 1e-4}}, p, 43);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST(Photodetect, MismatchedGridsRejected) {
  const OpticalEnvelope a{1548.73, constant(0.3, 64)};
  const OpticalEnvelope b{1552.00, constant(0.3, 65)};
  const OpticalEnvelope c{1552.00, constant(0.3, 64, 20e9)};
  const auto p = ReceiverParams::noiseless();
  EXPECT_THROW(photodetect({a, b}, {}, p, 1), std::invalid_argument);
  EXPECT_THROW(photodetect({a, c}, {}, p, 1), std::invalid_argument);
  EXPECT_THROW(photodetect({}, {}, p, 1), std::invalid_argument);
}

TEST(Lowpass, DcGainIsOne) {
  const BesselLowpass f(4, 2.34e9, 40e9);
  EXPECT_NEAR(std::abs(f.response(0.0)), 1.0, 1e-12);
  const auto y = f.apply(std::vector<double>(500, 0.37), Boundary::kHold);
  for (double v : y) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Lowpass, ToneAtCutoffIsThreeDbDown) {
  const double fs = 40e9, fc = 2.34e9;
  const BesselLowpass f(4, fc, fs);
  EXPECT_NEAR(std::abs(f.response(fc)), std::sqrt(0.5), 0.02);
  // Time domain: steady-state amplitude of a periodic tone record.
  const std::size_t n = 40000;  // 2340 whole cycles of fc at fs
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * fc * i / fs);
  const auto y = f.apply(x, Boundary::kPeriodic);
  double peak = 0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  EXPECT_NEAR(peak, std::sqrt(0.5), 0.02);
}

TEST(Lowpass, MonotoneMagnitudeAndOrders) {
  for (int order = 1; order <= 8; ++order) {
    const BesselLowpass f(order, 2.34e9, 40e9);
    EXPECT_NEAR(std::abs(f.response(2.34e9)), std::sqrt(0.5), 0.02) << order;
    double prev = 1.0 + 1e-12;
    for (double fr = 0.1e9; fr < 19e9; fr += 0.5e9) {
      const double m = std::abs(f.response(fr));
      EXPECT_LE(m, prev) << order << " " << fr;
      prev = m;
    }
    EXPECT_GT(f.group_delay_s(), 0.0);
  }
}

TEST(Lowpass, UndersampledRejected) {
  EXPECT_THROW(BesselLowpass(4, 30e9, 40e9), std::invalid_argument);
  EXPECT_THROW(BesselLowpass(4, 20e9, 40e9), std::invalid_argument);
  EXPECT_THROW(BesselLowpass(9, 2e9, 40e9), std::invalid_argument);
  EXPECT_THROW(BesselLowpass(4, 0.0, 40e9), std::invalid_argument);
}

TEST(Lowpass, PeriodicMatchesLongRun) {
  const auto w = prbs_wave(0x3b, 4);
  const BesselLowpass f(4, 2.34e9, w.sample_rate);
  std::vector<double> tripled;
  for (int r = 0; r < 3; ++r) tripled.insert(tripled.end(), w.samples.begin(), w.samples.end());
  const auto lin = f.apply(tripled, Boundary::kHold);
  const auto per = f.apply(w.samples, Boundary::kPeriodic);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(per[i], lin[2 * w.size() + i], 1e-9);
}

TEST(PncDecode, ExactCancellation) {
  const auto self = prbs_wave(0x7f, 2);
  auto other = prbs_wave(0x11, 2);
  for (double& v : other.samples) v *= 0.6;
  SampledWaveform rx = self;
  for (std::size_t i = 0; i < rx.size(); ++i) rx.samples[i] = -(self.samples[i] + other.samples[i]);
  const auto d = pnc_decode(rx, self, 2 / 2.5e9);
  EXPECT_NEAR(d.lag_s, 0.0, 1e-15);
  EXPECT_NEAR(d.gain, 1.0, 0.02);
  // decoded = -other up to its DC level: compare AC parts.
  const double mo = mean(other.samples), md = mean(d.decoded.samples);
  double resid = 0, energy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double e = (d.decoded.samples[i] - md) + (other.samples[i] - mo);
    resid += e * e;
    energy += (self.samples[i] - mean(self.samples)) * (self.samples[i] - mean(self.samples));
  }
  // The least-squares gain also absorbs the tiny self/other correlation of two
  // PRBS phases, which bounds how exact this can be.
  EXPECT_LT(resid / energy, 1e-3);
}

TEST(PncDecode, ExactCancellationWithoutOtherSignal) {
  const auto self = prbs_wave(0x7f, 2);
  SampledWaveform rx = self;
  for (double& v : rx.samples) v = -0.25 * v;
  const auto d = pnc_decode(rx, self, 2 / 2.5e9);
  EXPECT_NEAR(d.gain, 0.25, 1e-12);
  double resid = 0, energy = 0;
  const double m = mean(self.samples), md = mean(d.decoded.samples);
  for (std::size_t i = 0; i < rx.size(); ++i) {
    resid += std::pow(d.decoded.samples[i] - md, 2);
    energy += std::pow(0.25 * (self.samples[i] - m), 2);
  }
  EXPECT_LT(resid / energy, 1e-6);
}

TEST(PncDecode, FractionalLagMatchesBruteForce) {
  const auto self = prbs_wave(0x2d, 2, 0.5);
  const double fs = self.sample_rate;
  const auto delayed = time_shift(self, 3.5 / fs, Boundary::kPeriodic);
  SampledWaveform rx = delayed;
  for (double& v : rx.samples) v = -v;
  const auto d = pnc_decode(rx, self, 2 / 2.5e9);

  // Oracle: scan lags on a 0.01-sample grid for the best least-squares fit.
  double best_lag = 0, best_err = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= 1000; ++j) {
    const double lag = j * 0.01;
    const auto cand = time_shift(self, lag / fs, Boundary::kPeriodic);
    double err = 0;
    for (std::size_t i = 0; i < self.size(); ++i) err += std::pow(cand.samples[i] - delayed.samples[i], 2);
    if (err < best_err) {
      best_err = err;
      best_lag = lag;
    }
  }
  EXPECT_NEAR(best_lag, 3.5, 0.01);
  EXPECT_NEAR(d.lag_s * fs, 3.5, 0.1);
}

TEST(PncDecode, NoOwnSignalIsAnError) {
  const auto self = prbs_wave(0x7f, 2);
  std::mt19937 rng(1);
  std::normal_distribution<double> n;
  SampledWaveform rx = self;
  for (double& v : rx.samples) v = n(rng);
  EXPECT_THROW(pnc_decode(rx, self, 2 / 2.5e9), DecodeError);
}

TEST(PncDecode, Preconditions) {
  const auto self = prbs_wave(0x7f, 1);
  SampledWaveform shorter = self;
  shorter.samples.resize(self.size() / 2);
  EXPECT_THROW(pnc_decode(self, shorter, 1e-10), std::invalid_argument);
  EXPECT_THROW(pnc_decode(self, self, -1.0), std::invalid_argument);
  EXPECT_THROW(pnc_decode(self, self, 1e-6), std::invalid_argument);
}

TEST(EyeStats, NoiselessIdealNrzIsInfinite) {
  const auto bits = prbs7(0x7f, 254);
  const auto w = nrz_shape(bits, 16, 0.2, 2.5e9, Boundary::kPeriodic);
  const auto e = eye_stats(w, bits, 2.5e9, 0.0);
  EXPECT_EQ(e.sigma0, 0.0);
  EXPECT_EQ(e.sigma1, 0.0);
  EXPECT_TRUE(std::isinf(e.q_factor) && e.q_factor > 0);
  EXPECT_EQ(ber_from_q(e.q_factor), 0.0);
}

TEST(EyeStats, SyntheticGaussianLevels) {
  const auto bits = prbs7(0x7f, 127 * 200);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 0.1);
  SampledWaveform w{std::vector<double>(bits.size() * 16), 40e9, 0.0};
  for (std::size_t k = 0; k < bits.size(); ++k)
    for (int j = 0; j < 16; ++j) w.samples[k * 16 + j] = bits[k] + n(rng);
  const auto e = eye_stats(w, bits, 2.5e9, 0.0);
  EXPECT_NEAR(e.q_factor, 5.0, 0.2);
  EXPECT_FALSE(e.inverted);
}

TEST(EyeStats, InvertedEyeFlagged) {
  const auto bits = prbs7(0x7f, 254);
  auto w = nrz_shape(bits, 16, 0.2, 2.5e9, Boundary::kPeriodic);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.05);
  for (double& v : w.samples) v = -v + n(rng);
  const auto e = eye_stats(w, bits, 2.5e9, 0.0);
  EXPECT_TRUE(e.inverted);
  EXPECT_LT(e.q_factor, 0.0);
}

TEST(EyeStats, TooFewBitsPerClass) {
  const BitSequence bits{{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0}, 0};
  const auto w = nrz_shape(bits, 16, 0.0);
  EXPECT_THROW(eye_stats(w, bits, 2.5e9, 0.0), std::invalid_argument);
}

TEST(BerFromQ, MatchesNumericalIntegration) {
  EXPECT_EQ(ber_from_q(0.0), 0.5);
  for (double q : {0.0, 3.0, 6.0, 7.0}) {
    const double oracle = gaussian_tail_simpson(q);
    EXPECT_NEAR(ber_from_q(q), oracle, 1e-10) << q;
    EXPECT_NEAR(ber_from_q(q) / oracle, 1.0, 1e-8) << q;
  }
  EXPECT_NEAR(ber_from_q(6.0), 9.865876450376987e-10, 1e-22);
  EXPECT_EQ(ber_from_q(std::numeric_limits<double>::infinity()), 0.0);
  EXPECT_THROW(ber_from_q(std::nan("")), std::invalid_argument);
}

TEST(BerFromQ, Log10StaysFiniteAndContinuous) {
  EXPECT_NEAR(log10_ber_from_q(6.0), std::log10(9.865876450376987e-10), 1e-12);
  EXPECT_NEAR(log10_ber_from_q(20.0 - 1e-9), log10_ber_from_q(20.0), 1e-6);
  EXPECT_TRUE(std::isfinite(log10_ber_from_q(60.0)));
  EXPECT_LT(log10_ber_from_q(60.0), log10_ber_from_q(40.0));
}

TEST(CountErrors, NoiselessAndComplemented) {
  const auto bits = prbs7(0x7f, 254);
  const auto w = nrz_shape(bits, 16, 0.2, 2.5e9, Boundary::kPeriodic);
  EXPECT_EQ(count_errors(w, bits, 2.5e9, 0.5, 0.0).errors, 0u);
  BitSequence comp = bits;
  for (auto& b : comp.bits) b ^= 1;
  EXPECT_EQ(count_errors(w, comp, 2.5e9, 0.5, 0.0).ber, 1.0);
}

TEST(CountErrors, AgreesWithGaussianExtrapolationNearQ3) {
  const auto bits = prbs7(0x7f, 127 * 1000);  // 127000 bits
  std::mt19937_64 rng(23);
  const double sigma = 1.0 / 6.0;  // q = 1 / (2 sigma) = 3
  std::normal_distribution<double> n(0.0, sigma);
  SampledWaveform w{std::vector<double>(bits.size() * 8), 20e9, 0.0};
  for (std::size_t k = 0; k < bits.size(); ++k)
    for (int j = 0; j < 8; ++j) w.samples[k * 8 + j] = bits[k] + n(rng);
  const auto e = eye_stats(w, bits, 2.5e9, 0.0);
  const auto c = count_errors(w, bits, 2.5e9, e.optimal_threshold(), 0.0);
  const double predicted = ber_from_q(e.q_factor);
  EXPECT_NEAR(e.q_factor, 3.0, 0.05);
  EXPECT_GE(c.bits, 100000u);
  EXPECT_GT(c.ber, predicted / 3);
  EXPECT_LT(c.ber, predicted * 3);
}

TEST(RequiredPower, InvertsAffineToyModel) {
  auto ber = [](double p) { return ber_from_q(p + 24.0); };
  EXPECT_NEAR(required_power(ber, ber_from_q(6.0), 0.01), -18.0, 0.01);
  EXPECT_NEAR(required_power(ber, 1e-9, 0.05), -24.0 + 5.9978, 0.05);
}

TEST(RequiredPower, BracketFailures) {
  auto kind_of = [](auto&& f) {
    try {
      required_power(f);
    } catch (const BracketError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no BracketError";
    return BracketError::Kind::kNotMonotone;
  };
  EXPECT_EQ(kind_of([](double) { return 1e-3; }), BracketError::Kind::kFloor);
  EXPECT_EQ(kind_of([](double p) { return ber_from_q(-p); }), BracketError::Kind::kNotMonotone);
  EXPECT_EQ(kind_of([](double) { return 1e-15; }), BracketError::Kind::kMetAtLowEnd);
  auto ok = [](double p) { return ber_from_q(p + 24.0); };
  EXPECT_THROW(required_power(ok, 0.7), std::invalid_argument);
  EXPECT_THROW(required_power(ok, 1e-9, 0.0), std::invalid_argument);
}
