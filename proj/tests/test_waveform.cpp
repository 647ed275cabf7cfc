#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pncpon/waveform.hpp"

using namespace pncpon;

TEST(Prbs7, RepeatsAfter127Bits) {
  const auto s = prbs7(0x7f, 254);
  ASSERT_EQ(s.size(), 254u);
  EXPECT_EQ(s.period_len, 127u);
  for (std::size_t i = 0; i < 127; ++i) EXPECT_EQ(s[i], s[i + 127]) << i;
}

TEST(Prbs7, EveryNonzeroSeedHas64OnesPerPeriod) {
  for (int seed = 1; seed < 128; ++seed) {
    const auto s = prbs7(static_cast<std::uint8_t>(seed), 127);
    EXPECT_EQ(std::accumulate(s.bits.begin(), s.bits.end(), 0), 64) << seed;
  }
}

TEST(Prbs7, ZeroSeedRejected) {
  EXPECT_THROW(prbs7(0, 10), std::invalid_argument);
  EXPECT_THROW(prbs7(0x80, 10), std::invalid_argument);  // only the low 7 bits count
  EXPECT_THROW(prbs7(1, 0), std::invalid_argument);
}

TEST(Prbs7, FirstBitsFromAllOnesState) {
  // Hand-stepped x^7 + x^6 + 1 register from 1111111: feedback is bit6 ^ bit5,
  // zero while the ones shift out, then the first 1 reappears.
  const auto s = prbs7(0x7f, 8);
  const std::vector<std::uint8_t> expect{0, 0, 0, 0, 0, 0, 1, 0};
  EXPECT_EQ(s.bits, expect);
}

TEST(Prbs7, CyclicAutocorrelationIsMinusOne) {
  const auto s = prbs7(0x5a, 127);
  for (std::size_t shift = 1; shift < 127; ++shift) {
    int acc = 0;
    for (std::size_t i = 0; i < 127; ++i) acc += s[i] == s[(i + shift) % 127] ? 1 : -1;
    EXPECT_EQ(acc, -1) << "shift " << shift;
  }
}

TEST(Prbs7, DifferentSeedsAreRotationsOfOneSequence) {
  const auto a = prbs7(0x7f, 127);
  const auto b = prbs7(0x13, 127);
  bool found = false;
  for (std::size_t off = 0; off < 127 && !found; ++off) found = rotate_bits(a, off).bits == b.bits;
  EXPECT_TRUE(found);
}

TEST(RotateBits, Cyclic) {
  BitSequence b{{1, 0, 0, 1, 1}, 0};
  EXPECT_EQ(rotate_bits(b, 2).bits, (std::vector<std::uint8_t>{0, 1, 1, 1, 0}));
  EXPECT_EQ(rotate_bits(b, 5).bits, b.bits);
}

TEST(NrzShape, AllOnesWithSharpEdgesIsConstant) {
  const auto w = nrz_shape({{1, 1, 1}, 0}, 16, 0.0);
  ASSERT_EQ(w.size(), 48u);
  for (double v : w.samples) EXPECT_EQ(v, 1.0);
  EXPECT_DOUBLE_EQ(w.sample_rate, 2.5e9 * 16);
}

TEST(NrzShape, PlateauReachedMidBit) {
  const auto w = nrz_shape({{0, 1, 0}, 0}, 16, 0.25);
  EXPECT_EQ(w.samples[16 + 8], 1.0);
  EXPECT_EQ(w.samples[8], 0.0);
}

TEST(NrzShape, EdgeMidpointIsHalf) {
  const auto w = nrz_shape({{0, 1}, 0}, 16, 0.25);
  EXPECT_NEAR(w.samples[16], 0.5, 1e-15);
}

TEST(NrzShape, RaisedCosineEdgeValues) {
  // Oracle: 0.5 * (1 - cos(pi * x)), x = (u + r/2) / r across the rising edge.
  const double r = 0.5;
  const auto w = nrz_shape({{0, 1}, 0}, 16, r);
  for (int j = -4; j <= 4; ++j) {
    const double u = j / 16.0;
    const double x = (u + r / 2) / r;
    const double expect = 0.5 * (1 - std::cos(std::numbers::pi * x));
    EXPECT_NEAR(w.samples[16 + j], expect, 1e-14) << j;
  }
}

TEST(NrzShape, MidBitExactForWideEdges) {
  const auto bits = prbs7(0x21, 127);
  for (double r : {0.0, 0.25, 0.5, 0.8, 1.0}) {
    const auto w = nrz_shape(bits, 16, r, 2.5e9, Boundary::kPeriodic);
    for (std::size_t k = 0; k < bits.size(); ++k) ASSERT_EQ(w.samples[k * 16 + 8], bits[k]) << r << " " << k;
  }
}

TEST(NrzShape, BoundedForRandomInputs) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    BitSequence b;
    const std::size_t n = 1 + rng() % 40;
    for (std::size_t i = 0; i < n; ++i) b.bits.push_back(rng() & 1);
    const double r = std::uniform_real_distribution<double>(0, 1)(rng);
    const std::size_t spb = 8 + 2 * (rng() % 8);
    for (auto boundary : {Boundary::kHold, Boundary::kPeriodic}) {
      const auto w = nrz_shape(b, spb, r, 2.5e9, boundary);
      for (double v : w.samples) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
  }
}

TEST(NrzShape, Preconditions) {
  const BitSequence b{{0, 1}, 0};
  EXPECT_THROW(nrz_shape(b, 16, -0.1), std::invalid_argument);
  EXPECT_THROW(nrz_shape(b, 16, 1.1), std::invalid_argument);
  EXPECT_THROW(nrz_shape(b, 4, 0.2), std::invalid_argument);
  EXPECT_THROW(nrz_shape({}, 16, 0.2), std::invalid_argument);
}

TEST(TimeShift, ZeroIsIdentity) {
  SampledWaveform w{{3, 1, 4, 1, 5}, 10.0, 0.0};
  EXPECT_EQ(time_shift(w, 0.0).samples, w.samples);
}

TEST(TimeShift, OneSampleMovesIndex) {
  SampledWaveform w{{3, 1, 4, 1, 5}, 10.0, 0.0};
  const auto s = time_shift(w, 0.1);
  EXPECT_EQ(s.samples, (std::vector<double>{3, 3, 1, 4, 1}));
  const auto p = time_shift(w, 0.1, Boundary::kPeriodic);
  EXPECT_EQ(p.samples, (std::vector<double>{5, 3, 1, 4, 1}));
}

TEST(TimeShift, HalfSampleOnRampGivesMidpoints) {
  SampledWaveform w{{0, 1, 2}, 1.0, 0.0};
  const auto s = time_shift(w, -0.5);
  EXPECT_DOUBLE_EQ(s.samples[0], 0.5);
  EXPECT_DOUBLE_EQ(s.samples[1], 1.5);
}

TEST(TimeShift, RoundTripIntegerShifts) {
  std::mt19937 rng(11);
  std::normal_distribution<double> n;
  SampledWaveform w;
  w.sample_rate = 40e9;
  for (int i = 0; i < 256; ++i) w.samples.push_back(n(rng));
  for (int k : {-7, -1, 1, 3, 20}) {
    const double dt = k / w.sample_rate;
    const auto back = time_shift(time_shift(w, dt), -dt);
    for (int i = std::abs(k); i < 256 - std::abs(k); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 1e-9);
    const auto pb = time_shift(time_shift(w, dt, Boundary::kPeriodic), -dt, Boundary::kPeriodic);
    for (int i = 0; i < 256; ++i) EXPECT_NEAR(pb.samples[i], w.samples[i], 1e-9);
  }
}

TEST(TimeShift, RejectsShiftLongerThanRecord) {
  SampledWaveform w{{0, 1, 2}, 1.0, 0.0};
  EXPECT_THROW(time_shift(w, 3.0), std::invalid_argument);
  EXPECT_THROW(time_shift(w, -3.5), std::invalid_argument);
  EXPECT_THROW(time_shift(SampledWaveform{}, 0.0), std::invalid_argument);
}

TEST(PowerUnits, Conversions) {
  EXPECT_DOUBLE_EQ(dbm_to_mw(0.0), 1.0);
  EXPECT_NEAR(dbm_to_mw(-18.0), 0.015848932, 1e-9);
  EXPECT_NEAR(dbm_to_mw(mw_to_dbm(3.7)), 3.7, 3.7e-12);
  EXPECT_THROW(mw_to_dbm(0.0), std::invalid_argument);
  EXPECT_THROW(mw_to_dbm(-1.0), std::invalid_argument);
}
