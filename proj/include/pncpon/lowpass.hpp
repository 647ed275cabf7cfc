#pragma once

// Bessel low-pass realised as a cascade of bilinear-transformed sections,
// prewarped so the -3 dB point lands exactly on the requested cutoff.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "pncpon/waveform.hpp"

namespace pncpon {

namespace detail {

// Analog Bessel prototype poles normalised to a -3 dB magnitude point at
// 1 rad/s. Only the upper half-plane member of each conjugate pair is listed;
// a zero imaginary part marks a real pole.
inline std::vector<std::complex<double>> bessel_prototype_poles(int order) {
  using C = std::complex<double>;
  switch (order) {
    case 1: return {C(-1.0, 0.0)};
    case 2: return {C(-1.101601330592161, 0.636009824757034)};
    case 3: return {C(-1.047409161008935, 0.999264436280637), C(-1.322675799910444, 0.0)};
    case 4: return {C(-0.995208764350272, 1.257105739454664), C(-1.370067830551442, 0.410249717493752)};
    case 5:
      return {C(-0.957676548562682, 1.471124320730394), C(-1.380877325860439, 0.717909587626768),
              C(-1.502316271447478, 0.0)};
    case 6:
      return {C(-0.930656522946859, 1.661863268942592), C(-1.381858097596564, 0.971471890711572),
              C(-1.571490403616032, 0.320896374222624)};
    case 7:
      return {C(-0.90986778062347, 1.836451353036394), C(-1.378903216795475, 1.191566777800653),
              C(-1.612038766226126, 0.589244506931472), C(-1.684368179273182, 0.0)};
    case 8:
      return {C(-0.892869718847138, 1.998325843641306), C(-1.373841217637377, 1.388356575877563),
              C(-1.636939418126889, 0.8227956251397), C(-1.757408400401653, 0.272867575102233)};
    default: throw std::invalid_argument("Bessel low-pass: order must be in 1..8");
  }
}

}  // namespace detail

// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
};

class BesselLowpass {
 public:
  BesselLowpass(int order, double cutoff_hz, double sample_rate)
      : cutoff_hz_(cutoff_hz), sample_rate_(sample_rate) {
    if (!(cutoff_hz > 0.0)) throw std::invalid_argument("Bessel low-pass: cutoff must be positive");
    if (!(sample_rate > 2.0 * cutoff_hz))
      throw std::invalid_argument("Bessel low-pass: sample rate must exceed twice the cutoff");

    const double k = 2.0 * sample_rate;
    const double wc = k * std::tan(std::numbers::pi * cutoff_hz / sample_rate);
    for (const auto& proto : detail::bessel_prototype_poles(order)) {
      const std::complex<double> p = proto * wc;
      Biquad s;
      if (proto.imag() == 0.0) {
        // H(s) = -p / (s - p)
        const double a = -p.real();
        const double d = k + a;
        s.b0 = a / d;
        s.b1 = a / d;
        s.a1 = (a - k) / d;
      } else {
        // H(s) = |p|^2 / (s^2 - 2 Re(p) s + |p|^2)
        const double m2 = std::norm(p);
        const double c1 = -2.0 * p.real();
        const double d = k * k + c1 * k + m2;
        s.b0 = m2 / d;
        s.b1 = 2.0 * m2 / d;
        s.b2 = m2 / d;
        s.a1 = (2.0 * m2 - 2.0 * k * k) / d;
        s.a2 = (k * k - c1 * k + m2) / d;
      }
      sections_.push_back(s);
    }
  }

  double cutoff_hz() const { return cutoff_hz_; }
  double sample_rate() const { return sample_rate_; }
  const std::vector<Biquad>& sections() const { return sections_; }

  std::complex<double> response(double f_hz) const {
    const std::complex<double> z1 =
        std::polar(1.0, -2.0 * std::numbers::pi * f_hz / sample_rate_);  // z^-1
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h = 1.0;
    for (const auto& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
  }

  // Low-frequency group delay in seconds.
  double group_delay_s() const {
    const double f = cutoff_hz_ * 1e-4;
    return -std::arg(response(f)) / (2.0 * std::numbers::pi * f);
  }

  // kHold starts every section in its steady state for x[0], so a constant
  // input passes unchanged. kPeriodic runs one warm-up pass over the record
  // and returns the second pass, i.e. the steady-state periodic response.
  std::vector<double> apply(std::span<const double> x, Boundary boundary) const {
    std::vector<double> y(x.begin(), x.end());
    if (y.empty()) return y;
    for (const auto& s : sections_) {
      double z1 = 0.0, z2 = 0.0;
      if (boundary == Boundary::kHold) {
        const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
        const double x0 = y.front();
        const double y0 = dc * x0;
        z2 = s.b2 * x0 - s.a2 * y0;
        z1 = y0 - s.b0 * x0;
      }
      auto run = [&](std::vector<double>& buf, bool write) {
        for (double& v : buf) {
          const double in = v;
          const double out = s.b0 * in + z1;
          z1 = s.b1 * in - s.a1 * out + z2;
          z2 = s.b2 * in - s.a2 * out;
          if (write) v = out;
        }
      };
      if (boundary == Boundary::kPeriodic) run(y, false);
      run(y, true);
    }
    return y;
  }

 private:
  double cutoff_hz_;
  double sample_rate_;
  std::vector<Biquad> sections_;
};

}  // namespace pncpon
