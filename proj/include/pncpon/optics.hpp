#pragma once

// Power-envelope optics: intensity modulator, distribution fiber with
// Rayleigh backscatter, and the circulator/coupler remote node.
//
// Fields are never phase-resolved. Envelopes at different wavelengths travel
// as separate tracks and only meet at the photodiode.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pncpon/waveform.hpp"

namespace pncpon {

inline constexpr double kVpnBandMinNm = 1530.0;
inline constexpr double kVpnBandMaxNm = 1565.0;

struct OpticalEnvelope {
  double wavelength_nm = 0.0;
  SampledWaveform power_mw;

  double mean_power_mw() const { return mean(power_mw.samples); }
};

struct FiberSpan {
  double length_km = 0.0;
  double atten_db_per_km = 0.2;
  double rbs_return_db_max = -31.0;  // asymptotic backscatter return for an infinitely long span
  double group_delay_us_per_km = 4.9;
};

struct RemoteNodeConfig {
  int n_ports = 2;  // (N+1) coupler size
  double circulator_loss_db = 1.0;
  double coupler_excess_db = 0.0;
};

inline OpticalEnvelope modulate(const SampledWaveform& drive, double wavelength_nm,
                                double avg_power_dbm, double extinction_ratio_db) {
  if (!(extinction_ratio_db > 0.0))
    throw std::invalid_argument("modulate: extinction ratio must be positive");
  if (!(wavelength_nm >= kVpnBandMinNm && wavelength_nm <= kVpnBandMaxNm))
    throw std::invalid_argument("modulate: wavelength outside the VPN band");

  // Mark/space levels whose average is the requested power for a balanced drive.
  const double avg = dbm_to_mw(avg_power_dbm);
  double p0 = 0.0;
  double p1 = 2.0 * avg;
  if (std::isfinite(extinction_ratio_db)) {
    const double er = std::pow(10.0, extinction_ratio_db / 10.0);
    p0 = 2.0 * avg / (1.0 + er);
    p1 = er * p0;
  }

  OpticalEnvelope env;
  env.wavelength_nm = wavelength_nm;
  env.power_mw = drive;
  for (double& v : env.power_mw.samples) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12))
      throw std::invalid_argument("modulate: drive must lie in [0, 1]");
    v = p0 + (p1 - p0) * v;
  }
  return env;
}

// Linear attenuation coefficient in 1/km for a dB/km figure.
inline double linear_attenuation_per_km(double atten_db_per_km) {
  return atten_db_per_km * std::numbers::ln10 / 10.0;
}

// Backscatter return level (dB relative to launch) of a span of length L:
//   R(L) = R_max + 10 log10(1 - exp(-2 alpha L)).
// -inf for a zero-length span.
inline double rbs_return_db(const FiberSpan& span) {
  if (span.length_km <= 0.0) return -std::numeric_limits<double>::infinity();
  const double alpha = linear_attenuation_per_km(span.atten_db_per_km);
  const double fill = -std::expm1(-2.0 * alpha * span.length_km);
  return span.rbs_return_db_max + 10.0 * std::log10(fill);
}

struct Propagated {
  OpticalEnvelope out;
  double rbs_power_mw = 0.0;  // backscatter returned toward the launching end
};

inline Propagated propagate(const OpticalEnvelope& sig, const FiberSpan& span) {
  if (span.length_km < 0.0 || span.atten_db_per_km < 0.0)
    throw std::invalid_argument("propagate: negative span length or attenuation");
  Propagated r;
  r.out = sig;
  const double gain = std::pow(10.0, -span.atten_db_per_km * span.length_km / 10.0);
  for (double& v : r.out.power_mw.samples) v *= gain;
  r.out.power_mw.t0 += span.length_km * span.group_delay_us_per_km * 1e-6;

  const double ret = rbs_return_db(span);
  r.rbs_power_mw = std::isinf(ret) ? 0.0 : sig.mean_power_mw() * std::pow(10.0, ret / 10.0);
  return r;
}

// Loss from any input port to any output port: one coupler split plus one
// circulator pass on the way in and one on the way out.
inline double remote_node_path_loss_db(const RemoteNodeConfig& cfg) {
  return 10.0 * std::log10(static_cast<double>(cfg.n_ports)) + cfg.coupler_excess_db +
         2.0 * cfg.circulator_loss_db;
}

struct PortInput {
  int port = 0;
  OpticalEnvelope envelope;
};

// Star-coupler broadcast: every input reaches every output port (its own
// included). Same-wavelength inputs are power-summed; other wavelengths stay
// as separate tracks. Result is indexed by output port.
inline std::vector<std::vector<OpticalEnvelope>> remote_node_combine(
    const std::vector<PortInput>& inputs, const RemoteNodeConfig& cfg) {
  if (cfg.n_ports < 2) throw std::invalid_argument("remote_node_combine: n_ports must be >= 2");
  if (cfg.circulator_loss_db < 0.0 || cfg.coupler_excess_db < 0.0)
    throw std::invalid_argument("remote_node_combine: losses must be non-negative");

  std::vector<bool> used(static_cast<std::size_t>(cfg.n_ports), false);
  for (const auto& in : inputs) {
    if (in.port < 0 || in.port >= cfg.n_ports)
      throw std::invalid_argument("remote_node_combine: port out of range");
    if (used[static_cast<std::size_t>(in.port)])
      throw std::invalid_argument("remote_node_combine: duplicate input port");
    used[static_cast<std::size_t>(in.port)] = true;
  }

  const double gain = std::pow(10.0, -remote_node_path_loss_db(cfg) / 10.0);
  std::vector<OpticalEnvelope> tracks;
  for (const auto& in : inputs) {
    OpticalEnvelope scaled = in.envelope;
    for (double& v : scaled.power_mw.samples) v *= gain;

    auto same = std::find_if(tracks.begin(), tracks.end(), [&](const OpticalEnvelope& t) {
      return std::abs(t.wavelength_nm - scaled.wavelength_nm) < 1e-9;
    });
    if (same == tracks.end()) {
      tracks.push_back(std::move(scaled));
      continue;
    }
    if (same->power_mw.size() != scaled.power_mw.size() ||
        same->power_mw.sample_rate != scaled.power_mw.sample_rate)
      throw std::invalid_argument("remote_node_combine: co-wavelength inputs on different grids");
    for (std::size_t i = 0; i < scaled.power_mw.size(); ++i)
      same->power_mw.samples[i] += scaled.power_mw.samples[i];
  }
  return std::vector<std::vector<OpticalEnvelope>>(static_cast<std::size_t>(cfg.n_ports), tracks);
}

}  // namespace pncpon
