#pragma once

// End-to-end inter-ONU link: two ONUs send PRBS-7 NRZ through their
// distribution fibers into the remote node, the superposed light loops back,
// and one ONU (the "self" side) detects and decodes the other's data.
//
// Chain order at the receiver: photodetect (inverted) -> combiner with the
// attenuated own copy -> low-pass -> decision.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pncpon/optics.hpp"
#include "pncpon/receiver.hpp"
#include "pncpon/waveform.hpp"

namespace pncpon {

struct OnuSide {
  double wavelength_nm = 1548.73;
  double fiber_km = 2.0;
};

struct LinkConfig {
  double bit_rate = 2.5e9;
  std::size_t samples_per_bit = 16;
  std::size_t prbs_periods = 1024;  // record length in PRBS-7 periods
  std::uint8_t prbs_seed = 0x7f;
  std::size_t peer_bit_offset = 64;  // peer pattern = self pattern rotated by this many bits

  // The buffered copy keeps the transmitter's edges; the looped-back light
  // carries the slower edges left by E-O-E conversion.
  double rise_fraction_tx = 0.20;
  double rise_fraction_rx = calibrated::kRiseFractionRx;
  double extinction_ratio_db = 10.0;
  double launch_power_dbm = 0.0;

  OnuSide self{1548.73, 2.0};
  OnuSide peer{1552.00, 10.0};
  double atten_db_per_km = 0.2;
  double rbs_return_db_max = -31.0;
  double group_delay_us_per_km = 4.9;
  RemoteNodeConfig remote_node{2, 1.0, 0.0};
  ReceiverParams receiver{};

  bool pnc = true;                  // false: half-duplex, only the peer transmits
  double misalignment_s = 0.0;      // peer delay relative to self at the remote node
  long copy_offset_samples = 3;     // residual buffer misalignment left for the decoder to find
  double search_window_bits = 2.0;  // decoder lag search, +/- bit periods
  int phase_scan_points = 16;

  FiberSpan span(double km) const { return {km, atten_db_per_km, rbs_return_db_max, group_delay_us_per_km}; }
  double sample_rate() const { return bit_rate * static_cast<double>(samples_per_bit); }
  std::size_t n_bits() const { return prbs_periods * kPrbs7Period; }
};

// Receiver ONU on the 2 km fiber at 1548.73 nm, peer on 10 km at 1552.00 nm.
inline LinkConfig onu2_link(bool pnc) {
  LinkConfig c;
  c.self = {1548.73, 2.0};
  c.peer = {1552.00, 10.0};
  c.pnc = pnc;
  return c;
}

// The mirror image: receiver on the 10 km fiber.
inline LinkConfig onu1_link(bool pnc) {
  LinkConfig c;
  c.self = {1552.00, 10.0};
  c.peer = {1548.73, 2.0};
  c.pnc = pnc;
  return c;
}

struct LinkMeasurement {
  EyeStats eye;
  double ber = 0.0;  // Gaussian extrapolation from eye.q_factor
  double decode_gain = 0.0;
  double decode_lag_s = 0.0;
  bool decode_failed = false;
  SampledWaveform decision_signal;  // filtered, non-inverted, timed to the peer bits
};

// Builds the noiseless optical tracks once; each measure() call rescales them
// to the requested received power (the EDFA + VOA stage) and runs the noisy
// receiver with its own seed.
class LinkSimulator {
 public:
  explicit LinkSimulator(LinkConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.samples_per_bit < 8 || cfg_.samples_per_bit % 2 != 0)
      throw std::invalid_argument("link: samples_per_bit must be even and >= 8");
    if (cfg_.prbs_periods == 0) throw std::invalid_argument("link: prbs_periods must be >= 1");

    self_bits_ = prbs7(cfg_.prbs_seed, cfg_.n_bits());
    peer_bits_ = rotate_bits(self_bits_, cfg_.peer_bit_offset);

    const auto shape = [&](const BitSequence& b, double rise) {
      return nrz_shape(b, cfg_.samples_per_bit, rise, cfg_.bit_rate, Boundary::kPeriodic);
    };
    own_copy_ = shape(self_bits_, cfg_.rise_fraction_tx);
    own_copy_ = shift_samples(own_copy_, -static_cast<double>(cfg_.copy_offset_samples));

    SampledWaveform peer_drive = shape(peer_bits_, cfg_.rise_fraction_rx);
    if (cfg_.misalignment_s != 0.0)
      peer_drive = time_shift(peer_drive, cfg_.misalignment_s, Boundary::kPeriodic);
    const OpticalEnvelope peer_tx =
        modulate(peer_drive, cfg_.peer.wavelength_nm, cfg_.launch_power_dbm, cfg_.extinction_ratio_db);

    std::vector<PortInput> rn_inputs;
    rn_inputs.push_back({1, propagate(peer_tx, cfg_.span(cfg_.peer.fiber_km)).out});
    if (cfg_.pnc) {
      const OpticalEnvelope self_tx =
          modulate(shape(self_bits_, cfg_.rise_fraction_rx), cfg_.self.wavelength_nm,
                   cfg_.launch_power_dbm, cfg_.extinction_ratio_db);
      const Propagated up = propagate(self_tx, cfg_.span(cfg_.self.fiber_km));
      rn_inputs.push_back({0, up.out});
      rbs_.push_back({cfg_.self.wavelength_nm, up.rbs_power_mw});
    }

    const auto at_self_port = remote_node_combine(rn_inputs, cfg_.remote_node)[0];
    for (const auto& t : at_self_port) {
      OpticalEnvelope down = propagate(t, cfg_.span(cfg_.self.fiber_km)).out;
      // Receiver frame: fiber latency is taken out by ranging, only the
      // explicit misalignment and buffer offset remain.
      down.power_mw.t0 = 0.0;
      if (std::abs(down.wavelength_nm - cfg_.peer.wavelength_nm) < 1e-9) peer_index_ = tracks_.size();
      tracks_.push_back(std::move(down));
    }
    peer_mean_mw_ = tracks_[peer_index_].mean_power_mw();
    if (cfg_.pnc) train_decoder();
  }

  const LinkConfig& config() const { return cfg_; }
  const BitSequence& peer_bits() const { return peer_bits_; }
  const BitSequence& self_bits() const { return self_bits_; }
  const SampledWaveform& own_copy() const { return own_copy_; }

  // Optical tracks at the photodiode scaled so the peer's mean power is
  // received_power_dbm; backscatter is scaled by the same factor.
  std::vector<OpticalEnvelope> scaled_tracks(double received_power_dbm,
                                             std::vector<RbsInput>* rbs_out = nullptr) const {
    const double g = dbm_to_mw(received_power_dbm) / peer_mean_mw_;
    std::vector<OpticalEnvelope> out = tracks_;
    for (auto& t : out)
      for (double& v : t.power_mw.samples) v *= g;
    if (rbs_out) {
      *rbs_out = rbs_;
      for (auto& b : *rbs_out) b.power_mw *= g;
    }
    return out;
  }

  SampledWaveform received(double received_power_dbm, std::uint64_t seed) const {
    std::vector<RbsInput> rbs;
    const auto tracks = scaled_tracks(received_power_dbm, &rbs);
    return photodetect(tracks, rbs, cfg_.receiver, seed);
  }

  // Received waveform with the own signal cancelled; without PNC this is
  // just the received waveform.
  SampledWaveform decoded(double received_power_dbm, std::uint64_t seed) const {
    SampledWaveform w = received(received_power_dbm, seed);
    if (!cfg_.pnc) return w;
    const double g = gain_for(received_power_dbm);
    for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] += g * cancel_unit_[i];
    return w;
  }

  // Attenuator setting found with the peer silent, and the buffer lag it locked to.
  double decode_gain(double received_power_dbm) const { return gain_for(received_power_dbm); }
  double decode_lag_s() const { return lag_s_; }
  bool decoder_locked() const { return locked_; }

  LinkMeasurement measure(double received_power_dbm, std::uint64_t seed) const {
    LinkMeasurement m;
    if (cfg_.pnc) {
      if (!locked_) {
        // No lock on the own signal: the error detector sees garbage.
        m.decode_failed = true;
        m.ber = 0.5;
        return m;
      }
      m.decode_gain = gain_for(received_power_dbm);
      m.decode_lag_s = lag_s_;
    }
    SampledWaveform combined = decoded(received_power_dbm, seed);
    const BesselLowpass filter(cfg_.receiver.lpf_order, cfg_.receiver.lpf_cutoff_hz, cfg_.sample_rate());
    SampledWaveform out = combined;
    out.samples = filter.apply(combined.samples, Boundary::kPeriodic);
    for (double& v : out.samples) v = -v;  // error detector set for inverted data
    out.t0 = -(cfg_.misalignment_s + filter.group_delay_s());

    m.eye = best_phase_eye(out, peer_bits_, cfg_.bit_rate, cfg_.phase_scan_points);
    m.ber = ber_from_q(m.eye.q_factor);
    m.decision_signal = std::move(out);
    return m;
  }

  double ber(double received_power_dbm, std::uint64_t seed) const {
    return measure(received_power_dbm, seed).ber;
  }

 private:
  double gain_for(double received_power_dbm) const {
    return unit_gain_ * dbm_to_mw(received_power_dbm) / peer_mean_mw_;
  }

  // The attenuator is set once while the peer is silent, on the noiseless
  // self-signal at unit scale. Training on live traffic would bias the gain
  // by the self/peer pattern correlation.
  void train_decoder() {
    std::vector<OpticalEnvelope> self_only;
    for (std::size_t i = 0; i < tracks_.size(); ++i)
      if (i != peer_index_) self_only.push_back(tracks_[i]);
    const SampledWaveform rx = photodetect(self_only, {}, ReceiverParams::noiseless(), 0);
    DecodeResult d;
    try {
      d = pnc_decode(rx, own_copy_, cfg_.search_window_bits / cfg_.bit_rate);
    } catch (const DecodeError&) {
      return;
    }
    locked_ = true;
    unit_gain_ = d.gain;
    lag_s_ = d.lag_s;
    cancel_unit_ = d.decoded.samples;
    for (std::size_t i = 0; i < cancel_unit_.size(); ++i)
      cancel_unit_[i] = (cancel_unit_[i] - rx.samples[i]) / d.gain;
  }

  static SampledWaveform shift_samples(const SampledWaveform& w, double samples) {
    if (samples == 0.0) return w;
    return time_shift(w, samples / w.sample_rate, Boundary::kPeriodic);
  }

  LinkConfig cfg_;
  BitSequence self_bits_, peer_bits_;
  SampledWaveform own_copy_;
  std::vector<OpticalEnvelope> tracks_;
  std::vector<RbsInput> rbs_;
  std::size_t peer_index_ = 0;
  double peer_mean_mw_ = 0.0;
  bool locked_ = false;
  double unit_gain_ = 0.0, lag_s_ = 0.0;
  std::vector<double> cancel_unit_;  // AC-coupled own copy at the trained lag
};

struct CancellationReport {
  double residual_ratio = 0.0;  // residual self energy / self energy, before the LPF
  ErrorCount errors;            // hard decisions at the best phase and balanced threshold
  double gain = 0.0;
  double lag_s = 0.0;
};

// Compares the decoded PNC signal with what the receiver would see if the
// self ONU were silent. Both runs use cfg.receiver and the same seed, so with
// noise disabled the difference is exactly the uncancelled self-signal.
inline CancellationReport cancellation_report(LinkConfig cfg, double received_power_dbm,
                                              std::uint64_t seed = 1) {
  cfg.pnc = true;
  LinkConfig solo = cfg;
  solo.pnc = false;
  const LinkSimulator with(cfg), without(solo);

  if (!with.decoder_locked()) throw DecodeError("cancellation_report: decoder did not lock");
  const SampledWaveform rx = with.received(received_power_dbm, seed);
  const SampledWaveform dec = with.decoded(received_power_dbm, seed);
  const SampledWaveform peer_only = without.received(received_power_dbm, seed);
  CancellationReport r;
  r.gain = with.decode_gain(received_power_dbm);
  r.lag_s = with.decode_lag_s();

  const double m_rx = mean(rx.samples), m_dec = mean(dec.samples), m_peer = mean(peer_only.samples);
  double resid = 0.0, self = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double p = peer_only.samples[i] - m_peer;
    const double s = (rx.samples[i] - m_rx) - p;
    const double e = (dec.samples[i] - m_dec) - p;
    resid += e * e;
    self += s * s;
  }
  r.residual_ratio = resid / self;

  const LinkMeasurement m = with.measure(received_power_dbm, seed);
  r.errors = count_errors(m.decision_signal, with.peer_bits(), cfg.bit_rate, m.eye.optimal_threshold(),
                          m.eye.sampling_phase);
  return r;
}

inline double required_power(const LinkConfig& cfg, std::uint64_t seed, double target_ber = 1e-9,
                             double tol_db = 0.05, PowerBracket bracket = {}) {
  const LinkSimulator sim(cfg);
  return required_power([&](double p) { return sim.ber(p, seed); }, target_ber, tol_db, bracket);
}

}  // namespace pncpon
