#pragma once

// Experiment configuration: INI-style key = value with [section] headers.
// Every key must be known; a typo in a physics parameter is an error, not a
// silently ignored line.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pncpon/link.hpp"
#include "pncpon/topology_budget.hpp"

namespace pncpon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kExperiments[] = {"fig3", "fig4", "budget", "capacity", "calibrate"};

struct Fig3Sweep {
  double power_min_dbm = -26.0;
  double power_max_dbm = -12.0;
  double power_step_db = 0.5;
};

struct Fig4Sweep {
  int misalignment_steps = 11;
  double misalignment_span_bits = 1.0;  // sweep covers [0, span] bit periods
};

struct SensitivitySearch {
  double target_ber = 1e-9;
  double tol_db = 0.05;
  PowerBracket bracket{};
};

struct BudgetSweep {
  std::vector<int> n_ports{8, 16, 32, 64};
  double circulator_loss_db = 1.0;
  double coupler_excess_db = 0.0;
  double fbg_loss_db = 0.0;
  double olt_amp_gain_db = 0.0;
};

struct CalibrationTargets {
  double baseline_dbm = -21.0;  // ONU2 without PNC
  double penalty_db = 3.0;      // ONU2 with PNC minus baseline
  double gap_db = 2.0;          // ONU1 minus ONU2, both with PNC
  bool fit_rbs = true;          // false drops the gap anchor
  int max_iterations = 8;
  double rel_tol = 0.005;
  double thermal_min = 1e-13, thermal_max = 1e-9;
  double rise_rx_min = 0.0, rise_rx_max = 1.0;
  double rbs_weight_min = 0.0, rbs_weight_max = 1e4;
};

struct ExperimentConfig {
  std::string experiment;  // optional in the file; the CLI argument wins if both are set
  std::uint64_t seed = 1;
  int workers = 1;

  LinkConfig link{};  // self/peer/pnc are overwritten per curve
  OnuSide onu1{1552.00, 10.0};
  OnuSide onu2{1548.73, 2.0};

  Fig3Sweep fig3{};
  Fig4Sweep fig4{};
  SensitivitySearch search{};
  BudgetSweep budget{};
  CalibrationTargets calibrate{};

  // Link with `receiver_onu` (1 or 2) detecting the other ONU.
  LinkConfig onu_link(int receiver_onu, bool pnc) const {
    LinkConfig c = link;
    c.self = receiver_onu == 1 ? onu1 : onu2;
    c.peer = receiver_onu == 1 ? onu2 : onu1;
    c.pnc = pnc;
    return c;
  }

  void validate() const;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) throw ConfigError(key + ": not a number: '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v{};
  const auto* end = s.data() + s.size();
  int base = 10;
  const char* begin = s.data();
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    begin += 2;
  }
  const auto r = std::from_chars(begin, end, v, base);
  if (r.ec != std::errc{} || r.ptr != end) throw ConfigError(key + ": not an integer: '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + s + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(key + ": empty list element");
    out.push_back(parse_int<int>(key, item.substr(b, e - b + 1)));
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::string path() const { return section + "." + key; }
};

template <class Access>
Field real_field(std::string section, std::string key, Access access) {
  const std::string path = section + "." + key;
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) {
            return format_double(access(const_cast<ExperimentConfig&>(c)));
          },
          [access, path](ExperimentConfig& c, const std::string& s) { access(c) = parse_double(path, s); }};
}

template <class Int, class Access>
Field int_field(std::string section, std::string key, Access access) {
  const std::string path = section + "." + key;
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) {
            return std::to_string(access(const_cast<ExperimentConfig&>(c)));
          },
          [access, path](ExperimentConfig& c, const std::string& s) {
            access(c) = parse_int<Int>(path, s);
          }};
}

template <class Access>
Field bool_field(std::string section, std::string key, Access access) {
  const std::string path = section + "." + key;
  return {std::move(section), std::move(key),
          [access](const ExperimentConfig& c) {
            return std::string(access(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
          },
          [access, path](ExperimentConfig& c, const std::string& s) { access(c) = parse_bool(path, s); }};
}

#define PNCPON_REAL(sec, key, expr) real_field(sec, key, [](ExperimentConfig& c) -> double& { return expr; })
#define PNCPON_INT(T, sec, key, expr) int_field<T>(sec, key, [](ExperimentConfig& c) -> T& { return expr; })
#define PNCPON_BOOL(sec, key, expr) bool_field(sec, key, [](ExperimentConfig& c) -> bool& { return expr; })

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"run", "experiment", [](const ExperimentConfig& c) { return c.experiment; },
                 [](ExperimentConfig& c, const std::string& s) { c.experiment = s; }});
    f.push_back(PNCPON_INT(std::uint64_t, "run", "seed", c.seed));
    f.push_back(PNCPON_INT(int, "run", "workers", c.workers));

    f.push_back(PNCPON_REAL("link", "bit_rate", c.link.bit_rate));
    f.push_back(PNCPON_INT(std::size_t, "link", "samples_per_bit", c.link.samples_per_bit));
    f.push_back(PNCPON_INT(std::size_t, "link", "prbs_periods", c.link.prbs_periods));
    f.push_back(PNCPON_INT(std::uint8_t, "link", "prbs_seed", c.link.prbs_seed));
    f.push_back(PNCPON_INT(std::size_t, "link", "peer_bit_offset", c.link.peer_bit_offset));
    f.push_back(PNCPON_REAL("link", "rise_fraction_tx", c.link.rise_fraction_tx));
    f.push_back(PNCPON_REAL("link", "rise_fraction_rx", c.link.rise_fraction_rx));
    f.push_back(PNCPON_REAL("link", "extinction_ratio_db", c.link.extinction_ratio_db));
    f.push_back(PNCPON_REAL("link", "launch_power_dbm", c.link.launch_power_dbm));
    f.push_back(PNCPON_REAL("link", "onu1_wavelength_nm", c.onu1.wavelength_nm));
    f.push_back(PNCPON_REAL("link", "onu1_fiber_km", c.onu1.fiber_km));
    f.push_back(PNCPON_REAL("link", "onu2_wavelength_nm", c.onu2.wavelength_nm));
    f.push_back(PNCPON_REAL("link", "onu2_fiber_km", c.onu2.fiber_km));
    f.push_back(PNCPON_REAL("link", "atten_db_per_km", c.link.atten_db_per_km));
    f.push_back(PNCPON_REAL("link", "rbs_return_db_max", c.link.rbs_return_db_max));
    f.push_back(PNCPON_REAL("link", "group_delay_us_per_km", c.link.group_delay_us_per_km));
    f.push_back(PNCPON_REAL("link", "rn_circulator_loss_db", c.link.remote_node.circulator_loss_db));
    f.push_back(PNCPON_REAL("link", "rn_coupler_excess_db", c.link.remote_node.coupler_excess_db));
    f.push_back(PNCPON_INT(long, "link", "copy_offset_samples", c.link.copy_offset_samples));
    f.push_back(PNCPON_REAL("link", "search_window_bits", c.link.search_window_bits));
    f.push_back(PNCPON_INT(int, "link", "phase_scan_points", c.link.phase_scan_points));

    f.push_back(PNCPON_REAL("receiver", "responsivity", c.link.receiver.responsivity));
    f.push_back(PNCPON_REAL("receiver", "thermal_noise_a_per_rthz", c.link.receiver.thermal_noise_a_per_rthz));
    f.push_back(PNCPON_BOOL("receiver", "shot_noise", c.link.receiver.shot_noise_enabled));
    f.push_back(PNCPON_REAL("receiver", "rbs_beat_weight", c.link.receiver.rbs_beat_weight));
    f.push_back(PNCPON_REAL("receiver", "lpf_cutoff_hz", c.link.receiver.lpf_cutoff_hz));
    f.push_back(PNCPON_INT(int, "receiver", "lpf_order", c.link.receiver.lpf_order));
    f.push_back(PNCPON_REAL("receiver", "beat_guard_hz", c.link.receiver.beat_guard_hz));

    f.push_back(PNCPON_REAL("search", "target_ber", c.search.target_ber));
    f.push_back(PNCPON_REAL("search", "tol_db", c.search.tol_db));
    f.push_back(PNCPON_REAL("search", "bracket_min_dbm", c.search.bracket.lo_dbm));
    f.push_back(PNCPON_REAL("search", "bracket_max_dbm", c.search.bracket.hi_dbm));

    f.push_back(PNCPON_REAL("fig3", "power_min_dbm", c.fig3.power_min_dbm));
    f.push_back(PNCPON_REAL("fig3", "power_max_dbm", c.fig3.power_max_dbm));
    f.push_back(PNCPON_REAL("fig3", "power_step_db", c.fig3.power_step_db));

    f.push_back(PNCPON_INT(int, "fig4", "misalignment_steps", c.fig4.misalignment_steps));
    f.push_back(PNCPON_REAL("fig4", "misalignment_span_bits", c.fig4.misalignment_span_bits));

    f.push_back({"budget", "n_ports",
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.budget.n_ports.size(); ++i)
                     s += (i ? "," : "") + std::to_string(c.budget.n_ports[i]);
                   return s;
                 },
                 [](ExperimentConfig& c, const std::string& s) {
                   c.budget.n_ports = parse_int_list("budget.n_ports", s);
                 }});
    f.push_back(PNCPON_REAL("budget", "circulator_loss_db", c.budget.circulator_loss_db));
    f.push_back(PNCPON_REAL("budget", "coupler_excess_db", c.budget.coupler_excess_db));
    f.push_back(PNCPON_REAL("budget", "fbg_loss_db", c.budget.fbg_loss_db));
    f.push_back(PNCPON_REAL("budget", "olt_amp_gain_db", c.budget.olt_amp_gain_db));

    f.push_back(PNCPON_REAL("calibrate", "target_baseline_dbm", c.calibrate.baseline_dbm));
    f.push_back(PNCPON_REAL("calibrate", "target_penalty_db", c.calibrate.penalty_db));
    f.push_back(PNCPON_REAL("calibrate", "target_gap_db", c.calibrate.gap_db));
    f.push_back(PNCPON_BOOL("calibrate", "fit_rbs", c.calibrate.fit_rbs));
    f.push_back(PNCPON_INT(int, "calibrate", "max_iterations", c.calibrate.max_iterations));
    f.push_back(PNCPON_REAL("calibrate", "rel_tol", c.calibrate.rel_tol));
    f.push_back(PNCPON_REAL("calibrate", "thermal_min", c.calibrate.thermal_min));
    f.push_back(PNCPON_REAL("calibrate", "thermal_max", c.calibrate.thermal_max));
    f.push_back(PNCPON_REAL("calibrate", "rise_rx_min", c.calibrate.rise_rx_min));
    f.push_back(PNCPON_REAL("calibrate", "rise_rx_max", c.calibrate.rise_rx_max));
    f.push_back(PNCPON_REAL("calibrate", "rbs_weight_min", c.calibrate.rbs_weight_min));
    f.push_back(PNCPON_REAL("calibrate", "rbs_weight_max", c.calibrate.rbs_weight_max));
    return f;
  }();
  return table;
}

#undef PNCPON_REAL
#undef PNCPON_INT
#undef PNCPON_BOOL

}  // namespace detail

inline void ExperimentConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  if (!experiment.empty()) {
    bool known = false;
    for (const char* e : kExperiments) known = known || experiment == e;
    if (!known) throw ConfigError("run.experiment: unknown experiment '" + experiment + "'");
  }
  if (workers < 1) throw ConfigError("run.workers must be >= 1");
  positive("link.bit_rate", link.bit_rate);
  if (link.samples_per_bit < 8 || link.samples_per_bit % 2 != 0)
    throw ConfigError("link.samples_per_bit must be even and >= 8");
  if (link.prbs_periods < 1) throw ConfigError("link.prbs_periods must be >= 1");
  if ((link.prbs_seed & 0x7f) == 0 || link.prbs_seed > 0x7f)
    throw ConfigError("link.prbs_seed must be a nonzero 7-bit state");
  if (link.rise_fraction_tx < 0.0 || link.rise_fraction_tx > 1.0)
    throw ConfigError("link.rise_fraction_tx must lie in [0, 1]");
  if (link.rise_fraction_rx < 0.0 || link.rise_fraction_rx > 1.0)
    throw ConfigError("link.rise_fraction_rx must lie in [0, 1]");
  positive("link.extinction_ratio_db", link.extinction_ratio_db);
  for (const OnuSide* o : {&onu1, &onu2}) {
    positive("link.onu*_fiber_km", o->fiber_km);
    if (o->wavelength_nm < kVpnBandMinNm || o->wavelength_nm > kVpnBandMaxNm)
      throw ConfigError("link.onu*_wavelength_nm must lie in the 1530-1565 nm band");
  }
  positive("link.atten_db_per_km", link.atten_db_per_km);
  positive("link.group_delay_us_per_km", link.group_delay_us_per_km);
  if (link.remote_node.circulator_loss_db < 0.0 || link.remote_node.coupler_excess_db < 0.0)
    throw ConfigError("link.rn_* losses must be non-negative");
  positive("link.search_window_bits", link.search_window_bits);
  if (link.phase_scan_points < 1) throw ConfigError("link.phase_scan_points must be >= 1");

  positive("receiver.responsivity", link.receiver.responsivity);
  if (link.receiver.thermal_noise_a_per_rthz < 0.0)
    throw ConfigError("receiver.thermal_noise_a_per_rthz must be non-negative");
  if (link.receiver.rbs_beat_weight < 0.0) throw ConfigError("receiver.rbs_beat_weight must be non-negative");
  positive("receiver.lpf_cutoff_hz", link.receiver.lpf_cutoff_hz);
  if (link.receiver.lpf_order < 1 || link.receiver.lpf_order > 8)
    throw ConfigError("receiver.lpf_order must lie in [1, 8]");
  if (2.0 * link.receiver.lpf_cutoff_hz >= link.sample_rate())
    throw ConfigError("receiver.lpf_cutoff_hz must be below half the sample rate");
  positive("receiver.beat_guard_hz", link.receiver.beat_guard_hz);

  if (!(search.target_ber > 0.0 && search.target_ber < 0.5))
    throw ConfigError("search.target_ber must lie in (0, 0.5)");
  positive("search.tol_db", search.tol_db);
  if (!(search.bracket.lo_dbm < search.bracket.hi_dbm))
    throw ConfigError("search.bracket_min_dbm must be below bracket_max_dbm");

  positive("fig3.power_step_db", fig3.power_step_db);
  if (!(fig3.power_min_dbm <= fig3.power_max_dbm))
    throw ConfigError("fig3 power range is empty");
  if (fig4.misalignment_steps < 1) throw ConfigError("fig4.misalignment_steps must be >= 1");
  if (fig4.misalignment_span_bits < 0.0) throw ConfigError("fig4.misalignment_span_bits must be >= 0");

  if (budget.n_ports.empty()) throw ConfigError("budget.n_ports must not be empty");
  for (int n : budget.n_ports)
    if (n < 2) throw ConfigError("budget.n_ports entries must be >= 2");

  if (calibrate.max_iterations < 1) throw ConfigError("calibrate.max_iterations must be >= 1");
  positive("calibrate.rel_tol", calibrate.rel_tol);
  if (!(calibrate.thermal_min > 0.0 && calibrate.thermal_min < calibrate.thermal_max))
    throw ConfigError("calibrate thermal bounds are invalid");
  if (!(calibrate.rise_rx_min >= 0.0 && calibrate.rise_rx_min < calibrate.rise_rx_max &&
        calibrate.rise_rx_max <= 1.0))
    throw ConfigError("calibrate rise_rx bounds are invalid");
  if (!(calibrate.rbs_weight_min >= 0.0 && calibrate.rbs_weight_min < calibrate.rbs_weight_max))
    throw ConfigError("calibrate rbs_weight bounds are invalid");
}

inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  std::map<std::string, const detail::Field*> by_path;
  for (const auto& f : detail::fields()) by_path[f.path()] = &f;

  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    // A bare `key = value` before the first header parses as a valued leaf;
    // an empty [section] is a leaf without data and is harmless.
    if (!body.data().empty()) throw ConfigError("config: key '" + section + "' is outside any [section]");
    for (const auto& [key, value] : body) {
      const std::string path = section + "." + key;
      const auto it = by_path.find(path);
      if (it == by_path.end()) throw ConfigError("config: unknown key '" + path + "'");
      it->second->set(cfg, value.get_value<std::string>());
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(in);
}

// Canonical text form: every known key in table order. Round-trips through
// parse_config.
inline std::string to_ini(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : detail::fields()) {
    const std::string v = f.get(cfg);
    if (f.key == "experiment" && v.empty()) continue;
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + v + "\n";
  }
  return out;
}

// 64-bit FNV-1a over the canonical form minus the run section, so the hash
// identifies the physics and sweep settings independently of seed and
// worker count.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.experiment.clear();
  c.seed = 0;
  c.workers = 1;
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : to_ini(c)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace pncpon
