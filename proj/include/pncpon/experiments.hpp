#pragma once

// Experiment runners behind the pncpon CLI. Each runner is a pure function
// of (config, seed); sweep points run on a bounded worker pool and merge by
// index, so the CSV bytes do not depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pncpon/config.hpp"
#include "pncpon/link.hpp"
#include "pncpon/mac.hpp"
#include "pncpon/topology_budget.hpp"

namespace pncpon {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitCalibrationFailed = 3;
inline constexpr int kExitBracketFailure = 4;

// Runs f(0..n-1) on at most `workers` threads; results land at their index.
// The first exception by index is rethrown after all workers finish.
template <class F>
auto parallel_map(std::size_t n, int workers, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (k <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> comments;  // written as "# ..." before the header
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const {
    std::string out;
    for (const auto& c : comments) out += "# " + c + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
      out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

inline std::string provenance_comment(const ExperimentConfig& cfg) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "config_hash=%016" PRIx64 " seed=%" PRIu64, config_hash(cfg), cfg.seed);
  return buf;
}

// ---- fig3: BER versus received power ---------------------------------------

struct Fig3Curve {
  std::string label;
  int receiver_onu;
  bool pnc;
};

inline const std::vector<Fig3Curve>& fig3_curves() {
  static const std::vector<Fig3Curve> curves{{"ONU2_PNC", 2, true},
                                             {"ONU2_noPNC", 2, false},
                                             {"ONU1_PNC", 1, true},
                                             {"ONU1_noPNC", 1, false}};
  return curves;
}

struct Fig3Row {
  std::string label;
  double power_dbm = 0.0;
  double ber = 0.0;
  double log10_ber = 0.0;
};

inline std::vector<double> fig3_powers(const Fig3Sweep& s) {
  std::vector<double> p;
  const auto n = static_cast<std::size_t>(std::floor((s.power_max_dbm - s.power_min_dbm) / s.power_step_db + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) p.push_back(s.power_min_dbm + static_cast<double>(i) * s.power_step_db);
  return p;
}

// One noise seed per curve (seed xor curve index): every power level of a
// curve sees the same noise realisation, which keeps the curve monotone.
inline std::vector<Fig3Row> run_fig3(const ExperimentConfig& cfg, int workers) {
  const auto& curves = fig3_curves();
  const auto powers = fig3_powers(cfg.fig3);
  const auto sims = parallel_map(curves.size(), workers, [&](std::size_t c) {
    return LinkSimulator(cfg.onu_link(curves[c].receiver_onu, curves[c].pnc));
  });
  const std::size_t np = powers.size();
  return parallel_map(curves.size() * np, workers, [&](std::size_t i) {
    const std::size_t c = i / np;
    const double p = powers[i % np];
    const LinkMeasurement m = sims[c].measure(p, cfg.seed ^ c);
    double lb = m.decode_failed ? std::log10(m.ber) : log10_ber_from_q(m.eye.q_factor);
    lb = std::max(lb, -300.0);
    return Fig3Row{curves[c].label, p, m.ber, lb};
  });
}

inline CsvTable fig3_table(const ExperimentConfig& cfg, const std::vector<Fig3Row>& rows) {
  CsvTable t;
  t.comments.push_back(provenance_comment(cfg));
  t.header = {"label", "power_dbm", "ber", "log10_ber"};
  for (const auto& r : rows)
    t.rows.push_back({r.label, fmt("%.2f", r.power_dbm), fmt("%.6e", r.ber), fmt("%.4f", r.log10_ber)});
  return t;
}

// ---- fig4: required power versus ONU misalignment --------------------------

struct Fig4Row {
  double misalignment_ps = 0.0;
  std::optional<double> required_power_dbm;
  std::string status;  // "ok" or "bracket_failure"
};

inline double fig4_misalignment_s(const ExperimentConfig& cfg, int k) {
  const int n = cfg.fig4.misalignment_steps;
  if (n <= 1) return 0.0;
  return static_cast<double>(k) / (n - 1) * cfg.fig4.misalignment_span_bits / cfg.link.bit_rate;
}

inline std::vector<Fig4Row> run_fig4(const ExperimentConfig& cfg, int workers) {
  const auto n = static_cast<std::size_t>(cfg.fig4.misalignment_steps);
  return parallel_map(n, workers, [&](std::size_t k) {
    LinkConfig lc = cfg.onu_link(2, true);
    lc.misalignment_s = fig4_misalignment_s(cfg, static_cast<int>(k));
    Fig4Row row;
    row.misalignment_ps = lc.misalignment_s * 1e12;
    try {
      row.required_power_dbm =
          required_power(lc, cfg.seed ^ k, cfg.search.target_ber, cfg.search.tol_db, cfg.search.bracket);
      row.status = "ok";
    } catch (const BracketError&) {
      row.status = "bracket_failure";
    }
    return row;
  });
}

inline CsvTable fig4_table(const ExperimentConfig& cfg, const std::vector<Fig4Row>& rows) {
  CsvTable t;
  t.comments.push_back(provenance_comment(cfg));
  t.header = {"misalignment_ps", "required_power_dbm", "status"};
  for (const auto& r : rows)
    t.rows.push_back({fmt("%.1f", r.misalignment_ps),
                      r.required_power_dbm ? fmt("%.3f", *r.required_power_dbm) : std::string(),
                      r.status});
  return t;
}

// ---- budget: RN insertion loss per variant and port count ------------------

struct BudgetRow {
  RnVariant variant;
  int n_ports = 0;
  double loss_db = 0.0;
  double reduction_vs_fbg_db = 0.0;
};

inline RnArchitecture budget_arch(const ExperimentConfig& cfg, RnVariant v, int n) {
  RnArchitecture a;
  a.variant = v;
  a.n_ports = n;
  a.circulator_loss_db = cfg.budget.circulator_loss_db;
  a.coupler_excess_db = cfg.budget.coupler_excess_db;
  a.fbg_loss_db = cfg.budget.fbg_loss_db;
  a.olt_amp_gain_db = cfg.budget.olt_amp_gain_db;
  return a;
}

inline std::vector<BudgetRow> run_budget(const ExperimentConfig& cfg) {
  std::vector<int> ports = cfg.budget.n_ports;
  std::sort(ports.begin(), ports.end());
  std::vector<BudgetRow> rows;
  for (RnVariant v : kAllRnVariants) {
    for (int n : ports) {
      const double loss = rn_insertion_loss(budget_arch(cfg, v, n));
      const double fbg = rn_insertion_loss(budget_arch(cfg, RnVariant::kFbgFeederDoublePass, n));
      rows.push_back({v, n, loss, fbg - loss});
    }
  }
  return rows;
}

inline CsvTable budget_table(const ExperimentConfig& cfg, const std::vector<BudgetRow>& rows) {
  CsvTable t;
  t.comments.push_back(provenance_comment(cfg));
  t.comments.push_back("DualDistributionFiber needs " +
                       std::to_string(distribution_fibers_per_onu(RnVariant::kDualDistributionFiber)) +
                       " distribution fibers per ONU");
  t.header = {"variant", "n_ports", "loss_db", "reduction_vs_fbg_db"};
  for (const auto& r : rows)
    t.rows.push_back({std::string(to_string(r.variant)), std::to_string(r.n_ports), fmt("%.4f", r.loss_db),
                      fmt("%.4f", r.reduction_vs_fbg_db)});
  return t;
}

// ---- capacity: slot cost per exchange ---------------------------------------

struct CapacityRow {
  mac::Mode mode;
  mac::SlotCost cost;
  mac::Mode baseline;
  double gain_total_pct = 0.0;
  double gain_contended_pct = 0.0;
};

// OLT-relayed modes are compared with ConventionalViaOlt, VPN modes with
// HalfDuplexVpn; each family shares the resource its contended metric counts.
inline mac::Mode capacity_baseline(mac::Mode m) {
  return slots_per_exchange(m).vpn > 0 ? mac::Mode::kHalfDuplexVpn : mac::Mode::kConventionalViaOlt;
}

inline std::vector<CapacityRow> run_capacity() {
  std::vector<CapacityRow> rows;
  for (mac::Mode m : mac::kAllModes) {
    const mac::Mode b = capacity_baseline(m);
    rows.push_back({m, mac::slots_per_exchange(m), b,
                    mac::capacity_gain(b, m, mac::GainMetric::kTotalSlots),
                    mac::capacity_gain(b, m, mac::GainMetric::kContendedSlots)});
  }
  return rows;
}

inline CsvTable capacity_table(const ExperimentConfig& cfg, const std::vector<CapacityRow>& rows) {
  CsvTable t;
  t.comments.push_back(provenance_comment(cfg));
  t.comments.push_back("gains relative to ConventionalViaOlt (OLT modes) and HalfDuplexVpn (VPN modes)");
  t.header = {"mode", "up", "down", "vpn", "gain_total_pct", "gain_contended_pct"};
  for (const auto& r : rows)
    t.rows.push_back({std::string(mac::to_string(r.mode)), std::to_string(r.cost.up),
                      std::to_string(r.cost.down), std::to_string(r.cost.vpn), fmt("%.2f", r.gain_total_pct),
                      fmt("%.2f", r.gain_contended_pct)});
  return t;
}

// ---- calibrate: ordered 1-D fits of the free noise/rise-time parameters ------

struct AnchorReport {
  std::string anchor;
  std::string parameter;
  double target = 0.0;
  double achieved = 0.0;
  double value = 0.0;
};

struct CalibrationResult {
  ExperimentConfig calibrated;
  std::vector<AnchorReport> anchors;
  int iterations = 0;
  bool converged = false;
  std::string failed_anchor;  // empty on success
};

class AnchorUnreachable : public std::runtime_error {
 public:
  AnchorUnreachable(std::string anchor, const std::string& why)
      : std::runtime_error(anchor + ": " + why), anchor_(std::move(anchor)) {}
  const std::string& anchor() const { return anchor_; }

 private:
  std::string anchor_;
};

namespace detail {

// Sensitivity, or +inf when the link floors inside the bracket and -inf when
// it already meets the target at the bottom of it.
inline double sensitivity_or_inf(const ExperimentConfig& cfg, const LinkConfig& lc) {
  try {
    return required_power(lc, cfg.seed, cfg.search.target_ber, cfg.search.tol_db, cfg.search.bracket);
  } catch (const BracketError& e) {
    const double inf = std::numeric_limits<double>::infinity();
    return e.kind() == BracketError::Kind::kMetAtLowEnd ? -inf : inf;
  }
}

// Solves metric(x) = target for x in [lo, hi], metric increasing in x.
// Leaves `x` untouched when it already meets the target within `accept`,
// which is what makes a rerun on calibrated values a no-op.
inline double fit_1d(const std::string& anchor, double x, double lo, double hi, bool log_space,
                     double target, double accept, const std::function<double(double)>& metric) {
  if (std::abs(metric(x) - target) <= accept) return x;
  auto to = [&](double v) { return log_space ? std::log(v) : v; };
  auto from = [&](double u) { return log_space ? std::exp(u) : u; };
  double a = to(lo), b = to(hi);
  if (metric(from(a)) > target) throw AnchorUnreachable(anchor, "target below the range of the parameter");
  if (metric(from(b)) < target) throw AnchorUnreachable(anchor, "target above the range of the parameter");
  for (int it = 0; it < 40; ++it) {
    const double m = 0.5 * (a + b);
    const double v = metric(from(m));
    if (std::abs(v - target) <= accept) return from(m);
    (v > target ? b : a) = m;
    if (std::abs(b - a) <= 1e-4 * std::max(1.0, std::abs(a))) break;
  }
  const double x_fit = from(0.5 * (a + b));
  // A jump across the target (the search bracket edge, an error floor) ends
  // the bisection far from it.
  if (!(std::abs(metric(x_fit) - target) <= 4.0 * accept))
    throw AnchorUnreachable(anchor, "metric jumps across the target inside the parameter range");
  return x_fit;
}

}  // namespace detail

// Fits, in order: thermal density to the no-PNC baseline, r_rx to the PNC
// penalty, rbs_beat_weight to the ONU1-ONU2 gap. The three couple weakly
// (r_rx also shapes the baseline, the RBS weight also adds penalty), so the
// sequence repeats until a full pass leaves every parameter in place.
inline CalibrationResult run_calibrate(const ExperimentConfig& input) {
  CalibrationResult res;
  ExperimentConfig cfg = input;
  const auto& t = cfg.calibrate;
  const double accept = std::max(cfg.search.tol_db, 0.05);

  auto baseline = [&] { return detail::sensitivity_or_inf(cfg, cfg.onu_link(2, false)); };
  auto onu2 = [&] { return detail::sensitivity_or_inf(cfg, cfg.onu_link(2, true)); };
  auto onu1 = [&] { return detail::sensitivity_or_inf(cfg, cfg.onu_link(1, true)); };
  auto& rx = cfg.link.receiver;

  try {
    for (res.iterations = 1; res.iterations <= t.max_iterations; ++res.iterations) {
      const double th0 = rx.thermal_noise_a_per_rthz, r0 = cfg.link.rise_fraction_rx, w0 = rx.rbs_beat_weight;

      rx.thermal_noise_a_per_rthz =
          detail::fit_1d("baseline sensitivity", th0, t.thermal_min, t.thermal_max, true, t.baseline_dbm, accept,
                         [&](double v) {
                           rx.thermal_noise_a_per_rthz = v;
                           return baseline();
                         });
      const double base = baseline();

      cfg.link.rise_fraction_rx =
          detail::fit_1d("PNC penalty", r0, t.rise_rx_min, t.rise_rx_max, false, t.penalty_db, accept,
                         [&](double v) {
                           cfg.link.rise_fraction_rx = v;
                           return onu2() - base;
                         });

      if (t.fit_rbs) {
        rx.rbs_beat_weight =
            detail::fit_1d("ONU1-ONU2 gap", w0, t.rbs_weight_min, t.rbs_weight_max, false, t.gap_db, accept,
                           [&](double v) {
                             rx.rbs_beat_weight = v;
                             const double p2 = onu2();
                             return std::isinf(p2) ? std::numeric_limits<double>::infinity() : onu1() - p2;
                           });
      }

      auto moved = [&](double a, double b) { return std::abs(a - b) > t.rel_tol * std::max(std::abs(b), 1e-12); };
      if (!moved(rx.thermal_noise_a_per_rthz, th0) && !moved(cfg.link.rise_fraction_rx, r0) &&
          !moved(rx.rbs_beat_weight, w0)) {
        res.converged = true;
        break;
      }
    }
    res.iterations = std::min(res.iterations, t.max_iterations);
  } catch (const AnchorUnreachable& e) {
    res.failed_anchor = e.what();
  }

  const double base = baseline();
  const double p2 = onu2();
  const double p1 = onu1();
  res.anchors = {{"baseline_sensitivity_dbm", "thermal_noise_a_per_rthz", t.baseline_dbm, base,
                  rx.thermal_noise_a_per_rthz},
                 {"pnc_penalty_db", "rise_fraction_rx", t.penalty_db, p2 - base, cfg.link.rise_fraction_rx}};
  if (t.fit_rbs)
    res.anchors.push_back({"onu1_onu2_gap_db", "rbs_beat_weight", t.gap_db, p1 - p2, rx.rbs_beat_weight});
  if (res.failed_anchor.empty() && !res.converged) res.failed_anchor = "calibration did not reach a fixed point";
  cfg.experiment.clear();
  res.calibrated = cfg;
  return res;
}

inline CsvTable calibration_table(const ExperimentConfig& cfg, const CalibrationResult& r) {
  CsvTable t;
  t.comments.push_back(provenance_comment(cfg));
  t.comments.push_back("iterations=" + std::to_string(r.iterations) + " converged=" + (r.converged ? "true" : "false"));
  if (!r.failed_anchor.empty()) t.comments.push_back("failure: " + r.failed_anchor);
  t.header = {"anchor", "target", "achieved", "parameter", "value"};
  for (const auto& a : r.anchors)
    t.rows.push_back({a.anchor, fmt("%.3f", a.target), fmt("%.3f", a.achieved), a.parameter, fmt("%.6g", a.value)});
  return t;
}

// ---- dispatch ---------------------------------------------------------------

struct ExperimentOutput {
  std::map<std::string, std::string> files;  // file name -> contents
  int exit_code = kExitOk;
  std::string message;
};

inline ExperimentOutput run_experiment(const std::string& name, const ExperimentConfig& cfg, int workers) {
  ExperimentOutput out;
  if (name == "fig3") {
    out.files["fig3.csv"] = fig3_table(cfg, run_fig3(cfg, workers)).render();
  } else if (name == "fig4") {
    const auto rows = run_fig4(cfg, workers);
    out.files["fig4.csv"] = fig4_table(cfg, rows).render();
    for (const auto& r : rows) {
      if (r.status != "ok") {
        out.exit_code = kExitBracketFailure;
        out.message = "fig4: sensitivity search failed at " + fmt("%.1f", r.misalignment_ps) + " ps";
        break;
      }
    }
  } else if (name == "budget") {
    out.files["budget.csv"] = budget_table(cfg, run_budget(cfg)).render();
  } else if (name == "capacity") {
    out.files["capacity.csv"] = capacity_table(cfg, run_capacity()).render();
  } else if (name == "calibrate") {
    const CalibrationResult r = run_calibrate(cfg);
    out.files["calibration_report.csv"] = calibration_table(cfg, r).render();
    out.files["calibrated.ini"] = to_ini(r.calibrated);
    if (!r.failed_anchor.empty()) {
      out.exit_code = kExitCalibrationFailed;
      out.message = "calibrate: " + r.failed_anchor;
    }
  } else {
    throw ConfigError("unknown experiment '" + name + "'");
  }
  return out;
}

}  // namespace pncpon
