#pragma once

// Scalar dB ledger for inter-ONU paths under the competing remote-node designs.

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pncpon/optics.hpp"

namespace pncpon {

enum class RnVariant {
  kProposedCirculator,    // circulators around an (N+1)x(N+1) coupler, one split per path
  kFbgFeederDoublePass,   // FBG on the feeder reflects VPN traffic back through the splitter
  kDualDistributionFiber, // second distribution fiber per ONU carries the loop-back
  kOltLoopback,           // VPN traffic turned around (and amplified) at the OLT
};

inline constexpr RnVariant kAllRnVariants[] = {
    RnVariant::kProposedCirculator, RnVariant::kFbgFeederDoublePass,
    RnVariant::kDualDistributionFiber, RnVariant::kOltLoopback};

inline std::string_view to_string(RnVariant v) {
  switch (v) {
    case RnVariant::kProposedCirculator: return "ProposedCirculator";
    case RnVariant::kFbgFeederDoublePass: return "FbgFeederDoublePass";
    case RnVariant::kDualDistributionFiber: return "DualDistributionFiber";
    case RnVariant::kOltLoopback: return "OltLoopback";
  }
  return "?";
}

struct RnArchitecture {
  RnVariant variant = RnVariant::kProposedCirculator;
  int n_ports = 32;
  double circulator_loss_db = 1.0;
  double coupler_excess_db = 0.0;
  double fbg_loss_db = 0.0;
  double olt_amp_gain_db = 0.0;

  void validate() const {
    if (n_ports < 2) throw std::invalid_argument("RnArchitecture: n_ports must be >= 2");
    if (circulator_loss_db < 0.0 || coupler_excess_db < 0.0 || fbg_loss_db < 0.0)
      throw std::invalid_argument("RnArchitecture: losses must be non-negative");
  }
};

inline double splitting_loss_db(const RnArchitecture& a) {
  return 10.0 * std::log10(static_cast<double>(a.n_ports)) + a.coupler_excess_db;
}

inline double rn_insertion_loss(const RnArchitecture& a) {
  a.validate();
  const double split = splitting_loss_db(a);
  switch (a.variant) {
    case RnVariant::kProposedCirculator: return split + 2.0 * a.circulator_loss_db;
    case RnVariant::kFbgFeederDoublePass: return 2.0 * split + a.fbg_loss_db;
    case RnVariant::kDualDistributionFiber: return split;
    case RnVariant::kOltLoopback: return 2.0 * split - a.olt_amp_gain_db;
  }
  throw std::invalid_argument("rn_insertion_loss: unknown variant");
}

// Distribution fibers each ONU needs; the dual-fiber design pays in fiber
// count rather than in dB.
inline int distribution_fibers_per_onu(RnVariant v) {
  return v == RnVariant::kDualDistributionFiber ? 2 : 1;
}

struct BudgetEntry {
  std::string label;
  double db = 0.0;  // signed: gains positive, losses negative
};

struct LinkBudget {
  std::vector<BudgetEntry> entries;
  double total_db = 0.0;

  void add(std::string label, double db) {
    entries.push_back({std::move(label), db});
    total_db = std::accumulate(entries.begin(), entries.end(), 0.0,
                               [](double s, const BudgetEntry& e) { return s + e.db; });
  }
};

struct PathBudget {
  LinkBudget ledger;
  double received_dbm = 0.0;
  double margin_db = 0.0;
  bool feasible = true;  // margin >= 0
};

inline PathBudget path_budget(double tx_power_dbm, const std::vector<FiberSpan>& spans,
                              const RnArchitecture& arch, double rx_sensitivity_dbm) {
  PathBudget b;
  b.ledger.add("launch", tx_power_dbm);
  for (std::size_t i = 0; i < spans.size(); ++i)
    b.ledger.add("fiber span " + std::to_string(i + 1),
                 -spans[i].atten_db_per_km * spans[i].length_km);
  b.ledger.add(std::string("remote node (") + std::string(to_string(arch.variant)) + ")",
               -rn_insertion_loss(arch));
  b.received_dbm = b.ledger.total_db;
  b.margin_db = b.received_dbm - rx_sensitivity_dbm;
  b.feasible = b.margin_db >= 0.0;
  return b;
}

}  // namespace pncpon
