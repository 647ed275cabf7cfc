#pragma once

// Slot-level TDM-PON accounting for inter-ONU traffic: how many up, down and
// VPN slots one bidirectional exchange costs under each transport mode, and a
// first-come-first-served grant scheduler that never lets VPN and ordinary
// upstream share the upstream band.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace pncpon::mac {

inline constexpr double kMinWavelengthSeparationNm = 0.5;

enum class Mode {
  kConventionalViaOlt,  // up to the OLT, broadcast back down, once per direction
  kOltNetworkCoding,    // both directions up, one XOR-coded broadcast down
  kHalfDuplexVpn,       // looped back at the RN, one ONU per slot
  kFullDuplexPnc,       // both ONUs in the same slot, superposed at the RN
};

inline constexpr Mode kAllModes[] = {Mode::kConventionalViaOlt, Mode::kOltNetworkCoding,
                                     Mode::kHalfDuplexVpn, Mode::kFullDuplexPnc};

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kConventionalViaOlt: return "ConventionalViaOlt";
    case Mode::kOltNetworkCoding: return "OltNetworkCoding";
    case Mode::kHalfDuplexVpn: return "HalfDuplexVpn";
    case Mode::kFullDuplexPnc: return "FullDuplexPnc";
  }
  return "?";
}

struct SlotCost {
  int up = 0;
  int down = 0;
  int vpn = 0;
  int total() const { return up + down + vpn; }
  // The broadcast resource the mode contends for: VPN slots for the VPN
  // modes, downstream slots for the OLT-relayed ones.
  int contended() const { return vpn > 0 ? vpn : down; }
};

// Cost of one exchange: one unit-size message in each direction.
constexpr SlotCost slots_per_exchange(Mode m) {
  switch (m) {
    case Mode::kConventionalViaOlt: return {2, 2, 0};
    case Mode::kOltNetworkCoding: return {2, 1, 0};
    case Mode::kHalfDuplexVpn: return {0, 0, 2};
    case Mode::kFullDuplexPnc: return {0, 0, 1};
  }
  return {};
}

// Electrical buffer slots held at the OLT per exchange.
constexpr int olt_buffer_slots(Mode m) {
  switch (m) {
    case Mode::kConventionalViaOlt: return 1;
    case Mode::kOltNetworkCoding: return 2;
    default: return 0;
  }
}

enum class GainMetric { kTotalSlots, kContendedSlots };

// Capacity gain of `next` over `base` in percent: slots(base)/slots(next) - 1.
inline double capacity_gain(Mode base, Mode next, GainMetric metric) {
  const SlotCost b = slots_per_exchange(base);
  const SlotCost n = slots_per_exchange(next);
  const double sb = metric == GainMetric::kTotalSlots ? b.total() : b.contended();
  const double sn = metric == GainMetric::kTotalSlots ? n.total() : n.contended();
  return (sb / sn - 1.0) * 100.0;
}

struct TrafficDemand {
  int a = 0;
  int b = 0;
  int units = 1;

  void validate() const {
    if (a == b) throw std::invalid_argument("TrafficDemand: endpoints must differ");
    if (a < 0 || b < 0) throw std::invalid_argument("TrafficDemand: negative ONU id");
    if (units < 1) throw std::invalid_argument("TrafficDemand: units must be >= 1");
  }
};

struct WavelengthAssignment {
  int short_onu = 0;
  int long_onu = 0;
  double short_nm = 0.0;
  double long_nm = 0.0;

  double separation_nm() const { return long_nm - short_nm; }
};

inline constexpr double kDefaultCatalog[] = {1548.73, 1552.00};

// Lowest-index pair (i < j, lexicographic) in the catalog separated by at
// least 0.5 nm. The first ONU of the pair takes the shorter wavelength.
inline WavelengthAssignment assign_wavelengths(std::pair<int, int> pair,
                                               std::span<const double> catalog) {
  if (pair.first == pair.second)
    throw std::invalid_argument("assign_wavelengths: pair members must differ");
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    for (std::size_t j = i + 1; j < catalog.size(); ++j) {
      if (std::abs(catalog[i] - catalog[j]) + 1e-9 < kMinWavelengthSeparationNm) continue;
      return {pair.first, pair.second, std::min(catalog[i], catalog[j]),
              std::max(catalog[i], catalog[j])};
    }
  }
  throw std::invalid_argument("assign_wavelengths: no catalog pair separated by >= 0.5 nm");
}

// Grant on the upstream band for ordinary traffic, or for inter-ONU data
// relayed through the OLT.
struct UpstreamGrant {
  int onu = 0;
  bool inter_onu = false;
};

// VPN slot: in half-duplex only `sender` transmits; in full-duplex both
// endpoints transmit on their assigned wavelengths.
struct VpnGrant {
  int a = 0;
  int b = 0;
  std::optional<int> sender;
  std::optional<WavelengthAssignment> wavelengths;

  bool full_duplex() const { return !sender.has_value(); }
};

using UpAssignment = std::variant<UpstreamGrant, VpnGrant>;

// Downstream broadcast from the OLT; `sources` lists whose data it carries
// (two sources means a network-coded combination).
struct BroadcastGrant {
  std::vector<int> sources;
};

struct Slot {
  std::vector<UpAssignment> up;
  std::vector<BroadcastGrant> down;

  bool has_vpn() const {
    return std::any_of(up.begin(), up.end(),
                       [](const UpAssignment& g) { return std::holds_alternative<VpnGrant>(g); });
  }
  bool has_upstream() const {
    return std::any_of(up.begin(), up.end(),
                       [](const UpAssignment& g) { return std::holds_alternative<UpstreamGrant>(g); });
  }
};

struct GrantMap {
  std::vector<Slot> slots;

  std::size_t size() const { return slots.size(); }
  Slot& at(std::size_t i) {
    if (i >= slots.size()) slots.resize(i + 1);
    return slots[i];
  }
  std::size_t vpn_slots() const {
    return static_cast<std::size_t>(
        std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.has_vpn(); }));
  }
  std::size_t upstream_slots() const {
    return static_cast<std::size_t>(
        std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.has_upstream(); }));
  }
  std::size_t down_slots() const {
    return static_cast<std::size_t>(
        std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return !s.down.empty(); }));
  }
};

struct Violation {
  std::size_t slot = 0;
  std::string band;
  std::string rule;
};

inline std::vector<Violation> validate(const GrantMap& g) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < g.slots.size(); ++i) {
    const Slot& s = g.slots[i];
    if (s.has_vpn() && s.has_upstream())
      out.push_back({i, "up", "upstream/VPN collision"});
    else if (s.up.size() > 1)
      out.push_back({i, "up", "multiple assignments"});
    if (s.down.size() > 1) out.push_back({i, "down", "multiple assignments"});

    for (const auto& a : s.up) {
      const auto* v = std::get_if<VpnGrant>(&a);
      if (!v || !v->full_duplex()) continue;
      if (!v->wavelengths) {
        out.push_back({i, "up", "full-duplex grant without wavelength assignment"});
        continue;
      }
      const auto& w = *v->wavelengths;
      if (w.short_onu == w.long_onu) out.push_back({i, "up", "wavelength roles not distinct"});
      if (w.separation_nm() + 1e-9 < kMinWavelengthSeparationNm)
        out.push_back({i, "up", "wavelength separation"});
    }
  }
  return out;
}

struct UpstreamBacklog {
  int onu = 0;
  int units = 0;
};

// FCFS over an interleaved request stream: exchange unit, then one upstream
// unit (round-robin over ONUs with backlog), repeated until both queues drain.
// Upstream-band work takes the next free upstream slot; OLT broadcasts go out
// no earlier than the slot after the data they carry arrived.
inline GrantMap schedule(const std::vector<TrafficDemand>& demands,
                         const std::vector<UpstreamBacklog>& backlog, Mode mode,
                         std::span<const double> catalog = kDefaultCatalog) {
  for (const auto& d : demands) d.validate();

  std::vector<std::pair<int, int>> exchanges;
  for (const auto& d : demands)
    for (int u = 0; u < d.units; ++u) exchanges.emplace_back(d.a, d.b);

  std::vector<UpstreamBacklog> remaining;
  for (const auto& b : backlog) {
    if (b.units < 0) throw std::invalid_argument("schedule: negative upstream backlog");
    if (b.units > 0) remaining.push_back(b);
  }
  std::sort(remaining.begin(), remaining.end(),
            [](const UpstreamBacklog& x, const UpstreamBacklog& y) { return x.onu < y.onu; });

  GrantMap g;
  std::size_t next_up = 0;
  std::size_t next_down = 0;
  std::size_t rr = 0;

  auto broadcast = [&](std::size_t earliest, std::vector<int> sources) {
    const std::size_t s = std::max(earliest, next_down);
    g.at(s).down.push_back({std::move(sources)});
    next_down = s + 1;
  };

  auto place_exchange = [&](int a, int b) {
    switch (mode) {
      case Mode::kConventionalViaOlt: {
        const std::size_t sa = next_up++;
        g.at(sa).up.emplace_back(UpstreamGrant{a, true});
        const std::size_t sb = next_up++;
        g.at(sb).up.emplace_back(UpstreamGrant{b, true});
        broadcast(sa + 1, {a});
        broadcast(sb + 1, {b});
        break;
      }
      case Mode::kOltNetworkCoding: {
        const std::size_t sa = next_up++;
        g.at(sa).up.emplace_back(UpstreamGrant{a, true});
        const std::size_t sb = next_up++;
        g.at(sb).up.emplace_back(UpstreamGrant{b, true});
        broadcast(sb + 1, {a, b});
        break;
      }
      case Mode::kHalfDuplexVpn:
        g.at(next_up++).up.emplace_back(VpnGrant{a, b, a, std::nullopt});
        g.at(next_up++).up.emplace_back(VpnGrant{a, b, b, std::nullopt});
        break;
      case Mode::kFullDuplexPnc:
        g.at(next_up++).up.emplace_back(
            VpnGrant{a, b, std::nullopt, assign_wavelengths({a, b}, catalog)});
        break;
    }
  };

  auto place_upstream = [&]() -> bool {
    if (remaining.empty()) return false;
    rr %= remaining.size();
    UpstreamBacklog& b = remaining[rr];
    g.at(next_up++).up.emplace_back(UpstreamGrant{b.onu, false});
    if (--b.units == 0)
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(rr));
    else
      ++rr;
    return true;
  };

  std::size_t next_exchange = 0;
  while (next_exchange < exchanges.size() || !remaining.empty()) {
    if (next_exchange < exchanges.size()) {
      place_exchange(exchanges[next_exchange].first, exchanges[next_exchange].second);
      ++next_exchange;
    }
    place_upstream();
  }
  return g;
}

}  // namespace pncpon::mac
