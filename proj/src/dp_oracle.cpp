#include "peakshave/dp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "peakshave/controllers.hpp"
#include "peakshave/error.hpp"

namespace peakshave::control {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRateSlack = 1e-9;

struct Group {
  battery::BatterySpec spec;
  std::vector<double> demand;
  std::vector<double> levels;
  double start = 0.0;
  double rho = 1.0;
};

// Grid draw of moving from `from` (start of slot) to level `to` (end of slot), or +inf.
double transition(const Group& g, double from, double to, double d, double h) {
  const auto& spec = g.spec;
  const double after_leak = std::clamp(from * g.rho, 0.0, spec.capacity_kwh);
  const double delta = to - after_leak;
  if (delta > 0.0) {
    const double c = delta / (spec.eta_charge * h);
    if (c > spec.max_charge_kw + kRateSlack) return kInf;
    return d + c;
  }
  if (delta < 0.0) {
    const double l = -delta * spec.eta_discharge / h;
    if (l > spec.max_discharge_kw + kRateSlack || l > d + kRateSlack) return kInf;
    return std::max(0.0, d - l);
  }
  return d;
}

class JointProgram {
 public:
  JointProgram(std::vector<Group> groups, std::size_t slots, double h) : groups_(std::move(groups)), slots_(slots), h_(h) {
    states_ = 1;
    for (const auto& g : groups_) states_ *= g.levels.size();
    grid_.resize(slots_);
    for (std::size_t t = 0; t < slots_; ++t) {
      const std::size_t from_count = t == 0 ? 1 : states_;
      auto& table = grid_[t];
      table.assign(from_count * states_, 0.0);
      for (std::size_t f = 0; f < from_count; ++f) {
        for (std::size_t to = 0; to < states_; ++to) {
          double total = 0.0;
          std::size_t fi = f;
          std::size_t ti = to;
          for (const auto& g : groups_) {
            const std::size_t L = g.levels.size();
            const double from_soc = t == 0 ? g.start : g.levels[fi % L];
            const double v = transition(g, from_soc, g.levels[ti % L], g.demand[t], h_);
            fi /= L;
            ti /= L;
            total += v;
            if (total == kInf) break;
          }
          table[f * states_ + to] = total;
        }
      }
    }
  }

  std::vector<double> candidate_caps() const {
    std::vector<double> out;
    for (const auto& table : grid_) {
      for (double v : table) {
        if (v != kInf) out.push_back(v);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Minimum total grid energy (sum of slot draws) with every slot <= cap.
  // Optionally records the best predecessor of every state and the final costs.
  double min_draw(double cap, std::vector<std::vector<std::size_t>>* choice = nullptr,
                  std::vector<double>* final_cost = nullptr) const {
    std::vector<double> cost(1, 0.0);
    if (choice) choice->assign(slots_, std::vector<std::size_t>(states_, 0));
    for (std::size_t t = 0; t < slots_; ++t) {
      std::vector<double> next(states_, kInf);
      const auto& table = grid_[t];
      for (std::size_t f = 0; f < cost.size(); ++f) {
        if (cost[f] == kInf) continue;
        const double* row = table.data() + f * states_;
        for (std::size_t to = 0; to < states_; ++to) {
          const double g = row[to];
          if (g > cap) continue;
          const double c = cost[f] + g;
          if (c < next[to]) {
            next[to] = c;
            if (choice) (*choice)[t][to] = f;
          }
        }
      }
      cost = std::move(next);
    }
    const double best = *std::min_element(cost.begin(), cost.end());
    if (final_cost) *final_cost = std::move(cost);
    return best;
  }

  DpResult solve(const billing::Tariff& tariff) const {
    const auto caps = candidate_caps();
    if (caps.empty()) throw GuardError("dp oracle: no feasible battery schedule");
    const double draw_unbounded = min_draw(kInf);
    std::size_t lo = 0;
    std::size_t hi = caps.size() - 1;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (min_draw(caps[mid]) < kInf) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    const double pp = tariff.peak_price;
    const double pe = tariff.energy_price * h_;
    double best = kInf;
    double best_cap = caps[lo];
    for (std::size_t i = lo; i < caps.size(); ++i) {
      if (pp * caps[i] + pe * draw_unbounded >= best) break;
      const double value = pp * caps[i] + pe * min_draw(caps[i]);
      if (value < best) {
        best = value;
        best_cap = caps[i];
      }
    }
    return trace_path(best_cap, tariff);
  }

 private:
  DpResult trace_path(double cap, const billing::Tariff& tariff) const {
    std::vector<std::vector<std::size_t>> choice;
    std::vector<double> cost;
    min_draw(cap, &choice, &cost);
    std::size_t state = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
    DpResult out;
    out.grid_kw.assign(slots_, 0.0);
    out.soc_kwh.assign(groups_.size(), std::vector<double>(slots_, 0.0));
    for (std::size_t t = slots_; t-- > 0;) {
      const std::size_t f = choice[t][state];
      out.grid_kw[t] = grid_[t][f * states_ + state];
      std::size_t idx = state;
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        const std::size_t L = groups_[g].levels.size();
        out.soc_kwh[g][t] = groups_[g].levels[idx % L];
        idx /= L;
      }
      state = f;
    }
    out.bill = billing::bill_span(out.grid_kw, h_, tariff);
    out.peak_kw = out.bill.peak_kw;
    out.energy_kwh = out.bill.energy_kwh;
    return out;
  }

  std::vector<Group> groups_;
  std::size_t slots_;
  double h_;
  std::size_t states_ = 1;
  std::vector<std::vector<double>> grid_;
};

std::vector<double> soc_levels(const battery::BatterySpec& spec, std::size_t count) {
  const double lo = spec.reserve_floor_kwh;
  const double hi = spec.capacity_kwh;
  if (!(hi > lo)) return {lo};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  out.back() = hi;
  return out;
}

void check_levels(std::size_t levels) {
  if (levels < 2) throw ConfigError("dp oracle: at least two SoC levels required");
  if (levels > kDpMaxLevels) {
    throw GuardError("dp oracle: " + std::to_string(levels) + " SoC levels exceed the limit of " +
                     std::to_string(kDpMaxLevels));
  }
}

void check_slots(std::size_t slots) {
  if (slots > kDpMaxSlots) {
    throw GuardError("dp oracle: " + std::to_string(slots) + " slots exceed the limit of " +
                     std::to_string(kDpMaxSlots));
  }
}

}  // namespace

DpResult dp_oracle(const PowerSeries& demand, const battery::BatterySpec& spec, const billing::Tariff& tariff,
                   std::size_t soc_levels_count, double initial_soc_kwh) {
  check_slots(demand.size());
  check_levels(soc_levels_count);
  demand.validate();
  spec.validate();
  if (!(initial_soc_kwh >= 0.0 && initial_soc_kwh <= spec.capacity_kwh)) {
    throw ConfigError("dp oracle: initial state of charge outside [0, capacity]");
  }
  if (demand.empty()) return {};
  const double h = demand.slot_hours();
  Group g{spec, demand.kw, soc_levels(spec, soc_levels_count), initial_soc_kwh, spec.retention(h)};
  return JointProgram({g}, demand.size(), h).solve(tariff);
}

DpResult dp_oracle_fleet(const battery::Topology& topology, std::span<const PowerSeries> group_demands,
                         const billing::Tariff& tariff, std::size_t levels_per_group,
                         std::span<const double> initial_socs_kwh) {
  topology.validate();
  check_levels(levels_per_group);
  if (group_demands.size() != topology.size() || initial_socs_kwh.size() != topology.size()) {
    throw DataError("dp oracle: one demand series and one initial SoC per group required");
  }
  const std::size_t slots = group_demands[0].size();
  const double slot_seconds = group_demands[0].slot_seconds;
  check_slots(slots);
  std::size_t states = 1;
  std::vector<Group> groups;
  for (std::size_t i = 0; i < topology.size(); ++i) {
    const auto& d = group_demands[i];
    d.validate();
    if (d.size() != slots || d.slot_seconds != slot_seconds) throw DataError("dp oracle: group series differ in shape");
    const auto& spec = topology.groups[i].spec;
    if (!(initial_socs_kwh[i] >= 0.0 && initial_socs_kwh[i] <= spec.capacity_kwh)) {
      throw ConfigError("dp oracle: initial state of charge outside [0, capacity]");
    }
    auto levels = soc_levels(spec, levels_per_group);
    states *= levels.size();
    if (states > kDpMaxLevels) {
      throw GuardError("dp oracle: joint state count exceeds the limit of " + std::to_string(kDpMaxLevels));
    }
    groups.push_back({spec, d.kw, std::move(levels), initial_socs_kwh[i], spec.retention(d.slot_hours())});
  }
  if (slots == 0) return {};
  return JointProgram(std::move(groups), slots, slot_seconds / 3600.0).solve(tariff);
}

namespace {

struct Instance {
  PowerSeries demand;
  battery::BatterySpec spec;
  double start = 0.0;
  std::size_t levels = 2;
};

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Integer data with 1-h slots and a known optimal cap: a prefix of slots is
// held exactly at the cap while the battery goes from its start level to
// empty, so no lower cap can serve the prefix; the rest stays under the cap.
Instance lossless_instance(std::mt19937_64& rng) {
  Instance in;
  const int n = uniform(rng, 2, 8);
  const int capacity = uniform(rng, 1, 5);
  const int charge = uniform(rng, 1, capacity);
  const int discharge = uniform(rng, 1, capacity);
  const int cap = uniform(rng, capacity, capacity + 10);
  in.spec.technology = "lossless";
  in.spec.capacity_kwh = capacity;
  in.spec.max_charge_kw = charge;
  in.spec.max_discharge_kw = discharge;
  in.levels = static_cast<std::size_t>(capacity) + 1;
  int soc = std::min(uniform(rng, 0, capacity), n * discharge);
  in.start = soc;
  in.demand.slot_seconds = 3600.0;

  const int min_prefix = std::max(1, (soc + discharge - 1) / discharge);
  const int prefix = uniform(rng, min_prefix, n);
  for (int i = 0; i < prefix; ++i) {
    const int left = prefix - 1 - i;
    const int lo = std::max({0, soc - discharge});
    const int hi = std::min({capacity, soc + charge, left * discharge});
    const int next = i + 1 == prefix ? 0 : uniform(rng, lo, std::max(lo, hi));
    in.demand.kw.push_back(static_cast<double>(cap - (next - soc)));
    soc = next;
  }
  for (int i = prefix; i < n; ++i) {
    const int next = uniform(rng, std::max(0, soc - discharge), std::min(capacity, soc + charge));
    const int delta = next - soc;
    const int d = delta >= 0 ? uniform(rng, 0, cap - delta) : uniform(rng, -delta, cap - delta);
    in.demand.kw.push_back(static_cast<double>(d));
    soc = next;
  }
  return in;
}

Instance lossy_instance(std::mt19937_64& rng) {
  Instance in;
  const int n = uniform(rng, 2, 8);
  const int capacity = uniform(rng, 1, 5);
  in.spec.technology = "lossy";
  in.spec.capacity_kwh = capacity;
  in.spec.max_charge_kw = uniform(rng, 1, 2 * capacity);
  in.spec.max_discharge_kw = uniform(rng, 1, 2 * capacity);
  in.spec.eta_charge = 0.9;
  in.spec.eta_discharge = 0.9;
  in.levels = 6;
  in.start = capacity * static_cast<double>(uniform(rng, 0, 5)) / 5.0;
  in.demand.slot_seconds = 3600.0;
  for (int i = 0; i < n; ++i) in.demand.kw.push_back(static_cast<double>(uniform(rng, 0, 10)));
  return in;
}

}  // namespace

OracleReport verify_offline_against_dp(std::size_t instances, std::uint64_t seed, bool lossy, double tolerance_kw) {
  std::mt19937_64 rng(seed);
  OracleReport report;
  for (std::size_t k = 0; k < instances; ++k) {
    const Instance in = lossy ? lossy_instance(rng) : lossless_instance(rng);
    billing::Tariff tariff;
    tariff.slot_seconds = in.demand.slot_seconds;
    tariff.cycle_seconds = in.demand.slot_seconds * static_cast<double>(in.demand.size());
    const auto offline = run_offline_optimal(in.demand, in.spec, tariff, in.start, tolerance_kw);
    const auto dp = dp_oracle(in.demand, in.spec, tariff, in.levels, in.start);
    const double step_kwh = (in.spec.capacity_kwh - in.spec.reserve_floor_kwh) / static_cast<double>(in.levels - 1);
    const double allowed = lossy ? 2.0 * step_kwh / in.demand.slot_hours() : tolerance_kw;
    const double gap = std::abs(offline.peak_kw() - dp.peak_kw);
    report.allowed_gap_kw = std::max(report.allowed_gap_kw, allowed);
    report.max_gap_kw = std::max(report.max_gap_kw, gap);
    if (gap > allowed) ++report.mismatches;
    ++report.instances;
  }
  return report;
}

}  // namespace peakshave::control
