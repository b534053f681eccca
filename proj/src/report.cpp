#include "peakshave/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <ostream>

#include "peakshave/error.hpp"

namespace peakshave::report {
namespace {

using Getter = std::function<std::string(const Scenario&)>;
using Setter = std::function<void(Scenario&, const std::string&)>;

struct Field {
  std::string key;
  Getter get;
  Setter set;
};

std::string fmt(double v) { return format_double(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

double num(const std::string& key, const std::string& v) { return parse_double(v, key); }

std::uint64_t whole(const std::string& key, const std::string& v) {
  Config c;
  c.set(key, v);
  return c.get_uint(key, 0);
}

int column(const std::string& key, const std::string& v) {
  Config c;
  c.set(key, v);
  const auto out = c.get_int(key, 0);
  if (out < -1 || out > 1000) throw ConfigError(key + ": column index out of range");
  return static_cast<int>(out);
}

bool flag(const std::string& key, const std::string& v) {
  Config c;
  c.set(key, v);
  return c.get_bool(key, false);
}

std::vector<double> numbers(const std::string& key, const std::string& v) {
  Config c;
  c.set(key, v);
  return c.get_doubles(key, {});
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

std::optional<double> auto_or_number(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return num(key, v);
}

std::string workload_name(WorkloadSource s) {
  switch (s) {
    case WorkloadSource::synthetic: return "synthetic";
    case WorkloadSource::trace: return "trace";
    case WorkloadSource::usage_csv: return "usage";
  }
  return "synthetic";
}

WorkloadSource parse_workload(const std::string& v) {
  if (v == "synthetic") return WorkloadSource::synthetic;
  if (v == "trace") return WorkloadSource::trace;
  if (v == "usage") return WorkloadSource::usage_csv;
  throw ConfigError("workload.source: unknown source '" + v + "'");
}

std::string levels_text(const std::vector<modulation::DvfsLevel>& levels) {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    out += (i ? "," : "") + fmt(levels[i].power_factor) + ":" + fmt(levels[i].delay_factor);
  }
  return out;
}

std::vector<modulation::DvfsLevel> parse_levels(const std::string& key, const std::string& v) {
  std::vector<modulation::DvfsLevel> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto comma = v.find(',', pos);
    const std::string item = v.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(key + ": expected power_factor:delay_factor pairs");
    out.push_back({num(key, item.substr(0, colon)), num(key, item.substr(colon + 1))});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string curve_text(const std::vector<power::CurvePoint>& curve, bool utilization) {
  std::vector<double> v;
  for (const auto& p : curve) v.push_back(utilization ? p.utilization : p.fraction);
  return join(v);
}

void set_curve(Scenario& s, const std::vector<double>& values, bool utilization) {
  s.server.curve.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    (utilization ? s.server.curve[i].utilization : s.server.curve[i].fraction) = values[i];
  }
}

#define PS_DOUBLE(KEY, MEMBER) \
  Field{KEY, [](const Scenario& s) { return fmt(s.MEMBER); }, [](Scenario& s, const std::string& v) { s.MEMBER = num(KEY, v); }}
#define PS_COLUMN(KEY, MEMBER)                                              \
  Field{KEY, [](const Scenario& s) { return std::to_string(s.MEMBER); }, \
        [](Scenario& s, const std::string& v) { s.MEMBER = column(KEY, v); }}
#define PS_BOOL(KEY, MEMBER) \
  Field{KEY, [](const Scenario& s) { return fmt_bool(s.MEMBER); }, [](Scenario& s, const std::string& v) { s.MEMBER = flag(KEY, v); }}
#define PS_SIZE(KEY, MEMBER)                                                \
  Field{KEY, [](const Scenario& s) { return std::to_string(s.MEMBER); }, \
        [](Scenario& s, const std::string& v) { s.MEMBER = static_cast<std::size_t>(whole(KEY, v)); }}

std::vector<Field> class_fields(std::size_t c) {
  const std::string p = "modulation.class" + std::to_string(c) + ".";
  return {
      Field{p + "max_delay_slots",
            [c](const Scenario& s) { return std::to_string(s.modulation.policy.classes[c].max_delay_slots); },
            [c, p](Scenario& s, const std::string& v) {
              s.modulation.policy.classes[c].max_delay_slots = static_cast<std::size_t>(whole(p + "max_delay_slots", v));
            }},
      Field{p + "droppable", [c](const Scenario& s) { return fmt_bool(s.modulation.policy.classes[c].droppable); },
            [c, p](Scenario& s, const std::string& v) {
              s.modulation.policy.classes[c].droppable = flag(p + "droppable", v);
            }},
      Field{p + "revenue_per_kwh", [c](const Scenario& s) { return fmt(s.modulation.policy.classes[c].revenue_per_kwh); },
            [c, p](Scenario& s, const std::string& v) {
              s.modulation.policy.classes[c].revenue_per_kwh = num(p + "revenue_per_kwh", v);
            }},
  };
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f = {
        Field{"scenario.name", [](const Scenario& s) { return s.name; },
              [](Scenario& s, const std::string& v) { s.name = v; }},
        Field{"scenario.seed", [](const Scenario& s) { return std::to_string(s.seed); },
              [](Scenario& s, const std::string& v) { s.seed = whole("scenario.seed", v); }},
        Field{"workload.source", [](const Scenario& s) { return workload_name(s.workload.source); },
              [](Scenario& s, const std::string& v) { s.workload.source = parse_workload(v); }},
        Field{"workload.path", [](const Scenario& s) { return s.workload.path; },
              [](Scenario& s, const std::string& v) { s.workload.path = v; }},
        // Resets every trace column to the preset; later trace.* keys refine it.
        Field{"trace.format", [](const Scenario&) { return std::string("custom"); },
              [](Scenario& s, const std::string& v) {
                if (v == "simple") {
                  s.workload.format = trace::TraceFormat::simple();
                } else if (v == "google_task_usage") {
                  s.workload.format = trace::TraceFormat::google_task_usage();
                } else if (v != "custom") {
                  throw ConfigError("trace.format: unknown format '" + v + "'");
                }
              }},
        PS_COLUMN("trace.col_start", workload.format.col_start),
        PS_COLUMN("trace.col_end", workload.format.col_end),
        PS_COLUMN("trace.col_cpu", workload.format.col_cpu),
        PS_COLUMN("trace.col_mem", workload.format.col_mem),
        PS_COLUMN("trace.col_class", workload.format.col_class),
        PS_COLUMN("trace.col_priority", workload.format.col_priority),
        PS_COLUMN("trace.col_task_id", workload.format.col_task_id),
        Field{"trace.delimiter", [](const Scenario& s) { return std::string(1, s.workload.format.delimiter); },
              [](Scenario& s, const std::string& v) {
                if (v.size() != 1) throw ConfigError("trace.delimiter must be one character");
                s.workload.format.delimiter = v[0];
              }},
        PS_BOOL("trace.has_header", workload.format.has_header),
        PS_DOUBLE("trace.time_scale", workload.format.time_scale),
        PS_DOUBLE("trace.time_offset_s", workload.format.time_offset_s),
        PS_COLUMN("trace.default_class", workload.format.default_class),
        PS_DOUBLE("trace.max_malformed_fraction", workload.format.max_malformed_fraction),
        PS_DOUBLE("synthetic.base_cpu", workload.synthetic.base_cpu),
        PS_DOUBLE("synthetic.diurnal_amplitude", workload.synthetic.diurnal_amplitude),
        Field{"synthetic.peak_to_average",
              [](const Scenario& s) {
                return s.workload.synthetic.peak_to_average ? fmt(*s.workload.synthetic.peak_to_average)
                                                            : std::string("none");
              },
              [](Scenario& s, const std::string& v) {
                if (v == "none") {
                  s.workload.synthetic.peak_to_average.reset();
                } else {
                  s.workload.synthetic.peak_to_average = num("synthetic.peak_to_average", v);
                }
              }},
        PS_DOUBLE("synthetic.diurnal_period_s", workload.synthetic.diurnal_period_seconds),
        PS_DOUBLE("synthetic.peak_time_s", workload.synthetic.peak_time_seconds),
        PS_DOUBLE("synthetic.burst_rate_per_hour", workload.synthetic.burst_rate_per_hour),
        PS_DOUBLE("synthetic.burst_height_mean", workload.synthetic.burst_height_mean),
        PS_DOUBLE("synthetic.burst_duration_s", workload.synthetic.burst_duration_seconds),
        Field{"synthetic.class_mix",
              [](const Scenario& s) {
                const auto& m = s.workload.synthetic.class_mix;
                return join(std::vector<double>(m.begin(), m.end()));
              },
              [](Scenario& s, const std::string& v) {
                const auto mix = numbers("synthetic.class_mix", v);
                if (mix.size() != kClassCount) throw ConfigError("synthetic.class_mix needs four values");
                std::copy(mix.begin(), mix.end(), s.workload.synthetic.class_mix.begin());
              }},
        PS_DOUBLE("synthetic.mem_per_cpu", workload.synthetic.mem_per_cpu),
        PS_DOUBLE("server.cpu_capacity", server.cpu_capacity),
        PS_DOUBLE("server.mem_capacity", server.mem_capacity),
        PS_DOUBLE("server.p_idle_w", server.p_idle_w),
        PS_DOUBLE("server.p_peak_w", server.p_peak_w),
        Field{"server.curve_utilization", [](const Scenario& s) { return curve_text(s.server.curve, true); },
              [](Scenario& s, const std::string& v) { set_curve(s, numbers("server.curve_utilization", v), true); }},
        Field{"server.curve_fraction", [](const Scenario& s) { return curve_text(s.server.curve, false); },
              [](Scenario& s, const std::string& v) { set_curve(s, numbers("server.curve_fraction", v), false); }},
        PS_DOUBLE("power.pue", pue),
        PS_DOUBLE("tariff.energy_price", tariff.energy_price),
        PS_DOUBLE("tariff.peak_price", tariff.peak_price),
        PS_DOUBLE("tariff.slot_seconds", tariff.slot_seconds),
        PS_DOUBLE("tariff.cycle_seconds", tariff.cycle_seconds),
        // A preset replaces every battery field; later battery.* keys refine it.
        Field{"battery.preset", [](const Scenario&) { return std::string("custom"); },
              [](Scenario& s, const std::string& v) {
                if (v == "none") {
                  s.battery = battery::BatterySpec{};
                  s.battery.technology = "none";
                } else if (v != "custom") {
                  s.battery = battery::preset(v);
                }
              }},
        Field{"topology.kind", [](const Scenario& s) { return std::string(battery::topology_name(s.topology)); },
              [](Scenario& s, const std::string& v) { s.topology = battery::parse_topology(v); }},
        PS_SIZE("topology.groups", topology_groups),
        Field{"strategy.kind", [](const Scenario& s) { return std::string(strategy_name(s.strategy.kind)); },
              [](Scenario& s, const std::string& v) { s.strategy.kind = parse_strategy(v); }},
        Field{"strategy.theta_kw",
              [](const Scenario& s) { return s.strategy.theta_kw ? fmt(*s.strategy.theta_kw) : std::string("auto"); },
              [](Scenario& s, const std::string& v) { s.strategy.theta_kw = auto_or_number("strategy.theta_kw", v); }},
        PS_SIZE("strategy.theta_points", strategy.theta_points),
        Field{"strategy.predictor",
              [](const Scenario& s) { return std::string(control::predictor_name(s.strategy.predictor.kind)); },
              [](Scenario& s, const std::string& v) { s.strategy.predictor.kind = control::parse_predictor(v); }},
        PS_SIZE("strategy.window_slots", strategy.window_slots),
        PS_SIZE("strategy.average_window", strategy.predictor.average_window),
        Field{"strategy.weights", [](const Scenario& s) { return join(s.strategy.predictor.weights); },
              [](Scenario& s, const std::string& v) { s.strategy.predictor.weights = numbers("strategy.weights", v); }},
        PS_DOUBLE("strategy.noise_sigma", strategy.predictor.noise_sigma),
        PS_DOUBLE("strategy.initial_soc_kwh", strategy.initial_soc_kwh),
        PS_DOUBLE("strategy.tolerance_kw", strategy.tolerance_kw),
        PS_BOOL("modulation.enabled", modulation.enabled),
        PS_BOOL("modulation.defer", modulation.mechanisms.defer),
        PS_BOOL("modulation.drop", modulation.mechanisms.drop),
        PS_BOOL("modulation.scale", modulation.mechanisms.scale),
        Field{"modulation.cap_kw",
              [](const Scenario& s) { return s.modulation.cap_kw ? fmt(*s.modulation.cap_kw) : std::string("auto"); },
              [](Scenario& s, const std::string& v) { s.modulation.cap_kw = auto_or_number("modulation.cap_kw", v); }},
        PS_SIZE("modulation.cap_points", modulation.cap_points),
        Field{"modulation.dvfs_levels", [](const Scenario& s) { return levels_text(s.modulation.policy.dvfs_levels); },
              [](Scenario& s, const std::string& v) {
                s.modulation.policy.dvfs_levels = parse_levels("modulation.dvfs_levels", v);
              }},
        PS_DOUBLE("modulation.checkpoint_overhead_kwh", modulation.policy.checkpoint_overhead_kwh),
        Field{"modulation.scaling",
              [](const Scenario& s) { return std::string(modulation::scaling_name(s.modulation.policy.scaling)); },
              [](Scenario& s, const std::string& v) { s.modulation.policy.scaling = modulation::parse_scaling(v); }},
        PS_DOUBLE("modulation.delay_cost_per_kwh", modulation.policy.delay_cost_per_kwh),
    };
    for (std::size_t c = 0; c < kClassCount; ++c) {
      for (auto& cf : class_fields(c)) f.push_back(std::move(cf));
    }
    const Config battery_keys = battery::spec_fields(battery::BatterySpec{});
    for (const auto& [name, value] : battery_keys.entries()) {
      const std::string key = "battery." + name;
      f.push_back(Field{key, [name = name](const Scenario& s) { return *battery::spec_fields(s.battery).get(name); },
                        [name = name](Scenario& s, const std::string& v) {
                          Config one;
                          one.set(name, v);
                          battery::apply_fields(s.battery, one);
                        }});
    }
    return f;
  }();
  return table;
}

#undef PS_DOUBLE
#undef PS_COLUMN
#undef PS_BOOL
#undef PS_SIZE

// Keys whose value resets other keys are applied first.
int priority(const std::string& key) { return key == "trace.format" || key == "battery.preset" ? 0 : 1; }

Scenario default_scenario() {
  Scenario s;
  s.name = "default";
  s.workload.synthetic.base_cpu = 800.0;
  s.workload.synthetic.diurnal_amplitude = 0.3;
  s.workload.synthetic.burst_rate_per_hour = 0.1;
  s.workload.synthetic.burst_height_mean = 150.0;
  s.workload.synthetic.burst_duration_seconds = 1800.0;
  s.workload.synthetic.class_mix = {0.3, 0.2, 0.2, 0.3};
  s.battery = battery::preset("lithium_ion");
  return s;
}

}  // namespace

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::none: return "none";
    case StrategyKind::threshold: return "threshold";
    case StrategyKind::predictive: return "predictive";
    case StrategyKind::offline: return "offline";
  }
  return "none";
}

StrategyKind parse_strategy(std::string_view name) {
  if (name == "none") return StrategyKind::none;
  if (name == "threshold") return StrategyKind::threshold;
  if (name == "predictive") return StrategyKind::predictive;
  if (name == "offline") return StrategyKind::offline;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

Scenario Scenario::from_config(const Config& config) {
  Scenario s = default_scenario();
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;
  std::vector<std::pair<std::string, std::string>> entries(config.entries().begin(), config.entries().end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return priority(a.first) < priority(b.first); });
  for (const auto& [key, value] : entries) {
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second->set(s, value);
  }
  s.validate();
  return s;
}

Config Scenario::to_config() const {
  Config c;
  for (const auto& f : fields()) c.set(f.key, f.get(*this));
  return c;
}

Config default_config() { return default_scenario().to_config(); }

void overlay(Config& base, const Config& top) {
  for (const auto& [reset_key, prefix] : {std::pair<std::string, std::string>{"battery.preset", "battery."},
                                          std::pair<std::string, std::string>{"trace.format", "trace."}}) {
    if (!top.has(reset_key)) continue;
    std::vector<std::string> stale;
    for (const auto& [key, value] : base.entries()) {
      if (key.rfind(prefix, 0) == 0) stale.push_back(key);
    }
    for (const auto& key : stale) base.erase(key);
  }
  base.merge(top);
}

void Scenario::validate() const {
  tariff.validate();
  server.validate();
  if (!(pue >= 1.0)) throw ConfigError("power.pue must be >= 1");
  battery.validate();
  workload.format.validate();
  if (workload.source == WorkloadSource::synthetic) {
    trace::SyntheticSpec spec = workload.synthetic;
    spec.horizon_seconds = tariff.cycle_seconds;
    spec.slot_seconds = tariff.slot_seconds;
    spec.validate();
  } else if (workload.path.empty()) {
    throw ConfigError("workload.path is required for source '" + workload_name(workload.source) + "'");
  }
  if (topology_groups == 0) throw ConfigError("topology.groups must be >= 1");
  if (topology == battery::TopologyKind::centralized && topology_groups != 1) {
    throw ConfigError("a centralized topology has exactly one group");
  }
  if (strategy.theta_kw && !(*strategy.theta_kw >= 0.0)) throw ConfigError("strategy.theta_kw must be >= 0");
  if (strategy.kind == StrategyKind::threshold && strategy.theta_points == 0) {
    throw ConfigError("strategy.theta_points must be >= 1");
  }
  if (strategy.window_slots == 0) throw ConfigError("strategy.window_slots must be >= 1");
  if (!(strategy.initial_soc_kwh >= 0.0 && strategy.initial_soc_kwh <= battery.capacity_kwh)) {
    throw ConfigError("strategy.initial_soc_kwh must lie within [0, battery capacity]");
  }
  if (!(strategy.tolerance_kw > 0.0)) throw ConfigError("strategy.tolerance_kw must be > 0");
  strategy.predictor.validate();
  modulation.policy.validate();
  if (modulation.cap_kw && !(*modulation.cap_kw >= 0.0)) throw ConfigError("modulation.cap_kw must be >= 0");
}

namespace {

trace::SlottedUsage load_usage(const Scenario& s, RunResult& out) {
  const double slot = s.tariff.slot_seconds;
  const double horizon = s.tariff.cycle_seconds;
  switch (s.workload.source) {
    case WorkloadSource::synthetic: {
      trace::SyntheticSpec spec = s.workload.synthetic;
      spec.horizon_seconds = horizon;
      spec.slot_seconds = slot;
      return trace::synthesize_workload(spec, s.seed);
    }
    case WorkloadSource::trace: {
      std::ifstream in(s.workload.path);
      if (!in) throw DataError("cannot open trace file " + s.workload.path);
      const auto parsed = trace::parse_trace(in, s.workload.format);
      out.malformed_lines = parsed.malformed;
      auto agg = trace::aggregate(parsed.records, slot, horizon);
      out.truncated_records = agg.truncated;
      return std::move(agg.usage);
    }
    case WorkloadSource::usage_csv: {
      std::ifstream in(s.workload.path);
      if (!in) throw DataError("cannot open usage file " + s.workload.path);
      auto usage = trace::read_usage_csv(in, slot);
      if (usage.slots() != s.tariff.slots_per_cycle()) {
        throw DataError("usage file has " + std::to_string(usage.slots()) + " slots, the billing cycle has " +
                        std::to_string(s.tariff.slots_per_cycle()));
      }
      return usage;
    }
  }
  throw ConfigError("unknown workload source");
}

struct GroupRun {
  control::ControllerTrace trace;
  std::optional<double> theta;
};

GroupRun run_strategy(const Scenario& s, const PowerSeries& demand, const battery::BatterySpec& spec, double share,
                      double initial_soc, std::uint64_t seed) {
  const auto& st = s.strategy;
  switch (st.kind) {
    case StrategyKind::none:
      return {control::run_none(demand, initial_soc), std::nullopt};
    case StrategyKind::threshold: {
      if (st.theta_kw) return {control::run_threshold(demand, spec, *st.theta_kw * share, initial_soc), *st.theta_kw * share};
      const auto grid = control::default_theta_grid(demand, st.theta_points);
      auto choice = control::tune_threshold(demand, spec, s.tariff, grid, initial_soc);
      return {std::move(choice.trace), choice.theta_kw};
    }
    case StrategyKind::predictive: {
      control::PredictorConfig p = st.predictor;
      p.seed = seed;
      return {control::run_predictive(demand, spec, p, s.tariff, {st.window_slots, initial_soc, st.tolerance_kw}),
              std::nullopt};
    }
    case StrategyKind::offline:
      return {control::run_offline_optimal(demand, spec, s.tariff, initial_soc, st.tolerance_kw), std::nullopt};
  }
  throw ConfigError("unknown strategy");
}

RunResult run_unchecked(const Scenario& s) {
  s.validate();
  RunResult out;
  out.name = s.name;
  out.usage = load_usage(s, out);
  out.class_demand = power::class_power_breakdown(out.usage, s.server, s.pue);
  out.demand = power::dc_power(out.usage, s.server, s.pue);
  out.baseline_bill = billing::compute_bill(out.demand, s.tariff);

  double penalty = 0.0;
  out.controlled_demand = out.demand;
  if (s.modulation.enabled) {
    if (s.modulation.cap_kw) {
      out.modulation = modulation::apply(out.class_demand.classes, s.modulation.policy, *s.modulation.cap_kw,
                                         s.modulation.mechanisms, s.tariff.energy_price);
      out.cap_kw = *s.modulation.cap_kw;
    } else {
      std::optional<modulation::BatteryOption> option;
      const bool tuned = s.strategy.kind == StrategyKind::threshold && !s.strategy.theta_kw;
      if (s.topology == battery::TopologyKind::centralized &&
          (tuned || s.strategy.kind == StrategyKind::offline)) {
        option = modulation::BatteryOption{s.battery,
                                           tuned ? modulation::BatteryStrategy::threshold_tuned
                                                 : modulation::BatteryStrategy::offline,
                                           s.strategy.initial_soc_kwh, s.strategy.tolerance_kw};
      }
      const auto caps = modulation::default_cap_grid(out.demand, s.modulation.cap_points);
      auto choice = modulation::choose_cap(out.class_demand.classes, s.modulation.policy, s.tariff,
                                           s.modulation.mechanisms, option, caps);
      out.modulation = std::move(choice.outcome);
      out.cap_kw = choice.cap_kw;
    }
    out.controlled_demand = total_of(out.modulation->modified);
    penalty = out.modulation->penalty;
  }

  const std::size_t n = out.controlled_demand.size();
  const double h = out.controlled_demand.slot_hours();
  double amortization = 0.0;
  if (s.topology == battery::TopologyKind::centralized) {
    auto run = run_strategy(s, out.controlled_demand, s.battery, 1.0, s.strategy.initial_soc_kwh, s.seed);
    out.trace = std::move(run.trace);
    out.theta_kw = run.theta;
    if (s.strategy.kind != StrategyKind::none) amortization = battery::replacement_cost(out.trace.final_state, s.battery);
    out.locked_kwh.assign(n, 0.0);
  } else {
    const auto topo = battery::Topology::distributed(s.topology, s.battery, s.topology_groups);
    std::vector<control::ControllerTrace> traces;
    for (std::size_t g = 0; g < topo.size(); ++g) {
      const double share = topo.groups[g].demand_share;
      PowerSeries part = out.controlled_demand;
      for (double& v : part.kw) v *= share;
      auto run = run_strategy(s, part, topo.groups[g].spec, share, s.strategy.initial_soc_kwh * share, s.seed + g);
      if (s.strategy.kind != StrategyKind::none) {
        amortization += battery::replacement_cost(run.trace.final_state, topo.groups[g].spec);
      }
      traces.push_back(std::move(run.trace));
    }
    control::ControllerTrace& t = out.trace;
    t.slot_seconds = out.controlled_demand.slot_seconds;
    t.initial_soc_kwh = s.strategy.initial_soc_kwh;
    t.demand_kw = out.controlled_demand.kw;
    t.action_kw.assign(n, 0.0);
    t.grid_kw.assign(n, 0.0);
    t.soc_kwh.assign(n, 0.0);
    for (const auto& gt : traces) {
      for (std::size_t i = 0; i < n; ++i) {
        t.action_kw[i] += gt.action_kw[i];
        t.grid_kw[i] += gt.grid_kw[i];
        t.soc_kwh[i] += gt.soc_kwh[i];
      }
      t.final_state.soc_kwh += gt.final_state.soc_kwh;
      t.final_state.throughput_kwh += gt.final_state.throughput_kwh;
    }
    out.locked_kwh.assign(n, 0.0);
    std::vector<battery::BatteryState> states(topo.size());
    std::vector<double> demands(topo.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t g = 0; g < topo.size(); ++g) {
        states[g].soc_kwh = i == 0 ? traces[g].initial_soc_kwh : traces[g].soc_kwh[i - 1];
        demands[g] = traces[g].demand_kw[i];
      }
      out.locked_kwh[i] = battery::locked_energy(topo, states, demands, h);
    }
  }
  out.bill = billing::compute_bill(out.trace.grid(), s.tariff, {amortization, penalty});
  return out;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario) {
  try {
    return run_unchecked(scenario);
  } catch (const Error& e) {
    throw Error(e.code(), "scenario '" + scenario.name + "': " + e.what());
  }
}

std::vector<ComparisonRow> compare(std::span<const Scenario> scenarios, bool parallel) {
  if (scenarios.empty()) throw ConfigError("compare needs at least one scenario");
  std::vector<billing::Bill> bills(scenarios.size());
  if (parallel) {
    std::vector<std::future<billing::Bill>> jobs;
    for (const auto& s : scenarios) {
      jobs.push_back(std::async(std::launch::async, [&s] { return run_scenario(s).bill; }));
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) bills[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < scenarios.size(); ++i) bills[i] = run_scenario(scenarios[i]).bill;
  }
  std::vector<ComparisonRow> rows;
  const double first = bills[0].total;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    rows.push_back({scenarios[i].name, bills[i], first > 0.0 ? 1.0 - bills[i].total / first : 0.0});
  }
  return rows;
}

std::vector<Scenario> default_grid(const Scenario& base) {
  std::vector<Scenario> out;
  Scenario none = base;
  none.name = "no_shaving";
  none.strategy.kind = StrategyKind::none;
  none.strategy.initial_soc_kwh = 0.0;
  out.push_back(none);
  const std::size_t hour = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(3600.0 / base.tariff.slot_seconds)));
  for (const auto& name : battery::preset_order()) {
    Scenario s = base;
    s.battery = battery::preset(name);
    s.strategy.initial_soc_kwh = std::min(s.strategy.initial_soc_kwh, s.battery.capacity_kwh);

    Scenario threshold = s;
    threshold.name = name + "/threshold";
    threshold.strategy.kind = StrategyKind::threshold;
    threshold.strategy.theta_kw.reset();
    out.push_back(threshold);

    Scenario noisy = s;
    noisy.name = name + "/predictive_noisy_1h";
    noisy.strategy.kind = StrategyKind::predictive;
    noisy.strategy.predictor.kind = control::PredictorKind::noisy_oracle;
    noisy.strategy.window_slots = hour;
    out.push_back(noisy);

    Scenario perfect = noisy;
    perfect.name = name + "/predictive_perfect_1h";
    perfect.strategy.predictor.kind = control::PredictorKind::oracle;
    out.push_back(perfect);

    // A perfect prediction of the whole cycle is the offline optimum.
    Scenario full = s;
    full.name = name + "/predictive_full";
    full.strategy.kind = StrategyKind::offline;
    out.push_back(full);
  }
  return out;
}

Breakdown bill_shares(const billing::Bill& bill) {
  Breakdown b;
  if (bill.total > 0.0) {
    b.energy_share = bill.energy_charge / bill.total;
    b.peak_share = bill.peak_charge / bill.total;
    b.amortization_share = bill.battery_amortization / bill.total;
    b.penalty_share = bill.modulation_penalty / bill.total;
  }
  return b;
}

Breakdown breakdown_report(const RunResult& run) {
  Breakdown b = bill_shares(run.bill);
  b.idle_apportioned_slots = run.class_demand.idle_apportioned_slots;
  std::array<double, kClassCount> energy{};
  double total = 0.0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    energy[c] = run.class_demand.classes[c].energy_kwh();
    total += energy[c];
  }
  if (total > 0.0) {
    for (std::size_t c = 0; c < kClassCount; ++c) b.class_energy_share[c] = energy[c] / total;
  }
  return b;
}

std::vector<SweepRow> sweep_ratio(std::span<const double> ratios, const billing::Tariff& tariff, double average_kw) {
  std::vector<SweepRow> out;
  for (double r : ratios) {
    const PowerSeries s = billing::two_level_series(r, average_kw, tariff);
    SweepRow row;
    row.ratio = r;
    row.no_shaving = billing::compute_bill(s, tariff);
    row.flat = billing::optimal_flat_bill(s, tariff);
    row.savings = row.no_shaving.total > 0.0 ? 1.0 - row.flat.total / row.no_shaving.total : 0.0;
    row.closed_form = billing::savings_vs_ratio(r, tariff);
    out.push_back(row);
  }
  return out;
}

void write_power_csv(std::ostream& out, const PowerSeries& series) {
  out << "slot_index,kW\n";
  for (std::size_t i = 0; i < series.size(); ++i) out << i << ',' << format_double(series.kw[i]) << '\n';
}

void write_trace_csv(std::ostream& out, const control::ControllerTrace& trace, std::span<const double> locked_kwh) {
  out << "slot,demand_kW,action_kW,grid_kW,soc_kWh,locked_kWh\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i << ',' << format_double(trace.demand_kw[i]) << ',' << format_double(trace.action_kw[i]) << ','
        << format_double(trace.grid_kw[i]) << ',' << format_double(trace.soc_kwh[i]) << ','
        << format_double(i < locked_kwh.size() ? locked_kwh[i] : 0.0) << '\n';
  }
}

namespace {

std::string fraction(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

}  // namespace

void write_comparison_csv(std::ostream& out, std::span<const ComparisonRow> rows) {
  using billing::format_money;
  out << "name,energy_charge,peak_charge,amortization,penalty,total,savings_vs_first\n";
  for (const auto& r : rows) {
    out << r.name << ',' << format_money(r.bill.energy_charge) << ',' << format_money(r.bill.peak_charge) << ','
        << format_money(r.bill.battery_amortization) << ',' << format_money(r.bill.modulation_penalty) << ','
        << format_money(r.bill.total) << ',' << fraction(r.savings_vs_first) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "ratio,savings,closed_form,no_shaving_total,flat_total\n";
  for (const auto& r : rows) {
    out << format_double(r.ratio) << ',' << format_double(r.savings) << ',' << format_double(r.closed_form) << ','
        << billing::format_money(r.no_shaving.total) << ',' << billing::format_money(r.flat.total) << '\n';
  }
}

void write_breakdown(std::ostream& out, const Breakdown& b) {
  for (std::size_t c = 0; c < kClassCount; ++c) {
    out << "class" << c << "_energy_share=" << fraction(b.class_energy_share[c]) << '\n';
  }
  out << "energy_charge_share=" << fraction(b.energy_share) << '\n';
  out << "peak_charge_share=" << fraction(b.peak_share) << '\n';
  out << "amortization_share=" << fraction(b.amortization_share) << '\n';
  out << "penalty_share=" << fraction(b.penalty_share) << '\n';
  out << "idle_apportioned_slots=" << b.idle_apportioned_slots << '\n';
}

}  // namespace peakshave::report
