#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "peakshave/dp_oracle.hpp"
#include "peakshave/error.hpp"
#include "peakshave/kernels.hpp"
#include "peakshave/report.hpp"

namespace {

using namespace peakshave;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::string> overrides;
  std::string output;
};

// Pulls `--section.key=value` arguments out before CLI11 sees them.
std::vector<std::string> split_overrides(int argc, char** argv, std::vector<std::string>& rest) {
  std::vector<std::string> out;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    const auto eq = a.find('=');
    const auto dot = a.find('.');
    if (a.rfind("--", 0) == 0 && eq != std::string::npos && dot != std::string::npos && dot < eq) {
      out.push_back(a.substr(2));
    } else {
      rest.push_back(a);
    }
  }
  return out;
}

Config load_config(const Common& c) {
  Config cfg;
  std::string path = c.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("PEAKSHAVE_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) report::overlay(cfg, Config::load(path));
  for (const auto& kv : c.overrides) report::overlay(cfg, Config::parse(kv));
  for (const auto& kv : c.sets) report::overlay(cfg, Config::parse(kv));
  return cfg;
}

report::Scenario load_scenario(const Common& c) { return report::Scenario::from_config(load_config(c)); }

// Writes to --output when given, stdout otherwise.
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write(out);
}

int run_ingest(const Common& c, const std::string& input, const std::string& format) {
  report::Scenario s = load_scenario(c);
  if (!format.empty()) {
    Config f;
    f.set("trace.format", format);
    Config merged = s.to_config();
    report::overlay(merged, f);
    s = report::Scenario::from_config(merged);
  }
  const std::string path = input.empty() ? s.workload.path : input;
  if (path.empty()) throw ConfigError("ingest needs --input or workload.path");
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file " + path);
  const auto parsed = trace::parse_trace(in, s.workload.format);
  const auto agg = trace::aggregate(parsed.records, s.tariff.slot_seconds, s.tariff.cycle_seconds);
  std::cerr << "records=" << parsed.records.size() << " malformed=" << parsed.malformed
            << " truncated=" << agg.truncated << " slots=" << agg.usage.slots() << '\n';
  emit(c.output, [&](std::ostream& out) { trace::write_usage_csv(out, agg.usage); });
  return 0;
}

int run_power(const Common& c) {
  report::Scenario s = load_scenario(c);
  s.strategy.kind = report::StrategyKind::none;
  s.modulation.enabled = false;
  const auto r = report::run_scenario(s);
  emit(c.output, [&](std::ostream& out) { report::write_power_csv(out, r.demand); });
  return 0;
}

int run_simulate(const Common& c, const std::string& trace_out, const std::string& modulation_out) {
  const report::Scenario s = load_scenario(c);
  const auto r = report::run_scenario(s);
  emit(c.output, [&](std::ostream& out) {
    out << "scenario=" << r.name << '\n';
    out << "isa=" << kernels::isa_name(kernels::active().isa) << '\n';
    out << "slots=" << r.demand.size() << '\n';
    out << "malformed_lines=" << r.malformed_lines << '\n';
    out << "truncated_records=" << r.truncated_records << '\n';
    out << "demand_peak_kw=" << format_double(r.demand.peak_kw()) << '\n';
    out << "demand_mean_kw=" << format_double(r.demand.mean_kw()) << '\n';
    if (r.theta_kw) out << "theta_kw=" << format_double(*r.theta_kw) << '\n';
    if (r.cap_kw) out << "modulation_cap_kw=" << format_double(*r.cap_kw) << '\n';
    out << "grid_peak_kw=" << format_double(r.trace.peak_kw()) << '\n';
    double locked = 0.0;
    for (double v : r.locked_kwh) locked = std::max(locked, v);
    out << "max_locked_kwh=" << format_double(locked) << '\n';
    out << billing::to_key_value(r.bill);
    out << "baseline_total=" << billing::format_money(r.baseline_bill.total) << '\n';
    report::write_breakdown(out, report::breakdown_report(r));
  });
  if (!trace_out.empty()) emit(trace_out, [&](std::ostream& out) { report::write_trace_csv(out, r.trace, r.locked_kwh); });
  if (!modulation_out.empty()) {
    if (!r.modulation) throw ConfigError("--modulation-out needs modulation.enabled=true");
    emit(modulation_out, [&](std::ostream& out) { modulation::write_outcome_csv(out, *r.modulation); });
  }
  return 0;
}

int run_compare(const Common& c, const std::vector<std::string>& files, bool serial) {
  const Config base_cfg = load_config(c);
  std::vector<report::Scenario> scenarios;
  if (files.empty()) {
    scenarios = report::default_grid(report::Scenario::from_config(base_cfg));
  } else {
    for (const auto& f : files) {
      Config cfg = base_cfg;
      report::overlay(cfg, Config::load(f));
      scenarios.push_back(report::Scenario::from_config(cfg));
    }
  }
  const auto rows = report::compare(scenarios, !serial);
  emit(c.output, [&](std::ostream& out) { report::write_comparison_csv(out, rows); });
  return 0;
}

int run_sweep(const Common& c, const std::vector<double>& ratios, double average_kw) {
  const report::Scenario s = load_scenario(c);
  const auto rows = report::sweep_ratio(ratios, s.tariff, average_kw);
  emit(c.output, [&](std::ostream& out) { report::write_sweep_csv(out, rows); });
  return 0;
}

int run_oracle(const Common& c, std::size_t instances, std::uint64_t seed) {
  bool ok = true;
  emit(c.output, [&](std::ostream& out) {
    for (bool lossy : {false, true}) {
      const auto r = control::verify_offline_against_dp(instances, seed, lossy);
      out << (lossy ? "lossy" : "lossless") << " instances=" << r.instances << " mismatches=" << r.mismatches
          << " max_gap_kw=" << format_double(r.max_gap_kw) << " allowed_gap_kw=" << format_double(r.allowed_gap_kw)
          << ' ' << (r.passed() ? "PASS" : "FAIL") << '\n';
      ok = ok && r.passed();
    }
  });
  return ok ? 0 : static_cast<int>(ExitCode::infeasible);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> rest;
  Common common;
  common.overrides = split_overrides(argc, argv, rest);

  CLI::App app{"Trace-driven data-center peak-shaving simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("-c,--config", common.config_path, "Config file (default: $PEAKSHAVE_CONFIG)");
  app.add_option("--set", common.sets, "Override a config key: section.key=value");
  app.footer("Any --section.key=value argument overrides that config key.");

  auto* ingest = app.add_subcommand("ingest", "Trace file -> per-slot usage CSV");
  std::string input, format;
  ingest->add_option("-i,--input", input, "Trace file (default: workload.path)");
  ingest->add_option("-f,--format", format, "simple | google_task_usage");

  auto* power = app.add_subcommand("power", "Scenario workload -> facility power CSV");

  auto* simulate = app.add_subcommand("simulate", "Run one scenario and print its bill");
  std::string trace_out, modulation_out;
  simulate->add_option("--trace-out", trace_out, "Controller trace CSV");
  simulate->add_option("--modulation-out", modulation_out, "Modulation outcome CSV");

  auto* compare = app.add_subcommand("compare", "Compare scenarios (default: every battery type x strategy)");
  std::vector<std::string> files;
  bool serial = false;
  compare->add_option("--scenario", files, "Scenario config merged onto the base config (repeatable)");
  compare->add_flag("--serial", serial, "Run scenarios one at a time");

  auto* sweep = app.add_subcommand("sweep", "Savings vs peak-to-average ratio");
  std::vector<double> ratios{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0};
  double average_kw = 100.0;
  sweep->add_option("--ratios", ratios, "Peak-to-average ratios")->delimiter(',');
  sweep->add_option("--average-kw", average_kw, "Mean power of the two-level series");

  auto* oracle = app.add_subcommand("oracle", "Check the offline optimizer against the exhaustive DP");
  std::size_t instances = 200;
  std::uint64_t seed = 1;
  oracle->add_option("-n,--instances", instances, "Random instances per suite");
  oracle->add_option("--seed", seed, "Generator seed");

  for (auto* sub : {ingest, power, simulate, compare, sweep, oracle}) {
    sub->add_option("-o,--output", common.output, "Output file (default: stdout)");
  }

  std::vector<char*> args{argv[0]};
  for (auto& a : rest) args.push_back(a.data());
  try {
    app.parse(static_cast<int>(args.size()), args.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  try {
    if (*ingest) return run_ingest(common, input, format);
    if (*power) return run_power(common);
    if (*simulate) return run_simulate(common, trace_out, modulation_out);
    if (*compare) return run_compare(common, files, serial);
    if (*sweep) return run_sweep(common, ratios, average_kw);
    if (*oracle) return run_oracle(common, instances, seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
  return 0;
}
