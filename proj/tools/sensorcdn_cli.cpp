// Command-line entry point: run scenarios, compare reports, check topologies.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sensorcdn/sensorcdn.hpp"

namespace {

using namespace sensorcdn;

int run_command(const std::string& config_path, const std::optional<std::string>& mode,
                const std::optional<std::uint64_t>& seed, const std::optional<std::string>& out_dir,
                bool trace, const std::optional<std::string>& dump_readings_to) {
  auto cfg = load_config(config_path);
  if (mode) {
    auto m = parse_mode(*mode);
    if (!m) throw ConfigError("unknown mode '" + *mode + "'");
    cfg.mode = *m;
  }
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.output_dir = *out_dir;
  cfg.trace = cfg.trace || trace;

  const auto report = run_scenario(cfg);
  write_outputs(report, cfg.output_dir, cfg.trace);

  if (dump_readings_to) {
    std::ofstream f(*dump_readings_to);
    if (!f) throw ConfigError("cannot write " + *dump_readings_to);
    auto grid = make_grid(cfg.sensors.count, cfg.sensors.updates_per_minute, cfg.sensors.duration, cfg.seed);
    dump_readings(f, generate_readings(grid, cfg.seed, cfg.sensors.entry_bytes));
  }

  const auto mean = average_decomposition(report);
  const auto n = report.outcomes.size();
  std::cout << "mode " << to_string(cfg.mode) << ", " << n << " requests\n"
            << "  mean download time " << format_fixed(mean.total(), 3) << " s (creation "
            << format_fixed(mean.t_creation, 3) << ", signaling " << format_fixed(mean.t_signaling, 3)
            << ", processing " << format_fixed(mean.t_processing, 3) << ", http "
            << format_fixed(mean.t_http, 3) << ")\n"
            << "  http byte-hops " << cumulative_traffic(report, n, TrafficClass::http) << ", signaling byte-hops "
            << cumulative_traffic(report, n, TrafficClass::signaling) << "\n"
            << "  outputs in " << cfg.output_dir << "\n";
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  return 0;
}

int compare_command(const std::vector<std::string>& paths, const std::optional<std::string>& out) {
  std::vector<RunReport> reports;
  std::vector<std::string> labels;
  for (const auto& p : paths) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(p));
      reports.push_back(report_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(p + ": " + e.what());
    }
    labels.push_back(j.at("config").value("mode", "run") + "#" + std::to_string(labels.size()));
  }
  const auto cmp = compare_runs(reports, labels);
  const std::string text = cmp.summary.dump(2) + "\n";
  if (out) {
    std::ofstream f(*out);
    if (!f) throw ConfigError("cannot write " + *out);
    f << text;
  } else {
    std::cout << text;
  }
  return 0;
}

int validate_command(const std::string& path, bool strict) {
  const auto topo = load_topology_file(path);
  std::cout << path << ": " << topo.nodes().size() << " nodes, " << topo.links().size() << " links";
  for (auto k : {NodeKind::core, NodeKind::edge, NodeKind::end, NodeKind::control, NodeKind::gateway})
    std::cout << ", " << topo.nodes_of_kind(k).size() << ' ' << to_string(k);
  std::cout << "\n";
  const auto violations = validate_reference_profile(topo);
  if (violations.empty()) {
    std::cout << "reference profile: ok\n";
    return 0;
  }
  for (const auto& v : violations) std::cout << "reference profile: " << v.rule << ": " << v.message << "\n";
  return strict ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"On-path sensor data cache simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario and write report.json, downloads.csv, traffic.csv");
  std::string config;
  std::optional<std::string> mode, out_dir, dump_to;
  std::optional<std::uint64_t> seed;
  bool trace = false;
  run->add_option("--config", config, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", mode, "legacy | edge_only | edge_plus_core");
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_dir, "Output directory");
  run->add_flag("--trace", trace, "Also write the signaling message trace (trace.csv)");
  run->add_option("--dump-readings", dump_to, "Write the generated readings as line-delimited JSON");

  auto* compare = app.add_subcommand("compare", "Compare report.json files of the same scenario shape");
  std::vector<std::string> reports;
  std::optional<std::string> compare_out;
  compare->add_option("reports", reports, "report.json files; the first is the baseline")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", compare_out, "Write the summary here instead of stdout");

  auto* validate = app.add_subcommand("validate-topology", "Load a topology file and check the reference profile");
  std::string topo_path;
  bool strict = false;
  validate->add_option("file", topo_path, "Topology description")->required();
  validate->add_flag("--strict", strict, "Exit non-zero on reference-profile violations");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config, mode, seed, out_dir, trace, dump_to);
    if (*compare) return compare_command(reports, compare_out);
    if (*validate) return validate_command(topo_path, strict);
  } catch (const sensorcdn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
