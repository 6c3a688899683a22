#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vistatest/analysis_report.h"
#include "vistatest/autopilot_bridge.h"
#include "vistatest/criticality.h"
#include "vistatest/oracle.h"
#include "vistatest/sim_core.h"
#include "vistatest/sweep.h"

namespace fs = std::filesystem;
using namespace vistatest;

namespace {

std::vector<std::string> split_command(const std::string& line) {
  std::vector<std::string> parts;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) parts.push_back(tok);
  return parts;
}

std::vector<VistaKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<VistaKind> kinds;
  for (const auto& name : names) {
    if (name == "all") {
      return {VistaKind::merging, VistaKind::lane_change, VistaKind::crossing_yield,
              VistaKind::crossing_light};
    }
    kinds.push_back(vista_kind_from_string(name));
  }
  return kinds;
}

void write_or_print(const std::string& out, const std::string& content) {
  if (out.empty()) {
    std::fputs(content.c_str(), stdout);
  } else {
    write_file(out, content);
  }
}

const std::vector<std::string>& kind_names() {
  static const std::vector<std::string> names = {"merging", "lane-change", "crossing-yield",
                                                 "crossing-light", "all"};
  return names;
}

const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names = {"worst-case-safe", "overcautious",
                                                 "overoptimistic", "external"};
  return names;
}

struct AdTableArgs {
  std::string preset = "apollo-like";
  std::vector<double> speeds = {0, 5, 10, 15, 20};
  std::vector<double> dists = {10, 20, 30, 40, 50, 60};
  std::string out;
};

int cmd_ad_table(const AdTableArgs& a) {
  ADFunctions ad = ADFunctions::preset(a.preset);
  std::string csv = "quantity,x";
  for (double v : a.speeds) csv += "," + format_double(v);
  csv += "\n";
  csv += "B,";
  for (double v : a.speeds) csv += "," + format_double(ad.braking_distance(v));
  csv += "\n";
  for (double x : a.dists) {
    csv += "AT," + format_double(x);
    for (double v : a.speeds) csv += "," + format_double(ad.accel_reach(v, x).time);
    csv += "\n";
  }
  for (double x : a.dists) {
    csv += "AV," + format_double(x);
    for (double v : a.speeds) csv += "," + format_double(ad.accel_reach(v, x).speed);
    csv += "\n";
  }
  write_or_print(a.out, csv);
  return 0;
}

struct CriticalsArgs {
  std::string kind;
  std::string preset = "apollo-like";
  std::vector<double> ve;
  std::string format = "csv";
  std::string out;
};

int cmd_criticals(const CriticalsArgs& a) {
  VistaKind kind = vista_kind_from_string(a.kind);
  VistaContext ctx = context_for(kind);
  ADFunctions ad = ADFunctions::preset(a.preset);
  std::vector<double> speeds = a.ve.empty() ? default_ve_values(kind) : a.ve;

  if (a.format == "json") {
    json rows = json::array();
    for (double ve : speeds) {
      CriticalValues cv = critical_values(ctx, ad, ve);
      json r;
      r["kind"] = to_string(kind);
      r["ve"] = ve;
      r["x_e"] = cv.x_e;
      if (cv.x_a_hat) r["x_a_hat"] = *cv.x_a_hat;
      r["x_f_hat"] = cv.x_f_hat;
      r["feasible"] = cv.feasible;
      rows.push_back(r);
    }
    write_or_print(a.out, rows.dump(2) + "\n");
    return 0;
  }
  std::string csv = "kind,ve,x_e,x_a_hat,x_f_hat,feasible\n";
  for (double ve : speeds) {
    CriticalValues cv = critical_values(ctx, ad, ve);
    csv += to_string(kind) + "," + format_double(ve) + "," + format_double(cv.x_e) + ",";
    if (cv.x_a_hat) csv += format_double(*cv.x_a_hat);
    csv += "," + format_double(cv.x_f_hat) + "," + (cv.feasible ? "true" : "false") + "\n";
  }
  write_or_print(a.out, csv);
  return 0;
}

struct GenArgs {
  std::vector<std::string> kinds = {"all"};
  std::string preset = "apollo-like";
  std::vector<double> ve;
  GridSpec grid;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  ADFunctions ad = ADFunctions::preset(a.preset);
  std::string lines;
  for (VistaKind kind : parse_kinds(a.kinds)) {
    VistaContext ctx = context_for(kind);
    std::vector<double> speeds = a.ve.empty() ? default_ve_values(kind) : a.ve;
    for (double ve : speeds) {
      for (const auto& tc : generate_grid(ctx, ad, a.preset, ve, a.grid)) {
        lines += test_case_to_json(tc).dump() + "\n";
      }
    }
  }
  write_or_print(a.out, lines);
  return 0;
}

struct RunArgs {
  std::string kind;
  std::string preset = "apollo-like";
  std::string arriving_preset;
  double ve = 0.0;
  double xa = -1.0;
  bool has_xa = false;
  double xf = 0.0;
  std::string policy = "worst-case-safe";
  std::string agent;
  std::string tcp_host;
  int tcp_port = 0;
  int tick_deadline_ms = 1000;
  double dt = 0.1;
  double t_max = 60.0;
  std::string out;
};

int cmd_run(const RunArgs& a) {
  ScenarioConfig cfg;
  VistaKind kind = vista_kind_from_string(a.kind);
  cfg.ctx = context_for(kind);
  ADFunctions ad = ADFunctions::preset(a.preset);

  cfg.tc.kind = kind;
  cfg.tc.profile = a.preset;
  cfg.tc.ve = a.ve;
  cfg.tc.xe = initial_ego_distance(cfg.ctx, ad, a.ve);
  if (kind == VistaKind::crossing_light) {
    if (a.has_xa)
      throw std::invalid_argument("crossing-light cases have no arriving vehicle; drop --xa");
  } else if (!a.has_xa) {
    throw std::invalid_argument("--xa is required for " + a.kind);
  } else {
    cfg.tc.xa = a.xa;
  }
  cfg.tc.xf = a.xf;

  cfg.policy = policy_kind_from_string(a.policy);
  cfg.arriving_profile = a.arriving_preset;
  cfg.dt = a.dt;
  cfg.t_max = a.t_max;
  cfg.agent_command = split_command(a.agent);
  cfg.tcp_host = a.tcp_host;
  cfg.tcp_port = a.tcp_port;
  cfg.tick_deadline_ms = a.tick_deadline_ms;
  if (!cfg.agent_command.empty() || cfg.tcp_port > 0) cfg.policy = PolicyKind::external;

  Trace trace = run_scenario(cfg);
  VerdictRecord rec = evaluate_trace(trace);

  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_file(a.out + "/trace.jsonl", trace_to_jsonl(trace));
    write_file(a.out + "/verdict.json", verdict_to_json(rec).dump(2) + "\n");
    write_file(a.out + "/map.json", dump_map_json(build_scenario_map(cfg.ctx)));
  }
  std::printf("verdict %s behavior %s termination %s ticks %d\n", verdict_cell(rec).c_str(),
              rec.behavior.c_str(), rec.termination.c_str(), rec.ticks);
  return 0;
}

struct SweepArgs {
  std::vector<std::string> kinds = {"all"};
  std::string preset = "apollo-like";
  std::string arriving_preset;
  std::vector<double> ve;
  std::string policy = "worst-case-safe";
  GridSpec grid;
  std::string out;
  int jobs = 0;
  bool no_refine_class = false;
  bool no_refine_unsafe = false;
  std::string agent;
  std::string tcp_host;
  int tcp_port = 0;
  int tick_deadline_ms = 1000;
  double dt = 0.1;
  double t_max = 60.0;
};

SweepOptions to_sweep_options(const SweepArgs& a) {
  SweepOptions opts;
  opts.kinds = parse_kinds(a.kinds);
  opts.profile = a.preset;
  opts.arriving_profile = a.arriving_preset;
  opts.policy = policy_kind_from_string(a.policy);
  opts.grid = a.grid;
  opts.grid.ve_values = a.ve;
  opts.out_dir = a.out;
  opts.jobs = a.jobs;
  opts.refine_class_change = !a.no_refine_class;
  opts.refine_unsafe = !a.no_refine_unsafe;
  opts.dt = a.dt;
  opts.t_max = a.t_max;
  opts.agent_command = split_command(a.agent);
  opts.tcp_host = a.tcp_host;
  opts.tcp_port = a.tcp_port;
  opts.tick_deadline_ms = a.tick_deadline_ms;
  if (!opts.agent_command.empty() || opts.tcp_port > 0) opts.policy = PolicyKind::external;
  return opts;
}

int cmd_sweep(const SweepArgs& a) {
  SweepStats stats = run_sweep(to_sweep_options(a));
  std::printf("cells %d simulated %d reused %d findings %d\n", stats.cells, stats.simulated,
              stats.reused, stats.findings);
  return 0;
}

int cmd_report(const SweepArgs& a) {
  SweepStats stats = rebuild_reports(to_sweep_options(a));
  std::printf("cells %d findings %d\n", stats.cells, stats.findings);
  return 0;
}

struct AgentArgs {
  std::string policy = "worst-case-safe";
  int die_after_ticks = -1;
  int tcp_port = -1;
};

int cmd_agent(const AgentArgs& a) {
  AgentOptions opts;
  opts.policy = policy_kind_from_string(a.policy);
  opts.die_after_ticks = a.die_after_ticks;
  opts.tcp_port = a.tcp_port;
  return run_example_agent(opts);
}

void add_grid_flags(CLI::App* cmd, GridSpec& grid) {
  cmd->add_option("--grid-lo", grid.lo, "Smallest grid distance");
  cmd->add_option("--grid-hi", grid.hi, "Largest grid distance");
  cmd->add_option("--grid-step", grid.step, "Base grid spacing");
  cmd->add_option("--refine-step", grid.refine_step, "Refined grid spacing");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical test configurations for driving vistas: generation, simulation, "
               "verdicts, and reports"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Options file, TOML-style sections per subcommand");
  app.get_config_ptr()->envname("VISTATEST_CONFIG");

  AdTableArgs ad_args;
  auto* ad_cmd = app.add_subcommand("ad-table", "Print braking/acceleration capability tables");
  ad_cmd->configurable();
  ad_cmd->add_option("--preset", ad_args.preset, "Capability preset name");
  ad_cmd->add_option("--speeds", ad_args.speeds, "Start speeds (m/s)")->delimiter(',');
  ad_cmd->add_option("--dists", ad_args.dists, "Reach distances (m)")->delimiter(',');
  ad_cmd->add_option("--out", ad_args.out, "Output file (default stdout)");

  CriticalsArgs crit_args;
  auto* crit_cmd = app.add_subcommand("criticals", "Print critical test distances");
  crit_cmd->configurable();
  crit_cmd->add_option("--kind", crit_args.kind, "Vista kind")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(kind_names().begin(), kind_names().end() - 1)));
  crit_cmd->add_option("--preset", crit_args.preset, "Capability preset name");
  crit_cmd->add_option("--ve", crit_args.ve, "Ego start speeds (m/s)")->delimiter(',');
  crit_cmd->add_option("--format", crit_args.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  crit_cmd->add_option("--out", crit_args.out, "Output file (default stdout)");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "Emit grid test cases as JSON lines");
  gen_cmd->configurable();
  gen_cmd->add_option("--kind", gen_args.kinds, "Vista kinds (repeatable, or all)")
      ->delimiter(',')
      ->check(CLI::IsMember(kind_names()));
  gen_cmd->add_option("--preset", gen_args.preset, "Capability preset name");
  gen_cmd->add_option("--ve", gen_args.ve, "Ego start speeds (m/s)")->delimiter(',');
  add_grid_flags(gen_cmd, gen_args.grid);
  gen_cmd->add_option("--out", gen_args.out, "Output file (default stdout)");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Simulate one test case and judge the trace");
  run_cmd->configurable();
  run_cmd->add_option("--kind", run_args.kind, "Vista kind")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(kind_names().begin(), kind_names().end() - 1)));
  run_cmd->add_option("--preset", run_args.preset, "Ego capability preset");
  run_cmd->add_option("--arriving-preset", run_args.arriving_preset,
                      "Arriving-lane capability preset (default: ego preset)");
  run_cmd->add_option("--ve", run_args.ve, "Ego start speed (m/s)");
  auto* xa_opt = run_cmd->add_option("--xa", run_args.xa, "Arriving vehicle distance (m)");
  run_cmd->add_option("--xf", run_args.xf, "Front vehicle distance past the zone (m)");
  run_cmd->add_option("--policy", run_args.policy, "Ego policy")
      ->check(CLI::IsMember(policy_names()));
  run_cmd->add_option("--agent", run_args.agent, "External agent command (stdio transport)");
  run_cmd->add_option("--tcp-host", run_args.tcp_host, "External agent host");
  run_cmd->add_option("--tcp-port", run_args.tcp_port, "External agent port");
  run_cmd->add_option("--tick-deadline-ms", run_args.tick_deadline_ms,
                      "Per-tick agent reply deadline");
  run_cmd->add_option("--dt", run_args.dt, "Step length (s)");
  run_cmd->add_option("--t-max", run_args.t_max, "Simulated time bound (s)");
  run_cmd->add_option("--out", run_args.out, "Output directory for trace/verdict/map")
      ->envname("VISTATEST_OUT");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a verdict grid with boundary refinement");
  sweep_cmd->configurable();
  sweep_cmd->add_option("--kind", sweep_args.kinds, "Vista kinds (repeatable, or all)")
      ->delimiter(',')
      ->check(CLI::IsMember(kind_names()));
  sweep_cmd->add_option("--preset", sweep_args.preset, "Ego capability preset");
  sweep_cmd->add_option("--arriving-preset", sweep_args.arriving_preset,
                        "Arriving-lane capability preset (default: ego preset)");
  sweep_cmd->add_option("--ve", sweep_args.ve, "Ego start speeds (m/s)")->delimiter(',');
  sweep_cmd->add_option("--policy", sweep_args.policy, "Ego policy")
      ->check(CLI::IsMember(policy_names()));
  add_grid_flags(sweep_cmd, sweep_args.grid);
  sweep_cmd->add_option("--out", sweep_args.out, "Output directory")
      ->required()
      ->envname("VISTATEST_OUT");
  sweep_cmd->add_option("--jobs", sweep_args.jobs, "Worker count (0: all cores)");
  sweep_cmd->add_flag("--no-refine-class", sweep_args.no_refine_class,
                      "Skip refinement at behavior-class changes");
  sweep_cmd->add_flag("--no-refine-unsafe", sweep_args.no_refine_unsafe,
                      "Skip refinement at safety boundaries");
  sweep_cmd->add_option("--agent", sweep_args.agent, "External agent command (stdio transport)");
  sweep_cmd->add_option("--tcp-host", sweep_args.tcp_host, "External agent host");
  sweep_cmd->add_option("--tcp-port", sweep_args.tcp_port, "External agent port");
  sweep_cmd->add_option("--tick-deadline-ms", sweep_args.tick_deadline_ms,
                        "Per-tick agent reply deadline");
  sweep_cmd->add_option("--dt", sweep_args.dt, "Step length (s)");
  sweep_cmd->add_option("--t-max", sweep_args.t_max, "Simulated time bound (s)");

  SweepArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Rebuild grids and summaries from stored cells");
  report_cmd->configurable();
  report_cmd->add_option("--kind", report_args.kinds, "Vista kinds to include (default all)")
      ->delimiter(',')
      ->check(CLI::IsMember(kind_names()));
  report_cmd->add_option("--out", report_args.out, "Output directory holding cells/")
      ->required()
      ->envname("VISTATEST_OUT");
  report_cmd->add_option("--dt", report_args.dt, "Step length the cells were run with (s)");

  AgentArgs agent_args;
  auto* agent_cmd =
      app.add_subcommand("serve-example-agent", "Serve the reference policy over the bridge");
  agent_cmd->configurable();
  agent_cmd->add_option("--policy", agent_args.policy, "Reference policy to serve")
      ->check(CLI::IsMember(policy_names()));
  agent_cmd->add_option("--die-after-ticks", agent_args.die_after_ticks,
                        "Exit abruptly after this many control replies");
  agent_cmd->add_option("--tcp-port", agent_args.tcp_port,
                        "Listen on this TCP port (0: ephemeral; default stdio)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ad_cmd->parsed()) return cmd_ad_table(ad_args);
    if (crit_cmd->parsed()) return cmd_criticals(crit_args);
    if (gen_cmd->parsed()) return cmd_gen(gen_args);
    if (run_cmd->parsed()) {
      run_args.has_xa = xa_opt->count() > 0;
      return cmd_run(run_args);
    }
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
    if (report_cmd->parsed()) return cmd_report(report_args);
    if (agent_cmd->parsed()) return cmd_agent(agent_args);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
