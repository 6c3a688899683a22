#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vistatest/analysis_report.h"
#include "vistatest/sim_core.h"

namespace vistatest {

struct SweepOptions {
  std::vector<VistaKind> kinds;
  std::string profile = "apollo-like";
  std::string arriving_profile;  // empty: same as profile
  PolicyKind policy = PolicyKind::worst_case_safe;
  GridSpec grid;
  std::string out_dir;
  int jobs = 0;  // <= 0: hardware concurrency
  bool refine_class_change = true;
  bool refine_unsafe = true;
  double dt = 0.1;
  double t_max = 60.0;
  std::vector<std::string> agent_command;  // external policy over stdio
  std::string tcp_host;                    // external policy over tcp
  int tcp_port = 0;
  int tick_deadline_ms = 1000;
};

struct SweepStats {
  int simulated = 0;
  int reused = 0;
  int cells = 0;
  int findings = 0;
};

// cells/<name>: one verdict per file so interrupted sweeps resume where they
// stopped.
std::string cell_file_name(const TestCase& tc);

ScenarioConfig scenario_config_for(const SweepOptions& opts, const TestCase& tc);

// Simulates one case and judges the trace.
VerdictRecord run_case(const SweepOptions& opts, const TestCase& tc);

using VerdictFn = std::function<VerdictRecord(const TestCase&)>;

// New cases splitting every axis-adjacent pair whose outcomes differ in
// behavior class or in safety while sitting further apart than refine_step.
std::vector<TestCase> refine_axis_gaps(const VerdictGrid& grid, const GridSpec& spec,
                                       bool on_class_change, bool on_unsafe);

// Base grid evaluation plus refinement to fixpoint for one (kind, ve) family.
std::vector<VerdictRecord> sweep_grid(const VistaContext& ctx, const ADFunctions& ad,
                                      const std::string& profile, double ve,
                                      const GridSpec& spec, bool refine_class_change,
                                      bool refine_unsafe, const VerdictFn& eval, int jobs);

// Full pipeline: maps, cells with resume, refinement, grids, rationality
// findings, sorted verdict log, summary. Byte-deterministic for a given
// option set regardless of the worker count.
SweepStats run_sweep(const SweepOptions& opts);

// Rebuilds every report artifact from the cell files already under out_dir
// without running any simulation.
SweepStats rebuild_reports(const SweepOptions& opts);

}  // namespace vistatest
