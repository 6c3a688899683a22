#include "vistatest/sweep.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace vistatest {

namespace {

bool is_unsafe(const VerdictRecord& r) { return r.verdict != "PS" && r.verdict != "CS"; }

std::vector<VerdictRecord> eval_parallel(const std::vector<TestCase>& cases,
                                         const VerdictFn& eval, int jobs) {
  std::vector<VerdictRecord> out(cases.size());
  if (cases.empty()) return out;
  int workers = jobs <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : jobs;
  workers = std::max(1, std::min<int>(workers, static_cast<int>(cases.size())));
  if (workers == 1) {
    for (size_t i = 0; i < cases.size(); ++i) out[i] = eval(cases[i]);
    return out;
  }
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::string err;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= cases.size()) return;
        try {
          out[i] = eval(cases[i]);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (err.empty()) err = e.what();
          next.store(cases.size());
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (!err.empty()) throw std::runtime_error(err);
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  write_file(tmp, content);
  fs::rename(tmp, path);
}

std::string grid_base_name(VistaKind kind, double ve) {
  return to_string(kind) + "-v" + format_double(ve);
}

struct RecordKeyLess {
  bool operator()(const VerdictRecord& a, const VerdictRecord& b) const {
    std::string ka = to_string(a.tc.kind), kb = to_string(b.tc.kind);
    if (ka != kb) return ka < kb;
    if (a.tc.ve != b.tc.ve) return a.tc.ve < b.tc.ve;
    if (a.tc.xf != b.tc.xf) return a.tc.xf < b.tc.xf;
    return a.tc.xa.value_or(-1.0) < b.tc.xa.value_or(-1.0);
  }
};

struct FamilyReports {
  std::vector<json> rationality;
  int findings = 0;
};

void emit_family(const std::string& out_dir, const SweepOptions& opts, const VistaContext& ctx,
                 const ADFunctions& ad, double ve, const std::vector<VerdictRecord>& records,
                 FamilyReports& reports) {
  CriticalValues crit = critical_values(ctx, ad, ve);
  VerdictGrid grid = build_grid(records, crit);
  std::string base = out_dir + "/grids/" + grid_base_name(ctx.kind, ve);
  write_file_atomic(base + ".csv", grid_to_csv(grid));
  write_file_atomic(base + ".json", grid_to_json(grid).dump(2) + "\n");
  write_file_atomic(base + ".svg", grid_to_svg(grid));

  double eps = ctx.vl * opts.dt + ScenarioConfig{}.vehicle_length;
  auto findings = check_upward_closure(grid, eps);
  json entry;
  entry["kind"] = to_string(ctx.kind);
  entry["ve"] = ve;
  entry["eps"] = eps;
  json fl = json::array();
  for (const auto& f : findings) fl.push_back(finding_to_json(f));
  entry["findings"] = fl;
  reports.rationality.push_back(entry);
  reports.findings += static_cast<int>(findings.size());
}

void emit_shared(const std::string& out_dir, std::vector<VerdictRecord> all,
                 const FamilyReports& reports) {
  std::sort(all.begin(), all.end(), RecordKeyLess{});
  std::string lines;
  for (const auto& r : all) lines += verdict_to_json(r).dump() + "\n";
  write_file_atomic(out_dir + "/verdicts.jsonl", lines);

  auto counts = verdict_counts(all);
  write_file_atomic(out_dir + "/summary.csv", summary_to_csv(counts));
  write_file_atomic(out_dir + "/summary.json", summary_to_json(counts).dump(2) + "\n");

  json rat = json::array();
  for (const auto& e : reports.rationality) rat.push_back(e);
  write_file_atomic(out_dir + "/rationality.json", rat.dump(2) + "\n");
}

}  // namespace

std::string cell_file_name(const TestCase& tc) {
  std::string name = grid_base_name(tc.kind, tc.ve);
  if (tc.xa) name += "-a" + std::to_string(std::llround(*tc.xa * 100.0));
  name += "-f" + std::to_string(std::llround(tc.xf * 100.0));
  return name + ".json";
}

ScenarioConfig scenario_config_for(const SweepOptions& opts, const TestCase& tc) {
  ScenarioConfig cfg;
  cfg.tc = tc;
  cfg.ctx = context_for(tc.kind);
  cfg.policy = opts.policy;
  cfg.arriving_profile = opts.arriving_profile;
  cfg.dt = opts.dt;
  cfg.t_max = opts.t_max;
  cfg.agent_command = opts.agent_command;
  cfg.tcp_host = opts.tcp_host;
  cfg.tcp_port = opts.tcp_port;
  cfg.tick_deadline_ms = opts.tick_deadline_ms;
  return cfg;
}

VerdictRecord run_case(const SweepOptions& opts, const TestCase& tc) {
  Trace trace = run_scenario(scenario_config_for(opts, tc));
  return evaluate_trace(trace);
}

std::vector<TestCase> refine_axis_gaps(const VerdictGrid& grid, const GridSpec& spec,
                                       bool on_class_change, bool on_unsafe) {
  std::vector<TestCase> fresh;
  std::set<std::pair<long long, long long>> seen;
  auto trigger = [&](const VerdictRecord& a, const VerdictRecord& b) {
    if (on_class_change && a.behavior != b.behavior) return true;
    if (on_unsafe && is_unsafe(a) != is_unsafe(b)) return true;
    return false;
  };
  auto add = [&](double xf, std::optional<double> xa) {
    auto key = std::make_pair(VerdictGrid::axis_key(xf),
                              xa ? VerdictGrid::axis_key(*xa) : -1000000000LL);
    if (grid.cells.count(key) || !seen.insert(key).second) return;
    TestCase tc = grid.cells.begin()->second.tc;
    tc.xf = xf;
    tc.xa = xa;
    fresh.push_back(tc);
  };

  if (!grid.has_xa) {
    std::vector<const VerdictRecord*> col;
    for (double xf : grid.xf_values) col.push_back(grid.cell(xf, 0.0));
    for (size_t i = 0; i + 1 < col.size(); ++i) {
      if (!col[i] || !col[i + 1]) continue;
      double lo = grid.xf_values[i], hi = grid.xf_values[i + 1];
      if (hi - lo <= spec.refine_step + 1e-9 || !trigger(*col[i], *col[i + 1])) continue;
      for (double m : refinement_fill(lo, hi, spec.refine_step)) add(m, std::nullopt);
    }
    return fresh;
  }

  for (double xf : grid.xf_values) {
    for (size_t i = 0; i + 1 < grid.xa_values.size(); ++i) {
      double lo = grid.xa_values[i], hi = grid.xa_values[i + 1];
      const VerdictRecord* a = grid.cell(xf, lo);
      const VerdictRecord* b = grid.cell(xf, hi);
      if (!a || !b) continue;
      if (hi - lo <= spec.refine_step + 1e-9 || !trigger(*a, *b)) continue;
      for (double m : refinement_fill(lo, hi, spec.refine_step)) add(xf, m);
    }
  }
  for (double xa : grid.xa_values) {
    for (size_t i = 0; i + 1 < grid.xf_values.size(); ++i) {
      double lo = grid.xf_values[i], hi = grid.xf_values[i + 1];
      const VerdictRecord* a = grid.cell(lo, xa);
      const VerdictRecord* b = grid.cell(hi, xa);
      if (!a || !b) continue;
      if (hi - lo <= spec.refine_step + 1e-9 || !trigger(*a, *b)) continue;
      for (double m : refinement_fill(lo, hi, spec.refine_step)) add(m, xa);
    }
  }
  return fresh;
}

std::vector<VerdictRecord> sweep_grid(const VistaContext& ctx, const ADFunctions& ad,
                                      const std::string& profile, double ve,
                                      const GridSpec& spec, bool refine_class_change,
                                      bool refine_unsafe, const VerdictFn& eval, int jobs) {
  std::map<std::pair<long long, long long>, VerdictRecord> acc;
  std::vector<TestCase> pending = generate_grid(ctx, ad, profile, ve, spec);
  while (!pending.empty()) {
    auto results = eval_parallel(pending, eval, jobs);
    for (auto& r : results) {
      auto key = std::make_pair(VerdictGrid::axis_key(r.tc.xf),
                                r.tc.xa ? VerdictGrid::axis_key(*r.tc.xa) : -1000000000LL);
      acc.insert_or_assign(key, std::move(r));
    }
    std::vector<VerdictRecord> records;
    records.reserve(acc.size());
    for (const auto& [key, r] : acc) records.push_back(r);
    VerdictGrid grid = build_grid(records);
    if (!refine_class_change && !refine_unsafe) break;
    pending = refine_axis_gaps(grid, spec, refine_class_change, refine_unsafe);
  }
  std::vector<VerdictRecord> records;
  records.reserve(acc.size());
  for (auto& [key, r] : acc) records.push_back(std::move(r));
  return records;
}

SweepStats run_sweep(const SweepOptions& opts) {
  if (opts.out_dir.empty()) throw std::invalid_argument("sweep needs an output directory");
  if (opts.kinds.empty()) throw std::invalid_argument("sweep needs at least one vista kind");
  fs::create_directories(opts.out_dir + "/cells");
  fs::create_directories(opts.out_dir + "/grids");
  ADFunctions ad = ADFunctions::preset(opts.profile);

  SweepStats stats;
  std::atomic<int> simulated{0}, reused{0};
  VerdictFn cached_eval = [&](const TestCase& tc) {
    std::string path = opts.out_dir + "/cells/" + cell_file_name(tc);
    if (file_exists(path)) {
      VerdictRecord rec = verdict_from_json(json::parse(read_file(path)));
      if (rec.policy != to_string(opts.policy) || rec.tc.profile != opts.profile) {
        throw std::runtime_error("stored cell " + path + " was produced with policy " +
                                 rec.policy + " profile " + rec.tc.profile +
                                 "; clear the output directory to re-run");
      }
      reused.fetch_add(1);
      return rec;
    }
    VerdictRecord rec = run_case(opts, tc);
    write_file_atomic(path, verdict_to_json(rec).dump(2) + "\n");
    simulated.fetch_add(1);
    return rec;
  };

  std::vector<VerdictRecord> all;
  FamilyReports reports;
  for (VistaKind kind : opts.kinds) {
    VistaContext ctx = context_for(kind);
    write_file_atomic(opts.out_dir + "/map-" + to_string(kind) + ".json",
                      dump_map_json(build_scenario_map(ctx)));
    std::vector<double> speeds =
        opts.grid.ve_values.empty() ? default_ve_values(kind) : opts.grid.ve_values;
    for (double ve : speeds) {
      auto records = sweep_grid(ctx, ad, opts.profile, ve, opts.grid, opts.refine_class_change,
                                opts.refine_unsafe, cached_eval, opts.jobs);
      emit_family(opts.out_dir, opts, ctx, ad, ve, records, reports);
      all.insert(all.end(), records.begin(), records.end());
    }
  }
  emit_shared(opts.out_dir, all, reports);
  stats.simulated = simulated.load();
  stats.reused = reused.load();
  stats.cells = static_cast<int>(all.size());
  stats.findings = reports.findings;
  return stats;
}

SweepStats rebuild_reports(const SweepOptions& opts) {
  if (opts.out_dir.empty()) throw std::invalid_argument("report needs an output directory");
  std::string cells_dir = opts.out_dir + "/cells";
  if (!fs::is_directory(cells_dir))
    throw std::runtime_error("no cells directory under " + opts.out_dir);
  fs::create_directories(opts.out_dir + "/grids");

  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(cells_dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no stored cells under " + cells_dir);

  // family key: (kind, ve as axis key)
  std::map<std::pair<std::string, long long>, std::vector<VerdictRecord>> families;
  for (const auto& path : files) {
    VerdictRecord rec = verdict_from_json(json::parse(read_file(path)));
    if (!opts.kinds.empty() &&
        std::find(opts.kinds.begin(), opts.kinds.end(), rec.tc.kind) == opts.kinds.end())
      continue;
    families[{to_string(rec.tc.kind), VerdictGrid::axis_key(rec.tc.ve)}].push_back(rec);
  }
  if (families.empty()) throw std::runtime_error("no stored cells match the requested kinds");

  SweepStats stats;
  std::vector<VerdictRecord> all;
  FamilyReports reports;
  for (auto& [key, records] : families) {
    const TestCase& head = records.front().tc;
    VistaContext ctx = context_for(head.kind);
    ADFunctions ad = ADFunctions::preset(head.profile);
    write_file_atomic(opts.out_dir + "/map-" + to_string(head.kind) + ".json",
                      dump_map_json(build_scenario_map(ctx)));
    emit_family(opts.out_dir, opts, ctx, ad, head.ve, records, reports);
    all.insert(all.end(), records.begin(), records.end());
    stats.reused += static_cast<int>(records.size());
  }
  emit_shared(opts.out_dir, all, reports);
  stats.cells = static_cast<int>(all.size());
  stats.findings = reports.findings;
  return stats;
}

}  // namespace vistatest
