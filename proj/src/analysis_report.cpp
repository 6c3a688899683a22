#include "vistatest/analysis_report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vistatest {

namespace {

constexpr long long kNoXa = -1000000000LL;

bool is_bad(const std::string& verdict) {
  return verdict == "Ae" || verdict == "Aa" || verdict == "Blk" || verdict == "Fsw" ||
         verdict == "CU" || verdict == "PU";
}

const std::vector<std::string>& verdict_order() {
  static const std::vector<std::string> order = {"PS", "CS", "PU", "CU",
                                                 "Ae", "Aa", "Blk", "Fsw"};
  return order;
}

std::string cell_color(const std::string& verdict) {
  if (verdict == "PS") return "#43a047";
  if (verdict == "CS") return "#cfd8dc";
  if (verdict == "PU") return "#fb8c00";
  if (verdict == "CU") return "#fdd835";
  if (verdict == "Ae") return "#e53935";
  if (verdict == "Aa") return "#b71c1c";
  if (verdict == "Blk") return "#6a1b9a";
  return "#212121";  // Fsw
}

std::string percent_of(int count, int total) {
  double p = total > 0 ? 100.0 * count / total : 0.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", p);
  return buf;
}

}  // namespace

long long VerdictGrid::axis_key(double x) { return std::llround(x * 1000.0); }

const VerdictRecord* VerdictGrid::cell(double xf, double xa) const {
  auto it = cells.find({axis_key(xf), has_xa ? axis_key(xa) : kNoXa});
  return it == cells.end() ? nullptr : &it->second;
}

VerdictGrid build_grid(const std::vector<VerdictRecord>& records,
                       std::optional<CriticalValues> criticals,
                       const std::vector<TestCase>* required) {
  if (records.empty()) throw std::runtime_error("build_grid: no verdicts");
  VerdictGrid g;
  const TestCase& head = records.front().tc;
  g.kind = head.kind;
  g.profile = head.profile;
  g.policy = records.front().policy;
  g.ve = head.ve;
  g.has_xa = head.xa.has_value();
  g.criticals = std::move(criticals);

  std::set<long long> xa_set, xf_set;
  for (const auto& r : records) {
    if (r.tc.kind != g.kind || r.tc.profile != g.profile || r.tc.ve != g.ve ||
        r.policy != g.policy || r.tc.xa.has_value() != g.has_xa) {
      throw std::runtime_error("build_grid: record for " + to_string(r.tc.kind) + " ve=" +
                               format_double(r.tc.ve) + " does not belong to the " +
                               to_string(g.kind) + " ve=" + format_double(g.ve) + " family");
    }
    long long kf = VerdictGrid::axis_key(r.tc.xf);
    long long ka = g.has_xa ? VerdictGrid::axis_key(*r.tc.xa) : kNoXa;
    if (!g.cells.emplace(std::make_pair(kf, ka), r).second) {
      throw std::runtime_error("build_grid: duplicate cell xf=" + format_double(r.tc.xf) +
                               (g.has_xa ? " xa=" + format_double(*r.tc.xa) : ""));
    }
    xf_set.insert(kf);
    if (g.has_xa) xa_set.insert(ka);
  }
  for (long long k : xf_set) g.xf_values.push_back(k / 1000.0);
  for (long long k : xa_set) g.xa_values.push_back(k / 1000.0);

  if (required) {
    std::vector<std::string> gaps;
    for (const auto& tc : *required) {
      if (!g.cells.count({VerdictGrid::axis_key(tc.xf),
                          tc.xa ? VerdictGrid::axis_key(*tc.xa) : kNoXa})) {
        gaps.push_back("xf=" + format_double(tc.xf) +
                       (tc.xa ? " xa=" + format_double(*tc.xa) : ""));
      }
    }
    if (!gaps.empty()) {
      throw std::runtime_error("build_grid: " + std::to_string(gaps.size()) +
                               " missing cells: " + join(gaps, "; "));
    }
  }
  return g;
}

std::vector<RationalityFinding> check_upward_closure(const VerdictGrid& grid, double eps) {
  std::vector<RationalityFinding> findings;
  auto flag = [&](const VerdictRecord& rec, const std::string& kind, const std::string& witness,
                  std::optional<double> wxa, double wxf) {
    RationalityFinding f;
    f.kind = kind;
    f.ve = grid.ve;
    f.xa = rec.tc.xa;
    f.xf = rec.tc.xf;
    f.verdict = rec.verdict;
    f.witness = witness;
    f.witness_xa = wxa;
    f.witness_xf = wxf;
    findings.push_back(std::move(f));
  };

  for (const auto& [key, rec] : grid.cells) {
    if (rec.verdict == "PS") continue;
    const std::string kind = is_bad(rec.verdict) ? "irrational-safety" : "irrational-performance";

    // A safe-progress cell at smaller-or-equal distances on every axis shows
    // the flagged outcome cannot be blamed on the layout.
    const VerdictRecord* witness = nullptr;
    for (const auto& [wkey, wrec] : grid.cells) {
      if (wkey == key) continue;
      if (wkey.first > key.first || wkey.second > key.second) continue;
      if (wrec.verdict != "PS") continue;
      witness = &wrec;
      break;
    }
    if (witness) {
      flag(rec, kind, "cell", witness->tc.xa, witness->tc.xf);
      continue;
    }

    // Past the critical values plus a settling margin, safe progress is
    // possible by construction even without an in-grid witness.
    if (grid.criticals && grid.criticals->feasible) {
      double corner_xf = grid.criticals->x_f_hat + eps;
      bool beyond_xf = rec.tc.xf >= corner_xf - 1e-9;
      bool beyond_xa = true;
      std::optional<double> corner_xa;
      if (grid.has_xa) {
        if (!grid.criticals->x_a_hat) continue;
        corner_xa = *grid.criticals->x_a_hat + eps;
        beyond_xa = rec.tc.xa && *rec.tc.xa >= *corner_xa - 1e-9;
      }
      if (beyond_xf && beyond_xa) flag(rec, kind, "corner", corner_xa, corner_xf);
    }
  }
  return findings;
}

json finding_to_json(const RationalityFinding& f) {
  json j;
  j["kind"] = f.kind;
  j["ve"] = f.ve;
  if (f.xa) j["xa"] = *f.xa;
  j["xf"] = f.xf;
  j["verdict"] = f.verdict;
  j["witness"] = f.witness;
  if (f.witness_xa) j["witness_xa"] = *f.witness_xa;
  j["witness_xf"] = f.witness_xf;
  return j;
}

std::map<std::string, int> verdict_counts(const std::vector<VerdictRecord>& records) {
  std::map<std::string, int> counts;
  for (const auto& code : verdict_order()) counts[code] = 0;
  for (const auto& r : records) counts[r.verdict]++;
  return counts;
}

std::string grid_to_csv(const VerdictGrid& g) {
  std::string out = "# kind=" + to_string(g.kind) + " ve=" + format_double(g.ve) +
                    " profile=" + g.profile + " policy=" + g.policy;
  if (g.criticals) {
    if (g.criticals->x_a_hat) out += " xa_hat=" + format_double(*g.criticals->x_a_hat);
    out += " xf_hat=" + format_double(g.criticals->x_f_hat);
    out += std::string(" feasible=") + (g.criticals->feasible ? "true" : "false");
  }
  out += "\n";
  if (!g.has_xa) {
    out += "xf,verdict\n";
    for (double xf : g.xf_values) {
      const VerdictRecord* r = g.cell(xf, 0.0);
      out += format_double(xf) + "," + (r ? verdict_cell(*r) : "") + "\n";
    }
    return out;
  }
  out += "xf\\xa";
  for (double xa : g.xa_values) out += "," + format_double(xa);
  out += "\n";
  for (double xf : g.xf_values) {
    out += format_double(xf);
    for (double xa : g.xa_values) {
      const VerdictRecord* r = g.cell(xf, xa);
      out += ",";
      if (r) out += verdict_cell(*r);
    }
    out += "\n";
  }
  return out;
}

json grid_to_json(const VerdictGrid& g) {
  json j;
  j["kind"] = to_string(g.kind);
  j["profile"] = g.profile;
  j["policy"] = g.policy;
  j["ve"] = g.ve;
  if (g.criticals) {
    json c;
    c["x_e"] = g.criticals->x_e;
    if (g.criticals->x_a_hat) c["x_a_hat"] = *g.criticals->x_a_hat;
    c["x_f_hat"] = g.criticals->x_f_hat;
    c["feasible"] = g.criticals->feasible;
    j["criticals"] = c;
  }
  if (g.has_xa) j["xa_values"] = g.xa_values;
  j["xf_values"] = g.xf_values;
  json cells = json::array();
  for (const auto& [key, rec] : g.cells) cells.push_back(verdict_to_json(rec));
  j["cells"] = cells;
  return j;
}

std::string grid_to_svg(const VerdictGrid& g) {
  const int cell = 26;
  const int left = 64, top = 56, bottom = 40, right = 16;
  const int cols = g.has_xa ? static_cast<int>(g.xa_values.size()) : 1;
  const int rows = static_cast<int>(g.xf_values.size());
  const int width = left + cols * cell + right;
  const int height = top + rows * cell + bottom;

  auto labeled = [](double v) { return std::fabs(std::remainder(v, 20.0)) < 1e-9; };
  // Rows are drawn bottom-up so larger front gaps sit higher in the picture.
  auto row_y = [&](int i) { return top + (rows - 1 - i) * cell; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"monospace\" font-size=\"10\">\n";
  s << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"16\" font-size=\"12\">" << to_string(g.kind)
    << " ve=" << format_double(g.ve) << " " << g.profile << " " << g.policy << "</text>\n";
  int lx = left;
  for (const auto& code : verdict_order()) {
    s << "<rect x=\"" << lx << "\" y=\"24\" width=\"10\" height=\"10\" fill=\""
      << cell_color(code) << "\"/>\n";
    s << "<text x=\"" << lx + 13 << "\" y=\"33\">" << code << "</text>\n";
    lx += 13 + 10 * static_cast<int>(code.size()) + 6;
  }

  for (int i = 0; i < rows; ++i) {
    double xf = g.xf_values[i];
    for (int c = 0; c < cols; ++c) {
      double xa = g.has_xa ? g.xa_values[c] : 0.0;
      const VerdictRecord* r = g.cell(xf, xa);
      int x = left + c * cell;
      int y = row_y(i);
      if (r) {
        s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
          << cell << "\" fill=\"" << cell_color(r->verdict)
          << "\" stroke=\"white\"><title>" << verdict_cell(*r)
          << (g.has_xa ? " xa=" + format_double(xa) : "") << " xf=" << format_double(xf)
          << "</title></rect>\n";
      } else {
        s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
          << cell << "\" fill=\"white\" stroke=\"#eeeeee\"/>\n";
      }
    }
    if (labeled(xf)) {
      s << "<text x=\"" << left - 6 << "\" y=\"" << row_y(i) + cell / 2 + 4
        << "\" text-anchor=\"end\">" << format_double(xf) << "</text>\n";
    }
  }
  if (g.has_xa) {
    for (int c = 0; c < cols; ++c) {
      if (!labeled(g.xa_values[c])) continue;
      s << "<text x=\"" << left + c * cell + cell / 2 << "\" y=\"" << top + rows * cell + 14
        << "\" text-anchor=\"middle\">" << format_double(g.xa_values[c]) << "</text>\n";
    }
    s << "<text x=\"" << left + cols * cell / 2 << "\" y=\"" << top + rows * cell + 30
      << "\" text-anchor=\"middle\">x_a (m)</text>\n";
  }
  s << "<text x=\"12\" y=\"" << top - 8 << "\">x_f (m)</text>\n";

  // Dashed guides at the computed critical values.
  if (g.criticals && g.criticals->feasible && !g.xf_values.empty()) {
    double span_f = g.xf_values.back() - g.xf_values.front();
    if (span_f > 0 && g.criticals->x_f_hat >= g.xf_values.front() &&
        g.criticals->x_f_hat <= g.xf_values.back()) {
      double frac = (g.criticals->x_f_hat - g.xf_values.front()) / span_f;
      double y = top + rows * cell - frac * (rows * cell);
      s << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + cols * cell
        << "\" y2=\"" << y << "\" stroke=\"#1565c0\" stroke-dasharray=\"4 3\"/>\n";
    }
    if (g.has_xa && g.criticals->x_a_hat && !g.xa_values.empty()) {
      double span_a = g.xa_values.back() - g.xa_values.front();
      if (span_a > 0 && *g.criticals->x_a_hat >= g.xa_values.front() &&
          *g.criticals->x_a_hat <= g.xa_values.back()) {
        double frac = (*g.criticals->x_a_hat - g.xa_values.front()) / span_a;
        double x = left + frac * (cols * cell);
        s << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\""
          << top + rows * cell << "\" stroke=\"#1565c0\" stroke-dasharray=\"4 3\"/>\n";
      }
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string summary_to_csv(const std::map<std::string, int>& counts) {
  int total = 0;
  for (const auto& [code, n] : counts) total += n;
  std::string out = "verdict,count,percent\n";
  for (const auto& code : verdict_order()) {
    auto it = counts.find(code);
    int n = it == counts.end() ? 0 : it->second;
    out += code + "," + std::to_string(n) + "," + percent_of(n, total) + "\n";
  }
  out += "total," + std::to_string(total) + ",100.0\n";
  return out;
}

json summary_to_json(const std::map<std::string, int>& counts) {
  int total = 0;
  for (const auto& [code, n] : counts) total += n;
  json j;
  j["total"] = total;
  json by = json::object();
  json pct = json::object();
  for (const auto& code : verdict_order()) {
    auto it = counts.find(code);
    int n = it == counts.end() ? 0 : it->second;
    by[code] = n;
    pct[code] = percent_of(n, total);
  }
  j["counts"] = by;
  j["percent"] = pct;
  return j;
}

}  // namespace vistatest
