#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vistatest/criticality.h"
#include "vistatest/oracle.h"

namespace vistatest {

// Verdicts of one (kind, ve, profile, policy) family arranged over the
// (x_a, x_f) plane. Crossing-light families have no x_a axis.
struct VerdictGrid {
  VistaKind kind = VistaKind::merging;
  std::string profile;
  std::string policy;
  double ve = 0.0;
  bool has_xa = true;
  std::vector<double> xa_values;  // ascending, empty when !has_xa
  std::vector<double> xf_values;  // ascending
  std::map<std::pair<long long, long long>, VerdictRecord> cells;  // (xf, xa) keys
  std::optional<CriticalValues> criticals;

  static long long axis_key(double x);
  const VerdictRecord* cell(double xf, double xa) const;
};

// Assembles the grid and checks its shape: all records must belong to one
// family, duplicates are rejected, and when `required` is given every listed
// case must be present.
VerdictGrid build_grid(const std::vector<VerdictRecord>& records,
                       std::optional<CriticalValues> criticals = std::nullopt,
                       const std::vector<TestCase>* required = nullptr);

// A spot where the grid contradicts upward closure: the outcome at the
// flagged cell is worse than at a componentwise smaller-or-equal witness.
// The witness is either a safe-progress cell or the always-feasible corner
// eps past the critical values.
struct RationalityFinding {
  std::string kind;  // irrational-safety | irrational-performance
  double ve = 0.0;
  std::optional<double> xa;
  double xf = 0.0;
  std::string verdict;
  std::string witness;  // cell | corner
  std::optional<double> witness_xa;
  double witness_xf = 0.0;
};

std::vector<RationalityFinding> check_upward_closure(const VerdictGrid& grid, double eps);

json finding_to_json(const RationalityFinding& f);

std::map<std::string, int> verdict_counts(const std::vector<VerdictRecord>& records);

std::string grid_to_csv(const VerdictGrid& g);
json grid_to_json(const VerdictGrid& g);
std::string grid_to_svg(const VerdictGrid& g);
std::string summary_to_csv(const std::map<std::string, int>& counts);
json summary_to_json(const std::map<std::string, int>& counts);

}  // namespace vistatest
