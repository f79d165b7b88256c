#ifndef MPPI_LAB_ACCEPTANCE_HPP_
#define MPPI_LAB_ACCEPTANCE_HPP_

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace mppi_lab {

struct CriterionResult {
  std::string name;
  bool passed = false;
  bool errored = false;  // threw instead of producing a verdict
  std::string detail;
  double seconds = 0.0;
};

struct Criterion {
  std::string name;
  std::string group;  // --only accepts a name or a group
  std::function<CriterionResult()> run;
};

const std::vector<Criterion>& acceptance_criteria();

// Runs every criterion matching `only` (all when empty), never stopping
// early; a throwing criterion is reported as an errored failure. Throws
// kConfig when `only` matches nothing. Streams one line per criterion to
// `log` as it finishes.
std::vector<CriterionResult> run_acceptance(const std::string& only,
                                            std::ostream* log = nullptr);

// "PASS name (1.2 s): detail"
std::string format_result(const CriterionResult& r);

}  // namespace mppi_lab

#endif  // MPPI_LAB_ACCEPTANCE_HPP_
