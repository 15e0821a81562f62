#ifndef RLX2_VERIFY_HPP
#define RLX2_VERIFY_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rlx2 {

// Built-in oracle suites, runnable from the CLI for auditable checks.
//  gradient      finite-difference check of the dense backward pass
//  decomposition multi-step target error identity on random tabular MDPs
//  flops         instrumented op counts against the analytic formulas
//  conservation  topology-evolution fuzzing (counts, disjointness, masking)
struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;  // measured errors / counts
};

using LineSink = std::function<void(const std::string&)>;

// suite empty/"all" runs everything. inject_fault flips one mask bit inside
// the conservation suite to prove the check trips. Returns one result per
// suite run.
std::vector<SuiteResult> run_verify(const std::string& suite, std::uint64_t seed,
                                    bool inject_fault, const LineSink& line);

bool all_passed(const std::vector<SuiteResult>& results);

}  // namespace rlx2

#endif
