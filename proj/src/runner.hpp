#ifndef RLX2_RUNNER_HPP
#define RLX2_RUNNER_HPP

#include <functional>
#include <string>
#include <vector>

#include "agents.hpp"
#include "config.hpp"

namespace rlx2 {

// Exit statuses shared with the C API and the CLI.
inline constexpr int kStatusOk = 0;
inline constexpr int kStatusRunFailure = 1;
inline constexpr int kStatusUsage = 2;

struct RunOutcome {
    int status = kStatusOk;
    double final_score = 0.0;
    std::string error;
    TrainResult result;  // valid when status == kStatusOk
};

// One training job: runs to completion and writes manifest.txt, metrics.csv,
// summary.json, checkpoint.txt and per-layer mask dumps under out_dir. A
// diverged run leaves diagnostic.txt instead and reports a run failure.
RunOutcome run_training_job(const TrainConfig& cfg, const std::string& out_dir);

struct SweepCell {
    double sparsity = 0.0;
    std::uint64_t seed = 0;
    double score = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepOutcome {
    int status = kStatusOk;
    std::vector<SweepCell> cells;
    std::vector<SparsityScore> aggregated;  // mean score per sparsity
    double dense_score = 0.0;
    bool compression_found = false;
    double compression_sparsity = 0.0;
    std::string error;
};

// Grid of sparsity levels x seeds, run as independent jobs (optionally in
// parallel workers with disjoint output subdirectories). A dense reference
// row at sparsity 0 is always included. Per-cell failures are recorded, not
// fatal. Writes sweep.csv and sweep_summary.json under out_dir.
SweepOutcome run_sweep_job(const TrainConfig& base, std::vector<double> grid, int seeds,
                           int jobs, const std::string& out_dir,
                           const std::function<void(const std::string&)>& line);

}  // namespace rlx2

#endif
