#include "runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "envs.hpp"
#include "io.hpp"

namespace rlx2 {

namespace fs = std::filesystem;

RunOutcome run_training_job(const TrainConfig& cfg, const std::string& out_dir) {
    RunOutcome out;
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/manifest.txt", manifest_text(cfg));

    try {
        auto env = make_env(cfg.env_name, cfg.seed);
        DetRng rng(cfg.seed);
        out.result = train(cfg, *env, rng);
    } catch (const TrainingDiverged& e) {
        std::ostringstream diag;
        diag << "training diverged at step " << e.step << ": " << e.what() << '\n';
        write_text_file(out_dir + "/diagnostic.txt", diag.str());
        out.status = kStatusRunFailure;
        out.error = e.what();
        return out;
    } catch (const std::exception& e) {
        out.status = kStatusRunFailure;
        out.error = e.what();
        write_text_file(out_dir + "/diagnostic.txt", std::string(e.what()) + "\n");
        return out;
    }

    const TrainResult& r = out.result;
    out.final_score = r.final_score;

    write_text_file(out_dir + "/metrics.csv", metrics_to_csv(r.metrics));

    Checkpoint cp;
    cp.networks.emplace_back("actor", r.actor);
    cp.networks.emplace_back("critic1", r.critic1);
    cp.networks.emplace_back("critic2", r.critic2);
    write_checkpoint(out_dir + "/checkpoint.txt", cp);

    const std::string mask_dir = out_dir + "/masks";
    write_mask_dump(mask_dir, "actor", r.actor);
    write_mask_dump(mask_dir, "critic1", r.critic1);
    write_mask_dump(mask_dir, "critic2", r.critic2);

    std::map<std::string, double> counters;
    counters["critic_updates"] = static_cast<double>(r.critic_updates);
    counters["actor_updates"] = static_cast<double>(r.actor_updates);
    counters["critic_evolutions"] = static_cast<double>(r.critic_evolutions);
    counters["actor_evolutions"] = static_cast<double>(r.actor_evolutions);
    counters["buffer_drops"] = static_cast<double>(r.buffer_drops);
    counters["evaluations"] = static_cast<double>(r.evals.size());
    write_text_file(out_dir + "/summary.json",
                    summary_json(cfg, r.final_score, r.flops, counters));
    return out;
}

SweepOutcome run_sweep_job(const TrainConfig& base, std::vector<double> grid, int seeds,
                           int jobs, const std::string& out_dir,
                           const std::function<void(const std::string&)>& line) {
    const auto say = line ? line : [](const std::string&) {};
    SweepOutcome out;
    if (seeds < 1) {
        out.status = kStatusUsage;
        out.error = "sweep needs at least one seed";
        return out;
    }
    // Dense reference row is always part of the table.
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) grid.push_back(0.0);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    fs::create_directories(out_dir);

    for (double s : grid)
        for (int k = 0; k < seeds; ++k) {
            SweepCell cell;
            cell.sparsity = s;
            cell.seed = base.seed + static_cast<std::uint64_t>(k);
            out.cells.push_back(cell);
        }

    std::atomic<size_t> next{0};
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(out.cells.size())));
    const auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= out.cells.size()) return;
            SweepCell& cell = out.cells[i];
            TrainConfig cfg = base;
            cfg.actor_sparsity = cell.sparsity;
            cfg.critic_sparsity = cell.sparsity;
            cfg.seed = cell.seed;
            std::ostringstream sub;
            sub << out_dir << "/s" << cell.sparsity << "_seed" << cell.seed;
            const RunOutcome r = run_training_job(cfg, sub.str());
            if (r.status == kStatusOk) {
                cell.score = r.final_score;
            } else {
                cell.failed = true;
                cell.error = r.error;
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Aggregate.
    std::ostringstream csv;
    csv << "sparsity,seeds,mean_score,stddev,failures\n";
    for (double s : grid) {
        double sum = 0.0, sq = 0.0;
        long n = 0, failures = 0;
        for (const auto& cell : out.cells) {
            if (cell.sparsity != s) continue;
            if (cell.failed) {
                ++failures;
                continue;
            }
            sum += cell.score;
            sq += cell.score * cell.score;
            ++n;
        }
        const double mean = n > 0 ? sum / n : 0.0;
        const double var = n > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1)) : 0.0;
        csv << format_g17(s) << ',' << n << ',' << format_g17(mean) << ','
            << format_g17(std::sqrt(var)) << ',' << failures << '\n';
        if (n > 0) {
            if (s == 0.0)
                out.dense_score = mean;
            else
                out.aggregated.push_back({s, mean});
        }
        std::ostringstream row;
        row << "sparsity " << s << ": mean " << mean << " over " << n << " run(s)"
            << (failures ? (" [" + std::to_string(failures) + " failed]") : "");
        say(row.str());
    }

    const auto found = ultimate_compression_search(out.aggregated, out.dense_score);
    out.compression_found = found.has_value();
    out.compression_sparsity = found.value_or(0.0);
    if (out.compression_found)
        say("ultimate compression: sparsity " + format_g17(out.compression_sparsity) +
            " holds within 3% of the dense score " + format_g17(out.dense_score));
    else
        say("ultimate compression: none found within 3% of dense");

    write_text_file(out_dir + "/sweep.csv", csv.str());

    nlohmann::json j;
    j["dense_score"] = out.dense_score;
    j["compression_found"] = out.compression_found;
    if (out.compression_found) j["compression_sparsity"] = out.compression_sparsity;
    for (const auto& cell : out.cells) {
        nlohmann::json c;
        c["sparsity"] = cell.sparsity;
        c["seed"] = cell.seed;
        c["failed"] = cell.failed;
        if (cell.failed)
            c["error"] = cell.error;
        else
            c["score"] = cell.score;
        j["cells"].push_back(c);
    }
    write_text_file(out_dir + "/sweep_summary.json", j.dump(2) + "\n");

    bool all_failed = true;
    for (const auto& cell : out.cells)
        if (!cell.failed) all_failed = false;
    if (all_failed) {
        out.status = kStatusRunFailure;
        out.error = "every sweep cell failed";
    }
    return out;
}

}  // namespace rlx2
