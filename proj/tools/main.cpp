// rlx2 command-line experiment runner. Links the C library API only.

#include <rlx2.h>

#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <string>

namespace {

void print_line(const char* line, void*) { std::printf("%s\n", line); }

struct ConfigHandle {
    rlx2_config* ptr = rlx2_config_new();
    ~ConfigHandle() { rlx2_config_free(ptr); }
};

int fail_usage(const std::string& context) {
    std::fprintf(stderr, "error: %s: %s\n", context.c_str(), rlx2_last_error());
    return RLX2_ERR_USAGE;
}

// Applies --config first, then explicit flags on top.
int build_config(ConfigHandle& cfg, const std::string& config_file,
                 const std::map<std::string, std::string>& flags) {
    if (!config_file.empty() &&
        rlx2_config_load_file(cfg.ptr, config_file.c_str()) != RLX2_OK)
        return fail_usage("--config " + config_file);
    for (const auto& [key, value] : flags)
        if (rlx2_config_set(cfg.ptr, key.c_str(), value.c_str()) != RLX2_OK)
            return fail_usage("--" + key + " " + value);
    return RLX2_OK;
}

void add_override_options(CLI::App* cmd, std::map<std::string, std::string>& flags) {
    // Every config key is reachable as a flag; only the common ones get help text.
    const std::pair<const char*, const char*> described[] = {
        {"algo", "algorithm: td3|sac"},
        {"env", "environment name (pendulum|pointmass)"},
        {"topology", "rlx2|rigl|set|static_sparse|tiny_dense|static_mask"},
        {"actor-sparsity", "actor weight sparsity in [0,1)"},
        {"critic-sparsity", "critic weight sparsity in [0,1)"},
        {"steps", "total environment steps"},
        {"seed", "random seed"},
        {"profile", "hyperparameter profile: paper|desk"},
        {"mask-dir", "mask dump directory for topology=static_mask"},
    };
    const char* plain[] = {
        "hidden", "warmup", "batch", "lr", "discount", "tau", "zeta0",
        "mask-update-interval", "buffer-check-interval", "distance-threshold",
        "buffer-min", "buffer-max", "shrink-ratio", "distance-batch", "dynamic-buffer",
        "n-step", "multi-step-delay", "actor-interval", "exploration-sigma",
        "smoothing-sigma", "smoothing-clip", "entropy-target", "eval-interval",
        "eval-episodes",
    };
    for (const auto& [key, help] : described)
        cmd->add_option_function<std::string>(
            std::string("--") + key,
            [&flags, k = std::string(key)](const std::string& v) { flags[k] = v; }, help);
    for (const char* key : plain)
        cmd->add_option_function<std::string>(
            std::string("--") + key,
            [&flags, k = std::string(key)](const std::string& v) { flags[k] = v; },
            "config override");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rlx2: sparse off-policy deep-RL training"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "run one training job");
    std::map<std::string, std::string> train_flags;
    std::string train_config, train_out = "run";
    train->add_option("--config", train_config, "key=value config file");
    train->add_option("--out", train_out, "output directory");
    add_override_options(train, train_flags);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "sparsity grid with a dense reference");
    std::map<std::string, std::string> sweep_flags;
    std::string sweep_config, sweep_out = "sweep";
    std::string grid = "0.5,0.9,0.95";
    int sweep_seeds = 3, sweep_jobs = 1;
    sweep->add_option("--config", sweep_config, "key=value config file");
    sweep->add_option("--out", sweep_out, "output directory");
    sweep->add_option("--grid", grid, "comma-separated sparsity levels");
    sweep->add_option("--seeds", sweep_seeds, "seeds per level");
    sweep->add_option("--jobs", sweep_jobs, "parallel workers (independent runs)");
    add_override_options(sweep, sweep_flags);

    // verify
    auto* verify = app.add_subcommand("verify", "run the built-in oracle suites");
    std::string suite = "all";
    std::uint64_t verify_seed = 1;
    bool inject_fault = false;
    verify->add_option("--suite", suite,
                       "gradient|decomposition|flops|conservation|all");
    verify->add_option("--seed", verify_seed, "suite seed");
    verify
        ->add_flag("--inject-fault", inject_fault,
                   "flip one mask bit to prove the conservation check trips")
        ->group("");  // test hook, hidden from help

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return RLX2_ERR_USAGE;
    }

    if (train->parsed()) {
        ConfigHandle cfg;
        if (const int rc = build_config(cfg, train_config, train_flags); rc != RLX2_OK)
            return rc;
        rlx2_result* result = nullptr;
        const int rc = rlx2_train(cfg.ptr, train_out.c_str(), &result);
        if (rc != RLX2_OK) {
            std::fprintf(stderr, "error: training failed: %s\n", rlx2_last_error());
            return rc;
        }
        std::printf("final score: %.6f over %lld evaluations\n",
                    rlx2_result_final_score(result),
                    static_cast<long long>(rlx2_result_eval_count(result)));
        std::printf("artifacts written to %s\n", train_out.c_str());
        rlx2_result_free(result);
        return RLX2_OK;
    }

    if (sweep->parsed()) {
        ConfigHandle cfg;
        if (const int rc = build_config(cfg, sweep_config, sweep_flags); rc != RLX2_OK)
            return rc;
        const int rc = rlx2_sweep(cfg.ptr, grid.c_str(), sweep_seeds, sweep_jobs,
                                  sweep_out.c_str(), print_line, nullptr);
        if (rc != RLX2_OK)
            std::fprintf(stderr, "error: sweep failed: %s\n", rlx2_last_error());
        return rc;
    }

    // verify
    const int rc = rlx2_verify(suite.c_str(), verify_seed, inject_fault ? 1 : 0,
                               print_line, nullptr);
    if (rc == RLX2_ERR_USAGE)
        std::fprintf(stderr, "error: %s\n", rlx2_last_error());
    return rc;
}
