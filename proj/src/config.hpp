#ifndef RLX2_CONFIG_HPP
#define RLX2_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "accounting.hpp"
#include "sparsity.hpp"

namespace rlx2 {

enum class TopologyMode { Rlx2, Rigl, Set, StaticSparse, TinyDense, StaticMask };
enum class Profile { Paper, Desk };

// Resolved training configuration. Defaults follow the published
// hyperparameter table; the desk profile scales the step-like quantities
// down (1/20) so the built-in tasks train in minutes.
struct TrainConfig {
    Algorithm algorithm = Algorithm::Td3;
    TopologyMode topology = TopologyMode::Rlx2;
    Profile profile = Profile::Desk;
    std::string env_name = "pendulum";
    std::uint64_t seed = 1;

    double actor_sparsity = 0.0;
    double critic_sparsity = 0.0;
    std::vector<int> hidden = {256, 256};

    long total_steps = 50000;
    long warmup = 1250;
    long batch = 256;
    double learning_rate = 3e-4;
    double discount = 0.99;
    double tau = 0.005;

    double zeta0 = 0.5;
    long mask_update_interval = 500;

    long buffer_check_interval = 500;
    double distance_threshold = 0.2;
    long buffer_min = 2500;
    long buffer_max = 50000;
    double shrink_ratio = 0.2;
    long distance_batch = 2048;  // 8 x batch
    bool dynamic_buffer = true;

    int n_step = 3;
    long multi_step_delay = 15000;
    int actor_interval = 2;

    double exploration_sigma = 0.1;
    double smoothing_sigma = 0.2;
    double smoothing_clip = 0.5;

    // "auto" resolves to -dim(action space) at training time.
    bool entropy_target_auto = true;
    double entropy_target = 0.0;

    long eval_interval = 250;
    int eval_episodes = 10;

    std::string mask_dir;

    GrowMode grow_mode() const;
    bool evolution_enabled() const;

    // Canonical key=value view; keys mirror the CLI flag names.
    std::map<std::string, std::string> as_map() const;
    std::uint64_t fingerprint() const;
};

// Layered resolution: algorithm/profile defaults, then file entries, then
// flag entries. Unknown keys or malformed values throw std::invalid_argument.
TrainConfig resolve_config(const std::map<std::string, std::string>& file_entries,
                           const std::map<std::string, std::string>& flag_entries);

// Single-entry check (known key, parseable value, per-field range). Throws
// std::invalid_argument; cross-field constraints are deferred to resolution.
void validate_config_entry(const std::string& key, const std::string& value);

// Flat key=value text; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::string& path);

std::string algorithm_name(Algorithm a);
std::string topology_name(TopologyMode t);
std::string profile_name(Profile p);

}  // namespace rlx2

#endif
