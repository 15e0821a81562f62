#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rlx2 {

namespace {

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "algo", "env", "topology", "profile", "seed",
        "actor-sparsity", "critic-sparsity", "hidden",
        "steps", "warmup", "batch", "lr", "discount", "tau",
        "zeta0", "mask-update-interval",
        "buffer-check-interval", "distance-threshold", "buffer-min", "buffer-max",
        "shrink-ratio", "distance-batch", "dynamic-buffer",
        "n-step", "multi-step-delay", "actor-interval",
        "exploration-sigma", "smoothing-sigma", "smoothing-clip", "entropy-target",
        "eval-interval", "eval-episodes", "mask-dir",
    };
    return keys;
}

void require_known(const std::map<std::string, std::string>& entries) {
    for (const auto& [k, v] : entries) {
        bool ok = false;
        for (const auto& known : known_keys())
            if (k == known) {
                ok = true;
                break;
            }
        if (!ok) throw std::invalid_argument("unknown config key '" + k + "'");
    }
}

long parse_long(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        // Accept scientific notation for step-like values (3e6 etc).
        const double d = std::stod(v, &pos);
        if (pos != v.size() || d != std::floor(d))
            throw std::invalid_argument("");
        return static_cast<long>(d);
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected on/off, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(parse_long(key, item)));
        if (out.back() <= 0)
            throw std::invalid_argument("config key '" + key + "': dimensions must be positive");
    }
    if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

Algorithm parse_algorithm(const std::string& v) {
    if (v == "td3") return Algorithm::Td3;
    if (v == "sac") return Algorithm::Sac;
    throw std::invalid_argument("config key 'algo': expected td3|sac, got '" + v + "'");
}

Profile parse_profile(const std::string& v) {
    if (v == "paper") return Profile::Paper;
    if (v == "desk") return Profile::Desk;
    throw std::invalid_argument("config key 'profile': expected paper|desk, got '" + v + "'");
}

TopologyMode parse_topology(const std::string& v) {
    if (v == "rlx2") return TopologyMode::Rlx2;
    if (v == "rigl") return TopologyMode::Rigl;
    if (v == "set") return TopologyMode::Set;
    if (v == "static_sparse") return TopologyMode::StaticSparse;
    if (v == "tiny_dense") return TopologyMode::TinyDense;
    if (v == "static_mask") return TopologyMode::StaticMask;
    throw std::invalid_argument(
        "config key 'topology': expected rlx2|rigl|set|static_sparse|tiny_dense|static_mask, got '" +
        v + "'");
}

std::string format_double(double d) {
    std::ostringstream os;
    os.precision(17);
    os << d;
    return os.str();
}

}  // namespace

std::string algorithm_name(Algorithm a) { return a == Algorithm::Td3 ? "td3" : "sac"; }

std::string topology_name(TopologyMode t) {
    switch (t) {
        case TopologyMode::Rlx2: return "rlx2";
        case TopologyMode::Rigl: return "rigl";
        case TopologyMode::Set: return "set";
        case TopologyMode::StaticSparse: return "static_sparse";
        case TopologyMode::TinyDense: return "tiny_dense";
        case TopologyMode::StaticMask: return "static_mask";
    }
    return "rlx2";
}

std::string profile_name(Profile p) { return p == Profile::Paper ? "paper" : "desk"; }

GrowMode TrainConfig::grow_mode() const {
    switch (topology) {
        case TopologyMode::Rlx2:
        case TopologyMode::Rigl:
            return GrowMode::Gradient;
        case TopologyMode::Set:
            return GrowMode::Random;
        default:
            return GrowMode::Frozen;
    }
}

bool TrainConfig::evolution_enabled() const {
    return grow_mode() != GrowMode::Frozen;
}

std::map<std::string, std::string> TrainConfig::as_map() const {
    std::map<std::string, std::string> m;
    m["algo"] = algorithm_name(algorithm);
    m["env"] = env_name;
    m["topology"] = topology_name(topology);
    m["profile"] = profile_name(profile);
    m["seed"] = std::to_string(seed);
    m["actor-sparsity"] = format_double(actor_sparsity);
    m["critic-sparsity"] = format_double(critic_sparsity);
    {
        std::string h;
        for (size_t i = 0; i < hidden.size(); ++i) {
            if (i) h += ',';
            h += std::to_string(hidden[i]);
        }
        m["hidden"] = h;
    }
    m["steps"] = std::to_string(total_steps);
    m["warmup"] = std::to_string(warmup);
    m["batch"] = std::to_string(batch);
    m["lr"] = format_double(learning_rate);
    m["discount"] = format_double(discount);
    m["tau"] = format_double(tau);
    m["zeta0"] = format_double(zeta0);
    m["mask-update-interval"] = std::to_string(mask_update_interval);
    m["buffer-check-interval"] = std::to_string(buffer_check_interval);
    m["distance-threshold"] = format_double(distance_threshold);
    m["buffer-min"] = std::to_string(buffer_min);
    m["buffer-max"] = std::to_string(buffer_max);
    m["shrink-ratio"] = format_double(shrink_ratio);
    m["distance-batch"] = std::to_string(distance_batch);
    m["dynamic-buffer"] = dynamic_buffer ? "on" : "off";
    m["n-step"] = std::to_string(n_step);
    m["multi-step-delay"] = std::to_string(multi_step_delay);
    m["actor-interval"] = std::to_string(actor_interval);
    m["exploration-sigma"] = format_double(exploration_sigma);
    m["smoothing-sigma"] = format_double(smoothing_sigma);
    m["smoothing-clip"] = format_double(smoothing_clip);
    m["entropy-target"] = entropy_target_auto ? "auto" : format_double(entropy_target);
    m["eval-interval"] = std::to_string(eval_interval);
    m["eval-episodes"] = std::to_string(eval_episodes);
    m["mask-dir"] = mask_dir;
    return m;
}

std::uint64_t TrainConfig::fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    const auto feed = [&h](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [k, v] : as_map()) {
        feed(k);
        feed("=");
        feed(v);
        feed("\n");
    }
    return h;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::stringstream ss(text);
    std::string line;
    long lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        entries[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return entries;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace {
template <typename Getter>
void apply_entries(TrainConfig& cfg, const Getter& get);
}  // namespace

TrainConfig resolve_config(const std::map<std::string, std::string>& file_entries,
                           const std::map<std::string, std::string>& flag_entries) {
    require_known(file_entries);
    require_known(flag_entries);

    std::map<std::string, std::string> merged = file_entries;
    for (const auto& [k, v] : flag_entries) merged[k] = v;

    TrainConfig cfg;
    cfg.algorithm = merged.count("algo") ? parse_algorithm(merged.at("algo")) : Algorithm::Td3;
    cfg.profile = merged.count("profile") ? parse_profile(merged.at("profile")) : Profile::Desk;

    // Published defaults, per algorithm.
    cfg.total_steps = 3000000;
    cfg.warmup = 25000;
    cfg.mask_update_interval = 10000;
    cfg.buffer_check_interval = 10000;
    cfg.multi_step_delay = 300000;
    cfg.eval_interval = 5000;
    cfg.buffer_min = 50000;
    cfg.buffer_max = 1000000;
    if (cfg.algorithm == Algorithm::Sac) {
        cfg.n_step = 2;
        cfg.actor_interval = 1;
    } else {
        cfg.n_step = 3;
        cfg.actor_interval = 2;
    }

    if (cfg.profile == Profile::Desk) {
        // Step-like quantities shrink 1/20 for the built-in tasks; the run
        // length default drops to a desk-scale budget.
        cfg.total_steps = 50000;
        cfg.warmup = 25000 / 20;
        cfg.mask_update_interval = 10000 / 20;
        cfg.buffer_check_interval = 10000 / 20;
        cfg.multi_step_delay = 300000 / 20;
        cfg.eval_interval = 5000 / 20;
        cfg.buffer_min = 50000 / 20;
        cfg.buffer_max = 1000000 / 20;
    }

    const auto get = [&merged](const std::string& k) -> const std::string* {
        const auto it = merged.find(k);
        return it == merged.end() ? nullptr : &it->second;
    };

    if (const auto* v = get("env")) cfg.env_name = *v;
    apply_entries(cfg, get);

    // Cross-field constraints.
    if (cfg.warmup < 0 || cfg.warmup >= cfg.total_steps)
        throw std::invalid_argument("warmup must be in [0, steps)");
    if (cfg.topology == TopologyMode::StaticMask && cfg.mask_dir.empty())
        throw std::invalid_argument("topology static_mask requires mask-dir");
    return cfg;
}

namespace {

template <typename Getter>
void apply_entries(TrainConfig& cfg, const Getter& get) {
    if (const auto* v = get("topology")) cfg.topology = parse_topology(*v);
    if (const auto* v = get("seed"))
        cfg.seed = static_cast<std::uint64_t>(parse_long("seed", *v));
    if (const auto* v = get("actor-sparsity")) cfg.actor_sparsity = parse_double("actor-sparsity", *v);
    if (const auto* v = get("critic-sparsity"))
        cfg.critic_sparsity = parse_double("critic-sparsity", *v);
    if (const auto* v = get("hidden")) cfg.hidden = parse_int_list("hidden", *v);
    if (const auto* v = get("steps")) cfg.total_steps = parse_long("steps", *v);
    if (const auto* v = get("warmup")) cfg.warmup = parse_long("warmup", *v);
    if (const auto* v = get("batch")) cfg.batch = parse_long("batch", *v);
    if (const auto* v = get("lr")) cfg.learning_rate = parse_double("lr", *v);
    if (const auto* v = get("discount")) cfg.discount = parse_double("discount", *v);
    if (const auto* v = get("tau")) cfg.tau = parse_double("tau", *v);
    if (const auto* v = get("zeta0")) cfg.zeta0 = parse_double("zeta0", *v);
    if (const auto* v = get("mask-update-interval"))
        cfg.mask_update_interval = parse_long("mask-update-interval", *v);
    if (const auto* v = get("buffer-check-interval"))
        cfg.buffer_check_interval = parse_long("buffer-check-interval", *v);
    if (const auto* v = get("distance-threshold"))
        cfg.distance_threshold = parse_double("distance-threshold", *v);
    if (const auto* v = get("buffer-min")) cfg.buffer_min = parse_long("buffer-min", *v);
    if (const auto* v = get("buffer-max")) cfg.buffer_max = parse_long("buffer-max", *v);
    if (const auto* v = get("shrink-ratio")) cfg.shrink_ratio = parse_double("shrink-ratio", *v);
    if (const auto* v = get("distance-batch"))
        cfg.distance_batch = parse_long("distance-batch", *v);
    else
        cfg.distance_batch = 8 * cfg.batch;  // the oldest 8*batch transitions
    if (const auto* v = get("dynamic-buffer")) cfg.dynamic_buffer = parse_bool("dynamic-buffer", *v);
    if (const auto* v = get("n-step")) cfg.n_step = static_cast<int>(parse_long("n-step", *v));
    if (const auto* v = get("multi-step-delay"))
        cfg.multi_step_delay = parse_long("multi-step-delay", *v);
    if (const auto* v = get("actor-interval"))
        cfg.actor_interval = static_cast<int>(parse_long("actor-interval", *v));
    if (const auto* v = get("exploration-sigma"))
        cfg.exploration_sigma = parse_double("exploration-sigma", *v);
    if (const auto* v = get("smoothing-sigma"))
        cfg.smoothing_sigma = parse_double("smoothing-sigma", *v);
    if (const auto* v = get("smoothing-clip"))
        cfg.smoothing_clip = parse_double("smoothing-clip", *v);
    if (const auto* v = get("entropy-target")) {
        if (*v == "auto") {
            cfg.entropy_target_auto = true;
        } else {
            cfg.entropy_target_auto = false;
            cfg.entropy_target = parse_double("entropy-target", *v);
        }
    }
    if (const auto* v = get("eval-interval")) cfg.eval_interval = parse_long("eval-interval", *v);
    if (const auto* v = get("eval-episodes"))
        cfg.eval_episodes = static_cast<int>(parse_long("eval-episodes", *v));
    if (const auto* v = get("mask-dir")) cfg.mask_dir = *v;

    // Per-field range checks.
    if (cfg.actor_sparsity < 0.0 || cfg.actor_sparsity >= 1.0)
        throw std::invalid_argument("actor-sparsity must be in [0,1)");
    if (cfg.critic_sparsity < 0.0 || cfg.critic_sparsity >= 1.0)
        throw std::invalid_argument("critic-sparsity must be in [0,1)");
    if (cfg.total_steps <= 0) throw std::invalid_argument("steps must be positive");
    if (cfg.warmup < 0) throw std::invalid_argument("warmup must be >= 0");
    if (cfg.batch <= 0) throw std::invalid_argument("batch must be positive");
    if (cfg.n_step < 1) throw std::invalid_argument("n-step must be >= 1");
    if (cfg.actor_interval < 1) throw std::invalid_argument("actor-interval must be >= 1");
    if (cfg.discount <= 0.0 || cfg.discount >= 1.0)
        throw std::invalid_argument("discount must be in (0,1)");
    if (cfg.zeta0 <= 0.0 || cfg.zeta0 > 1.0)
        throw std::invalid_argument("zeta0 must be in (0,1]");
}

}  // namespace

void validate_config_entry(const std::string& key, const std::string& value) {
    require_known({{key, value}});
    TrainConfig scratch;
    if (key == "algo") {
        parse_algorithm(value);
        return;
    }
    if (key == "profile") {
        parse_profile(value);
        return;
    }
    const std::map<std::string, std::string> one = {{key, value}};
    const auto get = [&one](const std::string& k) -> const std::string* {
        const auto it = one.find(k);
        return it == one.end() ? nullptr : &it->second;
    };
    if (key == "env") scratch.env_name = value;
    apply_entries(scratch, get);
}

}  // namespace rlx2
