#include "rlx2.h"

#include <cstring>
#include <map>
#include <sstream>
#include <string>

#include "agents.hpp"
#include "config.hpp"
#include "envs.hpp"
#include "io.hpp"
#include "runner.hpp"
#include "verify.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

int copy_out(const std::string& s, char* buf, size_t bufsize) {
    if (!buf || bufsize == 0 || s.size() + 1 > bufsize) {
        set_error("buffer too small");
        return RLX2_ERR_USAGE;
    }
    std::memcpy(buf, s.c_str(), s.size() + 1);
    return RLX2_OK;
}

}  // namespace

// Layered entries; resolution happens when the config is consumed.
struct rlx2_config {
    std::map<std::string, std::string> file_entries;
    std::map<std::string, std::string> flag_entries;

    rlx2::TrainConfig resolve() const {
        return rlx2::resolve_config(file_entries, flag_entries);
    }
};

struct rlx2_result {
    rlx2::TrainConfig cfg;
    rlx2::TrainResult result;
};

extern "C" {

const char* rlx2_version(void) { return "1.0.0"; }

const char* rlx2_last_error(void) { return g_last_error.c_str(); }

int rlx2_env_list(char* buf, size_t bufsize) {
    std::string names;
    for (const auto& n : rlx2::env_names()) {
        if (!names.empty()) names += ',';
        names += n;
    }
    return copy_out(names, buf, bufsize);
}

rlx2_config* rlx2_config_new(void) { return new rlx2_config(); }

void rlx2_config_free(rlx2_config* cfg) { delete cfg; }

int rlx2_config_set(rlx2_config* cfg, const char* key, const char* value) {
    if (!cfg || !key || !value) {
        set_error("null argument");
        return RLX2_ERR_USAGE;
    }
    // Per-entry check only; cross-field constraints are enforced when the
    // config is resolved, so entries may arrive in any order.
    try {
        rlx2::validate_config_entry(key, value);
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_USAGE;
    }
    cfg->flag_entries[key] = value;
    return RLX2_OK;
}

int rlx2_config_load_file(rlx2_config* cfg, const char* path) {
    if (!cfg || !path) {
        set_error("null argument");
        return RLX2_ERR_USAGE;
    }
    try {
        auto entries = rlx2::load_config_file(path);
        for (const auto& [k, v] : entries) rlx2::validate_config_entry(k, v);
        cfg->file_entries = std::move(entries);
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_USAGE;
    }
    return RLX2_OK;
}

int rlx2_config_validate(const rlx2_config* cfg) {
    if (!cfg) {
        set_error("null config");
        return RLX2_ERR_USAGE;
    }
    try {
        cfg->resolve();
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_USAGE;
    }
    return RLX2_OK;
}

uint64_t rlx2_config_fingerprint(const rlx2_config* cfg) {
    if (!cfg) return 0;
    try {
        return cfg->resolve().fingerprint();
    } catch (...) {
        return 0;
    }
}

int rlx2_config_get(const rlx2_config* cfg, const char* key, char* buf, size_t bufsize) {
    if (!cfg || !key) {
        set_error("null argument");
        return RLX2_ERR_USAGE;
    }
    try {
        const auto m = cfg->resolve().as_map();
        const auto it = m.find(key);
        if (it == m.end()) {
            set_error(std::string("unknown config key '") + key + "'");
            return RLX2_ERR_USAGE;
        }
        return copy_out(it->second, buf, bufsize);
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_USAGE;
    }
}

int rlx2_train(const rlx2_config* cfg, const char* out_dir, rlx2_result** out) {
    if (!cfg || !out_dir) {
        set_error("null argument");
        return RLX2_ERR_USAGE;
    }
    rlx2::TrainConfig resolved;
    try {
        resolved = cfg->resolve();
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_USAGE;
    }
    try {
        rlx2::RunOutcome outcome = rlx2::run_training_job(resolved, out_dir);
        if (outcome.status != rlx2::kStatusOk) {
            set_error(outcome.error);
            return outcome.status;
        }
        if (out) {
            auto* handle = new rlx2_result();
            handle->cfg = resolved;
            handle->result = std::move(outcome.result);
            *out = handle;
        }
        return RLX2_OK;
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_RUN;
    }
}

void rlx2_result_free(rlx2_result* res) { delete res; }

double rlx2_result_final_score(const rlx2_result* res) {
    return res ? res->result.final_score : 0.0;
}

int64_t rlx2_result_eval_count(const rlx2_result* res) {
    return res ? static_cast<int64_t>(res->result.evals.size()) : 0;
}

int rlx2_result_eval_point(const rlx2_result* res, int64_t index, int64_t* step,
                           double* mean_return) {
    if (!res || index < 0 || index >= static_cast<int64_t>(res->result.evals.size())) {
        set_error("eval index out of range");
        return RLX2_ERR_USAGE;
    }
    const auto& [s, r] = res->result.evals[static_cast<size_t>(index)];
    if (step) *step = s;
    if (mean_return) *mean_return = r;
    return RLX2_OK;
}

int rlx2_result_summary_json(const rlx2_result* res, char* buf, size_t bufsize,
                             size_t* needed) {
    if (!res) {
        set_error("null result");
        return RLX2_ERR_USAGE;
    }
    std::map<std::string, double> counters;
    counters["critic_updates"] = static_cast<double>(res->result.critic_updates);
    counters["actor_updates"] = static_cast<double>(res->result.actor_updates);
    counters["critic_evolutions"] = static_cast<double>(res->result.critic_evolutions);
    counters["actor_evolutions"] = static_cast<double>(res->result.actor_evolutions);
    counters["buffer_drops"] = static_cast<double>(res->result.buffer_drops);
    counters["evaluations"] = static_cast<double>(res->result.evals.size());
    const std::string json =
        rlx2::summary_json(res->cfg, res->result.final_score, res->result.flops, counters);
    if (needed) *needed = json.size() + 1;
    return copy_out(json, buf, bufsize);
}

int rlx2_sweep(const rlx2_config* cfg, const char* grid_csv, int seeds, int jobs,
               const char* out_dir, rlx2_line_cb cb, void* user) {
    if (!cfg || !grid_csv || !out_dir) {
        set_error("null argument");
        return RLX2_ERR_USAGE;
    }
    rlx2::TrainConfig resolved;
    std::vector<double> grid;
    try {
        resolved = cfg->resolve();
        std::stringstream ss(grid_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            size_t pos = 0;
            const double s = std::stod(item, &pos);
            if (pos != item.size() || s < 0.0 || s >= 1.0)
                throw std::invalid_argument("sparsity grid entries must be in [0,1)");
            grid.push_back(s);
        }
        if (grid.empty()) throw std::invalid_argument("empty sparsity grid");
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_USAGE;
    }
    try {
        const auto line = [cb, user](const std::string& s) {
            if (cb) cb(s.c_str(), user);
        };
        const rlx2::SweepOutcome outcome =
            rlx2::run_sweep_job(resolved, grid, seeds, jobs, out_dir, line);
        if (outcome.status != rlx2::kStatusOk) set_error(outcome.error);
        return outcome.status;
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_RUN;
    }
}

int rlx2_verify(const char* suite, uint64_t seed, int inject_fault, rlx2_line_cb cb,
                void* user) {
    try {
        const auto line = [cb, user](const std::string& s) {
            if (cb) cb(s.c_str(), user);
        };
        const auto results =
            rlx2::run_verify(suite ? suite : "all", seed, inject_fault != 0, line);
        if (!rlx2::all_passed(results)) {
            set_error("one or more verification suites failed");
            return RLX2_ERR_RUN;
        }
        return RLX2_OK;
    } catch (const std::invalid_argument& e) {
        set_error(e.what());
        return RLX2_ERR_USAGE;
    } catch (const std::exception& e) {
        set_error(e.what());
        return RLX2_ERR_RUN;
    }
}

}  // extern "C"
