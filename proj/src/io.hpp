#ifndef RLX2_IO_HPP
#define RLX2_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "accounting.hpp"
#include "config.hpp"
#include "net.hpp"

namespace rlx2 {

// Text checkpoint holding a set of named networks. Weights are printed with
// 17 significant digits so read(write(x)) reproduces x bit-exactly.
struct Checkpoint {
    std::vector<std::pair<std::string, Mlp>> networks;
};

std::string checkpoint_to_text(const Checkpoint& cp);
Checkpoint checkpoint_from_text(const std::string& text);
void write_checkpoint(const std::string& path, const Checkpoint& cp);
Checkpoint read_checkpoint(const std::string& path);

// Mask dump: first line "rows cols", then rows of space-separated 0/1.
std::string mask_to_text(const Eigen::MatrixXd& mask);
Eigen::MatrixXd mask_from_text(const std::string& text);
void write_mask(const std::string& path, const Eigen::MatrixXd& mask);
Eigen::MatrixXd read_mask(const std::string& path);

// One mask file per layer: <dir>/<net>_layer<i>.mask
void write_mask_dump(const std::string& dir, const std::string& net_name, const Mlp& net);
std::vector<Eigen::MatrixXd> read_mask_dump(const std::string& dir, const std::string& net_name,
                                            size_t layer_count);

inline constexpr const char* kMetricsHeader =
    "step,eval_return,buffer_size,policy_distance,drops,actor_active,critic_active,"
    "train_flops_cum";

struct MetricsRow {
    long step = 0;
    double eval_return = 0.0;
    long buffer_size = 0;
    bool distance_known = false;
    double policy_distance = 0.0;
    long drops = 0;
    long actor_active = 0;
    long critic_active = 0;
    double train_flops_cum = 0.0;
};

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

// Manifest: the resolved configuration as a reloadable key=value file, with
// fingerprint and version recorded as comments.
std::string manifest_text(const TrainConfig& cfg);

std::string summary_json(const TrainConfig& cfg, double final_score,
                         const FlopsReport& flops,
                         const std::map<std::string, double>& counters);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

std::string format_g17(double d);

}  // namespace rlx2

#endif
