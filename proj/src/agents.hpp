#ifndef RLX2_AGENTS_HPP
#define RLX2_AGENTS_HPP

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "accounting.hpp"
#include "config.hpp"
#include "envs.hpp"
#include "io.hpp"
#include "net.hpp"
#include "replay.hpp"
#include "sparsity.hpp"
#include "targets.hpp"

namespace rlx2 {

// Raised when a loss or gradient turns non-finite; carries the step for the
// diagnostic dump.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, long step)
        : std::runtime_error(what), step(step) {}
    long step;
};

struct TrainResult {
    std::vector<std::pair<long, double>> evals;  // (step, mean return)
    double final_score = 0.0;                    // mean of the last 30 evaluations
    FlopsReport flops;
    std::vector<MetricsRow> metrics;

    Mlp actor, critic1, critic2;  // final online networks

    long critic_updates = 0;
    long actor_updates = 0;
    long critic_evolutions = 0;
    long actor_evolutions = 0;
    long buffer_drops = 0;
};

// --- agents -----------------------------------------------------------------

struct Td3Agent {
    Mlp actor, critic1, critic2;
    Mlp target_actor, target_critic1, target_critic2;
    OptimizerState opt_actor, opt_critic1, opt_critic2;
};

struct SacAgent {
    Mlp actor;  // GaussianPair head
    Mlp critic1, critic2;
    Mlp target_critic1, target_critic2;
    OptimizerState opt_actor, opt_critic1, opt_critic2;
    double log_alpha = 0.0;  // temperature starts at 1
    double entropy_target = 0.0;
};

Td3Agent make_td3_agent(const TrainConfig& cfg, const EnvSpec& spec, DetRng& rng);
SacAgent make_sac_agent(const TrainConfig& cfg, const EnvSpec& spec, DetRng& rng);

// --- single update steps (composed by the loops, exercised by tests) --------

struct CriticUpdateOut {
    double loss1 = 0.0, loss2 = 0.0;
    DenseGradient grad1, grad2;  // dense gradients, reused as growth scores
};

struct ActorUpdateOut {
    double loss = 0.0;
    DenseGradient grad;
    double mean_log_prob = 0.0;  // SAC only
};

CriticUpdateOut td3_critic_update(Td3Agent& agent, std::span<const NStepSegment> batch,
                                  const TargetConfig& tcfg, DetRng& rng);
ActorUpdateOut td3_actor_update(Td3Agent& agent, const Eigen::MatrixXd& states);
void td3_target_update(Td3Agent& agent, double tau);

CriticUpdateOut sac_critic_update(SacAgent& agent, std::span<const NStepSegment> batch,
                                  const TargetConfig& tcfg, DetRng& rng);
ActorUpdateOut sac_actor_update(SacAgent& agent, const Eigen::MatrixXd& states, DetRng& rng);
// Plain gradient step on log(alpha): stationary when the mean log-probability
// equals minus the entropy target.
void sac_alpha_update(SacAgent& agent, double mean_log_prob, double lr);
void sac_target_update(SacAgent& agent, double tau);

// --- training ---------------------------------------------------------------

TrainResult train_td3(const TrainConfig& cfg, Env& env, DetRng& rng);
TrainResult train_sac(const TrainConfig& cfg, Env& env, DetRng& rng);
TrainResult train(const TrainConfig& cfg, Env& env, DetRng& rng);

// Full episodes under a deterministic policy; arithmetic-mean undiscounted
// return. Trajectory randomness comes from the environment's own stream.
double evaluate(const PolicyFn& policy, Env& env, int episodes);
double random_policy_score(Env& env, int episodes, DetRng& rng);

// Largest hidden width whose dense actor+critic weight total does not exceed
// the active-weight total of the corresponding sparse model.
int tiny_dense_width(Algorithm alg, const EnvSpec& spec, const std::vector<int>& hidden,
                     double actor_sparsity, double critic_sparsity);

// Scan a (sparsity, score) table from sparsest downward and return the first
// sparsity within 3% degradation of the dense score.
struct SparsityScore {
    double sparsity = 0.0;
    double score = 0.0;
};
std::optional<double> ultimate_compression_search(std::vector<SparsityScore> table,
                                                  double dense_score);

// Architecture helpers shared with io/static-mask import.
std::vector<int> actor_dims(Algorithm alg, const EnvSpec& spec, const std::vector<int>& hidden);
std::vector<int> critic_dims(const EnvSpec& spec, const std::vector<int>& hidden);

}  // namespace rlx2

#endif
