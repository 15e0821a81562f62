#ifndef RLX2_TARGETS_HPP
#define RLX2_TARGETS_HPP

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "net.hpp"
#include "replay.hpp"
#include "rng.hpp"

namespace rlx2 {

struct TargetConfig {
    int n_step = 3;
    double discount = 0.99;
    long multi_step_delay = 300000;  // steps before multi-step targets switch on
    double smoothing_sigma = 0.2;    // target-policy smoothing noise (per action halfwidth)
    double smoothing_clip = 0.5;
    double exploration_sigma = 0.1;
};

// The step length actually used at a global step: 1 before the delay expires.
int effective_n_for_step(const TargetConfig& cfg, long global_step);

// Bootstrapped regression target with clipped-noise target-policy smoothing
// and a double-Q minimum. Terminal segments carry no bootstrap term.
double td3_target(const NStepSegment& seg, const Mlp& target_actor,
                  const Mlp& target_critic1, const Mlp& target_critic2,
                  const TargetConfig& cfg, DetRng& rng);
Eigen::VectorXd td3_targets(std::span<const NStepSegment> segs, const Mlp& target_actor,
                            const Mlp& target_critic1, const Mlp& target_critic2,
                            const TargetConfig& cfg, DetRng& rng);

// Entropy-regularized multi-step target: fresh policy samples at each stored
// intermediate state; the final sample doubles as the bootstrap action.
// Entropy terms beyond termination are omitted.
double sac_target(const NStepSegment& seg, const Mlp& target_critic1,
                  const Mlp& target_critic2, const Mlp& policy, double alpha,
                  const TargetConfig& cfg, DetRng& rng);
Eigen::VectorXd sac_targets(std::span<const NStepSegment> segs, const Mlp& target_critic1,
                            const Mlp& target_critic2, const Mlp& policy, double alpha,
                            const TargetConfig& cfg, DetRng& rng);

// Finite MDP with explicit target/behavior policies and an approximate Q
// table, used to audit the error structure of multi-step targets.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    double discount = 0.9;
    // transition(s*n_actions + a, s') = P(s' | s, a); rows sum to 1.
    Eigen::MatrixXd transition;
    Eigen::MatrixXd reward;           // (s, a)
    Eigen::MatrixXd target_policy;    // pi(a | s), rows sum to 1
    Eigen::MatrixXd behavior_policy;  // b(a | s)
    Eigen::MatrixXd q_approx;         // Q(s, a; theta)
    Eigen::MatrixXd q_exact;          // Q_pi(s, a)
    Eigen::MatrixXd fitting_error;    // q_approx - q_exact
};

// Exact Q of the target policy via a linear solve; also fills fitting_error.
void solve_exact_q(TabularMdp& mdp);

TabularMdp random_mdp(int n_states, int n_actions, double discount, DetRng& rng);

struct Decomposition {
    double total = 0.0;        // E_b[T_n] - Q_pi(s,a)
    double policy_term = 0.0;  // E_b[T_n] - E_pi[T_n]
    double fitting_term = 0.0; // gamma^n * E_pi[eps(s_n, pi(s_n))]
};

// Exact enumeration of all length-n trajectories under both policies. Throws
// if the enumeration would exceed node_budget nodes.
Decomposition decompose_td_error(const TabularMdp& mdp, int n, int state, int action,
                                 long node_budget = 4000000);

}  // namespace rlx2

#endif
