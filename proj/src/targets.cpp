#include "targets.hpp"

#include <cmath>
#include <stdexcept>

namespace rlx2 {

int effective_n_for_step(const TargetConfig& cfg, long global_step) {
    return global_step < cfg.multi_step_delay ? 1 : cfg.n_step;
}

namespace {

// Discounted reward sum of a segment.
double reward_sum(const NStepSegment& seg, double gamma) {
    double acc = 0.0;
    double g = 1.0;
    for (double r : seg.rewards) {
        acc += g * r;
        g *= gamma;
    }
    return acc;
}

}  // namespace

double td3_target(const NStepSegment& seg, const Mlp& target_actor,
                  const Mlp& target_critic1, const Mlp& target_critic2,
                  const TargetConfig& cfg, DetRng& rng) {
    const NStepSegment arr[1] = {seg};
    return td3_targets(std::span<const NStepSegment>(arr, 1), target_actor, target_critic1,
                       target_critic2, cfg, rng)(0);
}

Eigen::VectorXd td3_targets(std::span<const NStepSegment> segs, const Mlp& target_actor,
                            const Mlp& target_critic1, const Mlp& target_critic2,
                            const TargetConfig& cfg, DetRng& rng) {
    const long B = static_cast<long>(segs.size());
    const int sdim = target_actor.input_dim();
    Eigen::MatrixXd states(sdim, B);
    for (long i = 0; i < B; ++i) states.col(i) = segs[i].bootstrap_state();

    Eigen::MatrixXd actions = forward(target_actor, states);
    for (long i = 0; i < B; ++i) {
        for (int d = 0; d < actions.rows(); ++d) {
            const double half = target_actor.squash_half(d);
            double noise = rng.normal(0.0, cfg.smoothing_sigma * half);
            const double clip = cfg.smoothing_clip * half;
            noise = std::clamp(noise, -clip, clip);
            const double lo = target_actor.squash_center(d) - half;
            const double hi = target_actor.squash_center(d) + half;
            actions(d, i) = std::clamp(actions(d, i) + noise, lo, hi);
        }
    }

    Eigen::MatrixXd sa(sdim + actions.rows(), B);
    sa.topRows(sdim) = states;
    sa.bottomRows(actions.rows()) = actions;
    const Eigen::MatrixXd q1 = forward(target_critic1, sa);
    const Eigen::MatrixXd q2 = forward(target_critic2, sa);

    Eigen::VectorXd y(B);
    for (long i = 0; i < B; ++i) {
        const NStepSegment& seg = segs[i];
        double v = reward_sum(seg, cfg.discount);
        if (!seg.terminal) {
            v += std::pow(cfg.discount, seg.effective_n()) * std::min(q1(0, i), q2(0, i));
        }
        y(i) = v;
    }
    return y;
}

double sac_target(const NStepSegment& seg, const Mlp& target_critic1,
                  const Mlp& target_critic2, const Mlp& policy, double alpha,
                  const TargetConfig& cfg, DetRng& rng) {
    const NStepSegment arr[1] = {seg};
    return sac_targets(std::span<const NStepSegment>(arr, 1), target_critic1, target_critic2,
                       policy, alpha, cfg, rng)(0);
}

Eigen::VectorXd sac_targets(std::span<const NStepSegment> segs, const Mlp& target_critic1,
                            const Mlp& target_critic2, const Mlp& policy, double alpha,
                            const TargetConfig& cfg, DetRng& rng) {
    const long B = static_cast<long>(segs.size());
    const double gamma = cfg.discount;
    Eigen::VectorXd y(B);
    std::vector<Eigen::VectorXd> bootstrap_states;
    std::vector<Eigen::VectorXd> bootstrap_actions;
    std::vector<long> bootstrap_owner;

    for (long i = 0; i < B; ++i) {
        const NStepSegment& seg = segs[i];
        const int m = seg.effective_n();
        double v = reward_sum(seg, gamma);
        // One fresh sample per stored intermediate state; discard the sample
        // at a terminal state (nothing is acted there) together with the
        // bootstrap.
        const int entropy_terms = seg.terminal ? m - 1 : m;
        double g = gamma;
        for (int k = 0; k < entropy_terms; ++k) {
            const PolicySample s = sample_squashed_gaussian(policy, seg.next_states[k], rng);
            v -= alpha * g * s.log_prob;
            if (k == m - 1) {
                bootstrap_states.push_back(seg.next_states[k]);
                bootstrap_actions.push_back(s.action);
                bootstrap_owner.push_back(i);
            }
            g *= gamma;
        }
        y(i) = v;
    }

    if (!bootstrap_states.empty()) {
        const long nb = static_cast<long>(bootstrap_states.size());
        const int sdim = static_cast<int>(bootstrap_states.front().size());
        const int adim = static_cast<int>(bootstrap_actions.front().size());
        Eigen::MatrixXd sa(sdim + adim, nb);
        for (long i = 0; i < nb; ++i) {
            sa.col(i).head(sdim) = bootstrap_states[static_cast<size_t>(i)];
            sa.col(i).tail(adim) = bootstrap_actions[static_cast<size_t>(i)];
        }
        const Eigen::MatrixXd q1 = forward(target_critic1, sa);
        const Eigen::MatrixXd q2 = forward(target_critic2, sa);
        for (long i = 0; i < nb; ++i) {
            const NStepSegment& seg = segs[bootstrap_owner[static_cast<size_t>(i)]];
            y(bootstrap_owner[static_cast<size_t>(i)]) +=
                std::pow(gamma, seg.effective_n()) * std::min(q1(0, i), q2(0, i));
        }
    }
    return y;
}

void solve_exact_q(TabularMdp& mdp) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    // V solves (I - gamma * P_pi) V = R_pi.
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(S, S);
    Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(S);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const double p = mdp.target_policy(s, a);
            r_pi(s) += p * mdp.reward(s, a);
            p_pi.row(s) += p * mdp.transition.row(s * A + a);
        }
    }
    const Eigen::VectorXd v =
        (Eigen::MatrixXd::Identity(S, S) - mdp.discount * p_pi).partialPivLu().solve(r_pi);
    mdp.q_exact.resize(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            mdp.q_exact(s, a) =
                mdp.reward(s, a) + mdp.discount * mdp.transition.row(s * A + a).dot(v);
    mdp.fitting_error = mdp.q_approx - mdp.q_exact;
}

TabularMdp random_mdp(int n_states, int n_actions, double discount, DetRng& rng) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.discount = discount;

    const auto random_rows = [&](int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (int c = 0; c < cols; ++c) {
                m(r, c) = rng.uniform(0.05, 1.0);
                sum += m(r, c);
            }
            m.row(r) /= sum;
        }
        return m;
    };

    mdp.transition = random_rows(n_states * n_actions, n_states);
    mdp.target_policy = random_rows(n_states, n_actions);
    mdp.behavior_policy = random_rows(n_states, n_actions);
    mdp.reward.resize(n_states, n_actions);
    mdp.q_approx.resize(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            mdp.reward(s, a) = rng.uniform(-1.0, 1.0);
            mdp.q_approx(s, a) = rng.uniform(-2.0, 2.0);
        }
    solve_exact_q(mdp);
    return mdp;
}

namespace {

struct EnumState {
    const TabularMdp& mdp;
    int n;
    long nodes = 0;
    long budget;
};

// Expected bootstrap value at a final state under the target policy.
double bootstrap_value(const TabularMdp& mdp, int s) {
    return mdp.target_policy.row(s).dot(mdp.q_approx.row(s));
}

double expected_fit_error(const TabularMdp& mdp, int s) {
    return mdp.target_policy.row(s).dot(mdp.fitting_error.row(s));
}

// Walks every length-n trajectory from (state, prob mass) under `policy`,
// accumulating the expected discounted reward tail, the expected bootstrap
// term, and (for the target policy) the expected final-state fitting error.
void enumerate(EnumState& es, const Eigen::MatrixXd& policy, int depth, int state,
               double prob, double discount_pow, double* reward_acc, double* boot_acc,
               double* fit_acc) {
    if (++es.nodes > es.budget)
        throw std::runtime_error("decompose_td_error: enumeration exceeds node budget");
    if (depth == es.n) {
        *boot_acc += prob * bootstrap_value(es.mdp, state);
        if (fit_acc) *fit_acc += prob * expected_fit_error(es.mdp, state);
        return;
    }
    for (int a = 0; a < es.mdp.n_actions; ++a) {
        const double pa = policy(state, a);
        if (pa == 0.0) continue;
        *reward_acc += prob * pa * discount_pow * es.mdp.reward(state, a);
        for (int s2 = 0; s2 < es.mdp.n_states; ++s2) {
            const double ps = es.mdp.transition(state * es.mdp.n_actions + a, s2);
            if (ps == 0.0) continue;
            enumerate(es, policy, depth + 1, s2, prob * pa * ps,
                      discount_pow * es.mdp.discount, reward_acc, boot_acc, fit_acc);
        }
    }
}

// E_p[T_n(s,a)] by enumeration; the first action is fixed.
double expected_target(EnumState& es, const Eigen::MatrixXd& policy, int state, int action,
                       double* fit_acc) {
    double reward_acc = es.mdp.reward(state, action);
    double boot_acc = 0.0;
    const int row = state * es.mdp.n_actions + action;
    for (int s2 = 0; s2 < es.mdp.n_states; ++s2) {
        const double ps = es.mdp.transition(row, s2);
        if (ps == 0.0) continue;
        enumerate(es, policy, 1, s2, ps, es.mdp.discount, &reward_acc, &boot_acc, fit_acc);
    }
    const double gamma_n = std::pow(es.mdp.discount, es.n);
    if (fit_acc) *fit_acc *= gamma_n;
    return reward_acc + gamma_n * boot_acc;
}

}  // namespace

Decomposition decompose_td_error(const TabularMdp& mdp, int n, int state, int action,
                                 long node_budget) {
    if (state < 0 || state >= mdp.n_states || action < 0 || action >= mdp.n_actions)
        throw std::invalid_argument("decompose_td_error: invalid state/action");
    if (n < 1) throw std::invalid_argument("decompose_td_error: n must be >= 1");

    EnumState es{mdp, n, 0, node_budget};
    double fit = 0.0;
    const double t_behavior = expected_target(es, mdp.behavior_policy, state, action, nullptr);
    const double t_target = expected_target(es, mdp.target_policy, state, action, &fit);

    Decomposition d;
    d.total = t_behavior - mdp.q_exact(state, action);
    d.policy_term = t_behavior - t_target;
    d.fitting_term = fit;
    return d;
}

}  // namespace rlx2
