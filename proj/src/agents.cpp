#include "agents.hpp"

#include <algorithm>
#include <cmath>

namespace rlx2 {

namespace {

Eigen::MatrixXd stack_state_action(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
    Eigen::MatrixXd sa(states.rows() + actions.rows(), states.cols());
    sa.topRows(states.rows()) = states;
    sa.bottomRows(actions.rows()) = actions;
    return sa;
}

void gather_batch(std::span<const NStepSegment> batch, Eigen::MatrixXd& states,
                  Eigen::MatrixXd& actions) {
    const long B = static_cast<long>(batch.size());
    states.resize(batch[0].state.size(), B);
    actions.resize(batch[0].action.size(), B);
    for (long i = 0; i < B; ++i) {
        states.col(i) = batch[i].state;
        actions.col(i) = batch[i].action;
    }
}

// Squared-loss critic fit against a fixed target vector. Returns the loss and
// the dense gradient; the optimizer step is applied here.
double fit_critic(Mlp& critic, OptimizerState& opt, const Eigen::MatrixXd& sa,
                  const Eigen::VectorXd& y, long step_for_error, DenseGradient* grad_out) {
    ForwardCache cache;
    const Eigen::MatrixXd q = forward(critic, sa, &cache);
    const long B = sa.cols();
    const Eigen::RowVectorXd residual = q.row(0) - y.transpose();
    const double loss = residual.squaredNorm() / static_cast<double>(B);
    if (!std::isfinite(loss))
        throw TrainingDiverged("critic loss is non-finite", step_for_error);
    Eigen::MatrixXd dq(1, B);
    dq.row(0) = (2.0 / static_cast<double>(B)) * residual;
    DenseGradient grad = backward_dense(critic, cache, dq);
    adam_step(critic, grad, opt);
    if (grad_out) *grad_out = std::move(grad);
    return loss;
}

void evolve_network(Mlp& net, OptimizerState& opt, const DenseGradient& grad, double fraction,
                    GrowMode mode, DetRng& rng) {
    for (size_t l = 0; l < net.layers.size(); ++l)
        evolve_topology(net.layers[l], grad.weights[l], fraction, mode, rng);
    project_optimizer(net, opt);
}

Mlp build_masked_net(const std::vector<int>& dims, double global_sparsity, HeadKind head,
                     const EnvSpec& spec, DetRng& rng) {
    std::vector<std::pair<int, int>> shapes;
    for (size_t l = 0; l + 1 < dims.size(); ++l) shapes.emplace_back(dims[l], dims[l + 1]);
    const SparsityAllocation alloc = er_allocate(global_sparsity, shapes);
    Mlp net = init_network(dims, alloc.per_layer, head, rng);
    if (head != HeadKind::Identity) {
        net.squash_center = spec.action_center();
        net.squash_half = spec.action_halfwidth();
    }
    return net;
}

void apply_imported_masks(Mlp& net, const std::vector<Eigen::MatrixXd>& masks) {
    if (masks.size() != net.layers.size())
        throw std::invalid_argument("imported mask count does not match layer count");
    for (size_t l = 0; l < net.layers.size(); ++l) {
        MaskedLinear& layer = net.layers[l];
        if (masks[l].rows() != layer.out_dim || masks[l].cols() != layer.in_dim)
            throw std::invalid_argument("imported mask shape mismatch at layer " +
                                        std::to_string(l));
        layer.mask = masks[l];
        layer.project();
        layer.target_sparsity =
            1.0 - static_cast<double>(layer.active_count()) / static_cast<double>(layer.weight_count());
    }
}

struct NetworkPlan {
    std::vector<int> actor;
    std::vector<int> critic;
    double actor_sparsity;
    double critic_sparsity;
};

NetworkPlan plan_networks(const TrainConfig& cfg, const EnvSpec& spec) {
    NetworkPlan plan;
    plan.actor_sparsity = cfg.actor_sparsity;
    plan.critic_sparsity = cfg.critic_sparsity;
    std::vector<int> hidden = cfg.hidden;
    if (cfg.topology == TopologyMode::TinyDense) {
        const int w = tiny_dense_width(cfg.algorithm, spec, cfg.hidden, cfg.actor_sparsity,
                                       cfg.critic_sparsity);
        hidden.assign(cfg.hidden.size(), w);
        plan.actor_sparsity = 0.0;
        plan.critic_sparsity = 0.0;
    }
    plan.actor = actor_dims(cfg.algorithm, spec, hidden);
    plan.critic = critic_dims(spec, hidden);
    return plan;
}

}  // namespace

std::vector<int> actor_dims(Algorithm alg, const EnvSpec& spec, const std::vector<int>& hidden) {
    std::vector<int> dims;
    dims.push_back(spec.state_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(alg == Algorithm::Sac ? 2 * spec.action_dim : spec.action_dim);
    return dims;
}

std::vector<int> critic_dims(const EnvSpec& spec, const std::vector<int>& hidden) {
    std::vector<int> dims;
    dims.push_back(spec.state_dim + spec.action_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    return dims;
}

Td3Agent make_td3_agent(const TrainConfig& cfg, const EnvSpec& spec, DetRng& rng) {
    const NetworkPlan plan = plan_networks(cfg, spec);
    Td3Agent agent;
    agent.actor = build_masked_net(plan.actor, plan.actor_sparsity, HeadKind::BoundedSquash,
                                   spec, rng);
    agent.critic1 =
        build_masked_net(plan.critic, plan.critic_sparsity, HeadKind::Identity, spec, rng);
    agent.critic2 =
        build_masked_net(plan.critic, plan.critic_sparsity, HeadKind::Identity, spec, rng);
    if (cfg.topology == TopologyMode::StaticMask) {
        apply_imported_masks(agent.actor, read_mask_dump(cfg.mask_dir, "actor",
                                                         agent.actor.layers.size()));
        apply_imported_masks(agent.critic1, read_mask_dump(cfg.mask_dir, "critic1",
                                                           agent.critic1.layers.size()));
        apply_imported_masks(agent.critic2, read_mask_dump(cfg.mask_dir, "critic2",
                                                           agent.critic2.layers.size()));
    }
    agent.target_actor = agent.actor;
    agent.target_critic1 = agent.critic1;
    agent.target_critic2 = agent.critic2;
    agent.opt_actor = make_optimizer(agent.actor, cfg.learning_rate);
    agent.opt_critic1 = make_optimizer(agent.critic1, cfg.learning_rate);
    agent.opt_critic2 = make_optimizer(agent.critic2, cfg.learning_rate);
    return agent;
}

SacAgent make_sac_agent(const TrainConfig& cfg, const EnvSpec& spec, DetRng& rng) {
    const NetworkPlan plan = plan_networks(cfg, spec);
    SacAgent agent;
    agent.actor =
        build_masked_net(plan.actor, plan.actor_sparsity, HeadKind::GaussianPair, spec, rng);
    agent.critic1 =
        build_masked_net(plan.critic, plan.critic_sparsity, HeadKind::Identity, spec, rng);
    agent.critic2 =
        build_masked_net(plan.critic, plan.critic_sparsity, HeadKind::Identity, spec, rng);
    if (cfg.topology == TopologyMode::StaticMask) {
        apply_imported_masks(agent.actor, read_mask_dump(cfg.mask_dir, "actor",
                                                         agent.actor.layers.size()));
        apply_imported_masks(agent.critic1, read_mask_dump(cfg.mask_dir, "critic1",
                                                           agent.critic1.layers.size()));
        apply_imported_masks(agent.critic2, read_mask_dump(cfg.mask_dir, "critic2",
                                                           agent.critic2.layers.size()));
    }
    agent.target_critic1 = agent.critic1;
    agent.target_critic2 = agent.critic2;
    agent.opt_actor = make_optimizer(agent.actor, cfg.learning_rate);
    agent.opt_critic1 = make_optimizer(agent.critic1, cfg.learning_rate);
    agent.opt_critic2 = make_optimizer(agent.critic2, cfg.learning_rate);
    agent.log_alpha = 0.0;
    agent.entropy_target = cfg.entropy_target_auto ? -static_cast<double>(spec.action_dim)
                                                   : cfg.entropy_target;
    return agent;
}

CriticUpdateOut td3_critic_update(Td3Agent& agent, std::span<const NStepSegment> batch,
                                  const TargetConfig& tcfg, DetRng& rng) {
    const Eigen::VectorXd y = td3_targets(batch, agent.target_actor, agent.target_critic1,
                                          agent.target_critic2, tcfg, rng);
    Eigen::MatrixXd states, actions;
    gather_batch(batch, states, actions);
    const Eigen::MatrixXd sa = stack_state_action(states, actions);
    CriticUpdateOut out;
    out.loss1 = fit_critic(agent.critic1, agent.opt_critic1, sa, y, -1, &out.grad1);
    out.loss2 = fit_critic(agent.critic2, agent.opt_critic2, sa, y, -1, &out.grad2);
    return out;
}

ActorUpdateOut td3_actor_update(Td3Agent& agent, const Eigen::MatrixXd& states) {
    const long B = states.cols();
    ForwardCache actor_cache;
    const Eigen::MatrixXd actions = forward(agent.actor, states, &actor_cache);

    ForwardCache critic_cache;
    const Eigen::MatrixXd sa = stack_state_action(states, actions);
    const Eigen::MatrixXd q = forward(agent.critic1, sa, &critic_cache);

    ActorUpdateOut out;
    out.loss = -q.row(0).mean();
    if (!std::isfinite(out.loss)) throw TrainingDiverged("actor loss is non-finite", -1);

    // d(loss)/dQ = -1/B; the critic backward yields d(loss)/d(action).
    Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, B, -1.0 / static_cast<double>(B));
    const DenseGradient critic_grad = backward_dense(agent.critic1, critic_cache, dq);
    const Eigen::MatrixXd daction = critic_grad.input.bottomRows(actions.rows());

    out.grad = backward_dense(agent.actor, actor_cache, daction);
    adam_step(agent.actor, out.grad, agent.opt_actor);
    return out;
}

void td3_target_update(Td3Agent& agent, double tau) {
    polyak_update(agent.target_critic1, agent.critic1, tau);
    polyak_update(agent.target_critic2, agent.critic2, tau);
    polyak_update(agent.target_actor, agent.actor, tau);
}

CriticUpdateOut sac_critic_update(SacAgent& agent, std::span<const NStepSegment> batch,
                                  const TargetConfig& tcfg, DetRng& rng) {
    const double alpha = std::exp(agent.log_alpha);
    const Eigen::VectorXd y = sac_targets(batch, agent.target_critic1, agent.target_critic2,
                                          agent.actor, alpha, tcfg, rng);
    Eigen::MatrixXd states, actions;
    gather_batch(batch, states, actions);
    const Eigen::MatrixXd sa = stack_state_action(states, actions);
    CriticUpdateOut out;
    out.loss1 = fit_critic(agent.critic1, agent.opt_critic1, sa, y, -1, &out.grad1);
    out.loss2 = fit_critic(agent.critic2, agent.opt_critic2, sa, y, -1, &out.grad2);
    return out;
}

ActorUpdateOut sac_actor_update(SacAgent& agent, const Eigen::MatrixXd& states, DetRng& rng) {
    const long B = states.cols();
    const int A = agent.actor.action_dim();
    const double alpha = std::exp(agent.log_alpha);
    const double inv_b = 1.0 / static_cast<double>(B);

    ForwardCache actor_cache;
    const Eigen::MatrixXd head = forward(agent.actor, states, &actor_cache);
    const auto mean = head.topRows(A);
    const auto log_std = head.bottomRows(A);

    // Reparameterized samples u = mean + std * xi, a = center + half*tanh(u).
    Eigen::MatrixXd xi(A, B), u(A, B), t(A, B), actions(A, B);
    Eigen::VectorXd log_prob = Eigen::VectorXd::Zero(B);
    for (long i = 0; i < B; ++i) {
        for (int d = 0; d < A; ++d) {
            xi(d, i) = rng.normal();
            const double sd = std::exp(log_std(d, i));
            u(d, i) = mean(d, i) + sd * xi(d, i);
            t(d, i) = std::tanh(u(d, i));
            actions(d, i) = agent.actor.squash_center(d) + agent.actor.squash_half(d) * t(d, i);
            const double au = std::abs(u(d, i));
            const double log_one_minus_t2 =
                2.0 * (std::log(2.0) - au - std::log1p(std::exp(-2.0 * au)));
            log_prob(i) += -0.5 * xi(d, i) * xi(d, i) - log_std(d, i) -
                           0.5 * std::log(2.0 * M_PI) - log_one_minus_t2 -
                           std::log(agent.actor.squash_half(d));
        }
    }

    // Q path through the per-sample minimum of the two critics.
    ForwardCache c1_cache, c2_cache;
    const Eigen::MatrixXd sa = stack_state_action(states, actions);
    const Eigen::MatrixXd q1 = forward(agent.critic1, sa, &c1_cache);
    const Eigen::MatrixXd q2 = forward(agent.critic2, sa, &c2_cache);

    ActorUpdateOut out;
    double loss = 0.0;
    Eigen::MatrixXd dq1 = Eigen::MatrixXd::Zero(1, B);
    Eigen::MatrixXd dq2 = Eigen::MatrixXd::Zero(1, B);
    for (long i = 0; i < B; ++i) {
        const double qmin = std::min(q1(0, i), q2(0, i));
        loss += inv_b * (alpha * log_prob(i) - qmin);
        if (q1(0, i) <= q2(0, i))
            dq1(0, i) = -inv_b;
        else
            dq2(0, i) = -inv_b;
    }
    out.loss = loss;
    out.mean_log_prob = log_prob.mean();
    if (!std::isfinite(out.loss)) throw TrainingDiverged("actor loss is non-finite", -1);

    const DenseGradient g1 = backward_dense(agent.critic1, c1_cache, dq1);
    const DenseGradient g2 = backward_dense(agent.critic2, c2_cache, dq2);
    const Eigen::MatrixXd dact = g1.input.bottomRows(A) + g2.input.bottomRows(A);

    // Head gradients. With xi held fixed, d(log pi)/d(mean) = 2*tanh(u) and
    // d(log pi)/d(log_std) = 2*tanh(u)*(u - mean) - 1; the Gaussian density
    // terms cancel against the moving sample point.
    Eigen::MatrixXd dhead(2 * A, B);
    for (long i = 0; i < B; ++i) {
        for (int d = 0; d < A; ++d) {
            const double da_du = agent.actor.squash_half(d) * (1.0 - t(d, i) * t(d, i));
            const double du_dlogstd = u(d, i) - mean(d, i);
            const double dlp_du = 2.0 * t(d, i);
            dhead(d, i) = inv_b * alpha * dlp_du + dact(d, i) * da_du;
            dhead(A + d, i) = inv_b * alpha * (dlp_du * du_dlogstd - 1.0) +
                              dact(d, i) * da_du * du_dlogstd;
        }
    }

    out.grad = backward_dense(agent.actor, actor_cache, dhead);
    adam_step(agent.actor, out.grad, agent.opt_actor);
    return out;
}

void sac_alpha_update(SacAgent& agent, double mean_log_prob, double lr) {
    // d/d(log alpha) of (1/B) sum(-alpha*log pi - alpha*target).
    const double alpha = std::exp(agent.log_alpha);
    const double grad = alpha * (-mean_log_prob - agent.entropy_target);
    agent.log_alpha -= lr * grad;
}

void sac_target_update(SacAgent& agent, double tau) {
    polyak_update(agent.target_critic1, agent.critic1, tau);
    polyak_update(agent.target_critic2, agent.critic2, tau);
}

namespace {

// Machinery shared by both training loops: exploration, storage, buffer
// checks, evaluation cadence, metric rows.
struct LoopContext {
    const TrainConfig& cfg;
    Env& env;
    DetRng& rng;
    TargetConfig tcfg;
    DynamicBuffer buffer;
    std::unique_ptr<Env> eval_env;
    TrainResult result;

    Eigen::VectorXd obs;
    long episode_id = 0;
    long step_in_episode = 0;
    double flops_per_iter = 0.0;
    double flops_cum = 0.0;
    bool distance_known = false;
    double last_distance = 0.0;

    LoopContext(const TrainConfig& c, Env& e, DetRng& r)
        : cfg(c),
          env(e),
          rng(r),
          buffer(c.dynamic_buffer ? c.buffer_min : c.buffer_max, c.buffer_max,
                 c.distance_threshold, c.shrink_ratio, c.buffer_check_interval,
                 c.distance_batch),
          eval_env(make_env(c.env_name, c.seed ^ 0x9e3779b97f4a7c15ULL)) {
        tcfg.n_step = c.n_step;
        tcfg.discount = c.discount;
        tcfg.multi_step_delay = c.multi_step_delay;
        tcfg.smoothing_sigma = c.smoothing_sigma;
        tcfg.smoothing_clip = c.smoothing_clip;
        tcfg.exploration_sigma = c.exploration_sigma;
        obs = env.reset();
    }

    Eigen::VectorXd random_action() {
        const EnvSpec& spec = env.spec();
        Eigen::VectorXd a(spec.action_dim);
        for (int d = 0; d < spec.action_dim; ++d)
            a(d) = rng.uniform(spec.action_low(d), spec.action_high(d));
        return a;
    }

    void store_step(const Eigen::VectorXd& action, const StepResult& res) {
        Transition tr;
        tr.state = obs;
        tr.action = action;
        tr.reward = res.reward;
        tr.next_state = res.observation;
        tr.done = res.done;  // truncation still bootstraps
        tr.episode_id = episode_id;
        tr.step_in_episode = step_in_episode;
        buffer.push(std::move(tr));
        if (res.done || res.truncated) {
            obs = env.reset();
            ++episode_id;
            step_in_episode = 0;
        } else {
            obs = res.observation;
            ++step_in_episode;
        }
    }

    void buffer_check(const PolicyFn& policy, long t) {
        if (!cfg.dynamic_buffer || t % cfg.buffer_check_interval != 0) return;
        const AdjustRecord rec = buffer.adjust_capacity(policy, t);
        if (rec.measured) {
            distance_known = true;
            last_distance = rec.distance;
        }
    }

    void maybe_eval(const PolicyFn& policy, long t, long actor_active, long critic_active) {
        if (t % cfg.eval_interval != 0) return;
        const double ret = evaluate(policy, *eval_env, cfg.eval_episodes);
        result.evals.emplace_back(t, ret);
        MetricsRow row;
        row.step = t;
        row.eval_return = ret;
        row.buffer_size = buffer.size();
        row.distance_known = distance_known;
        row.policy_distance = last_distance;
        row.drops = buffer.total_dropped();
        row.actor_active = actor_active;
        row.critic_active = critic_active;
        row.train_flops_cum = flops_cum;
        result.metrics.push_back(row);
    }

    void finalize() {
        const size_t n = result.evals.size();
        const size_t take = std::min<size_t>(30, n);
        double sum = 0.0;
        for (size_t i = n - take; i < n; ++i) sum += result.evals[i].second;
        result.final_score = take > 0 ? sum / static_cast<double>(take) : 0.0;
        result.buffer_drops = buffer.total_dropped();
    }
};

}  // namespace

TrainResult train_td3(const TrainConfig& cfg, Env& env, DetRng& rng) {
    const EnvSpec& spec = env.spec();
    Td3Agent agent = make_td3_agent(cfg, spec, rng);
    LoopContext ctx(cfg, env, rng);

    const PolicyFn policy = [&agent](const Eigen::VectorXd& s) {
        return forward(agent.actor, s);
    };

    ctx.flops_per_iter = training_flops_per_iter(
        Algorithm::Td3, static_cast<double>(forward_flops(agent.actor)),
        static_cast<double>(forward_flops(agent.critic1)), cfg.batch, cfg.actor_interval);

    EvolutionSchedule sched;
    sched.initial_fraction = cfg.zeta0;
    sched.total_steps = cfg.total_steps;
    sched.mask_update_interval = cfg.mask_update_interval;
    sched.grow_mode = cfg.grow_mode();

    for (long t = 1; t <= cfg.total_steps; ++t) {
        Eigen::VectorXd action;
        if (t <= cfg.warmup) {
            action = ctx.random_action();
        } else {
            action = forward(agent.actor, ctx.obs);
            for (int d = 0; d < spec.action_dim; ++d) {
                action(d) += rng.normal(0.0, cfg.exploration_sigma * spec.action_halfwidth()(d));
                action(d) = std::clamp(action(d), spec.action_low(d), spec.action_high(d));
            }
        }
        const StepResult res = env.step(action);
        ctx.store_step(action, res);
        ctx.buffer_check(policy, t);

        if (t > cfg.warmup) {
            const long u = t - cfg.warmup;  // update counter; evolution cadence runs on it
            const int n_eff = effective_n_for_step(ctx.tcfg, t);
            TargetConfig step_cfg = ctx.tcfg;
            step_cfg.n_step = n_eff;
            const auto batch = ctx.buffer.sample_nstep(cfg.batch, n_eff, rng);

            CriticUpdateOut cu;
            try {
                cu = td3_critic_update(agent, batch, step_cfg, rng);
            } catch (TrainingDiverged& e) {
                throw TrainingDiverged(e.what(), t);
            }
            ctx.result.critic_updates += 1;
            ctx.flops_cum += ctx.flops_per_iter;

            if (cfg.evolution_enabled() && u % cfg.mask_update_interval == 0) {
                const double zeta = anneal_fraction(t, sched);
                evolve_network(agent.critic1, agent.opt_critic1, cu.grad1, zeta,
                               sched.grow_mode, rng);
                evolve_network(agent.critic2, agent.opt_critic2, cu.grad2, zeta,
                               sched.grow_mode, rng);
                ctx.result.critic_evolutions += 1;
            }

            if (u % cfg.actor_interval == 0) {
                Eigen::MatrixXd states(spec.state_dim, cfg.batch);
                for (long i = 0; i < cfg.batch; ++i) states.col(i) = batch[i].state;
                ActorUpdateOut au;
                try {
                    au = td3_actor_update(agent, states);
                } catch (TrainingDiverged& e) {
                    throw TrainingDiverged(e.what(), t);
                }
                ctx.result.actor_updates += 1;

                const long actor_update_count = u / cfg.actor_interval;
                if (cfg.evolution_enabled() &&
                    actor_update_count % cfg.mask_update_interval == 0) {
                    const double zeta = anneal_fraction(t, sched);
                    evolve_network(agent.actor, agent.opt_actor, au.grad, zeta,
                                   sched.grow_mode, rng);
                    ctx.result.actor_evolutions += 1;
                }
                td3_target_update(agent, cfg.tau);
            }
        }

        ctx.maybe_eval(policy, t, agent.actor.active_params(), agent.critic1.active_params());
    }

    ctx.finalize();
    ctx.result.flops = make_flops_report(Algorithm::Td3, agent.actor, agent.critic1, cfg.batch,
                                         cfg.actor_interval, cfg.total_steps - cfg.warmup);
    ctx.result.actor = std::move(agent.actor);
    ctx.result.critic1 = std::move(agent.critic1);
    ctx.result.critic2 = std::move(agent.critic2);
    return ctx.result;
}

TrainResult train_sac(const TrainConfig& cfg, Env& env, DetRng& rng) {
    const EnvSpec& spec = env.spec();
    SacAgent agent = make_sac_agent(cfg, spec, rng);
    LoopContext ctx(cfg, env, rng);

    const PolicyFn policy = [&agent](const Eigen::VectorXd& s) {
        return squashed_mean(agent.actor, s);
    };

    ctx.flops_per_iter = training_flops_per_iter(
        Algorithm::Sac, static_cast<double>(forward_flops(agent.actor)),
        static_cast<double>(forward_flops(agent.critic1)), cfg.batch, cfg.actor_interval);

    EvolutionSchedule sched;
    sched.initial_fraction = cfg.zeta0;
    sched.total_steps = cfg.total_steps;
    sched.mask_update_interval = cfg.mask_update_interval;
    sched.grow_mode = cfg.grow_mode();

    for (long t = 1; t <= cfg.total_steps; ++t) {
        Eigen::VectorXd action;
        if (t <= cfg.warmup) {
            action = ctx.random_action();
        } else {
            action = sample_squashed_gaussian(agent.actor, ctx.obs, rng).action;
        }
        const StepResult res = env.step(action);
        ctx.store_step(action, res);
        ctx.buffer_check(policy, t);

        if (t > cfg.warmup) {
            const long u = t - cfg.warmup;
            const int n_eff = effective_n_for_step(ctx.tcfg, t);
            TargetConfig step_cfg = ctx.tcfg;
            step_cfg.n_step = n_eff;
            const auto batch = ctx.buffer.sample_nstep(cfg.batch, n_eff, rng);

            CriticUpdateOut cu;
            try {
                cu = sac_critic_update(agent, batch, step_cfg, rng);
            } catch (TrainingDiverged& e) {
                throw TrainingDiverged(e.what(), t);
            }
            ctx.result.critic_updates += 1;
            ctx.flops_cum += ctx.flops_per_iter;

            if (cfg.evolution_enabled() && u % cfg.mask_update_interval == 0) {
                const double zeta = anneal_fraction(t, sched);
                evolve_network(agent.critic1, agent.opt_critic1, cu.grad1, zeta,
                               sched.grow_mode, rng);
                evolve_network(agent.critic2, agent.opt_critic2, cu.grad2, zeta,
                               sched.grow_mode, rng);
                ctx.result.critic_evolutions += 1;
            }

            if (u % cfg.actor_interval == 0) {
                Eigen::MatrixXd states(spec.state_dim, cfg.batch);
                for (long i = 0; i < cfg.batch; ++i) states.col(i) = batch[i].state;
                ActorUpdateOut au;
                try {
                    au = sac_actor_update(agent, states, rng);
                } catch (TrainingDiverged& e) {
                    throw TrainingDiverged(e.what(), t);
                }
                ctx.result.actor_updates += 1;
                sac_alpha_update(agent, au.mean_log_prob, cfg.learning_rate);

                const long actor_update_count = u / cfg.actor_interval;
                if (cfg.evolution_enabled() &&
                    actor_update_count % cfg.mask_update_interval == 0) {
                    const double zeta = anneal_fraction(t, sched);
                    evolve_network(agent.actor, agent.opt_actor, au.grad, zeta,
                                   sched.grow_mode, rng);
                    ctx.result.actor_evolutions += 1;
                }
                sac_target_update(agent, cfg.tau);
            }
        }

        ctx.maybe_eval(policy, t, agent.actor.active_params(), agent.critic1.active_params());
    }

    ctx.finalize();
    ctx.result.flops = make_flops_report(Algorithm::Sac, agent.actor, agent.critic1, cfg.batch,
                                         cfg.actor_interval, cfg.total_steps - cfg.warmup);
    ctx.result.actor = std::move(agent.actor);
    ctx.result.critic1 = std::move(agent.critic1);
    ctx.result.critic2 = std::move(agent.critic2);
    return ctx.result;
}

TrainResult train(const TrainConfig& cfg, Env& env, DetRng& rng) {
    return cfg.algorithm == Algorithm::Td3 ? train_td3(cfg, env, rng)
                                           : train_sac(cfg, env, rng);
}

double evaluate(const PolicyFn& policy, Env& env, int episodes) {
    if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Eigen::VectorXd obs = env.reset();
        while (true) {
            const StepResult res = env.step(policy(obs));
            total += res.reward;
            if (res.done || res.truncated) break;
            obs = res.observation;
        }
    }
    return total / episodes;
}

double random_policy_score(Env& env, int episodes, DetRng& rng) {
    const EnvSpec& spec = env.spec();
    const PolicyFn random_policy = [&](const Eigen::VectorXd&) {
        Eigen::VectorXd a(spec.action_dim);
        for (int d = 0; d < spec.action_dim; ++d)
            a(d) = rng.uniform(spec.action_low(d), spec.action_high(d));
        return a;
    };
    return evaluate(random_policy, env, episodes);
}

namespace {

long dense_weight_total(const std::vector<int>& dims) {
    long total = 0;
    for (size_t l = 0; l + 1 < dims.size(); ++l)
        total += static_cast<long>(dims[l]) * dims[l + 1];
    return total;
}

long active_weight_total(double sparsity, const std::vector<int>& dims) {
    std::vector<std::pair<int, int>> shapes;
    for (size_t l = 0; l + 1 < dims.size(); ++l) shapes.emplace_back(dims[l], dims[l + 1]);
    const SparsityAllocation alloc = er_allocate(sparsity, shapes);
    long total = 0;
    for (size_t l = 0; l < shapes.size(); ++l) {
        const double n = static_cast<double>(shapes[l].first) * shapes[l].second;
        total += std::lround((1.0 - alloc.per_layer[l]) * n);
    }
    return total;
}

}  // namespace

int tiny_dense_width(Algorithm alg, const EnvSpec& spec, const std::vector<int>& hidden,
                     double actor_sparsity, double critic_sparsity) {
    const long budget = active_weight_total(actor_sparsity, actor_dims(alg, spec, hidden)) +
                        active_weight_total(critic_sparsity, critic_dims(spec, hidden));
    int best = 1;
    for (int w = 1; w <= hidden.front(); ++w) {
        std::vector<int> h(hidden.size(), w);
        const long params =
            dense_weight_total(actor_dims(alg, spec, h)) + dense_weight_total(critic_dims(spec, h));
        if (params <= budget)
            best = w;
        else
            break;
    }
    return best;
}

std::optional<double> ultimate_compression_search(std::vector<SparsityScore> table,
                                                  double dense_score) {
    std::sort(table.begin(), table.end(),
              [](const SparsityScore& a, const SparsityScore& b) { return a.sparsity > b.sparsity; });
    const double threshold = dense_score - 0.03 * std::abs(dense_score);
    for (const auto& cell : table)
        if (cell.score >= threshold) return cell.sparsity;
    return std::nullopt;
}

}  // namespace rlx2
