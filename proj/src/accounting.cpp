#include "accounting.hpp"

namespace rlx2 {

long model_size(const Mlp& net) {
    long total = 0;
    for (const auto& layer : net.layers) total += layer.active_count();
    return total;
}

long forward_flops(const Mlp& net) {
    long total = 0;
    for (const auto& layer : net.layers) {
        for (int r = 0; r < layer.out_dim; ++r) {
            long k = 0;
            for (int c = 0; c < layer.in_dim; ++c)
                if (layer.mask(r, c) != 0.0) ++k;
            if (k > 0) total += 2 * k - 1;
        }
    }
    return total;
}

double training_flops_per_iter(Algorithm alg, double actor_flops, double critic_flops,
                               long batch, int actor_interval) {
    const double fa = actor_flops;
    const double fc = critic_flops;
    const double d = static_cast<double>(actor_interval);
    double per_sample = 0.0;
    switch (alg) {
        case Algorithm::Td3:
            // Critic: target (fa + 2fc) + loss (2fc) + backward (2*2fc).
            // Actor: loss (fa + fc) + backward (2fa), every d iterations.
            per_sample = (fa + 8.0 * fc) + (3.0 * fa + fc) / d;
            break;
        case Algorithm::Sac:
            // Target costs one extra policy pass; the actor loss reads both critics.
            per_sample = (2.0 * fa + 8.0 * fc) + (3.0 * fa + 2.0 * fc) / d;
            break;
    }
    return static_cast<double>(batch) * per_sample;
}

long total_model_size(Algorithm alg, long actor_size, long critic_size) {
    switch (alg) {
        case Algorithm::Td3:
            return 2 * actor_size + 4 * critic_size;  // target actor + twin critics + targets
        case Algorithm::Sac:
            return actor_size + 4 * critic_size;  // no target actor
    }
    return 0;
}

namespace {

long dense_forward_flops(const Mlp& net) {
    long total = 0;
    for (const auto& layer : net.layers)
        total += static_cast<long>(2 * layer.in_dim - 1) * layer.out_dim;
    return total;
}

long dense_size(const Mlp& net) {
    long total = 0;
    for (const auto& layer : net.layers) total += layer.weight_count();
    return total;
}

}  // namespace

FlopsReport make_flops_report(Algorithm alg, const Mlp& actor, const Mlp& critic,
                              long batch, int actor_interval, long train_iterations) {
    FlopsReport r;
    r.actor_forward_flops = forward_flops(actor);
    r.critic_forward_flops = forward_flops(critic);
    r.train_flops_per_iter = training_flops_per_iter(
        alg, static_cast<double>(r.actor_forward_flops),
        static_cast<double>(r.critic_forward_flops), batch, actor_interval);
    r.train_flops_total = r.train_flops_per_iter * static_cast<double>(train_iterations);
    r.inference_flops = r.actor_forward_flops;
    r.actor_size = model_size(actor);
    r.critic_size = model_size(critic);
    r.total_size = total_model_size(alg, r.actor_size, r.critic_size);

    r.dense_actor_forward_flops = dense_forward_flops(actor);
    r.dense_critic_forward_flops = dense_forward_flops(critic);
    r.dense_train_flops_per_iter = training_flops_per_iter(
        alg, static_cast<double>(r.dense_actor_forward_flops),
        static_cast<double>(r.dense_critic_forward_flops), batch, actor_interval);
    r.dense_total_size = total_model_size(alg, dense_size(actor), dense_size(critic));

    r.size_ratio = r.dense_total_size > 0
                       ? static_cast<double>(r.total_size) / r.dense_total_size
                       : 0.0;
    r.train_flops_ratio = r.dense_train_flops_per_iter > 0.0
                              ? r.train_flops_per_iter / r.dense_train_flops_per_iter
                              : 0.0;
    r.inference_flops_ratio =
        r.dense_actor_forward_flops > 0
            ? static_cast<double>(r.inference_flops) / r.dense_actor_forward_flops
            : 0.0;
    return r;
}

}  // namespace rlx2
