#ifndef RLX2_ACCOUNTING_HPP
#define RLX2_ACCOUNTING_HPP

#include "net.hpp"

namespace rlx2 {

enum class Algorithm { Td3, Sac };

// Active weight count; biases are excluded from all size figures.
long model_size(const Mlp& net);

// Exact multiply/add count of a forward pass over active connections: an
// output with k active inputs costs k multiplies and k-1 additions. Dense
// layers reduce to (2*I - 1) * O.
long forward_flops(const Mlp& net);

// Average analytic cost of one training iteration. Backward passes count as
// twice the forward pass; both critics are trained against a shared target
// and the actor is updated every d iterations.
double training_flops_per_iter(Algorithm alg, double actor_flops, double critic_flops,
                               long batch, int actor_interval);

// Parameters held in memory during training: online + target copies.
long total_model_size(Algorithm alg, long actor_size, long critic_size);

// Analytic model-size and FLOPs figures, normalized against a dense network
// of the same architecture.
struct FlopsReport {
    long actor_forward_flops = 0;
    long critic_forward_flops = 0;
    double train_flops_per_iter = 0.0;
    double train_flops_total = 0.0;
    long inference_flops = 0;
    long actor_size = 0;
    long critic_size = 0;
    long total_size = 0;

    long dense_actor_forward_flops = 0;
    long dense_critic_forward_flops = 0;
    double dense_train_flops_per_iter = 0.0;
    long dense_total_size = 0;

    double size_ratio = 0.0;
    double train_flops_ratio = 0.0;
    double inference_flops_ratio = 0.0;
};

FlopsReport make_flops_report(Algorithm alg, const Mlp& actor, const Mlp& critic,
                              long batch, int actor_interval, long train_iterations);

}  // namespace rlx2

#endif
