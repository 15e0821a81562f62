#ifndef RLX2_NET_HPP
#define RLX2_NET_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rng.hpp"

namespace rlx2 {

enum class HeadKind { Identity, BoundedSquash, GaussianPair };

// One affine layer with a binary connectivity mask. Weights are stored
// already masked: weights(i,j) == 0 whenever mask(i,j) == 0.
struct MaskedLinear {
    int in_dim = 0;
    int out_dim = 0;
    Eigen::MatrixXd weights;  // out_dim x in_dim
    Eigen::MatrixXd mask;     // out_dim x in_dim, entries are 0.0 or 1.0
    Eigen::VectorXd bias;     // out_dim, never masked
    double target_sparsity = 0.0;

    long active_count() const { return static_cast<long>(mask.sum() + 0.5); }
    long weight_count() const { return static_cast<long>(in_dim) * out_dim; }
    void project() { weights = weights.cwiseProduct(mask); }
};

// Masked multilayer perceptron. Hidden activation is a rectifier; the output
// head is identity (critics), a bounded squash into an action box
// (deterministic actors), or a mean/log-stddev pair (stochastic actors).
struct Mlp {
    std::vector<MaskedLinear> layers;
    HeadKind head = HeadKind::Identity;
    // Action box parameters for squashing heads: a = center + half * tanh(z).
    Eigen::VectorXd squash_center;
    Eigen::VectorXd squash_half;

    int input_dim() const { return layers.front().in_dim; }
    int output_dim() const { return layers.back().out_dim; }
    int action_dim() const;  // GaussianPair heads emit 2 x action_dim rows
    long active_params() const;
};

// Log-stddev clamp range for GaussianPair heads.
inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

// Activations recorded by forward() for the matching backward pass.
// Samples are matrix columns.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;   // input to each layer
    std::vector<Eigen::MatrixXd> preacts;  // affine output of each layer
};

// Gradients of a scalar loss with respect to every weight position, active or
// not, plus bias gradients and the gradient with respect to the network input.
// Inactive-position entries are the growth scores used by topology evolution.
struct DenseGradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
    Eigen::MatrixXd input;

    bool all_finite() const;
};

Mlp init_network(const std::vector<int>& layer_dims,
                 const std::vector<double>& per_layer_sparsity,
                 HeadKind head, DetRng& rng);

// Batched forward pass; columns are samples. Applies the output head
// (GaussianPair rows are [mean; clamped log-stddev]).
Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);
Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input);

// Reverse pass from a gradient with respect to the head output. Weight
// gradients are dense: position (i,j) gets (upstream delta at i) x (input j)
// regardless of the mask.
DenseGradient backward_dense(const Mlp& net, const ForwardCache& cache,
                             const Eigen::MatrixXd& output_grad);
DenseGradient backward_dense(const Mlp& net, const ForwardCache& cache,
                             const Eigen::VectorXd& output_grad);

// Adaptive-moment optimizer state. Accumulators at masked positions are zero
// after every step.
struct OptimizerState {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
};

OptimizerState make_optimizer(const Mlp& net, double learning_rate);

// One optimizer step on active positions and biases. Weights and both moment
// accumulators are re-multiplied by the mask afterwards. Throws on non-finite
// gradient entries.
void adam_step(Mlp& net, const DenseGradient& grad, OptimizerState& opt);

// Zero moments at currently-masked positions; call after topology changes.
void project_optimizer(const Mlp& net, OptimizerState& opt);

// Target-network tracking: lerp parameters toward the online network, adopt
// the online mask, and re-project.
void polyak_update(Mlp& target, const Mlp& online, double tau);

// Squashed-Gaussian policy utilities (GaussianPair head).
struct PolicySample {
    Eigen::VectorXd action;      // inside the action box
    Eigen::VectorXd pre_squash;  // u = mean + stddev * xi
    double log_prob = 0.0;
};

PolicySample sample_squashed_gaussian(const Mlp& policy, const Eigen::VectorXd& state,
                                      DetRng& rng);
// Deterministic head: squashed mean.
Eigen::VectorXd squashed_mean(const Mlp& policy, const Eigen::VectorXd& state);

}  // namespace rlx2

#endif
