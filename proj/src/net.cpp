#include "net.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rlx2 {

namespace {

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

// log(1 - tanh(u)^2), evaluated without catastrophic cancellation.
double log_one_minus_tanh_sq(double u) {
    // 1 - tanh(u)^2 = 4 / (e^u + e^-u)^2  =>  log = 2*(log 2 - |u| - log1p(e^{-2|u|}))
    const double a = std::abs(u);
    return 2.0 * (std::log(2.0) - a - std::log1p(std::exp(-2.0 * a)));
}

}  // namespace

int Mlp::action_dim() const {
    const int out = output_dim();
    return head == HeadKind::GaussianPair ? out / 2 : out;
}

long Mlp::active_params() const {
    long total = 0;
    for (const auto& l : layers) total += l.active_count();
    return total;
}

bool DenseGradient::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : bias)
        if (!b.allFinite()) return false;
    return true;
}

Mlp init_network(const std::vector<int>& layer_dims,
                 const std::vector<double>& per_layer_sparsity,
                 HeadKind head, DetRng& rng) {
    check(layer_dims.size() >= 2, "init_network: need at least one layer");
    check(per_layer_sparsity.size() == layer_dims.size() - 1,
          "init_network: sparsity list length must match layer count");
    for (int d : layer_dims) check(d > 0, "init_network: dimensions must be positive");
    for (double s : per_layer_sparsity)
        check(s >= 0.0 && s <= 1.0, "init_network: sparsity outside [0,1]");

    Mlp net;
    net.head = head;
    net.layers.resize(layer_dims.size() - 1);
    for (size_t l = 0; l < net.layers.size(); ++l) {
        MaskedLinear& layer = net.layers[l];
        layer.in_dim = layer_dims[l];
        layer.out_dim = layer_dims[l + 1];
        layer.target_sparsity = per_layer_sparsity[l];

        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
        layer.weights.resize(layer.out_dim, layer.in_dim);
        for (int i = 0; i < layer.out_dim; ++i)
            for (int j = 0; j < layer.in_dim; ++j)
                layer.weights(i, j) = rng.uniform(-bound, bound);
        layer.bias = Eigen::VectorXd::Zero(layer.out_dim);

        // Exactly round((1-s)*N) connections, placed uniformly at random.
        const long n = layer.weight_count();
        const long ones = std::lround((1.0 - layer.target_sparsity) * static_cast<double>(n));
        std::vector<long> idx(n);
        std::iota(idx.begin(), idx.end(), 0L);
        for (long i = 0; i < ones; ++i) {
            const long j = i + static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[i], idx[j]);
        }
        layer.mask = Eigen::MatrixXd::Zero(layer.out_dim, layer.in_dim);
        for (long i = 0; i < ones; ++i) {
            // Flat indices are row-major: r * in_dim + c.
            const long r = idx[i] / layer.in_dim;
            const long c = idx[i] % layer.in_dim;
            layer.mask(r, c) = 1.0;
        }
        layer.project();
    }
    return net;
}

Eigen::MatrixXd forward(const Mlp& net, const Eigen::MatrixXd& input, ForwardCache* cache) {
    check(input.rows() == net.input_dim(), "forward: input dimension mismatch");
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
        cache->inputs.reserve(net.layers.size());
        cache->preacts.reserve(net.layers.size());
    }
    Eigen::MatrixXd x = input;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const MaskedLinear& layer = net.layers[l];
        if (cache) cache->inputs.push_back(x);
        Eigen::MatrixXd z = layer.weights * x;
        z.colwise() += layer.bias;
        if (cache) cache->preacts.push_back(z);
        x = (l + 1 < net.layers.size()) ? relu(z) : std::move(z);
    }
    switch (net.head) {
        case HeadKind::Identity:
            return x;
        case HeadKind::BoundedSquash: {
            Eigen::MatrixXd y = x.array().tanh().matrix();
            y.array().colwise() *= net.squash_half.array();
            y.colwise() += net.squash_center;
            return y;
        }
        case HeadKind::GaussianPair: {
            const int a = net.action_dim();
            Eigen::MatrixXd y = x;
            y.bottomRows(a) = y.bottomRows(a).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
            return y;
        }
    }
    return x;
}

Eigen::VectorXd forward(const Mlp& net, const Eigen::VectorXd& input) {
    return forward(net, Eigen::MatrixXd(input), nullptr).col(0);
}

DenseGradient backward_dense(const Mlp& net, const ForwardCache& cache,
                             const Eigen::MatrixXd& output_grad) {
    check(cache.inputs.size() == net.layers.size(), "backward_dense: missing forward cache");
    check(output_grad.rows() == net.output_dim(), "backward_dense: output grad dimension mismatch");
    check(output_grad.cols() == cache.inputs.front().cols(),
          "backward_dense: batch size mismatch with cache");

    const size_t L = net.layers.size();
    DenseGradient grad;
    grad.weights.resize(L);
    grad.bias.resize(L);

    // Chain through the output head.
    Eigen::MatrixXd delta;
    const Eigen::MatrixXd& z_last = cache.preacts.back();
    switch (net.head) {
        case HeadKind::Identity:
            delta = output_grad;
            break;
        case HeadKind::BoundedSquash: {
            Eigen::ArrayXXd t = z_last.array().tanh();
            delta = (output_grad.array() * (1.0 - t.square())).matrix();
            delta.array().colwise() *= net.squash_half.array();
            break;
        }
        case HeadKind::GaussianPair: {
            const int a = net.action_dim();
            delta = output_grad;
            // Zero gradient where the log-stddev clamp saturates.
            auto logstd = z_last.bottomRows(a).array();
            delta.bottomRows(a).array() *=
                (logstd > kLogStdMin && logstd < kLogStdMax).cast<double>();
            break;
        }
    }

    for (size_t l = L; l-- > 0;) {
        const MaskedLinear& layer = net.layers[l];
        if (l + 1 < L) {
            // Rectifier derivative of the hidden layer output.
            delta = (delta.array() * (cache.preacts[l].array() > 0.0).cast<double>()).matrix();
        }
        grad.weights[l].noalias() = delta * cache.inputs[l].transpose();
        grad.bias[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (layer.weights.transpose() * delta).eval();
        } else {
            grad.input.noalias() = layer.weights.transpose() * delta;
        }
    }
    return grad;
}

DenseGradient backward_dense(const Mlp& net, const ForwardCache& cache,
                             const Eigen::VectorXd& output_grad) {
    return backward_dense(net, cache, Eigen::MatrixXd(output_grad));
}

OptimizerState make_optimizer(const Mlp& net, double learning_rate) {
    OptimizerState opt;
    opt.learning_rate = learning_rate;
    opt.m_w.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        opt.m_w.emplace_back(Eigen::MatrixXd::Zero(layer.out_dim, layer.in_dim));
        opt.v_w.emplace_back(Eigen::MatrixXd::Zero(layer.out_dim, layer.in_dim));
        opt.m_b.emplace_back(Eigen::VectorXd::Zero(layer.out_dim));
        opt.v_b.emplace_back(Eigen::VectorXd::Zero(layer.out_dim));
    }
    return opt;
}

void adam_step(Mlp& net, const DenseGradient& grad, OptimizerState& opt) {
    check(grad.weights.size() == net.layers.size(), "adam_step: gradient shape mismatch");
    if (!grad.all_finite()) throw std::runtime_error("adam_step: non-finite gradient");

    opt.step_count += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));
    const double alpha = opt.learning_rate * std::sqrt(bc2) / bc1;

    for (size_t l = 0; l < net.layers.size(); ++l) {
        MaskedLinear& layer = net.layers[l];
        const Eigen::MatrixXd g = grad.weights[l].cwiseProduct(layer.mask);
        opt.m_w[l] = opt.beta1 * opt.m_w[l] + (1.0 - opt.beta1) * g;
        opt.v_w[l] = opt.beta2 * opt.v_w[l] + (1.0 - opt.beta2) * g.cwiseProduct(g);
        layer.weights.array() -=
            alpha * opt.m_w[l].array() / (opt.v_w[l].array().sqrt() + opt.epsilon);

        const Eigen::VectorXd& gb = grad.bias[l];
        opt.m_b[l] = opt.beta1 * opt.m_b[l] + (1.0 - opt.beta1) * gb;
        opt.v_b[l] = opt.beta2 * opt.v_b[l] + (1.0 - opt.beta2) * gb.cwiseProduct(gb);
        layer.bias.array() -=
            alpha * opt.m_b[l].array() / (opt.v_b[l].array().sqrt() + opt.epsilon);

        layer.project();
        opt.m_w[l] = opt.m_w[l].cwiseProduct(layer.mask);
        opt.v_w[l] = opt.v_w[l].cwiseProduct(layer.mask);
    }
}

void project_optimizer(const Mlp& net, OptimizerState& opt) {
    for (size_t l = 0; l < net.layers.size(); ++l) {
        opt.m_w[l] = opt.m_w[l].cwiseProduct(net.layers[l].mask);
        opt.v_w[l] = opt.v_w[l].cwiseProduct(net.layers[l].mask);
    }
}

void polyak_update(Mlp& target, const Mlp& online, double tau) {
    check(target.layers.size() == online.layers.size(), "polyak_update: layer count mismatch");
    for (size_t l = 0; l < target.layers.size(); ++l) {
        MaskedLinear& t = target.layers[l];
        const MaskedLinear& o = online.layers[l];
        t.weights = tau * o.weights + (1.0 - tau) * t.weights;
        t.bias = tau * o.bias + (1.0 - tau) * t.bias;
        t.mask = o.mask;
        t.project();
    }
}

PolicySample sample_squashed_gaussian(const Mlp& policy, const Eigen::VectorXd& state,
                                      DetRng& rng) {
    check(policy.head == HeadKind::GaussianPair, "sample_squashed_gaussian: wrong head");
    const int a = policy.action_dim();
    const Eigen::VectorXd out = forward(policy, state);
    PolicySample s;
    s.pre_squash.resize(a);
    s.action.resize(a);
    s.log_prob = 0.0;
    for (int d = 0; d < a; ++d) {
        const double mean = out(d);
        const double log_std = out(a + d);
        const double std = std::exp(log_std);
        const double xi = rng.normal();
        const double u = mean + std * xi;
        s.pre_squash(d) = u;
        s.action(d) = policy.squash_center(d) + policy.squash_half(d) * std::tanh(u);
        // Gaussian density minus the log of the squash Jacobian.
        s.log_prob += -0.5 * xi * xi - log_std - 0.5 * std::log(2.0 * M_PI);
        s.log_prob -= log_one_minus_tanh_sq(u) + std::log(policy.squash_half(d));
    }
    return s;
}

Eigen::VectorXd squashed_mean(const Mlp& policy, const Eigen::VectorXd& state) {
    check(policy.head == HeadKind::GaussianPair, "squashed_mean: wrong head");
    const int a = policy.action_dim();
    const Eigen::VectorXd out = forward(policy, state);
    Eigen::VectorXd action(a);
    for (int d = 0; d < a; ++d)
        action(d) = policy.squash_center(d) + policy.squash_half(d) * std::tanh(out(d));
    return action;
}

}  // namespace rlx2
