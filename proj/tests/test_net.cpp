#include <doctest.h>

#include <cmath>

#include "net.hpp"

using namespace rlx2;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Single layer with explicit parameters, identity head.
Mlp tiny_net(const MatrixXd& w, const MatrixXd& mask, const VectorXd& bias) {
    Mlp net;
    MaskedLinear layer;
    layer.in_dim = static_cast<int>(w.cols());
    layer.out_dim = static_cast<int>(w.rows());
    layer.weights = w;
    layer.mask = mask;
    layer.bias = bias;
    layer.target_sparsity = 1.0 - mask.sum() / static_cast<double>(mask.size());
    layer.project();
    net.layers.push_back(layer);
    net.head = HeadKind::Identity;
    return net;
}

double sq_loss(const Mlp& net, const VectorXd& x, const VectorXd& t) {
    return 0.5 * (forward(net, x) - t).squaredNorm();
}

}  // namespace

TEST_CASE("init_network active counts follow the sparsity targets") {
    DetRng rng(7);
    SUBCASE("zero sparsity keeps every connection") {
        Mlp net = init_network({3, 4, 1}, {0.0, 0.0}, HeadKind::Identity, rng);
        CHECK(net.layers[0].active_count() == 12);
        CHECK(net.layers[1].active_count() == 4);
        CHECK(net.layers[0].mask.minCoeff() == 1.0);
    }
    SUBCASE("half sparsity keeps round((1-s)*N)") {
        Mlp net = init_network({3, 4, 1}, {0.5, 0.5}, HeadKind::Identity, rng);
        CHECK(net.layers[0].active_count() == 6);
        CHECK(net.layers[1].active_count() == 2);
    }
    SUBCASE("full sparsity leaves only the bias path") {
        Mlp net = init_network({3, 4, 1}, {1.0, 1.0}, HeadKind::Identity, rng);
        CHECK(net.layers[0].active_count() == 0);
        CHECK(net.layers[1].active_count() == 0);
        net.layers[1].bias << 0.25;
        VectorXd x(3);
        x << 1.0, -2.0, 3.0;
        CHECK(forward(net, x)(0) == 0.25);
    }
    SUBCASE("masked positions hold exact zeros") {
        Mlp net = init_network({5, 7, 3}, {0.6, 0.3}, HeadKind::Identity, rng);
        for (const auto& layer : net.layers)
            for (int r = 0; r < layer.out_dim; ++r)
                for (int c = 0; c < layer.in_dim; ++c)
                    if (layer.mask(r, c) == 0.0) CHECK(layer.weights(r, c) == 0.0);
    }
    SUBCASE("argument validation") {
        CHECK_THROWS_AS(init_network({3, 4}, {0.5, 0.5}, HeadKind::Identity, rng),
                        std::invalid_argument);
        CHECK_THROWS_AS(init_network({3, 4}, {1.5}, HeadKind::Identity, rng),
                        std::invalid_argument);
        CHECK_THROWS_AS(init_network({3}, {}, HeadKind::Identity, rng), std::invalid_argument);
    }
    SUBCASE("identical seeds give bit-identical networks") {
        DetRng a(99), b(99);
        Mlp na = init_network({4, 6, 2}, {0.5, 0.25}, HeadKind::Identity, a);
        Mlp nb = init_network({4, 6, 2}, {0.5, 0.25}, HeadKind::Identity, b);
        for (size_t l = 0; l < na.layers.size(); ++l) {
            CHECK(na.layers[l].weights == nb.layers[l].weights);
            CHECK(na.layers[l].mask == nb.layers[l].mask);
        }
    }
}

TEST_CASE("forward applies effective weights") {
    MatrixXd w(1, 2);
    w << 1.0, 2.0;
    VectorXd b = VectorXd::Zero(1);
    VectorXd x(2);
    x << 1.0, 1.0;

    SUBCASE("dense single layer") {
        Mlp net = tiny_net(w, MatrixXd::Ones(1, 2), b);
        CHECK(forward(net, x)(0) == 3.0);
    }
    SUBCASE("masked position contributes nothing") {
        MatrixXd m(1, 2);
        m << 1.0, 0.0;
        Mlp net = tiny_net(w, m, b);
        CHECK(forward(net, x)(0) == 1.0);
    }
    SUBCASE("zero input and bias give zero output") {
        Mlp net = tiny_net(w, MatrixXd::Ones(1, 2), b);
        CHECK(forward(net, VectorXd(VectorXd::Zero(2)))(0) == 0.0);
    }
    SUBCASE("shape mismatch throws") {
        Mlp net = tiny_net(w, MatrixXd::Ones(1, 2), b);
        CHECK_THROWS_AS(forward(net, VectorXd(VectorXd::Zero(3))), std::invalid_argument);
    }
}

TEST_CASE("backward_dense computes delta times input at every position") {
    VectorXd x(2);
    x << 1.0, 2.0;

    SUBCASE("dense layer, squared loss") {
        // y = Wx = 3 with W = [1,1]; target 2 leaves residual 1, so the
        // gradient of 0.5*(y-t)^2 is residual * x = [1, 2].
        MatrixXd w(1, 2);
        w << 1.0, 1.0;
        Mlp net = tiny_net(w, MatrixXd::Ones(1, 2), VectorXd::Zero(1));
        ForwardCache cache;
        const MatrixXd out = forward(net, MatrixXd(x), &cache);
        CHECK(out(0, 0) == 3.0);
        VectorXd dy(1);
        dy << out(0, 0) - 2.0;
        const DenseGradient g = backward_dense(net, cache, dy);
        CHECK(g.weights[0](0, 0) == 1.0);
        CHECK(g.weights[0](0, 1) == 2.0);
        CHECK(g.bias[0](0) == 1.0);
    }

    SUBCASE("masked position still carries its growth score") {
        // Mask [1,0]: y = 1, residual 1 against target 0; the inactive
        // position scores residual * x2 = 2.
        MatrixXd w(1, 2);
        w << 1.0, 5.0;  // the 5 is masked away
        MatrixXd m(1, 2);
        m << 1.0, 0.0;
        Mlp net = tiny_net(w, m, VectorXd::Zero(1));
        ForwardCache cache;
        const MatrixXd out = forward(net, MatrixXd(x), &cache);
        CHECK(out(0, 0) == 1.0);
        VectorXd dy(1);
        dy << out(0, 0) - 0.0;
        const DenseGradient g = backward_dense(net, cache, dy);
        CHECK(g.weights[0](0, 1) == 2.0);

        // Independent check: central difference with the position unmasked
        // around value zero.
        const double h = 1e-5;
        VectorXd target = VectorXd::Zero(1);
        net.layers[0].mask(0, 1) = 1.0;
        net.layers[0].weights(0, 1) = h;
        const double up = sq_loss(net, x, target);
        net.layers[0].weights(0, 1) = -h;
        const double dn = sq_loss(net, x, target);
        const double fd = (up - dn) / (2.0 * h);
        CHECK(std::abs(fd - 2.0) < 1e-8);
    }

    SUBCASE("zero residual zeroes the gradient") {
        MatrixXd w(1, 2);
        w << 1.0, 1.0;
        Mlp net = tiny_net(w, MatrixXd::Ones(1, 2), VectorXd::Zero(1));
        ForwardCache cache;
        forward(net, MatrixXd(x), &cache);
        const DenseGradient g = backward_dense(net, cache, VectorXd(VectorXd::Zero(1)));
        CHECK(g.weights[0].cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("missing cache throws") {
        MatrixXd w(1, 2);
        w << 1.0, 1.0;
        Mlp net = tiny_net(w, MatrixXd::Ones(1, 2), VectorXd::Zero(1));
        ForwardCache empty;
        CHECK_THROWS_AS(backward_dense(net, empty, VectorXd(VectorXd::Zero(1))), std::invalid_argument);
    }
}

TEST_CASE("adam_step updates active weights only") {
    MatrixXd w(1, 1), m(1, 1);
    w << 1.0;
    m << 1.0;

    SUBCASE("zero gradient leaves weights untouched") {
        Mlp net = tiny_net(w, m, VectorXd::Zero(1));
        OptimizerState opt = make_optimizer(net, 1e-3);
        DenseGradient g;
        g.weights = {MatrixXd::Zero(1, 1)};
        g.bias = {VectorXd::Zero(1)};
        adam_step(net, g, opt);
        CHECK(net.layers[0].weights(0, 0) == 1.0);
        CHECK(opt.step_count == 1);
    }

    SUBCASE("gradient confined to a masked position is inert") {
        MatrixXd mask(1, 1);
        mask << 0.0;
        Mlp net = tiny_net(w, mask, VectorXd::Zero(1));
        OptimizerState opt = make_optimizer(net, 1e-3);
        DenseGradient g;
        g.weights = {MatrixXd::Constant(1, 1, 42.0)};
        g.bias = {VectorXd::Zero(1)};
        adam_step(net, g, opt);
        CHECK(net.layers[0].weights(0, 0) == 0.0);
        CHECK(opt.m_w[0](0, 0) == 0.0);
        CHECK(opt.v_w[0](0, 0) == 0.0);
    }

    SUBCASE("first step matches the bias-corrected arithmetic") {
        Mlp net = tiny_net(w, m, VectorXd::Zero(1));
        OptimizerState opt = make_optimizer(net, 1e-3);
        DenseGradient g;
        g.weights = {MatrixXd::Constant(1, 1, 1.0)};
        g.bias = {VectorXd::Zero(1)};
        adam_step(net, g, opt);
        // One-step oracle: m=0.1, v=0.001; bias correction scales the rate by
        // sqrt(1-beta2)/(1-beta1), giving a first step of ~lr.
        const double m1 = 0.1 * 1.0;
        const double v1 = 0.001 * 1.0;
        const double alpha = 1e-3 * std::sqrt(1.0 - 0.999) / (1.0 - 0.9);
        const double expected = 1.0 - alpha * m1 / (std::sqrt(v1) + 1e-8);
        CHECK(net.layers[0].weights(0, 0) == doctest::Approx(expected).epsilon(1e-12));
        CHECK(std::abs((1.0 - net.layers[0].weights(0, 0)) - 1e-3) < 1e-6);
    }

    SUBCASE("non-finite gradients are rejected") {
        Mlp net = tiny_net(w, m, VectorXd::Zero(1));
        OptimizerState opt = make_optimizer(net, 1e-3);
        DenseGradient g;
        g.weights = {MatrixXd::Constant(1, 1, std::nan(""))};
        g.bias = {VectorXd::Zero(1)};
        CHECK_THROWS_AS(adam_step(net, g, opt), std::runtime_error);
    }
}

TEST_CASE("mask conservation under forward/backward/adam sequences") {
    DetRng rng(11);
    Mlp net = init_network({4, 6, 3}, {0.5, 0.4}, HeadKind::Identity, rng);
    OptimizerState opt = make_optimizer(net, 1e-2);
    const std::vector<MatrixXd> masks = {net.layers[0].mask, net.layers[1].mask};

    for (int iter = 0; iter < 50; ++iter) {
        MatrixXd x(4, 5);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 5; ++c) x(r, c) = rng.uniform(-2.0, 2.0);
        ForwardCache cache;
        const MatrixXd out = forward(net, x, &cache);
        adam_step(net, backward_dense(net, cache, MatrixXd(out)), opt);
    }
    for (size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(net.layers[l].mask == masks[l]);
        for (int r = 0; r < net.layers[l].out_dim; ++r)
            for (int c = 0; c < net.layers[l].in_dim; ++c)
                if (masks[l](r, c) == 0.0) {
                    CHECK(net.layers[l].weights(r, c) == 0.0);
                    CHECK(opt.m_w[l](r, c) == 0.0);
                    CHECK(opt.v_w[l](r, c) == 0.0);
                }
    }
}

TEST_CASE("polyak update re-projects with the online mask") {
    DetRng rng(5);
    Mlp online = init_network({3, 5, 2}, {0.5, 0.5}, HeadKind::Identity, rng);
    Mlp target = online;
    target.layers[0].weights *= 2.0;
    online.layers[0].mask(0, 0) = online.layers[0].mask(0, 0) == 1.0 ? 0.0 : 1.0;
    online.layers[0].project();

    polyak_update(target, online, 0.25);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c)
            if (online.layers[0].mask(r, c) == 0.0) CHECK(target.layers[0].weights(r, c) == 0.0);
    CHECK(target.layers[0].mask == online.layers[0].mask);
}

TEST_CASE("squashed Gaussian sample reports a consistent log-density") {
    DetRng rng(21);
    Mlp policy = init_network({2, 4, 2}, {0.0, 0.0}, HeadKind::GaussianPair, rng);
    policy.squash_center = VectorXd::Zero(1);
    policy.squash_half = VectorXd::Constant(1, 2.0);

    VectorXd state(2);
    state << 0.3, -0.7;
    const VectorXd head = forward(policy, state);
    const double mean = head(0);
    const double log_std = head(1);

    DetRng sampler(33), replay(33);
    const PolicySample s = sample_squashed_gaussian(policy, state, sampler);

    // Reconstruct the density by hand from the same noise draw.
    const double xi = replay.normal();
    const double u = mean + std::exp(log_std) * xi;
    CHECK(s.pre_squash(0) == doctest::Approx(u).epsilon(1e-12));
    CHECK(s.action(0) == doctest::Approx(2.0 * std::tanh(u)).epsilon(1e-12));
    const double gauss = -0.5 * xi * xi - log_std - 0.5 * std::log(2.0 * M_PI);
    const double jac = std::log(2.0 * (1.0 - std::tanh(u) * std::tanh(u)));
    CHECK(s.log_prob == doctest::Approx(gauss - jac).epsilon(1e-10));

    CHECK(squashed_mean(policy, state)(0) == doctest::Approx(2.0 * std::tanh(mean)));
}
