#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "accounting.hpp"
#include "net.hpp"
#include "sparsity.hpp"
#include "targets.hpp"

namespace rlx2 {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

// --- gradient suite ----------------------------------------------------------

// Small random masked net plus an input/target pair whose pre-activations
// stay clear of the rectifier kink, so central differences are trustworthy.
struct GradProblem {
    Mlp net;
    Eigen::VectorXd input;
    Eigen::VectorXd target;
};

double loss_of(const Mlp& net, const Eigen::VectorXd& input, const Eigen::VectorXd& target) {
    const Eigen::VectorXd out = forward(net, input);
    return 0.5 * (out - target).squaredNorm();
}

bool preacts_clear_of_kinks(const Mlp& net, const Eigen::VectorXd& input, double margin) {
    ForwardCache cache;
    forward(net, Eigen::MatrixXd(input), &cache);
    for (size_t l = 0; l + 1 < net.layers.size(); ++l)
        if ((cache.preacts[l].array().abs() < margin).any()) return false;
    return true;
}

GradProblem random_grad_problem(DetRng& rng) {
    for (;;) {
        const int n_layers = 1 + static_cast<int>(rng.uniform_index(3));
        std::vector<int> dims;
        dims.push_back(1 + static_cast<int>(rng.uniform_index(8)));
        for (int l = 0; l < n_layers; ++l) dims.push_back(1 + static_cast<int>(rng.uniform_index(8)));
        std::vector<double> sparsity;
        for (int l = 0; l < n_layers; ++l) sparsity.push_back(rng.uniform(0.0, 0.8));

        const std::uint64_t head_pick = rng.uniform_index(3);
        HeadKind head = HeadKind::Identity;
        if (head_pick == 1) head = HeadKind::BoundedSquash;
        if (head_pick == 2) {
            head = HeadKind::GaussianPair;
            if (dims.back() % 2 != 0) dims.back() += 1;
        }

        GradProblem p;
        p.net = init_network(dims, sparsity, head, rng);
        if (head != HeadKind::Identity) {
            const int a = p.net.action_dim();
            p.net.squash_center = Eigen::VectorXd::Zero(a);
            p.net.squash_half = Eigen::VectorXd::Constant(a, 1.5);
        }
        p.input.resize(dims.front());
        for (int i = 0; i < p.input.size(); ++i) p.input(i) = rng.uniform(-1.0, 1.0);
        p.target.resize(p.net.output_dim());
        for (int i = 0; i < p.target.size(); ++i) p.target(i) = rng.uniform(-1.0, 1.0);

        if (preacts_clear_of_kinks(p.net, p.input, 1e-3)) return p;
    }
}

// Central finite difference at one weight position; inactive positions are
// temporarily unmasked around value 0.
double fd_weight(GradProblem& p, size_t l, int r, int c, double h) {
    MaskedLinear& layer = p.net.layers[l];
    const double w0 = layer.weights(r, c);
    const double m0 = layer.mask(r, c);
    layer.mask(r, c) = 1.0;
    layer.weights(r, c) = w0 + h;
    const double up = loss_of(p.net, p.input, p.target);
    layer.weights(r, c) = w0 - h;
    const double dn = loss_of(p.net, p.input, p.target);
    layer.weights(r, c) = w0;
    layer.mask(r, c) = m0;
    return (up - dn) / (2.0 * h);
}

SuiteResult gradient_suite(std::uint64_t seed, const LineSink& line) {
    DetRng rng(seed ^ 0xA5A5A5A5ULL);
    const double h = 1e-5;
    const double rel_tol = 1e-4;
    double worst = 0.0;
    long positions = 0;
    bool ok = true;

    for (int trial = 0; trial < 50 && ok; ++trial) {
        GradProblem p = random_grad_problem(rng);
        ForwardCache cache;
        const Eigen::MatrixXd out = forward(p.net, Eigen::MatrixXd(p.input), &cache);
        const Eigen::VectorXd dy = out.col(0) - p.target;
        const DenseGradient grad = backward_dense(p.net, cache, dy);

        for (size_t l = 0; l < p.net.layers.size() && ok; ++l) {
            const MaskedLinear& layer = p.net.layers[l];
            for (int r = 0; r < layer.out_dim && ok; ++r) {
                for (int c = 0; c < layer.in_dim && ok; ++c) {
                    const double an = grad.weights[l](r, c);
                    const double fd = fd_weight(p, l, r, c, h);
                    const double scale = std::max(std::abs(an), std::abs(fd));
                    ++positions;
                    if (scale < 1e-6) {
                        if (std::abs(an - fd) > 1e-7) ok = false;
                        continue;
                    }
                    const double rel = std::abs(an - fd) / scale;
                    worst = std::max(worst, rel);
                    if (rel > rel_tol) {
                        ok = false;
                        line("  gradient mismatch: net " + std::to_string(trial) + " layer " +
                             std::to_string(l) + " (" + std::to_string(r) + "," +
                             std::to_string(c) + ") analytic " + fmt(an) + " fd " + fmt(fd));
                    }
                }
            }
            // Bias gradients ride along on the same pass.
            for (int r = 0; r < layer.out_dim && ok; ++r) {
                const double b0 = p.net.layers[l].bias(r);
                p.net.layers[l].bias(r) = b0 + h;
                const double up = loss_of(p.net, p.input, p.target);
                p.net.layers[l].bias(r) = b0 - h;
                const double dn = loss_of(p.net, p.input, p.target);
                p.net.layers[l].bias(r) = b0;
                const double fd = (up - dn) / (2.0 * h);
                const double an = grad.bias[l](r);
                const double scale = std::max(std::abs(an), std::abs(fd));
                if (scale >= 1e-6 && std::abs(an - fd) / scale > rel_tol) ok = false;
            }
        }
    }

    SuiteResult res;
    res.name = "gradient";
    res.passed = ok;
    res.detail = "50 nets, " + std::to_string(positions) +
                 " weight positions, max rel err " + fmt(worst) + " (tol 1e-4)";
    return res;
}

// --- decomposition suite -------------------------------------------------------

SuiteResult decomposition_suite(std::uint64_t seed, const LineSink& line) {
    DetRng rng(seed ^ 0xDECADEULL);
    double worst = 0.0;
    bool ok = true;

    for (int trial = 0; trial < 100 && ok; ++trial) {
        TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
        const int s = static_cast<int>(rng.uniform_index(5));
        const int a = static_cast<int>(rng.uniform_index(2));
        for (int n = 1; n <= 3; ++n) {
            const Decomposition d = decompose_td_error(mdp, n, s, a);
            const double gap = std::abs(d.total - (d.policy_term + d.fitting_term));
            worst = std::max(worst, gap);
            if (gap >= 1e-12) {
                ok = false;
                line("  identity violated: trial " + std::to_string(trial) + " n " +
                     std::to_string(n) + " gap " + fmt(gap));
            }
        }
        // With matched policies the inconsistency term must vanish exactly.
        TabularMdp same = mdp;
        same.behavior_policy = same.target_policy;
        const Decomposition d0 = decompose_td_error(same, 2, s, a);
        if (d0.policy_term != 0.0) {
            ok = false;
            line("  matched-policy term nonzero: " + fmt(d0.policy_term));
        }
        // Zero fitting error collapses the total onto the policy term.
        TabularMdp exact = mdp;
        exact.q_approx = exact.q_exact;
        exact.fitting_error = exact.q_approx - exact.q_exact;
        const Decomposition d1 = decompose_td_error(exact, 2, s, a);
        if (std::abs(d1.fitting_term) > 1e-13 ||
            std::abs(d1.total - d1.policy_term) > 1e-12)
            ok = false;
    }

    SuiteResult res;
    res.name = "decomposition";
    res.passed = ok;
    res.detail = "100 MDPs x n in {1,2,3}, max identity gap " + fmt(worst) + " (tol 1e-12)";
    return res;
}

// --- flops suite ---------------------------------------------------------------

// Forward pass that actually walks active connections and tallies every
// multiply and accumulate separately.
long counted_forward_ops(const Mlp& net, const Eigen::VectorXd& input) {
    long mults = 0, adds = 0;
    Eigen::VectorXd x = input;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const MaskedLinear& layer = net.layers[l];
        Eigen::VectorXd z = layer.bias;
        for (int r = 0; r < layer.out_dim; ++r) {
            bool first = true;
            double acc = 0.0;
            for (int c = 0; c < layer.in_dim; ++c) {
                if (layer.mask(r, c) == 0.0) continue;
                const double prod = layer.weights(r, c) * x(c);
                ++mults;
                if (first) {
                    acc = prod;
                    first = false;
                } else {
                    acc += prod;
                    ++adds;
                }
            }
            z(r) += acc;
        }
        x = (l + 1 < net.layers.size()) ? z.cwiseMax(0.0).eval() : z;
    }
    return mults + adds;
}

SuiteResult flops_suite(std::uint64_t seed, const LineSink& line) {
    DetRng rng(seed ^ 0xF109F109ULL);
    bool ok = true;

    for (int trial = 0; trial < 50 && ok; ++trial) {
        const int n_layers = 1 + static_cast<int>(rng.uniform_index(3));
        std::vector<int> dims;
        dims.push_back(1 + static_cast<int>(rng.uniform_index(12)));
        for (int l = 0; l < n_layers; ++l) dims.push_back(1 + static_cast<int>(rng.uniform_index(12)));
        std::vector<double> sparsity;
        for (int l = 0; l < n_layers; ++l) sparsity.push_back(rng.uniform(0.0, 0.95));
        Mlp net = init_network(dims, sparsity, HeadKind::Identity, rng);

        Eigen::VectorXd input(dims.front());
        for (int i = 0; i < input.size(); ++i) input(i) = rng.uniform(-1.0, 1.0);

        const long counted = counted_forward_ops(net, input);
        const long analytic = forward_flops(net);
        if (counted != analytic) {
            ok = false;
            line("  op count mismatch: counted " + std::to_string(counted) + " analytic " +
                 std::to_string(analytic));
        }
    }

    // The per-iteration formulas must reproduce the published coefficients.
    const double fa = 133.0, fc = 217.0, b = 256.0;
    const double td3 = training_flops_per_iter(Algorithm::Td3, fa, fc, 256, 2);
    const double sac = training_flops_per_iter(Algorithm::Sac, fa, fc, 256, 1);
    if (td3 != b * (2.5 * fa + 8.5 * fc)) {
        ok = false;
        line("  TD3 coefficient mismatch");
    }
    if (sac != b * (5.0 * fa + 10.0 * fc)) {
        ok = false;
        line("  SAC coefficient mismatch");
    }
    if (total_model_size(Algorithm::Td3, 10, 20) != 100 ||
        total_model_size(Algorithm::Sac, 10, 20) != 90) {
        ok = false;
        line("  total size mismatch");
    }

    SuiteResult res;
    res.name = "flops";
    res.passed = ok;
    res.detail = "50 instrumented nets exact; TD3 2.5/8.5 and SAC 5/10 coefficients exact";
    return res;
}

// --- conservation suite ----------------------------------------------------------

SuiteResult conservation_suite(std::uint64_t seed, bool inject_fault, const LineSink& line) {
    DetRng rng(seed ^ 0xC0115E17ULL);
    bool ok = true;
    long worst_trial = -1;

    for (long trial = 0; trial < 10000 && ok; ++trial) {
        const int in = 1 + static_cast<int>(rng.uniform_index(10));
        const int out = 1 + static_cast<int>(rng.uniform_index(10));
        const double s = rng.uniform(0.0, 0.95);
        Mlp net = init_network({in, out}, {s}, HeadKind::Identity, rng);
        MaskedLinear& layer = net.layers[0];
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c)
                layer.weights(r, c) = rng.uniform(-1.0, 1.0);
        layer.project();

        Eigen::MatrixXd grad(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) grad(r, c) = rng.uniform(-1.0, 1.0);

        const long active_before = layer.active_count();
        const double fraction = rng.uniform(0.0, 1.0);
        const GrowMode mode = rng.uniform_index(2) == 0 ? GrowMode::Gradient : GrowMode::Random;
        const EvolutionStats stats = evolve_topology(layer, grad, fraction, mode, rng);

        if (inject_fault && trial == 137) {
            // Test hook: flip one active mask bit without zeroing its weight.
            for (int r = 0; r < out && trial == 137; ++r)
                for (int c = 0; c < in; ++c)
                    if (layer.mask(r, c) == 1.0 && layer.weights(r, c) != 0.0) {
                        layer.mask(r, c) = 0.0;
                        r = out;
                        break;
                    }
        }

        if (layer.active_count() != active_before) {
            ok = false;
            worst_trial = trial;
            line("  active count changed at trial " + std::to_string(trial));
        }
        std::set<long> dropped(stats.dropped.begin(), stats.dropped.end());
        for (long g : stats.grown)
            if (dropped.count(g)) {
                ok = false;
                worst_trial = trial;
                line("  position both dropped and grown at trial " + std::to_string(trial));
            }
        for (int r = 0; r < out && ok; ++r)
            for (int c = 0; c < in; ++c)
                if (layer.mask(r, c) == 0.0 && layer.weights(r, c) != 0.0) {
                    ok = false;
                    worst_trial = trial;
                    line("  nonzero weight at masked position, trial " + std::to_string(trial));
                    break;
                }
    }

    SuiteResult res;
    res.name = "conservation";
    res.passed = ok;
    res.detail = ok ? "10000 evolution calls conserve counts, disjoint drop/grow, exact masking"
                    : "violation at trial " + std::to_string(worst_trial);
    return res;
}

}  // namespace

std::vector<SuiteResult> run_verify(const std::string& suite, std::uint64_t seed,
                                    bool inject_fault, const LineSink& line) {
    const LineSink sink = line ? line : [](const std::string&) {};
    const bool all = suite.empty() || suite == "all";
    std::vector<SuiteResult> results;

    const auto want = [&](const char* name) { return all || suite == name; };
    if (want("gradient")) results.push_back(gradient_suite(seed, sink));
    if (want("decomposition")) results.push_back(decomposition_suite(seed, sink));
    if (want("flops")) results.push_back(flops_suite(seed, sink));
    if (want("conservation")) results.push_back(conservation_suite(seed, inject_fault, sink));
    if (results.empty())
        throw std::invalid_argument(
            "unknown suite '" + suite +
            "'; expected gradient|decomposition|flops|conservation|all");

    for (const auto& r : results)
        sink(std::string(r.passed ? "[PASS] " : "[FAIL] ") + r.name + ": " + r.detail);
    return results;
}

bool all_passed(const std::vector<SuiteResult>& results) {
    for (const auto& r : results)
        if (!r.passed) return false;
    return true;
}

}  // namespace rlx2
