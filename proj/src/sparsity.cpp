#include "sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlx2 {

double anneal_fraction(long t, const EvolutionSchedule& sched) {
    if (t < 0 || t > sched.total_steps)
        throw std::invalid_argument("anneal_fraction: step outside [0, total_steps]");
    const double phase = M_PI * static_cast<double>(t) / static_cast<double>(sched.total_steps);
    return 0.5 * sched.initial_fraction * (1.0 + std::cos(phase));
}

SparsityAllocation er_allocate(double global_sparsity,
                               const std::vector<std::pair<int, int>>& layer_dims) {
    if (global_sparsity < 0.0 || global_sparsity >= 1.0)
        throw std::invalid_argument("er_allocate: global sparsity must be in [0,1)");
    if (layer_dims.empty()) throw std::invalid_argument("er_allocate: no layers");

    const size_t L = layer_dims.size();
    std::vector<double> density(L, 1.0);
    std::vector<bool> clamped(L, false);

    // Solve (1-S) * sum N_l = sum density_l * N_l with density_l = k*(I+O)/(I*O),
    // clamping any layer that would exceed density 1 and re-solving.
    double k = 0.0;
    while (true) {
        double total_n = 0.0;    // all weight positions
        double clamped_n = 0.0;  // positions already granted to dense-clamped layers
        double coeff = 0.0;      // sum of (I+O) over unclamped layers
        bool any_free = false;
        for (size_t l = 0; l < L; ++l) {
            const double n = static_cast<double>(layer_dims[l].first) * layer_dims[l].second;
            total_n += n;
            if (clamped[l]) {
                clamped_n += n;
            } else {
                coeff += layer_dims[l].first + layer_dims[l].second;
                any_free = true;
            }
        }
        if (!any_free) break;
        const double target = (1.0 - global_sparsity) * total_n - clamped_n;
        if (target <= 0.0) {
            // Nothing left to distribute; remaining layers become empty.
            for (size_t l = 0; l < L; ++l)
                if (!clamped[l]) density[l] = 0.0;
            k = 0.0;
            break;
        }
        k = target / coeff;
        bool overflow = false;
        for (size_t l = 0; l < L; ++l) {
            if (clamped[l]) continue;
            const double n = static_cast<double>(layer_dims[l].first) * layer_dims[l].second;
            const double d = k * (layer_dims[l].first + layer_dims[l].second) / n;
            if (d > 1.0) {
                clamped[l] = true;
                density[l] = 1.0;
                overflow = true;
            } else {
                density[l] = d;
            }
        }
        if (!overflow) break;
    }

    SparsityAllocation alloc;
    alloc.global_sparsity = global_sparsity;
    alloc.scale_constant = k;
    alloc.per_layer.resize(L);
    for (size_t l = 0; l < L; ++l) alloc.per_layer[l] = 1.0 - density[l];
    return alloc;
}

EvolutionStats evolve_topology(MaskedLinear& layer, const Eigen::MatrixXd& dense_grad,
                               double fraction, GrowMode mode, DetRng& rng) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("evolve_topology: fraction outside [0,1]");
    if (dense_grad.rows() != layer.out_dim || dense_grad.cols() != layer.in_dim)
        throw std::invalid_argument("evolve_topology: gradient shape mismatch");

    EvolutionStats stats;
    if (mode == GrowMode::Frozen) return stats;

    const double n = static_cast<double>(layer.weight_count());
    // Exact-real floor intent: nudge past representation error so that
    // products like 0.5 * (1/3) * 6 land on their true integer value.
    const long k = static_cast<long>(
        std::floor(fraction * (1.0 - layer.target_sparsity) * n + 1e-9));
    stats.budget = k;
    if (k <= 0) return stats;

    // Flat indices are row-major; ties in both selections break toward the
    // lowest index for determinism.
    std::vector<long> active, inactive;
    active.reserve(layer.weight_count());
    for (int r = 0; r < layer.out_dim; ++r)
        for (int c = 0; c < layer.in_dim; ++c)
            (layer.mask(r, c) != 0.0 ? active : inactive).push_back(
                static_cast<long>(r) * layer.in_dim + c);

    const long g = std::min<long>(k, static_cast<long>(inactive.size()));
    stats.swapped = g;
    if (g == 0) return stats;

    const auto value_at = [&](const Eigen::MatrixXd& m, long flat) {
        return m(flat / layer.in_dim, flat % layer.in_dim);
    };

    // Drop the g active positions of smallest weight magnitude.
    std::partial_sort(active.begin(), active.begin() + g, active.end(),
                      [&](long a, long b) {
                          const double wa = std::abs(value_at(layer.weights, a));
                          const double wb = std::abs(value_at(layer.weights, b));
                          return wa != wb ? wa < wb : a < b;
                      });

    // Grow g positions that were inactive before this call.
    if (mode == GrowMode::Gradient) {
        std::partial_sort(inactive.begin(), inactive.begin() + g, inactive.end(),
                          [&](long a, long b) {
                              const double ga = std::abs(value_at(dense_grad, a));
                              const double gb = std::abs(value_at(dense_grad, b));
                              return ga != gb ? ga > gb : a < b;
                          });
    } else {
        for (long i = 0; i < g; ++i) {
            const long j = i + static_cast<long>(
                rng.uniform_index(static_cast<std::uint64_t>(inactive.size() - i)));
            std::swap(inactive[i], inactive[j]);
        }
    }

    stats.dropped.assign(active.begin(), active.begin() + g);
    stats.grown.assign(inactive.begin(), inactive.begin() + g);
    for (long d : stats.dropped) {
        layer.mask(d / layer.in_dim, d % layer.in_dim) = 0.0;
        layer.weights(d / layer.in_dim, d % layer.in_dim) = 0.0;
    }
    for (long w : stats.grown) {
        layer.mask(w / layer.in_dim, w % layer.in_dim) = 1.0;
        layer.weights(w / layer.in_dim, w % layer.in_dim) = 0.0;
    }
    return stats;
}

}  // namespace rlx2
