#ifndef RLX2_SPARSITY_HPP
#define RLX2_SPARSITY_HPP

#include <utility>
#include <vector>

#include "net.hpp"
#include "rng.hpp"

namespace rlx2 {

enum class GrowMode { Gradient, Random, Frozen };

// Topology-update cadence and annealed update fraction.
struct EvolutionSchedule {
    double initial_fraction = 0.5;   // fraction of active weights considered at t=0
    long total_steps = 0;            // anneal horizon
    long mask_update_interval = 10000;
    GrowMode grow_mode = GrowMode::Gradient;
};

// Cosine anneal of the update fraction: f(t) = f0/2 * (1 + cos(pi*t/T)).
double anneal_fraction(long t, const EvolutionSchedule& sched);

// Per-layer sparsity allocation for a global target. Layers whose implied
// density exceeds 1 are clamped dense and the scale constant is re-solved
// over the remainder.
struct SparsityAllocation {
    double global_sparsity = 0.0;
    std::vector<double> per_layer;  // sparsity of each layer
    double scale_constant = 0.0;
};

SparsityAllocation er_allocate(double global_sparsity,
                               const std::vector<std::pair<int, int>>& layer_dims);

struct EvolutionStats {
    long budget = 0;   // requested drop/grow count
    long swapped = 0;  // connections actually moved
    std::vector<long> dropped;  // row-major flat indices
    std::vector<long> grown;
};

// One drop/grow step on a layer. Drops the smallest-magnitude active weights
// and grows the same number of inactive positions: by largest dense-gradient
// magnitude (Gradient), uniformly at random (Random), or not at all (Frozen).
// Positions dropped in this call are excluded from growth. Ties break by
// lowest row-major flat index. The active count never changes.
EvolutionStats evolve_topology(MaskedLinear& layer, const Eigen::MatrixXd& dense_grad,
                               double fraction, GrowMode mode, DetRng& rng);

}  // namespace rlx2

#endif
