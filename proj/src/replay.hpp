#ifndef RLX2_REPLAY_HPP
#define RLX2_REPLAY_HPP

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <vector>

#include "rng.hpp"

namespace rlx2 {

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool done = false;  // genuine termination only, not time-limit truncation
    long episode_id = 0;
    long step_in_episode = 0;
};

// An n-step slice of experience. next_states holds s_{t+1}..s_{t+m}; the last
// entry is the bootstrap state.
struct NStepSegment {
    Eigen::VectorXd state;   // s_t
    Eigen::VectorXd action;  // a_t
    std::vector<double> rewards;
    std::vector<Eigen::VectorXd> next_states;
    bool terminal = false;  // segment ended by done

    int effective_n() const { return static_cast<int>(rewards.size()); }
    const Eigen::VectorXd& bootstrap_state() const { return next_states.back(); }
};

// Deterministic policy output used for the distance measure.
using PolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct AdjustRecord {
    bool measured = false;   // distance was computed this check
    double distance = 0.0;   // valid when measured
    long dropped = 0;        // transitions removed this check
    long size_after = 0;
};

// Insertion-ordered transition store with policy-distance-driven capacity
// control. Oldest-first ordering is preserved under all mutations.
class DynamicBuffer {
public:
    DynamicBuffer(long min_capacity, long max_capacity, double distance_threshold,
                  double shrink_ratio, long check_interval, long distance_batch);

    // Append as newest; at max capacity the single oldest entry is evicted.
    void push(Transition t);

    // batch_size segments sampled uniformly with replacement. Each segment
    // walks forward inside its episode and truncates at done or at the newest
    // stored transition of the episode.
    std::vector<NStepSegment> sample_nstep(long batch_size, int n, DetRng& rng) const;

    // Segment starting at storage index idx (exposed for exhaustive tests).
    NStepSegment segment_at(long idx, int n) const;

    // Mean Euclidean gap between the policy's action and the stored action
    // over the `batch` oldest transitions.
    double policy_distance(const PolicyFn& policy, long batch) const;

    // Periodic capacity check: inside (min,max) and distance above threshold,
    // drop floor(shrink_ratio * size) oldest transitions, never going below
    // min capacity.
    AdjustRecord adjust_capacity(const PolicyFn& policy, long global_step);

    long size() const { return static_cast<long>(storage_.size()); }
    long total_dropped() const { return total_dropped_; }
    long min_capacity() const { return min_capacity_; }
    long max_capacity() const { return max_capacity_; }
    long check_interval() const { return check_interval_; }
    long distance_batch() const { return distance_batch_; }
    const Transition& at(long i) const { return storage_[static_cast<size_t>(i)]; }

private:
    std::deque<Transition> storage_;
    long min_capacity_;
    long max_capacity_;
    double distance_threshold_;
    double shrink_ratio_;
    long check_interval_;
    long distance_batch_;
    long total_dropped_ = 0;
};

}  // namespace rlx2

#endif
