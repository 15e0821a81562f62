#include "replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlx2 {

DynamicBuffer::DynamicBuffer(long min_capacity, long max_capacity, double distance_threshold,
                             double shrink_ratio, long check_interval, long distance_batch)
    : min_capacity_(min_capacity),
      max_capacity_(max_capacity),
      distance_threshold_(distance_threshold),
      shrink_ratio_(shrink_ratio),
      check_interval_(check_interval),
      distance_batch_(distance_batch) {
    if (min_capacity < 0 || max_capacity < min_capacity)
        throw std::invalid_argument("DynamicBuffer: need 0 <= min_capacity <= max_capacity");
    if (shrink_ratio <= 0.0 || shrink_ratio >= 1.0)
        throw std::invalid_argument("DynamicBuffer: shrink_ratio must be in (0,1)");
    if (check_interval <= 0 || distance_batch <= 0)
        throw std::invalid_argument("DynamicBuffer: intervals must be positive");
}

void DynamicBuffer::push(Transition t) {
    if (size() >= max_capacity_) storage_.pop_front();
    storage_.push_back(std::move(t));
}

NStepSegment DynamicBuffer::segment_at(long idx, int n) const {
    const Transition& first = storage_[static_cast<size_t>(idx)];
    NStepSegment seg;
    seg.state = first.state;
    seg.action = first.action;
    seg.rewards.reserve(static_cast<size_t>(n));
    seg.next_states.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const long j = idx + k;
        if (j >= size()) break;
        const Transition& t = storage_[static_cast<size_t>(j)];
        if (t.episode_id != first.episode_id ||
            t.step_in_episode != first.step_in_episode + k)
            break;
        seg.rewards.push_back(t.reward);
        seg.next_states.push_back(t.next_state);
        if (t.done) {
            seg.terminal = true;
            break;
        }
    }
    return seg;
}

std::vector<NStepSegment> DynamicBuffer::sample_nstep(long batch_size, int n,
                                                      DetRng& rng) const {
    if (storage_.empty()) throw std::runtime_error("sample_nstep: empty buffer");
    if (n < 1) throw std::invalid_argument("sample_nstep: n must be >= 1");
    std::vector<NStepSegment> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    for (long i = 0; i < batch_size; ++i) {
        const long idx = static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(size())));
        batch.push_back(segment_at(idx, n));
    }
    return batch;
}

double DynamicBuffer::policy_distance(const PolicyFn& policy, long batch) const {
    if (batch <= 0 || batch > size())
        throw std::runtime_error("policy_distance: insufficient stored transitions");
    double total = 0.0;
    for (long i = 0; i < batch; ++i) {
        const Transition& t = storage_[static_cast<size_t>(i)];
        total += (policy(t.state) - t.action).norm();
    }
    return total / static_cast<double>(batch);
}

AdjustRecord DynamicBuffer::adjust_capacity(const PolicyFn& policy, long global_step) {
    if (global_step % check_interval_ != 0)
        throw std::logic_error("adjust_capacity: called off the check interval");
    AdjustRecord rec;
    rec.size_after = size();
    if (size() <= min_capacity_ || size() >= max_capacity_) return rec;

    rec.measured = true;
    rec.distance = policy_distance(policy, std::min(distance_batch_, size()));
    if (rec.distance > distance_threshold_) {
        long drop = static_cast<long>(std::floor(shrink_ratio_ * static_cast<double>(size())));
        drop = std::min(drop, size() - min_capacity_);
        storage_.erase(storage_.begin(), storage_.begin() + drop);
        total_dropped_ += drop;
        rec.dropped = drop;
    }
    rec.size_after = size();
    return rec;
}

}  // namespace rlx2
