#include <doctest.h>

#include <cmath>

#include "replay.hpp"

using namespace rlx2;
using Eigen::VectorXd;

namespace {

Transition make_tr(long episode, long step, double reward, bool done = false) {
    Transition t;
    t.state = VectorXd::Constant(2, static_cast<double>(episode * 100 + step));
    t.action = VectorXd::Constant(1, 0.5);
    t.reward = reward;
    t.next_state = VectorXd::Constant(2, static_cast<double>(episode * 100 + step + 1));
    t.done = done;
    t.episode_id = episode;
    t.step_in_episode = step;
    return t;
}

DynamicBuffer small_buffer(long min_cap = 2, long max_cap = 10) {
    return DynamicBuffer(min_cap, max_cap, 0.2, 0.2, 5, 2);
}

}  // namespace

TEST_CASE("push keeps insertion order and ring-replaces at capacity") {
    SUBCASE("below capacity the size grows") {
        DynamicBuffer buf = small_buffer();
        buf.push(make_tr(0, 0, 1.0));
        CHECK(buf.size() == 1);
        buf.push(make_tr(0, 1, 2.0));
        CHECK(buf.size() == 2);
    }
    SUBCASE("at capacity the oldest is replaced") {
        DynamicBuffer buf = small_buffer(2, 3);
        for (long i = 0; i < 3; ++i) buf.push(make_tr(0, i, static_cast<double>(i)));
        buf.push(make_tr(0, 3, 3.0));
        CHECK(buf.size() == 3);
        CHECK(buf.at(0).reward == 1.0);  // reward-0 transition evicted
        CHECK(buf.at(2).reward == 3.0);
    }
    SUBCASE("min == max behaves as a fixed ring") {
        DynamicBuffer buf(4, 4, 0.2, 0.2, 5, 2);
        for (long i = 0; i < 10; ++i) buf.push(make_tr(0, i, static_cast<double>(i)));
        CHECK(buf.size() == 4);
        CHECK(buf.at(0).reward == 6.0);
        const AdjustRecord rec = buf.adjust_capacity(
            [](const VectorXd&) { return VectorXd::Constant(1, 99.0); }, 5);
        CHECK_FALSE(rec.measured);
        CHECK(rec.dropped == 0);
    }
}

TEST_CASE("n-step segments respect episode structure") {
    SUBCASE("n=1 segments are plain transitions") {
        DynamicBuffer buf = small_buffer();
        buf.push(make_tr(0, 0, 7.0));
        const NStepSegment seg = buf.segment_at(0, 1);
        CHECK(seg.effective_n() == 1);
        CHECK(seg.rewards[0] == 7.0);
        CHECK_FALSE(seg.terminal);
        CHECK(seg.bootstrap_state() == buf.at(0).next_state);
    }
    SUBCASE("termination truncates and marks the segment") {
        DynamicBuffer buf = small_buffer();
        buf.push(make_tr(0, 0, 1.0));
        buf.push(make_tr(0, 1, 2.0, true));
        const NStepSegment seg = buf.segment_at(0, 3);
        CHECK(seg.effective_n() == 2);
        CHECK(seg.terminal);
        CHECK(seg.rewards == std::vector<double>{1.0, 2.0});
    }
    SUBCASE("the buffer frontier truncates without terminal") {
        DynamicBuffer buf(2, 64, 0.2, 0.2, 5, 2);
        for (long i = 0; i < 10; ++i) buf.push(make_tr(0, i, static_cast<double>(i)));
        for (long start = 0; start < 10; ++start) {
            const NStepSegment seg = buf.segment_at(start, 3);
            const int expect = static_cast<int>(std::min<long>(3, 10 - start));
            CHECK(seg.effective_n() == expect);
            CHECK_FALSE(seg.terminal);
            for (int k = 0; k < seg.effective_n(); ++k)
                CHECK(seg.rewards[static_cast<size_t>(k)] == static_cast<double>(start + k));
        }
    }
    SUBCASE("segments never cross episode boundaries") {
        DynamicBuffer buf(2, 64, 0.2, 0.2, 5, 2);
        // Episodes of lengths 3, 1, 4 stored back to back.
        for (long i = 0; i < 3; ++i) buf.push(make_tr(0, i, 0.0, i == 2));
        buf.push(make_tr(1, 0, 0.0, true));
        for (long i = 0; i < 4; ++i) buf.push(make_tr(2, i, 0.0, i == 3));
        for (long start = 0; start < buf.size(); ++start)
            for (int n = 1; n <= 5; ++n) {
                const NStepSegment seg = buf.segment_at(start, n);
                const long ep = buf.at(start).episode_id;
                for (int k = 0; k < seg.effective_n(); ++k)
                    CHECK(buf.at(start + k).episode_id == ep);
            }
    }
    SUBCASE("sampling draws valid segments with replacement") {
        DynamicBuffer buf = small_buffer(2, 64);
        for (long i = 0; i < 6; ++i) buf.push(make_tr(0, i, 1.0));
        DetRng rng(4);
        const auto batch = buf.sample_nstep(32, 3, rng);
        CHECK(batch.size() == 32);
        for (const auto& seg : batch) CHECK(seg.effective_n() >= 1);
        DynamicBuffer empty = small_buffer();
        CHECK_THROWS_AS(empty.sample_nstep(1, 1, rng), std::runtime_error);
    }
}

TEST_CASE("policy distance averages Euclidean gaps over the oldest batch") {
    DynamicBuffer buf = small_buffer(2, 64);

    SUBCASE("a policy replaying stored actions scores zero") {
        for (long i = 0; i < 4; ++i) buf.push(make_tr(0, i, 0.0));
        const double d =
            buf.policy_distance([](const VectorXd&) { return VectorXd::Constant(1, 0.5); }, 4);
        CHECK(d == 0.0);
    }
    SUBCASE("single sample is the plain norm") {
        Transition t = make_tr(0, 0, 0.0);
        t.action = VectorXd::Zero(2);
        buf.push(t);
        const double d = buf.policy_distance(
            [](const VectorXd&) {
                VectorXd a(2);
                a << 1.0, 0.0;
                return a;
            },
            1);
        CHECK(d == 1.0);
    }
    SUBCASE("two samples average their norms") {
        Transition t0 = make_tr(0, 0, 0.0);
        t0.action = VectorXd::Zero(1);
        Transition t1 = make_tr(0, 1, 0.0);
        t1.action = VectorXd::Constant(1, -2.0);
        buf.push(t0);
        buf.push(t1);
        // Policy outputs 1: gaps are 1 and 3.
        const double d = buf.policy_distance(
            [](const VectorXd&) { return VectorXd::Constant(1, 1.0); }, 2);
        CHECK(d == 2.0);
    }
    SUBCASE("insufficient data throws") {
        CHECK_THROWS_AS(
            buf.policy_distance([](const VectorXd&) { return VectorXd::Zero(1); }, 1),
            std::runtime_error);
    }
}

TEST_CASE("adjust_capacity drops the oldest block only when triggered") {
    const PolicyFn far_policy = [](const VectorXd&) { return VectorXd::Constant(1, 99.0); };
    const PolicyFn near_policy = [](const VectorXd&) { return VectorXd::Constant(1, 0.5); };

    SUBCASE("no drop at or below the minimum") {
        DynamicBuffer buf(5, 100, 0.2, 0.2, 10, 2);
        for (long i = 0; i < 5; ++i) buf.push(make_tr(0, i, 0.0));
        const AdjustRecord rec = buf.adjust_capacity(far_policy, 10);
        CHECK_FALSE(rec.measured);
        CHECK(rec.dropped == 0);
        CHECK(buf.size() == 5);
    }
    SUBCASE("inside the band with a distant policy, floor(ratio*size) go") {
        DynamicBuffer buf(10, 5000, 0.2, 0.2, 10, 8);
        for (long i = 0; i < 1000; ++i) buf.push(make_tr(0, i, static_cast<double>(i)));
        const AdjustRecord rec = buf.adjust_capacity(far_policy, 20);
        CHECK(rec.measured);
        CHECK(rec.distance > 0.2);
        CHECK(rec.dropped == 200);
        CHECK(buf.size() == 800);
        // Exactly the oldest 200 disappeared.
        CHECK(buf.at(0).reward == 200.0);
    }
    SUBCASE("distance at or below the threshold leaves the buffer alone") {
        DynamicBuffer buf(2, 5000, 0.2, 0.2, 10, 2);
        for (long i = 0; i < 100; ++i) buf.push(make_tr(0, i, 0.0));
        const AdjustRecord rec = buf.adjust_capacity(near_policy, 10);
        CHECK(rec.measured);
        CHECK(rec.distance == 0.0);
        CHECK(rec.dropped == 0);
        CHECK(buf.size() == 100);
    }
    SUBCASE("a drop never goes below the minimum capacity") {
        DynamicBuffer buf(1000, 5000, 0.2, 0.2, 10, 2);
        for (long i = 0; i < 1050; ++i) buf.push(make_tr(0, i, 0.0));
        const AdjustRecord rec = buf.adjust_capacity(far_policy, 10);
        CHECK(rec.dropped == 50);  // floor(0.2*1050)=210 capped by the floor
        CHECK(buf.size() == 1000);
    }
    SUBCASE("at max capacity the ring rule owns eviction") {
        DynamicBuffer buf(2, 50, 0.2, 0.2, 10, 2);
        for (long i = 0; i < 80; ++i) buf.push(make_tr(0, i, 0.0));
        CHECK(buf.size() == 50);
        const AdjustRecord rec = buf.adjust_capacity(far_policy, 10);
        CHECK_FALSE(rec.measured);
        CHECK(buf.size() == 50);
    }
    SUBCASE("off-interval calls are rejected") {
        DynamicBuffer buf(2, 50, 0.2, 0.2, 10, 2);
        buf.push(make_tr(0, 0, 0.0));
        CHECK_THROWS_AS(buf.adjust_capacity(far_policy, 7), std::logic_error);
    }
}
