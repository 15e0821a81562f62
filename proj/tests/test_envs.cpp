#include <doctest.h>

#include <cmath>

#include "envs.hpp"

using namespace rlx2;
using Eigen::VectorXd;

namespace {

VectorXd act1(double u) { return VectorXd::Constant(1, u); }

// Rod pendulum energy with theta measured from upright: KE + PE.
double pendulum_energy(double theta, double theta_dot) {
    return theta_dot * theta_dot / 6.0 + 5.0 * std::cos(theta);
}

}  // namespace

TEST_CASE("make_env registry") {
    SUBCASE("pendulum spec") {
        auto env = make_env("pendulum", 1);
        CHECK(env->spec().state_dim == 3);
        CHECK(env->spec().action_dim == 1);
        CHECK(env->spec().action_low(0) == -2.0);
        CHECK(env->spec().action_high(0) == 2.0);
        CHECK(env->spec().max_episode_len == 200);
    }
    SUBCASE("pointmass spec") {
        auto env = make_env("pointmass", 1);
        CHECK(env->spec().state_dim == 4);
        CHECK(env->spec().action_dim == 2);
        CHECK(env->spec().action_low(0) == -1.0);
        CHECK(env->spec().action_high(1) == 1.0);
        CHECK(env->spec().max_episode_len == 200);
    }
    SUBCASE("unknown names list the registry") {
        try {
            make_env("walker", 1);
            FAIL("expected invalid_argument");
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            CHECK(msg.find("pendulum") != std::string::npos);
            CHECK(msg.find("pointmass") != std::string::npos);
        }
    }
}

TEST_CASE("pendulum dynamics") {
    auto env = make_env("pendulum", 7);

    SUBCASE("reset samples the documented ranges") {
        for (int i = 0; i < 200; ++i) {
            const VectorXd obs = env->reset();
            CHECK(obs.size() == 3);
            CHECK(std::abs(obs(0)) <= 1.0);                  // cos
            CHECK(std::abs(obs(1)) <= 1.0);                  // sin
            CHECK(std::abs(obs(2)) <= 1.0);                  // initial speed U(-1,1)
        }
    }

    SUBCASE("upright equilibrium is a fixed point with zero reward") {
        env->set_state(VectorXd::Zero(2));
        const StepResult r = env->step(act1(0.0));
        CHECK(r.reward == 0.0);
        CHECK(r.observation(0) == 1.0);
        CHECK(r.observation(1) == 0.0);
        CHECK(r.observation(2) == 0.0);
        CHECK_FALSE(r.done);
    }

    SUBCASE("hanging down costs pi^2") {
        VectorXd s(2);
        s << M_PI, 0.0;
        env->set_state(s);
        const StepResult r = env->step(act1(0.0));
        CHECK(r.reward == doctest::Approx(-M_PI * M_PI).epsilon(1e-12));
    }

    SUBCASE("reward stays within the analytic bounds") {
        const double lo = -(M_PI * M_PI + 0.1 * 64.0 + 0.001 * 4.0);
        DetRng rng(5);
        env->reset();
        for (int i = 0; i < 500; ++i) {
            const StepResult r = env->step(act1(rng.uniform(-2.0, 2.0)));
            CHECK(r.reward <= 0.0);
            CHECK(r.reward >= lo);
            if (r.truncated) env->reset();
        }
    }

    SUBCASE("episodes truncate at 200 and never terminate") {
        env->reset();
        int steps = 0;
        while (true) {
            const StepResult r = env->step(act1(0.0));
            ++steps;
            CHECK_FALSE(r.done);
            if (r.truncated) break;
        }
        CHECK(steps == 200);
    }

    SUBCASE("undriven motion shows no secular energy drift over an episode") {
        // The velocity-first Euler scheme keeps energy wobbling inside a
        // bounded band with no trend; near-bottom oscillation stays within
        // 1% pointwise, and a large swing still shows <1% drift between the
        // first and last 50-step energy means.
        const auto energies = [&](double theta0) {
            VectorXd s(2);
            s << theta0, 0.0;
            env->set_state(s);
            std::vector<double> es = {pendulum_energy(theta0, 0.0)};
            double theta = theta0;
            for (int i = 0; i < 200; ++i) {
                const StepResult r = env->step(act1(0.0));
                theta = std::atan2(r.observation(1), r.observation(0));
                es.push_back(pendulum_energy(theta, r.observation(2)));
            }
            return es;
        };

        const std::vector<double> gentle = energies(3.0);
        for (double e : gentle) CHECK(std::abs(e - gentle[0]) < 0.01 * std::abs(gentle[0]));

        const std::vector<double> swing = energies(2.0);
        double head = 0.0, tail = 0.0;
        for (int i = 0; i < 50; ++i) {
            head += swing[static_cast<size_t>(i)];
            tail += swing[swing.size() - 50 + static_cast<size_t>(i)];
        }
        CHECK(std::abs(tail - head) / 50.0 < 0.01 * std::abs(swing[0]));
    }
}

TEST_CASE("pointmass dynamics") {
    auto env = make_env("pointmass", 11);

    SUBCASE("reset distribution and zero velocity") {
        for (int i = 0; i < 100; ++i) {
            const VectorXd obs = env->reset();
            CHECK(std::abs(obs(0)) <= 1.0);
            CHECK(std::abs(obs(1)) <= 1.0);
            CHECK(obs(2) == 0.0);
            CHECK(obs(3) == 0.0);
        }
    }

    SUBCASE("sitting on the goal with zero action terminates at zero reward") {
        env->set_state(VectorXd::Zero(4));
        const StepResult r = env->step(VectorXd::Zero(2));
        CHECK(r.reward == 0.0);
        CHECK(r.done);
    }

    SUBCASE("acceleration integrates velocity before position") {
        VectorXd s(4);
        s << 5.0, 0.0, 0.0, 0.0;
        env->set_state(s);
        VectorXd a(2);
        a << 1.0, 0.0;
        const StepResult r = env->step(a);
        // dt = 0.05: v = 0.05, p = 5 + 0.05*0.05.
        CHECK(r.observation(2) == doctest::Approx(0.05).epsilon(1e-15));
        CHECK(r.observation(0) == doctest::Approx(5.0025).epsilon(1e-15));
        CHECK(r.reward == doctest::Approx(-5.0 - 0.01).epsilon(1e-12));
    }
}

TEST_CASE("seed and action sequence fully determine trajectories") {
    for (const char* name : {"pendulum", "pointmass"}) {
        auto a = make_env(name, 123);
        auto b = make_env(name, 123);
        DetRng ra(9), rb(9);
        CHECK(a->reset() == b->reset());
        for (int i = 0; i < 300; ++i) {
            VectorXd ua(a->spec().action_dim), ub(b->spec().action_dim);
            for (int d = 0; d < ua.size(); ++d) ua(d) = ra.uniform(-1.0, 1.0);
            for (int d = 0; d < ub.size(); ++d) ub(d) = rb.uniform(-1.0, 1.0);
            const StepResult sa = a->step(ua);
            const StepResult sb = b->step(ub);
            CHECK(sa.observation == sb.observation);
            CHECK(sa.reward == sb.reward);
            CHECK(sa.done == sb.done);
            if (sa.done || sa.truncated) {
                a->reset();
                b->reset();
            }
        }
    }
}
