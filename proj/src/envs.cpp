#include "envs.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlx2 {

namespace {

double wrap_angle(double theta) {
    // Into [-pi, pi).
    double w = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (w < 0.0) w += 2.0 * M_PI;
    return w - M_PI;
}

// Torque-limited rod pendulum, swing-up task. State (theta, theta_dot) with
// theta = 0 upright. Semi-implicit Euler: velocity first, then position.
class PendulumEnv final : public Env {
public:
    explicit PendulumEnv(std::uint64_t seed) : rng_(seed) {
        spec_.state_dim = 3;
        spec_.action_dim = 1;
        spec_.action_low = Eigen::VectorXd::Constant(1, -kMaxTorque);
        spec_.action_high = Eigen::VectorXd::Constant(1, kMaxTorque);
        spec_.max_episode_len = 200;
    }

    const EnvSpec& spec() const override { return spec_; }

    Eigen::VectorXd reset() override {
        theta_ = rng_.uniform(-M_PI, M_PI);
        theta_dot_ = rng_.uniform(-1.0, 1.0);
        steps_ = 0;
        return observe();
    }

    void set_state(const Eigen::VectorXd& internal_state) override {
        theta_ = internal_state(0);
        theta_dot_ = internal_state(1);
        steps_ = 0;
    }

    StepResult step(const Eigen::VectorXd& action) override {
        const double u = std::clamp(action(0), -kMaxTorque, kMaxTorque);
        const double th = wrap_angle(theta_);
        const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;

        const double accel = 3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) +
                             3.0 * u / (kMass * kLength * kLength);
        theta_dot_ = std::clamp(theta_dot_ + accel * kDt, -kMaxSpeed, kMaxSpeed);
        theta_ += theta_dot_ * kDt;
        steps_ += 1;

        StepResult out;
        out.observation = observe();
        out.reward = -cost;
        out.done = false;
        out.truncated = steps_ >= spec_.max_episode_len;
        return out;
    }

private:
    Eigen::VectorXd observe() const {
        Eigen::VectorXd obs(3);
        obs << std::cos(theta_), std::sin(theta_), theta_dot_;
        return obs;
    }

    static constexpr double kGravity = 10.0;
    static constexpr double kMass = 1.0;
    static constexpr double kLength = 1.0;
    static constexpr double kDt = 0.05;
    static constexpr double kMaxTorque = 2.0;
    static constexpr double kMaxSpeed = 8.0;

    EnvSpec spec_;
    DetRng rng_;
    double theta_ = 0.0;
    double theta_dot_ = 0.0;
    int steps_ = 0;
};

// 2-D double integrator driving to the origin. Observation
// (px, py, vx, vy); positions clamp to [-10, 10], velocities to [-4, 4].
class PointMassEnv final : public Env {
public:
    explicit PointMassEnv(std::uint64_t seed) : rng_(seed) {
        spec_.state_dim = 4;
        spec_.action_dim = 2;
        spec_.action_low = Eigen::VectorXd::Constant(2, -1.0);
        spec_.action_high = Eigen::VectorXd::Constant(2, 1.0);
        spec_.max_episode_len = 200;
    }

    const EnvSpec& spec() const override { return spec_; }

    Eigen::VectorXd reset() override {
        pos_ << rng_.uniform(-1.0, 1.0), rng_.uniform(-1.0, 1.0);
        vel_.setZero();
        steps_ = 0;
        return observe();
    }

    void set_state(const Eigen::VectorXd& internal_state) override {
        pos_ << internal_state(0), internal_state(1);
        vel_ << internal_state(2), internal_state(3);
        steps_ = 0;
    }

    StepResult step(const Eigen::VectorXd& action) override {
        Eigen::Vector2d a = action.cwiseMax(-1.0).cwiseMin(1.0);
        const double dist = pos_.norm();
        const double reward = -dist - 0.01 * a.squaredNorm();

        vel_ = (vel_ + kDt * a).cwiseMax(-kMaxSpeed).cwiseMin(kMaxSpeed);
        pos_ = (pos_ + kDt * vel_).cwiseMax(-kMaxPos).cwiseMin(kMaxPos);
        steps_ += 1;

        StepResult out;
        out.observation = observe();
        out.reward = reward;
        out.done = pos_.norm() <= kGoalRadius;
        out.truncated = !out.done && steps_ >= spec_.max_episode_len;
        return out;
    }

private:
    Eigen::VectorXd observe() const {
        Eigen::VectorXd obs(4);
        obs << pos_(0), pos_(1), vel_(0), vel_(1);
        return obs;
    }

    static constexpr double kDt = 0.05;
    static constexpr double kMaxSpeed = 4.0;
    static constexpr double kMaxPos = 10.0;
    static constexpr double kGoalRadius = 0.05;

    EnvSpec spec_;
    DetRng rng_;
    Eigen::Vector2d pos_{0.0, 0.0};
    Eigen::Vector2d vel_{0.0, 0.0};
    int steps_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_env(const std::string& name, std::uint64_t seed) {
    if (name == "pendulum") return std::make_unique<PendulumEnv>(seed);
    if (name == "pointmass") return std::make_unique<PointMassEnv>(seed);
    std::ostringstream msg;
    msg << "unknown environment '" << name << "'; registered:";
    for (const auto& n : env_names()) msg << ' ' << n;
    throw std::invalid_argument(msg.str());
}

std::vector<std::string> env_names() { return {"pendulum", "pointmass"}; }

}  // namespace rlx2
