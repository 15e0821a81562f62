#ifndef RLX2_ENVS_HPP
#define RLX2_ENVS_HPP

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "rng.hpp"

namespace rlx2 {

struct EnvSpec {
    int state_dim = 0;
    int action_dim = 0;
    Eigen::VectorXd action_low;
    Eigen::VectorXd action_high;
    int max_episode_len = 200;

    Eigen::VectorXd action_center() const { return 0.5 * (action_low + action_high); }
    Eigen::VectorXd action_halfwidth() const { return 0.5 * (action_high - action_low); }
};

struct StepResult {
    Eigen::VectorXd observation;
    double reward = 0.0;
    bool done = false;       // genuine termination
    bool truncated = false;  // time-limit cutoff; bootstrapping stays valid
};

class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual Eigen::VectorXd reset() = 0;
    virtual StepResult step(const Eigen::VectorXd& action) = 0;
    // Diagnostics hook: place the environment in an exact internal state
    // (pendulum: theta, theta_dot; point-mass: px, py, vx, vy) and zero the
    // step counter.
    virtual void set_state(const Eigen::VectorXd& internal_state) = 0;
};

// Registered names: "pendulum", "pointmass".
std::unique_ptr<Env> make_env(const std::string& name, std::uint64_t seed);
std::vector<std::string> env_names();

}  // namespace rlx2

#endif
