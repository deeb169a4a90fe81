#pragma once

#include <algorithm>
#include <cmath>

#include "vdr/envs/mdp.hpp"
#include "vdr/envs/observation_space.hpp"
#include "vdr/types.hpp"

namespace vdr::envs {

/// Classic mountain car whose latent state id is the cell of an 8x8 grid over
/// (position, velocity). The continuous state never leaves this class.
class MountainCar {
public:
    static constexpr double kMinPos = -1.2;
    static constexpr double kMaxPos = 0.6;
    static constexpr double kMaxSpeed = 0.07;
    static constexpr double kGoalPos = 0.5;
    static constexpr double kForce = 0.001;
    static constexpr double kGravity = 0.0025;
    static constexpr int kGrid = 8;

    struct Config {
        double start_position = -0.5;
        double start_velocity = 0.03;
        int max_episode_len = 500;
        double gamma = 0.95;
    };

    MountainCar() : MountainCar(Config{}) {}
    explicit MountainCar(Config cfg) : cfg_(cfg) { reset(); }

    StateId reset() {
        pos_ = cfg_.start_position;
        vel_ = cfg_.start_velocity;
        return state();
    }

    /// Actions: 0 push left, 1 coast, 2 push right. Reward -1 per step, 0 on
    /// the step that reaches the goal.
    Transition step(ActionId a, Rng& /*rng*/) {
        if (a < 0 || a > 2) throw InvalidArgument("action out of range");
        vel_ += kForce * (a - 1) - kGravity * std::cos(3.0 * pos_);
        vel_ = std::clamp(vel_, -kMaxSpeed, kMaxSpeed);
        pos_ += vel_;
        pos_ = std::clamp(pos_, kMinPos, kMaxPos);
        if (pos_ == kMinPos && vel_ < 0.0) vel_ = 0.0;
        const bool goal = pos_ >= kGoalPos;
        return {state(), goal ? 0.0 : -1.0, goal};
    }

    StateId state() const { return cell_index(pos_, vel_, kGrid); }
    double position() const { return pos_; }
    double velocity() const { return vel_; }

    /// Row-major (position bin, velocity bin) index on a res x res grid.
    static int cell_index(double pos, double vel, int res) {
        return position_bin(pos, res) * res + velocity_bin(vel, res);
    }
    static int position_bin(double pos, int res) {
        const int b = static_cast<int>((pos - kMinPos) / (kMaxPos - kMinPos) * res);
        return std::clamp(b, 0, res - 1);
    }
    static int velocity_bin(double vel, int res) {
        const int b = static_cast<int>((vel + kMaxSpeed) / (2.0 * kMaxSpeed) * res);
        return std::clamp(b, 0, res - 1);
    }

    /// Two observations: position bin < 4 (id 0) and the rest (id 1).
    static ObservationSpace initial_observations() {
        std::vector<ObsId> a(kGrid * kGrid);
        for (int p = 0; p < kGrid; ++p)
            for (int v = 0; v < kGrid; ++v) a[static_cast<std::size_t>(p * kGrid + v)] = p < 4 ? 0 : 1;
        return ObservationSpace(std::move(a));
    }

    int num_states() const { return kGrid * kGrid; }
    int num_actions() const { return 3; }
    int max_episode_len() const { return cfg_.max_episode_len; }
    double gamma() const { return cfg_.gamma; }
    /// Largest reward magnitude.
    double r_max() const { return 1.0; }
    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    double pos_ = 0.0;
    double vel_ = 0.0;
};

}  // namespace vdr::envs
