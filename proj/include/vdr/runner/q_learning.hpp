#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "vdr/envs/episode.hpp"
#include "vdr/types.hpp"

namespace vdr::runner {

struct BaselineConfig {
    std::string env = "mountain-car-8x8";
    int episodes = 1000;
    double learning_rate = 0.1;
    double gamma = 0.95;
    /// Epsilon decays linearly from start to end over the first
    /// `decay_fraction` of the episodes and stays at `epsilon_end` afterwards.
    double epsilon_start = 0.1;
    double epsilon_end = 0.01;
    double decay_fraction = 0.5;
    double q_init = 0.0;
    /// Cells per axis of the mountain-car position x velocity grid.
    int grid_resolution = 20;
    /// 0 keeps the environment default.
    int max_episode_len = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (grid_resolution < 1) throw InvalidArgument("grid resolution must be at least 1 per axis");
        if (episodes < 1) throw InvalidArgument("episodes must be at least 1");
        if (learning_rate < 0.0) throw InvalidArgument("learning rate must be nonnegative");
        if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0)
            throw InvalidArgument("epsilon must lie in [0, 1]");
    }

    double epsilon(int episode) const {
        const double span = decay_fraction * episodes;
        if (span <= 0.0 || episode >= span) return epsilon_end;
        return epsilon_start + (epsilon_end - epsilon_start) * (episode / span);
    }
};

struct BaselineEpisode {
    int episode = 0;
    double ret = 0.0;
    int length = 0;
    bool reached_goal = false;
};

struct BaselineResult {
    std::vector<BaselineEpisode> curve;
    /// Q[state][action] over the encoded state space.
    std::vector<std::vector<double>> q;

    int first_goal() const {
        for (const auto& e : curve)
            if (e.reached_goal) return e.episode;
        return -1;
    }
};

/// Tabular Q-learning with epsilon-greedy exploration on the ground-truth
/// discretization (true state, raw percept, or a fine mountain-car grid).
/// Greedy ties go to the lowest action index.
inline BaselineResult q_learning(const BaselineConfig& cfg) {
    cfg.validate();
    envs::EnvBundle bundle = envs::make_env(cfg.env, cfg.gamma, cfg.max_episode_len);
    const int n_actions = bundle.num_actions();
    const int horizon = bundle.max_episode_len();
    const bool mc = std::holds_alternative<envs::MountainCar>(bundle.env);
    const bool true_state = cfg.env == "three-state";
    int n_states = cfg.grid_resolution * cfg.grid_resolution;
    if (!mc)
        n_states = true_state ? std::get<envs::TabularEnv>(bundle.env).num_states()
                              : static_cast<int>(bundle.observations.observations().back()) + 1;

    std::function<int()> encode;
    if (mc) {
        auto* car = &std::get<envs::MountainCar>(bundle.env);
        encode = [car, res = cfg.grid_resolution] { return envs::MountainCar::cell_index(car->position(), car->velocity(), res); };
    } else {
        auto* env = &std::get<envs::TabularEnv>(bundle.env);
        if (true_state)
            encode = [env] { return env->state(); };
        else
            encode = [env, obs = bundle.observations] { return obs.observe(env->state()); };
    }

    BaselineResult out;
    out.q.assign(static_cast<std::size_t>(n_states), std::vector<double>(static_cast<std::size_t>(n_actions), cfg.q_init));
    auto greedy = [&](int s) {
        const auto& row = out.q[static_cast<std::size_t>(s)];
        return static_cast<ActionId>(std::max_element(row.begin(), row.end()) - row.begin());
    };
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        Rng rng = substream(cfg.seed, 11, ep);
        const double eps = cfg.epsilon(ep);
        std::visit([](auto& e) { e.reset(); }, bundle.env);
        int s = encode();
        BaselineEpisode rec{ep, 0.0, 0, false};
        for (int t = 0; t < horizon; ++t) {
            const ActionId a = uniform01(rng) < eps ? static_cast<ActionId>(uniform_index(rng, static_cast<std::size_t>(n_actions)))
                                                    : greedy(s);
            const envs::Transition tr = std::visit([&](auto& e) { return e.step(a, rng); }, bundle.env);
            const int s2 = encode();
            const double boot = tr.terminal ? 0.0 : cfg.gamma * out.q[static_cast<std::size_t>(s2)][static_cast<std::size_t>(greedy(s2))];
            double& qsa = out.q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
            qsa += cfg.learning_rate * (tr.reward + boot - qsa);
            rec.ret += tr.reward;
            rec.length += 1;
            s = s2;
            if (tr.terminal) {
                rec.reached_goal = mc;
                break;
            }
        }
        out.curve.push_back(rec);
    }
    return out;
}

}  // namespace vdr::runner
