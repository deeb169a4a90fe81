#pragma once

#include <concepts>
#include <map>
#include <string>
#include <variant>

#include "vdr/envs/mdp.hpp"
#include "vdr/envs/mountain_car.hpp"
#include "vdr/envs/observation_space.hpp"
#include "vdr/types.hpp"

namespace vdr::envs {

template <typename E>
concept Environment = requires(E env, const E cenv, ActionId a, Rng& rng) {
    { env.reset() } -> std::same_as<StateId>;
    { env.step(a, rng) } -> std::same_as<Transition>;
    { cenv.num_states() } -> std::convertible_to<int>;
    { cenv.num_actions() } -> std::convertible_to<int>;
    { cenv.max_episode_len() } -> std::convertible_to<int>;
    { cenv.gamma() } -> std::convertible_to<double>;
    { cenv.r_max() } -> std::convertible_to<double>;
};

template <typename P>
concept ActionSampler = requires(const P p, ObsId o, Rng& rng) {
    { p.sample(o, rng) } -> std::convertible_to<ActionId>;
};

static_assert(Environment<TabularEnv>);
static_assert(Environment<MountainCar>);

/// Roll out one episode, annotating every step with its latent state.
template <Environment E, ActionSampler P>
Trajectory run_episode(E& env, const ObservationSpace& obs, const P& policy, Rng& rng) {
    Trajectory traj;
    const int horizon = env.max_episode_len();
    traj.reserve(static_cast<std::size_t>(horizon));
    StateId s = env.reset();
    for (int t = 0; t < horizon; ++t) {
        const ObsId o = obs.observe(s);
        const ActionId a = policy.sample(o, rng);
        const Transition tr = env.step(a, rng);
        const bool last = tr.terminal || t + 1 == horizon;
        traj.push_back({o, a, tr.reward, last, s});
        if (tr.terminal) break;
        s = tr.next;
    }
    return traj;
}

/// Simulated designer: every state of the split observation goes to the child
/// that Viterbi chose for more than half of that state's occurrences. Exact
/// ties and unseen states go to child 1.
inline ObservationSpace resolve_split_simulated(const SplitLabels& split, const Dataset& data,
                                                const ObservationSpace& obs, int episode) {
    if (split.labels.size() != data.size())
        throw InvalidArgument("split labels do not match the dataset");
    std::map<StateId, std::pair<int, int>> votes;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& traj = data[i];
        if (split.labels[i].size() != traj.size())
            throw InvalidArgument("split labels do not match trajectory length");
        for (std::size_t t = 0; t < traj.size(); ++t) {
            if (traj[t].observation != split.target) continue;
            if (!traj[t].true_state) throw InvalidArgument("dataset lacks true-state annotations");
            auto& v = votes[*traj[t].true_state];
            (split.labels[i][t] == 2 ? v.second : v.first) += 1;
        }
    }
    std::vector<bool> to_child2(static_cast<std::size_t>(obs.num_states()), false);
    for (StateId s : obs.states_of(split.target)) {
        auto it = votes.find(s);
        if (it != votes.end()) to_child2[static_cast<std::size_t>(s)] = it->second.second > it->second.first;
    }
    return obs.split(split.target, split.child1, split.child2, to_child2, episode);
}

/// Environment plus its initial observation space, selected by string id.
struct EnvBundle {
    std::variant<TabularEnv, MountainCar> env;
    ObservationSpace observations;
    std::string id;

    int num_actions() const {
        return std::visit([](const auto& e) { return e.num_actions(); }, env);
    }
    int num_states() const {
        return std::visit([](const auto& e) { return e.num_states(); }, env);
    }
    double gamma() const {
        return std::visit([](const auto& e) { return e.gamma(); }, env);
    }
    double r_max() const {
        return std::visit([](const auto& e) { return e.r_max(); }, env);
    }
    int max_episode_len() const {
        return std::visit([](const auto& e) { return e.max_episode_len(); }, env);
    }
};

inline const std::vector<std::string>& env_ids() {
    static const std::vector<std::string> ids{"three-state", "cheese-maze", "mountain-car-8x8"};
    return ids;
}

/// Build an environment by id. `gamma` <= 0 keeps the environment default;
/// `horizon` <= 0 keeps the default episode length.
inline EnvBundle make_env(const std::string& id, double gamma = 0.0, int horizon = 0) {
    if (id == "three-state") {
        Mdp m = make_three_state(horizon > 0 ? horizon : 10, gamma > 0 ? gamma : 0.95);
        return {TabularEnv(std::move(m)), ObservationSpace::aliased(3), id};
    }
    if (id == "cheese-maze") {
        CheeseMaze cm = make_cheese_maze(horizon > 0 ? horizon : 20, gamma > 0 ? gamma : 0.95);
        return {TabularEnv(std::move(cm.mdp)), std::move(cm.observations), id};
    }
    if (id == "mountain-car-8x8") {
        MountainCar::Config cfg;
        if (gamma > 0) cfg.gamma = gamma;
        if (horizon > 0) cfg.max_episode_len = horizon;
        return {MountainCar(cfg), MountainCar::initial_observations(), id};
    }
    throw InvalidArgument("unknown environment id: " + id);
}

}  // namespace vdr::envs
