#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "vdr/envs/observation_space.hpp"
#include "vdr/types.hpp"

namespace vdr::envs {

struct Outcome {
    StateId next = 0;
    double prob = 1.0;
};

/// Finite episodic MDP with tabular dynamics.
struct Mdp {
    int n_states = 0;
    int n_actions = 0;
    /// transition[s][a] lists the successor distribution.
    std::vector<std::vector<std::vector<Outcome>>> transition;
    std::vector<std::vector<double>> reward;
    std::vector<bool> terminal;
    double gamma = 0.95;
    StateId initial_state = 0;
    int max_episode_len = 1;
    /// Largest reward magnitude; scales the optimism bonus.
    double r_max = 0.0;

    void validate() const {
        if (n_states < 1 || n_actions < 1) throw InvalidArgument("empty MDP");
        if (max_episode_len < 1) throw InvalidArgument("max_episode_len must be >= 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must lie in (0, 1]");
        if (initial_state < 0 || initial_state >= n_states)
            throw InvalidArgument("initial state out of range");
        if (transition.size() != static_cast<std::size_t>(n_states) ||
            reward.size() != static_cast<std::size_t>(n_states))
            throw InvalidArgument("table sizes do not match n_states");
        for (int s = 0; s < n_states; ++s) {
            const auto& row = transition[static_cast<std::size_t>(s)];
            if (row.size() != static_cast<std::size_t>(n_actions) ||
                reward[static_cast<std::size_t>(s)].size() != static_cast<std::size_t>(n_actions))
                throw InvalidArgument("table sizes do not match n_actions");
            for (int a = 0; a < n_actions; ++a) {
                double total = 0.0;
                for (const auto& out : row[static_cast<std::size_t>(a)]) {
                    if (out.next < 0 || out.next >= n_states || out.prob < 0.0)
                        throw InvalidArgument("bad transition entry");
                    total += out.prob;
                }
                if (std::abs(total - 1.0) > 1e-9)
                    throw InvalidArgument("transition row does not sum to 1");
                if (reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] > r_max)
                    throw InvalidArgument("reward exceeds r_max");
            }
        }
        if (!terminal.empty() && terminal.size() != static_cast<std::size_t>(n_states))
            throw InvalidArgument("terminal mask size mismatch");
    }

    bool is_terminal(StateId s) const {
        return !terminal.empty() && terminal[static_cast<std::size_t>(s)];
    }

    double r(StateId s, ActionId a) const {
        return reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    }

    const std::vector<Outcome>& outcomes(StateId s, ActionId a) const {
        return transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
    }

    void set_deterministic(StateId s, ActionId a, StateId next, double r) {
        transition[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = {{next, 1.0}};
        reward[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = r;
    }

    static Mdp empty(int n_states, int n_actions) {
        Mdp m;
        m.n_states = n_states;
        m.n_actions = n_actions;
        m.transition.assign(static_cast<std::size_t>(n_states),
                            std::vector<std::vector<Outcome>>(static_cast<std::size_t>(n_actions)));
        m.reward.assign(static_cast<std::size_t>(n_states),
                        std::vector<double>(static_cast<std::size_t>(n_actions), 0.0));
        return m;
    }

    void set_r_max_from_rewards() {
        r_max = 0.0;
        for (const auto& row : reward)
            for (double v : row) r_max = std::max(r_max, std::abs(v));
    }
};

/// Result of one environment step.
struct Transition {
    StateId next = 0;
    double reward = 0.0;
    bool terminal = false;
};

/// Stateful simulator over a tabular Mdp.
class TabularEnv {
public:
    explicit TabularEnv(Mdp mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

    StateId reset() { return state_ = mdp_.initial_state; }

    Transition step(ActionId a, Rng& rng) {
        if (a < 0 || a >= mdp_.n_actions) throw InvalidArgument("action out of range");
        const auto& outs = mdp_.outcomes(state_, a);
        std::size_t k = 0;
        if (outs.size() > 1) {
            std::vector<double> w;
            w.reserve(outs.size());
            for (const auto& o : outs) w.push_back(o.prob);
            k = sample_categorical(w, rng);
        }
        const double r = mdp_.r(state_, a);
        state_ = outs[k].next;
        return {state_, r, mdp_.is_terminal(state_)};
    }

    StateId state() const { return state_; }
    const Mdp& mdp() const { return mdp_; }
    int num_states() const { return mdp_.n_states; }
    int num_actions() const { return mdp_.n_actions; }
    int max_episode_len() const { return mdp_.max_episode_len; }
    double gamma() const { return mdp_.gamma; }
    double r_max() const { return mdp_.r_max; }

private:
    Mdp mdp_;
    StateId state_ = 0;
};

/// Three-state corridor: s1, s2 teleport back to s3; s3 chooses which side to visit.
///
/// State ids 0, 1, 2 are s1, s2, s3; action 0 is a1 (right), 1 is a2 (left).
inline Mdp make_three_state(int horizon = 10, double gamma = 0.95) {
    Mdp m = Mdp::empty(3, 2);
    m.set_deterministic(0, 0, 2, 0.7);
    m.set_deterministic(0, 1, 2, -1.0);
    m.set_deterministic(1, 0, 2, 1.0);
    m.set_deterministic(1, 1, 2, -1.3);
    m.set_deterministic(2, 0, 0, -0.5);
    m.set_deterministic(2, 1, 1, -0.7);
    m.initial_state = 2;
    m.max_episode_len = horizon;
    m.gamma = gamma;
    m.set_r_max_from_rewards();
    m.validate();
    return m;
}

namespace cheese {

inline constexpr int kWidth = 7;
inline constexpr int kHeight = 5;
inline constexpr int kUp = 0, kDown = 1, kLeft = 2, kRight = 3;
inline constexpr double kWallPenalty = -10.0;
inline constexpr double kStepCost = -1.0;
inline constexpr double kCheeseReward = 10.0;

// '#' wall, '.' free, 'S' start, 'C' cheese.
inline constexpr const char* kLayout[kHeight] = {
    "#######",
    "#.....#",
    "#.#.#.#",
    "#S#C#.#",
    "#######",
};

struct Cell {
    int col = 0;
    int row = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

inline bool is_wall(int col, int row) {
    if (col < 0 || row < 0 || col >= kWidth || row >= kHeight) return true;
    return kLayout[row][col] == '#';
}

/// Free cells in row-major order; index = state id.
inline std::vector<Cell> free_cells() {
    std::vector<Cell> cells;
    for (int r = 0; r < kHeight; ++r)
        for (int c = 0; c < kWidth; ++c)
            if (!is_wall(c, r)) cells.push_back({c, r});
    return cells;
}

inline int state_of(const std::vector<Cell>& cells, Cell cell) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] == cell) return static_cast<int>(i);
    return -1;
}

/// 4-bit adjacent-wall percept: N=8, S=4, E=2, W=1.
inline int percept(Cell c) {
    return (is_wall(c.col, c.row - 1) ? 8 : 0) | (is_wall(c.col, c.row + 1) ? 4 : 0) |
           (is_wall(c.col + 1, c.row) ? 2 : 0) | (is_wall(c.col - 1, c.row) ? 1 : 0);
}

}  // namespace cheese

struct CheeseMaze {
    Mdp mdp;
    ObservationSpace observations;
    std::vector<cheese::Cell> cells;
    StateId cheese_state = 0;
};

/// Cheese maze with wall-percept observations.
///
/// Entering the cheese cell pays +10 and teleports to the start, so the cheese
/// cell is never occupied; it keeps a percept id of its own.
inline CheeseMaze make_cheese_maze(int horizon = 20, double gamma = 0.95) {
    using namespace cheese;
    const auto cells = free_cells();
    const int n = static_cast<int>(cells.size());
    Mdp m = Mdp::empty(n, 4);
    StateId start = 0, goal = 0;
    for (int s = 0; s < n; ++s) {
        const Cell c = cells[static_cast<std::size_t>(s)];
        if (kLayout[c.row][c.col] == 'S') start = s;
        if (kLayout[c.row][c.col] == 'C') goal = s;
    }
    constexpr int dcol[4] = {0, 0, -1, 1};
    constexpr int drow[4] = {-1, 1, 0, 0};
    for (int s = 0; s < n; ++s) {
        const Cell c = cells[static_cast<std::size_t>(s)];
        for (int a = 0; a < 4; ++a) {
            const Cell to{c.col + dcol[a], c.row + drow[a]};
            if (is_wall(to.col, to.row)) {
                m.set_deterministic(s, a, s, kWallPenalty);
            } else {
                const StateId t = state_of(cells, to);
                if (t == goal)
                    m.set_deterministic(s, a, start, kCheeseReward);
                else
                    m.set_deterministic(s, a, t, kStepCost);
            }
        }
    }
    m.initial_state = start;
    m.max_episode_len = horizon;
    m.gamma = gamma;
    m.set_r_max_from_rewards();
    m.validate();

    // Dense observation ids in order of first appearance; the cheese cell gets
    // its own id even though its wall percept matches the start cell.
    std::vector<int> seen_percepts;
    std::vector<ObsId> assignment(static_cast<std::size_t>(n));
    ObsId next = 0;
    for (int s = 0; s < n; ++s) {
        if (s == goal) continue;
        const int p = percept(cells[static_cast<std::size_t>(s)]);
        auto it = std::find(seen_percepts.begin(), seen_percepts.end(), p);
        if (it == seen_percepts.end()) {
            seen_percepts.push_back(p);
            assignment[static_cast<std::size_t>(s)] = next++;
        } else {
            assignment[static_cast<std::size_t>(s)] =
                static_cast<ObsId>(std::distance(seen_percepts.begin(), it));
        }
    }
    assignment[static_cast<std::size_t>(goal)] = next;
    return {std::move(m), ObservationSpace(std::move(assignment)), cells, goal};
}

}  // namespace vdr::envs
