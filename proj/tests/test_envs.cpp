#include <queue>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vdr/envs/episode.hpp"
#include "vdr/policyopt/policy.hpp"

using namespace vdr;
using namespace vdr::envs;

namespace {

constexpr StateId S1 = 0, S2 = 1, S3 = 2;
constexpr ActionId A1 = 0, A2 = 1;

struct FixedAction {
    ActionId a;
    ActionId sample(ObsId, Rng&) const { return a; }
};

}  // namespace

TEST(ThreeState, TransitionTable) {
    TabularEnv env(make_three_state());
    Rng rng(1);
    EXPECT_EQ(env.reset(), S3);
    auto tr = env.step(A1, rng);
    EXPECT_EQ(tr.next, S1);
    EXPECT_DOUBLE_EQ(tr.reward, -0.5);
    tr = env.step(A1, rng);
    EXPECT_EQ(tr.next, S3);
    EXPECT_DOUBLE_EQ(tr.reward, 0.7);

    const Mdp m = make_three_state();
    EXPECT_DOUBLE_EQ(m.r(S1, A2), -1.0);
    EXPECT_DOUBLE_EQ(m.r(S2, A1), 1.0);
    EXPECT_DOUBLE_EQ(m.r(S2, A2), -1.3);
    EXPECT_DOUBLE_EQ(m.r(S3, A2), -0.7);
    EXPECT_EQ(m.outcomes(S3, A2).front().next, S2);
    EXPECT_EQ(m.outcomes(S2, A2).front().next, S3);
}

TEST(ThreeState, HorizonThreePrefersA2) {
    const Mdp m = make_three_state(3, 1.0);
    // Enumerate all eight action sequences by hand.
    double best = -1e9;
    int best_first = -1;
    for (int seq = 0; seq < 8; ++seq) {
        TabularEnv env(m);
        Rng rng(0);
        env.reset();
        double g = 0.0;
        for (int t = 0; t < 3; ++t) g += env.step((seq >> t) & 1, rng).reward;
        if (g > best + 1e-12) {
            best = g;
            best_first = seq & 1;
        }
    }
    EXPECT_NEAR(best, -0.2, 1e-12);
    EXPECT_EQ(best_first, A2);
    EXPECT_NEAR(oracle::best_return(m, 3), -0.2, 1e-12);
}

TEST(ThreeState, FixedA1EpisodeMatchesTableTrajectory) {
    auto bundle = make_env("three-state", 0.95, 3);
    Rng rng(5);
    const Trajectory traj = run_episode(std::get<TabularEnv>(bundle.env), bundle.observations, FixedAction{A1}, rng);
    ASSERT_EQ(traj.size(), 3u);
    const double expected[] = {-0.5, 0.7, -0.5};
    for (std::size_t t = 0; t < 3; ++t) {
        EXPECT_EQ(traj[t].observation, 0);
        EXPECT_DOUBLE_EQ(traj[t].reward, expected[t]);
        EXPECT_EQ(traj[t].done, t == 2);
    }
    EXPECT_EQ(traj[0].true_state, S3);
    EXPECT_EQ(traj[1].true_state, S1);
}

TEST(CheeseMaze, LayoutAndObservations) {
    const CheeseMaze cm = make_cheese_maze();
    EXPECT_EQ(cm.mdp.n_states, 11);
    EXPECT_EQ(cm.mdp.n_actions, 4);
    EXPECT_EQ(cm.mdp.max_episode_len, 20);
    EXPECT_EQ(cm.observations.size(), 7u);
    const auto& cells = cm.cells;
    EXPECT_EQ(cells[static_cast<std::size_t>(cm.mdp.initial_state)], (cheese::Cell{1, 3}));
    EXPECT_EQ(cells[static_cast<std::size_t>(cm.cheese_state)], (cheese::Cell{3, 3}));
    // Every observation has at least one state.
    for (ObsId o : cm.observations.observations()) EXPECT_FALSE(cm.observations.states_of(o).empty());
    // The three prong cells share an observation, as do the two corridor
    // cells above the interior walls.
    const auto obs_at = [&](int c, int r) { return cm.observations.observe(cheese::state_of(cells, {c, r})); };
    EXPECT_EQ(obs_at(1, 2), obs_at(3, 2));
    EXPECT_EQ(obs_at(3, 2), obs_at(5, 2));
    EXPECT_EQ(obs_at(2, 1), obs_at(4, 1));
    EXPECT_NE(obs_at(3, 1), obs_at(2, 1));
}

TEST(CheeseMaze, WallAndCheese) {
    const CheeseMaze cm = make_cheese_maze();
    TabularEnv env(cm.mdp);
    Rng rng(2);
    const StateId start = env.reset();
    auto tr = env.step(cheese::kLeft, rng);
    EXPECT_EQ(tr.next, start);
    EXPECT_DOUBLE_EQ(tr.reward, -10.0);
    // Walk to the cell above the cheese, then step down.
    for (ActionId a : {cheese::kUp, cheese::kUp, cheese::kRight, cheese::kRight, cheese::kDown}) {
        tr = env.step(a, rng);
        EXPECT_DOUBLE_EQ(tr.reward, -1.0);
    }
    tr = env.step(cheese::kDown, rng);
    EXPECT_DOUBLE_EQ(tr.reward, 10.0);
    EXPECT_EQ(tr.next, start);
}

TEST(CheeseMaze, OptimalReturnIsThirteen) {
    // Breadth-first search on the raw layout for the start-to-cheese distance.
    using cheese::kLayout;
    std::map<std::pair<int, int>, int> dist;
    std::queue<std::pair<int, int>> q;
    std::pair<int, int> start{}, goal{};
    for (int r = 0; r < cheese::kHeight; ++r)
        for (int c = 0; c < cheese::kWidth; ++c) {
            if (kLayout[r][c] == 'S') start = {c, r};
            if (kLayout[r][c] == 'C') goal = {c, r};
        }
    dist[start] = 0;
    q.push(start);
    while (!q.empty()) {
        auto [c, r] = q.front();
        q.pop();
        for (auto [dc, dr] : {std::pair{0, 1}, {0, -1}, {1, 0}, {-1, 0}}) {
            const std::pair<int, int> nxt{c + dc, r + dr};
            if (kLayout[nxt.second][nxt.first] == '#' || dist.count(nxt)) continue;
            dist[nxt] = dist[{c, r}] + 1;
            q.push(nxt);
        }
    }
    const int cycle = dist.at(goal);
    EXPECT_EQ(cycle, 6);
    EXPECT_EQ(-(cycle - 1) + 10, 5);
    // Three full cycles fit in twenty steps; the two spare moves cost one each.
    const int cycles = 20 / cycle;
    const double by_hand = cycles * 5.0 - (20 - cycles * cycle);
    EXPECT_DOUBLE_EQ(by_hand, 13.0);
    EXPECT_DOUBLE_EQ(oracle::best_return(make_cheese_maze().mdp, 20), 13.0);
}

TEST(MountainCar, StartCellAndReward) {
    EXPECT_EQ(MountainCar::position_bin(-0.5, 8), 3);
    EXPECT_EQ(MountainCar::velocity_bin(0.03, 8), 5);
    MountainCar car;
    EXPECT_EQ(car.reset(), 3 * 8 + 5);
    const ObservationSpace obs = MountainCar::initial_observations();
    EXPECT_EQ(obs.size(), 2u);
    EXPECT_EQ(obs.observe(car.state()), 0);
    EXPECT_EQ(obs.observe(4 * 8), 1);
    Rng rng(0);
    for (int t = 0; t < 20; ++t) {
        const auto tr = car.step(t % 3, rng);
        ASSERT_FALSE(tr.terminal);
        EXPECT_DOUBLE_EQ(tr.reward, -1.0);
        EXPECT_GE(car.position(), MountainCar::kMinPos);
        EXPECT_LE(std::abs(car.velocity()), MountainCar::kMaxSpeed);
    }
}

TEST(MountainCar, EnergyPumpingReachesGoal) {
    MountainCar car;
    car.reset();
    Rng rng(0);
    int t = 0;
    bool goal = false;
    for (; t < 500 && !goal; ++t) {
        const auto tr = car.step(car.velocity() >= 0.0 ? 2 : 0, rng);
        goal = tr.terminal;
        if (goal) {
            EXPECT_DOUBLE_EQ(tr.reward, 0.0);
        }
    }
    EXPECT_TRUE(goal);
    EXPECT_LT(t, 500);
}

TEST(RunEpisode, ObservationsFollowTheMapping) {
    auto bundle = make_env("cheese-maze");
    const auto pi = policyopt::Policy::uniform(bundle.observations.observations(), 4);
    Rng rng(11);
    const Trajectory traj = run_episode(std::get<TabularEnv>(bundle.env), bundle.observations, pi, rng);
    EXPECT_LE(traj.size(), 20u);
    for (std::size_t t = 0; t < traj.size(); ++t) {
        EXPECT_EQ(traj[t].observation, bundle.observations.observe(*traj[t].true_state));
        EXPECT_EQ(traj[t].done, t + 1 == traj.size());
    }
}

TEST(RunEpisode, SameSeedSameTrajectory) {
    auto a = make_env("mountain-car-8x8");
    auto b = make_env("mountain-car-8x8");
    const auto pi = policyopt::Policy::uniform({0, 1}, 3);
    Rng r1(99), r2(99);
    const auto t1 = run_episode(std::get<MountainCar>(a.env), a.observations, pi, r1);
    const auto t2 = run_episode(std::get<MountainCar>(b.env), b.observations, pi, r2);
    EXPECT_EQ(t1, t2);
    EXPECT_EQ(t1.size(), 500u);
}

TEST(ObservationSpaceTest, SplitRefinesAndMintsFreshIds) {
    const auto obs = ObservationSpace::aliased(3);
    EXPECT_EQ(obs.next_children(), (std::pair<ObsId, ObsId>{1, 2}));
    const auto finer = obs.split(0, 1, 2, {false, false, true}, 4);
    EXPECT_TRUE(obs.refined_by(finer));
    EXPECT_FALSE(finer.refined_by(obs));
    EXPECT_EQ(finer.size(), 2u);
    EXPECT_EQ(finer.observe(S3), 2);
    EXPECT_EQ(finer.observe(S1), 1);
    EXPECT_FALSE(finer.contains(0));
    EXPECT_EQ(finer.next_children(), (std::pair<ObsId, ObsId>{3, 4}));
    ASSERT_EQ(finer.split_log().size(), 1u);
    EXPECT_EQ(finer.split_log()[0], (SplitRecord{0, 1, 2, 4}));
    EXPECT_THROW(finer.split(0, 3, 4, {false, false, false}, 5), InvalidArgument);
    EXPECT_THROW(finer.split(1, 1, 2, {false, false, false}, 5), InvalidArgument);
    // A retired id is never handed out again, even when a child is empty.
    const auto lopsided = finer.split(1, 3, 4, {false, false, false}, 6);
    EXPECT_EQ(lopsided.size(), 2u);
    EXPECT_EQ(lopsided.next_children().first, 5);
}

TEST(SimulatedDesigner, MajorityVoteAndTies) {
    // One trajectory visiting s1 ten times (7 labelled child 1) and s2 four
    // times (2 and 2).
    Trajectory traj;
    SplitLabels labels{0, 1, 2, {{}}};
    for (int i = 0; i < 10; ++i) {
        traj.push_back({0, 0, 0.0, false, S1});
        labels.labels[0].push_back(i < 7 ? 1 : 2);
    }
    for (int i = 0; i < 4; ++i) {
        traj.push_back({0, 0, 0.0, false, S2});
        labels.labels[0].push_back(i < 2 ? 1 : 2);
    }
    traj.back().done = true;
    const auto obs = resolve_split_simulated(labels, {traj}, ObservationSpace::aliased(3), 3);
    EXPECT_EQ(obs.observe(S1), 1);
    EXPECT_EQ(obs.observe(S2), 1);
    // s3 never occurred, so it defaults to child 1 as well.
    EXPECT_EQ(obs.observe(S3), 1);

    for (auto& l : labels.labels[0]) l = l == 1 ? 2 : 1;
    const auto flipped = resolve_split_simulated(labels, {traj}, ObservationSpace::aliased(3), 3);
    EXPECT_EQ(flipped.observe(S1), 2);
    EXPECT_EQ(flipped.observe(S2), 1);
}

TEST(SimulatedDesigner, PerfectLabelsSeparateS3) {
    Trajectory traj;
    SplitLabels labels{0, 1, 2, {{}}};
    for (StateId s : {S3, S1, S3, S2, S3}) {
        traj.push_back({0, 0, 0.0, false, s});
        labels.labels[0].push_back(s == S3 ? 2 : 1);
    }
    const auto obs = resolve_split_simulated(labels, {traj}, ObservationSpace::aliased(3), 0);
    EXPECT_EQ(obs.assignment(), (std::vector<ObsId>{1, 1, 2}));
}

TEST(MakeEnv, UnknownIdThrows) {
    EXPECT_THROW(make_env("pong"), InvalidArgument);
    EXPECT_EQ(make_env("cheese-maze").max_episode_len(), 20);
    EXPECT_EQ(make_env("mountain-car-8x8").max_episode_len(), 500);
    EXPECT_EQ(make_env("three-state", 0.9, 7).max_episode_len(), 7);
    EXPECT_DOUBLE_EQ(make_env("three-state", 0.9, 7).gamma(), 0.9);
}
