#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vdr/augment/propose.hpp"
#include "vdr/envs/episode.hpp"

using namespace vdr;
using namespace vdr::augment;

namespace {

constexpr ObsId kHub = 1, kHidden = 0;

/// Hub observation 1; action 0 leads to hidden latent A, action 1 to latent
/// B. Both latents emit observation 0 and pay +1 (A) or -1 (B) with noise.
Dataset two_latent_data(int n, std::uint64_t seed, std::vector<std::vector<int>>* latents = nullptr) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    Dataset d;
    for (int i = 0; i < n; ++i) {
        Trajectory t;
        std::vector<int> lat;
        for (int k = 0; k < 3; ++k) {
            const ActionId go = static_cast<ActionId>(uniform_index(rng, 2));
            t.push_back({kHub, go, 0.0, false, {}});
            lat.push_back(0);
            const bool a = go == 0;
            t.push_back({kHidden, 0, (a ? 1.0 : -1.0) + noise(rng), k == 2, {}});
            lat.push_back(a ? 1 : 2);
        }
        d.push_back(std::move(t));
        if (latents) latents->push_back(std::move(lat));
    }
    return d;
}

/// Same layout, but every visit to the hidden observation behaves
/// identically.
Dataset no_signal_data(int n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    for (int i = 0; i < n; ++i) {
        Trajectory t;
        for (int k = 0; k < 3; ++k) {
            t.push_back({kHub, static_cast<ActionId>(uniform_index(rng, 2)), 0.0, false, {}});
            t.push_back({kHidden, 0, 0.5, k == 2, {}});
        }
        d.push_back(std::move(t));
    }
    return d;
}

Dataset three_state_data(const envs::ObservationSpace& obs, int episodes, std::uint64_t seed) {
    auto bundle = envs::make_env("three-state");
    auto& env = std::get<envs::TabularEnv>(bundle.env);
    const Policy pi = Policy::uniform(obs.observations(), 2);
    Rng rng(seed);
    Dataset d;
    for (int i = 0; i < episodes; ++i) d.push_back(envs::run_episode(env, obs, pi, rng));
    return d;
}

ProposeConfig three_state_config() {
    ProposeConfig cfg;
    cfg.n_actions = 2;
    cfg.tree.gamma = 0.95;
    cfg.tree.r_max = 1.3;
    cfg.tree.single_root = false;
    return cfg;
}

}  // namespace

TEST(EmSplit, RecoversTwoRewardLatents) {
    std::vector<std::vector<int>> latents;
    const Dataset d = two_latent_data(500, 1, &latents);
    Rng rng(2);
    const EmModel m = em_split(d, kHidden, 10, 11, rng);
    const double m1 = m.mu(m.c1(), 0), m2 = m.mu(m.c2(), 0);
    const bool direct = m1 > m2;
    EXPECT_NEAR(direct ? m1 : m2, 1.0, 0.1);
    EXPECT_NEAR(direct ? m2 : m1, -1.0, 0.1);

    const SplitLabels lab = viterbi_relabel(d, m);
    int right = 0, total = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t t = 0; t < d[i].size(); ++t) {
            if (d[i][t].observation != kHidden) {
                EXPECT_EQ(lab.labels[i][t], 0);
                continue;
            }
            const int truth = direct ? latents[i][t] : 3 - latents[i][t];
            right += lab.labels[i][t] == truth;
            ++total;
        }
    EXPECT_GE(static_cast<double>(right) / total, 0.95);
}

TEST(EmSplit, NoSignalMatchesUnsplitLikelihood) {
    const Dataset d = no_signal_data(300, 3);
    Rng rng(4);
    const EmModel m = em_split(d, kHidden, 10, 11, rng);
    EXPECT_LT(std::abs(m.loglik - unsplit_log_likelihood(d, kHidden)), 1e-3);
}

TEST(EmSplit, LikelihoodNeverDecreases) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        EmOptions opts;
        opts.restarts = 1;
        const EmModel m = em_split(two_latent_data(100, seed + 10), kHidden, 10, 11, rng, opts);
        ASSERT_GE(m.loglik_trace.size(), 2u);
        for (std::size_t i = 1; i < m.loglik_trace.size(); ++i)
            EXPECT_GE(m.loglik_trace[i], m.loglik_trace[i - 1] - 1e-9);
    }
}

TEST(EmSplit, LabelSwapKeepsLikelihood) {
    const Dataset d = two_latent_data(80, 5);
    Rng rng(6);
    const EmModel m = em_split(d, kHidden, 10, 11, rng);
    EXPECT_NEAR(log_likelihood(d, m), log_likelihood(d, m.swapped()), 1e-9);
    EXPECT_NEAR(log_likelihood(d, m), m.loglik, 1e-6);
}

TEST(EmSplit, TableDataHasTheS3Optimum) {
    const Dataset d = fixture::table_aliased();
    int found = 0;
    for (std::uint64_t r = 0; r < 5; ++r) {
        Rng rng(r);
        EmOptions opts;
        opts.restarts = 1;
        const SplitLabels lab = viterbi_relabel(d, em_split(d, 0, 1, 2, rng, opts));
        const auto& a = lab.labels;
        const bool isolates = a[0][1] == a[1][1] && a[0][0] != a[0][1] && a[0][2] == a[0][0] &&
                              a[1][0] == a[0][0] && a[1][2] == a[0][0];
        found += isolates;
    }
    EXPECT_GE(found, 1);
}

TEST(EmSplit, RejectsRareTargets) {
    Rng rng(0);
    const Dataset once = {{{0, 0, 0.0, false, {}}, {1, 0, 1.0, true, {}}}};
    EXPECT_THROW(em_split(once, 1, 2, 3, rng), InvalidArgument);
    EXPECT_THROW(em_split(once, 7, 8, 9, rng), InvalidArgument);
}

TEST(Viterbi, CertainChildOne) {
    const Dataset d = two_latent_data(30, 7);
    Rng rng(1);
    EmModel m = em_split(d, kHidden, 10, 11, rng);
    const int k = m.num_symbols();
    for (int z = 0; z < k; ++z)
        for (int a = 0; a < m.n_actions; ++a) {
            m.t(z, a, m.c1()) += m.t(z, a, m.c2());
            m.t(z, a, m.c2()) = 0.0;
        }
    m.init[static_cast<std::size_t>(m.c1())] += m.init[static_cast<std::size_t>(m.c2())];
    m.init[static_cast<std::size_t>(m.c2())] = 0.0;
    for (const auto& row : viterbi_relabel(d, m).labels)
        for (auto l : row) EXPECT_NE(l, 2);
}

TEST(Viterbi, SymmetricModelTiesToChildOne) {
    const Dataset d = two_latent_data(30, 8);
    Rng rng(1);
    EmOptions opts;
    opts.restarts = 1;
    opts.perturbation = 0.0;
    opts.max_iterations = 0;
    const EmModel m = em_split(d, kHidden, 10, 11, rng, opts);
    std::size_t ones = 0;
    for (const auto& row : viterbi_relabel(d, m).labels)
        for (auto l : row) {
            EXPECT_NE(l, 2);
            ones += l == 1;
        }
    EXPECT_EQ(ones, occurrences(d, kHidden));
}

TEST(Score, PlainArithmetic) {
    EXPECT_DOUBLE_EQ(score_plain(0.0, 5.0, -3.0), 0.0);
    EXPECT_DOUBLE_EQ(score_plain(0.7, 2.0, 2.0), 0.0);
    EXPECT_NEAR(score_plain(0.5108, 3.0, 1.0), 1.0216, 1e-12);
    EXPECT_GT(score_plain(0.1, 1.0, 0.5), 0.0);
    EXPECT_LT(score_plain(0.1, 0.4, 0.5), 0.0);
}

TEST(Score, BootstrapArithmetic) {
    EXPECT_NEAR(score_bootstrap(1.0, {2.0, 4.0}, 1.0), 2.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(score_bootstrap(1.0, {2.0, 4.0}, 1.0), 1.4142, 1e-4);
    EXPECT_DOUBLE_EQ(score_bootstrap(0.8, {1.5, 1.5, 1.5}, 1.5), 0.0);
    // Halving the spread at a fixed mean doubles the score.
    const double wide = score_bootstrap(0.3, {1.0, 3.0}, 0.0);
    const double narrow = score_bootstrap(0.3, {1.5, 2.5}, 0.0);
    EXPECT_NEAR(narrow, 2.0 * wide, 1e-12);
    // A zero spread is floored instead of dividing by zero.
    EXPECT_TRUE(std::isfinite(score_bootstrap(1.0, {2.0, 2.0}, 1.0)));
}

TEST(Propose, ThreeStateSplitIsolatesS3) {
    const auto obs = envs::ObservationSpace::aliased(3);
    const Dataset d = three_state_data(obs, 50, 21);
    const ProposeConfig cfg = three_state_config();
    const auto tree = trajtree::build(d, cfg.tree);
    const auto round = evaluate_candidates(d, obs, tree, Policy::uniform({0}, 2), cfg, 5, 50);
    ASSERT_EQ(round.candidates.size(), 1u);
    const auto& best = *round.best();
    EXPECT_EQ(best.target, 0);
    EXPECT_NEAR(best.recompute_score(), best.score, 1e-12);
    EXPECT_EQ(best.v_new.size(), 10u);
    const auto refined = envs::resolve_split_simulated(best.assignments, d, obs, 50);
    EXPECT_EQ(refined.observe(0), refined.observe(1));
    EXPECT_NE(refined.observe(0), refined.observe(2));
}

TEST(Propose, NothingToSplit) {
    const Dataset d = {{{0, 0, 1.0, true, 0}}};
    const auto obs = envs::ObservationSpace::aliased(1);
    ProposeConfig cfg = three_state_config();
    const auto tree = trajtree::build(d, cfg.tree);
    const auto round = evaluate_candidates(d, obs, tree, Policy::uniform({0}, 2), cfg, 1, 0);
    EXPECT_TRUE(round.candidates.empty());
    ASSERT_EQ(round.skipped.size(), 1u);
    EXPECT_FALSE(propose(d, obs, tree, Policy::uniform({0}, 2), cfg, 1, 0).has_value());
}

TEST(Propose, Deterministic) {
    const auto obs = envs::ObservationSpace::aliased(3);
    const Dataset d = three_state_data(obs, 40, 3);
    ProposeConfig cfg = three_state_config();
    cfg.opto.episodes = 500;
    const auto tree = trajtree::build(d, cfg.tree);
    const auto a = evaluate_candidates(d, obs, tree, Policy::uniform({0}, 2), cfg, 9, 40);
    const auto b = evaluate_candidates(d, obs, tree, Policy::uniform({0}, 2), cfg, 9, 40);
    ASSERT_EQ(a.candidates.size(), b.candidates.size());
    EXPECT_EQ(a.best()->target, b.best()->target);
    EXPECT_EQ(a.best()->score, b.best()->score);
    EXPECT_EQ(a.best()->assignments, b.best()->assignments);
    cfg.threads = 3;
    const auto c = evaluate_candidates(d, obs, tree, Policy::uniform({0}, 2), cfg, 9, 40);
    EXPECT_EQ(a.best()->score, c.best()->score);
}

TEST(Propose, ScoreInvariantToChildOrder) {
    // Relabelling with the children exchanged yields the same tree shape, so
    // the optimized value and the KL term do not change.
    const Dataset d = fixture::table_aliased();
    SplitLabels lab = fixture::table_labels();
    SplitLabels swapped = lab;
    for (auto& row : swapped.labels)
        for (auto& l : row)
            if (l) l = static_cast<std::uint8_t>(3 - l);
    trajtree::TreeOptions o;
    o.gamma = 0.95;
    o.pseudo_count = 0.0;
    const auto t1 = trajtree::build(trajtree::relabel(d, lab), o);
    const auto t2 = trajtree::build(trajtree::relabel(d, swapped), o);
    EXPECT_EQ(t1.nodes().size(), t2.nodes().size());
    Rng r1(3), r2(3);
    const Policy u = Policy::uniform({1, 2}, 2);
    EXPECT_DOUBLE_EQ(policyopt::opte(u, t1, 1000, false, r1).mean, policyopt::opte(u, t2, 1000, false, r2).mean);
}
