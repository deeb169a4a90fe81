#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vdr/augment/em.hpp"
#include "vdr/loop/run.hpp"

using namespace vdr;

// Randomized invariants. Each case draws its inputs from its own seed.
class Seeded : public ::testing::TestWithParam<std::uint64_t> {};

namespace {

Dataset random_dataset(Rng& rng, int n_obs, int n_actions) {
    Dataset d;
    const int n_traj = 5 + static_cast<int>(uniform_index(rng, 20));
    for (int i = 0; i < n_traj; ++i) {
        Trajectory t;
        const int len = 2 + static_cast<int>(uniform_index(rng, 8));
        for (int k = 0; k < len; ++k)
            t.push_back({k == 0 ? 0 : static_cast<ObsId>(uniform_index(rng, static_cast<std::size_t>(n_obs))),
                         static_cast<ActionId>(uniform_index(rng, static_cast<std::size_t>(n_actions))),
                         std::round(8.0 * (uniform01(rng) - 0.5)) / 4.0, k == len - 1, 0});
        d.push_back(std::move(t));
    }
    return d;
}

policyopt::Policy random_policy(Rng& rng, const std::vector<ObsId>& obs, int n_actions) {
    policyopt::Policy pi(n_actions);
    for (ObsId o : obs) {
        std::vector<double> logits;
        for (int a = 0; a < n_actions; ++a) logits.push_back(6.0 * (uniform01(rng) - 0.5));
        pi.set_logits(o, logits);
    }
    return pi;
}

}  // namespace

TEST_P(Seeded, EmLikelihoodNeverDecreases) {
    Rng rng(GetParam());
    const Dataset d = random_dataset(rng, 3, 2);
    if (augment::occurrences(d, 1) < 2) GTEST_SKIP();
    augment::EmOptions opts;
    opts.restarts = 3;
    const auto m = augment::em_split(d, 1, 10, 11, rng, opts);
    for (std::size_t i = 1; i < m.loglik_trace.size(); ++i) EXPECT_GE(m.loglik_trace[i], m.loglik_trace[i - 1] - 1e-9);
    // The split family contains the unsplit model.
    EXPECT_GE(m.loglik, augment::unsplit_log_likelihood(d, 1) - 1e-6);
}

TEST_P(Seeded, KlIsNonnegativeAndZeroOnSelf) {
    Rng rng(GetParam());
    const std::vector<ObsId> obs{0, 1, 2, 3};
    const int n_actions = 2 + static_cast<int>(uniform_index(rng, 3));
    const auto p = random_policy(rng, obs, n_actions);
    const auto q = random_policy(rng, obs, n_actions);
    EXPECT_GE(policyopt::kl_policies(p, q, obs), 0.0);
    EXPECT_NEAR(policyopt::kl_policies(p, p, obs), 0.0, 1e-12);
}

TEST_P(Seeded, ReinforceKeepsPoliciesNormalized) {
    Rng rng(GetParam());
    const Dataset d = random_dataset(rng, 4, 3);
    trajtree::TreeOptions to;
    to.gamma = 0.9;
    to.r_max = 1.0;
    const auto tree = trajtree::build(d, to);
    policyopt::OptoConfig cfg;
    cfg.episodes = 100;
    cfg.learning_rate = 2.0;
    int checked = 0;
    (void)policyopt::opto(tree, 3, GetParam() % 2 == 0, cfg, rng, {}, [&](const policyopt::Policy& pi, ObsId o) {
        double s = 0.0;
        for (double x : pi.probs(o)) {
            ASSERT_GE(x, 0.0);
            s += x;
        }
        ASSERT_NEAR(s, 1.0, 1e-9);
        ++checked;
    });
    EXPECT_GT(checked, 0);
}

TEST_P(Seeded, SplitsRefineTheSpace) {
    Rng rng(GetParam());
    auto obs = envs::make_env("cheese-maze").observations;
    for (int k = 0; k < 4; ++k) {
        const auto ids = obs.observations();
        const ObsId target = ids[uniform_index(rng, ids.size())];
        std::vector<bool> mask(static_cast<std::size_t>(obs.num_states()));
        for (std::size_t s = 0; s < mask.size(); ++s) mask[s] = uniform01(rng) < 0.5;
        const auto [c1, c2] = obs.next_children();
        int to_c1 = 0, to_c2 = 0;
        for (int s = 0; s < obs.num_states(); ++s)
            if (obs.observe(s) == target) (mask[static_cast<std::size_t>(s)] ? to_c2 : to_c1) += 1;
        const auto finer = obs.split(target, c1, c2, mask, k);
        EXPECT_TRUE(obs.refined_by(finer));
        EXPECT_FALSE(finer.contains(target));
        // A child left without states does not appear.
        EXPECT_EQ(finer.size(), obs.size() + (to_c1 > 0 && to_c2 > 0 ? 1 : 0));
        obs = finer;
    }
}

TEST_P(Seeded, RelabelKeepsEverythingButTheTarget) {
    Rng rng(GetParam());
    const Dataset d = random_dataset(rng, 3, 2);
    SplitLabels lab{1, 5, 6, {}};
    for (const auto& t : d) {
        std::vector<std::uint8_t> row;
        for (const auto& st : t) row.push_back(st.observation == 1 ? static_cast<std::uint8_t>(1 + uniform_index(rng, 2)) : 0);
        lab.labels.push_back(row);
    }
    const Dataset r = trajtree::relabel(d, lab);
    ASSERT_EQ(r.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t t = 0; t < d[i].size(); ++t) {
            EXPECT_EQ(r[i][t].action, d[i][t].action);
            EXPECT_EQ(r[i][t].reward, d[i][t].reward);
            if (d[i][t].observation == 1)
                EXPECT_EQ(r[i][t].observation, lab.labels[i][t] == 1 ? 5 : 6);
            else
                EXPECT_EQ(r[i][t].observation, d[i][t].observation);
        }
}

TEST_P(Seeded, TreeQMatchesSuffixAverages) {
    Rng rng(GetParam());
    const Dataset d = random_dataset(rng, 3, 2);
    trajtree::TreeOptions to;
    to.gamma = 0.9;
    to.pseudo_count = 0.0;
    const auto tree = trajtree::build(d, to);
    for (const auto& [key, q] : oracle::suffix_q(d, 0.9)) EXPECT_NEAR(tree.qstats().q(key.first, key.second), q, 1e-9);
}

TEST_P(Seeded, FullRunIsBitReproducible) {
    VdrConfig c;
    c.env = GetParam() % 2 == 0 ? "cheese-maze" : "three-state";
    c.total_episodes = 15;
    c.opto_episodes = 150;
    c.final_opto_episodes = 300;
    c.n_rollouts = 20;
    c.bootstrap = 3;
    c.c = 0.0;
    c.seed = GetParam();
    const RunRecord a = run(c), b = run(c);
    EXPECT_EQ(a.returns(), b.returns());
    EXPECT_EQ(a.data, b.data);
    EXPECT_EQ(a.final_observations, b.final_observations);
    EXPECT_EQ(a.final_policy, b.final_policy);
}

INSTANTIATE_TEST_SUITE_P(Random, Seeded, ::testing::Range<std::uint64_t>(0, 12));
