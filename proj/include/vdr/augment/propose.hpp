#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <vector>

#include "vdr/augment/em.hpp"
#include "vdr/augment/score.hpp"
#include "vdr/envs/observation_space.hpp"
#include "vdr/loop/augment_policy.hpp"
#include "vdr/policyopt/reinforce.hpp"
#include "vdr/trajtree/tree.hpp"

namespace vdr::augment {

using policyopt::Policy;

/// Which policy stands for the old representation in the score.
enum class OldPolicy {
    /// The behavior policy handed to propose().
    Behavior,
    /// A policy re-optimized on the unsplit data with the candidates'
    /// optimism flag and budget.
    Reoptimized,
};

struct ProposeConfig {
    OldPolicy old_policy = OldPolicy::Reoptimized;
    ScoreMode mode = ScoreMode::Bootstrap;
    /// Bootstrap resamples per candidate (B).
    int bootstrap = 10;
    /// Rollouts per value estimate (N).
    int n_rollouts = 100;
    /// Minimum score for a proposal to be returned (c).
    double threshold = 0.25;
    /// Weight the KL sum by how often each observation was logged.
    bool weighted_kl = false;
    /// Skip candidates whose Viterbi labels all land on one child.
    bool skip_degenerate = true;
    /// Optimism flag for candidate optimization and scoring.
    bool optimistic = false;
    /// Worker threads for candidate evaluation.
    int threads = 1;
    EmOptions em;
    policyopt::OptoConfig opto;
    trajtree::TreeOptions tree;
    int n_actions = 0;
};

struct SplitProposal {
    /// Index of the candidate within its round.
    int candidate = 0;
    ObsId target = 0;
    ObsId child1 = 0;
    ObsId child2 = 0;
    SplitLabels assignments;
    Policy candidate_policy;
    /// Bootstrap values in bootstrap mode, a single value in plain mode.
    std::vector<double> v_new;
    double v_old = 0.0;
    double kl = 0.0;
    double score = 0.0;
    ScoreMode mode = ScoreMode::Bootstrap;
    int episode = 0;
    double em_loglik = 0.0;
    double unsplit_loglik = 0.0;

    /// Score recomputed from the stored components.
    double recompute_score() const {
        return mode == ScoreMode::Plain ? score_plain(kl, v_new.front(), v_old) : score_bootstrap(kl, v_new, v_old);
    }
};

struct ProposalRound {
    double v_old = 0.0;
    Policy old_policy;
    std::vector<SplitProposal> candidates;
    /// Observations skipped, with the reason.
    std::vector<std::pair<ObsId, std::string>> skipped;

    const SplitProposal* best() const {
        const SplitProposal* b = nullptr;
        for (const auto& c : candidates)
            if (!b || c.score > b->score) b = &c;
        return b;
    }
    double max_score() const {
        const auto* b = best();
        return b ? b->score : -std::numeric_limits<double>::infinity();
    }
};

inline std::map<ObsId, double> visitation_weights(const Dataset& data) {
    std::map<ObsId, double> w;
    double n = 0.0;
    for (const auto& traj : data)
        for (const auto& st : traj) {
            w[st.observation] += 1.0;
            n += 1.0;
        }
    for (auto& [o, x] : w) x /= n;
    return w;
}

/// Evaluate one split candidate. Returns nullopt (with `why`) when the
/// candidate cannot be formed.
inline std::optional<SplitProposal> evaluate_candidate(const Dataset& data, ObsId target, ObsId child1, ObsId child2,
                                                       const Policy& behavior, double v_old, const ProposeConfig& cfg,
                                                       std::uint64_t seed, int episode, int index, std::string& why) {
    if (occurrences(data, target) < 2) {
        why = "fewer than two occurrences";
        return std::nullopt;
    }
    Rng em_rng = substream(seed, episode, index, 0);
    EmOptions em_opts = cfg.em;
    if (cfg.n_actions > 0) em_opts.n_actions = cfg.n_actions;
    const EmModel model = em_split(data, target, child1, child2, em_rng, em_opts);
    SplitLabels labels = viterbi_relabel(data, model);
    std::size_t n1 = 0, n2 = 0;
    for (const auto& row : labels.labels)
        for (auto l : row) {
            n1 += l == 1;
            n2 += l == 2;
        }
    if (cfg.skip_degenerate && (n1 == 0 || n2 == 0)) {
        why = "all occurrences decoded to one child";
        return std::nullopt;
    }
    const Dataset relabeled = trajtree::relabel(data, labels);
    trajtree::TreeOptions topts = cfg.tree;
    topts.single_root = false;
    const auto tree = trajtree::build(relabeled, topts);

    std::vector<ObsId> space;
    for (ObsId o : behavior.observations())
        if (o != target) space.push_back(o);
    space.push_back(child1);
    space.push_back(child2);

    Rng opt_rng = substream(seed, episode, index, 1);
    policyopt::OptoConfig ocfg = cfg.opto;
    ocfg.eval_rollouts = cfg.n_rollouts;
    auto result = policyopt::opto(tree, behavior.num_actions(), cfg.optimistic, ocfg, opt_rng, space);

    SplitProposal p;
    p.candidate = index;
    p.target = target;
    p.child1 = child1;
    p.child2 = child2;
    p.mode = cfg.mode;
    p.episode = episode;
    p.v_old = v_old;
    p.em_loglik = model.loglik;
    p.unsplit_loglik = unsplit_log_likelihood(data, target, em_opts);

    const Policy old_aug = augment_policy(behavior, target, child1, child2);
    for (ObsId o : result.policy.observations())
        if (!old_aug.covers(o)) space.push_back(o);
    Policy old_full = old_aug;
    for (ObsId o : space) old_full.ensure(o);
    std::sort(space.begin(), space.end());
    space.erase(std::unique(space.begin(), space.end()), space.end());
    if (cfg.weighted_kl) {
        const auto w = visitation_weights(relabeled);
        p.kl = policyopt::kl_policies(old_full, result.policy, space, &w);
    } else {
        p.kl = policyopt::kl_policies(old_full, result.policy, space);
    }

    if (cfg.mode == ScoreMode::Plain) {
        p.v_new = {result.value.mean};
    } else {
        for (int b = 0; b < cfg.bootstrap; ++b) {
            Rng brng = substream(seed, episode, index, 2 + b);
            const Dataset resampled = trajtree::bootstrap_resample(relabeled, brng);
            const auto btree = trajtree::build(resampled, topts);
            p.v_new.push_back(policyopt::opte(result.policy, btree, cfg.n_rollouts, cfg.optimistic, brng, cfg.opto.leaf).mean);
        }
    }
    p.score = p.recompute_score();
    p.assignments = std::move(labels);
    p.candidate_policy = std::move(result.policy);
    return p;
}

/// Score a split of every observation of `obs` against the old policy.
inline ProposalRound evaluate_candidates(const Dataset& data, const envs::ObservationSpace& obs,
                                         const trajtree::TrajectoryTree& tree, const Policy& behavior,
                                         const ProposeConfig& cfg, std::uint64_t seed, int episode) {
    if (data.empty()) throw InvalidArgument("cannot propose splits without data");
    if (cfg.mode == ScoreMode::Bootstrap && cfg.bootstrap < 2)
        throw InvalidArgument("bootstrap scoring needs B >= 2");
    ProposalRound round;
    Policy old = behavior;
    if (cfg.old_policy == OldPolicy::Reoptimized) {
        Rng orng = substream(seed, episode, -2);
        old = policyopt::opto(tree, behavior.num_actions(), cfg.optimistic, cfg.opto, orng, obs.observations()).policy;
    }
    Rng vrng = substream(seed, episode, -1);
    round.v_old = policyopt::opte(old, tree, cfg.n_rollouts, cfg.optimistic, vrng, cfg.opto.leaf).mean;
    round.old_policy = old;

    const auto [child1, child2] = obs.next_children();
    const auto& targets = obs.observations();
    std::vector<std::optional<SplitProposal>> results(targets.size());
    std::vector<std::string> reasons(targets.size());
    auto work = [&](std::size_t i) {
        if (!old.covers(targets[i])) {
            reasons[i] = "old policy does not cover the observation";
            return;
        }
        results[i] = evaluate_candidate(data, targets[i], child1, child2, old, round.v_old, cfg, seed, episode,
                                        static_cast<int>(i), reasons[i]);
    };
    if (cfg.threads <= 1) {
        for (std::size_t i = 0; i < targets.size(); ++i) work(i);
    } else {
        std::vector<std::future<void>> jobs;
        std::size_t next = 0;
        while (next < targets.size() || !jobs.empty()) {
            while (next < targets.size() && jobs.size() < static_cast<std::size_t>(cfg.threads))
                jobs.push_back(std::async(std::launch::async, work, next++));
            jobs.front().get();
            jobs.erase(jobs.begin());
        }
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (results[i])
            round.candidates.push_back(std::move(*results[i]));
        else
            round.skipped.emplace_back(targets[i], reasons[i]);
    }
    return round;
}

/// Best candidate if its score reaches the threshold.
inline std::optional<SplitProposal> propose(const Dataset& data, const envs::ObservationSpace& obs,
                                            const trajtree::TrajectoryTree& tree, const Policy& behavior,
                                            const ProposeConfig& cfg, std::uint64_t seed, int episode) {
    const ProposalRound round = evaluate_candidates(data, obs, tree, behavior, cfg, seed, episode);
    const SplitProposal* best = round.best();
    if (!best || best->score < cfg.threshold) return std::nullopt;
    return *best;
}

}  // namespace vdr::augment
