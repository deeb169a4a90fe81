#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vdr/augment/propose.hpp"
#include "vdr/envs/episode.hpp"
#include "vdr/loop/augment_policy.hpp"
#include "vdr/policyopt/reinforce.hpp"
#include "vdr/trajtree/tree.hpp"

namespace vdr {

enum class DesignerMode { Simulated, Interactive };

inline const char* to_string(DesignerMode m) { return m == DesignerMode::Simulated ? "simulated" : "interactive"; }

inline DesignerMode designer_mode_from(const std::string& s) {
    if (s == "simulated") return DesignerMode::Simulated;
    if (s == "interactive") return DesignerMode::Interactive;
    throw InvalidArgument("unknown designer mode: " + s);
}

struct VdrConfig {
    std::string env = "cheese-maze";
    /// 0 keeps the environment default.
    double gamma = 0.0;
    /// 0 keeps the environment default episode length.
    int max_episode_len = 0;
    /// Split acceptance threshold.
    double c = 0.25;
    /// Episodes between proposal rounds; 0 picks the environment default.
    int propose_every = 0;
    int n_rollouts = 100;
    int bootstrap = 10;
    augment::ScoreMode score_mode = augment::ScoreMode::Bootstrap;
    /// 0 picks the environment default.
    int total_episodes = 0;
    std::uint64_t seed = 0;
    DesignerMode designer = DesignerMode::Simulated;
    /// Episodes between optimistic re-optimizations of the behavior policy.
    int optimize_every = 1;
    double pseudo_count = 1.0;
    double learning_rate = 0.1;
    int opto_episodes = 2000;
    /// Budget of the non-optimistic optimization that produces the final policy.
    int final_opto_episodes = 30000;
    /// Optimism flags of the behavior optimization and of candidate scoring.
    bool behavior_optimistic = true;
    /// Act greedily with respect to the optimized behavior policy instead of
    /// sampling from it.
    bool greedy_behavior = false;
    bool candidate_optimistic = false;
    bool weighted_kl = false;
    augment::OldPolicy old_policy = augment::OldPolicy::Reoptimized;
    policyopt::UnseenValue unseen_value = policyopt::UnseenValue::ObservationMean;
    trajtree::RewardPlayback playback = trajtree::RewardPlayback::Mean;
    int em_restarts = 5;
    /// Seconds an interactive proposal waits before it expires.
    double decision_deadline_s = 300.0;
    int threads = 1;

    /// Fill environment-dependent defaults and check ranges.
    VdrConfig resolved() const {
        VdrConfig c2 = *this;
        const bool mc = env == "mountain-car-8x8";
        if (c2.propose_every == 0) c2.propose_every = mc ? 20 : 5;
        if (c2.total_episodes == 0) c2.total_episodes = mc ? 300 : env == "cheese-maze" ? 200 : 100;
        const envs::EnvBundle e = envs::make_env(env, gamma, max_episode_len);
        c2.gamma = e.gamma();
        c2.max_episode_len = e.max_episode_len();
        c2.validate();
        return c2;
    }

    void validate() const {
        if (!(c >= 0.0)) throw InvalidArgument("c must be nonnegative");
        if (propose_every < 1) throw InvalidArgument("propose_every must be at least 1");
        if (total_episodes < 1) throw InvalidArgument("total_episodes must be at least 1");
        if (optimize_every < 1) throw InvalidArgument("optimize_every must be at least 1");
        if (n_rollouts < 1) throw InvalidArgument("n_rollouts must be at least 1");
        if (score_mode == augment::ScoreMode::Bootstrap && bootstrap < 2)
            throw InvalidArgument("bootstrap must be at least 2");
        if (gamma < 0.0 || gamma > 1.0) throw InvalidArgument("gamma must lie in (0, 1]");
        if (pseudo_count < 0.0) throw InvalidArgument("pseudo_count must be nonnegative");
        if (final_opto_episodes < 0) throw InvalidArgument("final_opto_episodes must be nonnegative");
        if (opto_episodes < 0) throw InvalidArgument("opto_episodes must be nonnegative");
        if (em_restarts < 1) throw InvalidArgument("em_restarts must be at least 1");
        if (decision_deadline_s < 0.0) throw InvalidArgument("decision_deadline_s must be nonnegative");
    }
};

struct EpisodeRecord {
    int episode = 0;
    double ret = 0.0;
    int length = 0;
    bool reached_goal = false;
    std::size_t obs_size = 0;
};

enum class DecisionStatus { Approved, Rejected, Expired };

inline const char* to_string(DecisionStatus s) {
    switch (s) {
        case DecisionStatus::Approved: return "approved";
        case DecisionStatus::Rejected: return "rejected";
        default: return "expired";
    }
}

struct Decision {
    DecisionStatus status = DecisionStatus::Rejected;
    /// "simulated", "human" or "timeout".
    std::string decided_by = "simulated";
};

struct ProposalLogEntry {
    std::string id;
    int episode = 0;
    ObsId target = 0;
    ObsId child1 = 0;
    ObsId child2 = 0;
    double score = 0.0;
    double kl = 0.0;
    double v_old = 0.0;
    double v_new_mean = 0.0;
    bool above_threshold = false;
    bool applied = false;
    /// "below_threshold", "no_candidates", "approved", "rejected", "expired"
    /// or "vacuous" (the mapping moved no state).
    std::string outcome;
    std::string decided_by;
};

struct PhaseTimes {
    double optimize_s = 0.0;
    double act_s = 0.0;
    double propose_s = 0.0;
    double decide_s = 0.0;
    double final_s = 0.0;
};

struct RunRecord {
    std::vector<EpisodeRecord> episodes;
    std::vector<ProposalLogEntry> proposals;
    PhaseTimes times;
    envs::ObservationSpace final_observations;
    policyopt::Policy final_policy;
    policyopt::Policy behavior_policy;
    Dataset data;

    std::vector<double> returns() const {
        std::vector<double> r;
        for (const auto& e : episodes) r.push_back(e.ret);
        return r;
    }
    int accepted_splits() const {
        int n = 0;
        for (const auto& p : proposals) n += p.applied;
        return n;
    }
};

/// Callbacks into the surrounding harness. All are optional except `decide`
/// in interactive mode.
struct RunHooks {
    std::function<void(const EpisodeRecord&)> on_episode;
    std::function<void(const augment::ProposalRound&, int episode)> on_round;
    /// Receives the proposal id, the proposal that passed the threshold and
    /// the data it was computed from.
    std::function<Decision(const std::string&, const augment::SplitProposal&, const Dataset&)> decide;
    /// Called after every episode with the data and space as they stand.
    std::function<void(const Dataset&, const envs::ObservationSpace&)> on_data;
    std::function<void(const ProposalLogEntry&, const envs::ObservationSpace&)> on_decision;
    std::function<void(const policyopt::Policy&, int episode)> on_policy;
};

namespace detail {

// Substream tags.
inline constexpr std::uint64_t kTagAct = 1, kTagOptimize = 2, kTagPropose = 3, kTagFinal = 4;

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline bool reached_goal(const envs::EnvBundle& env, const Trajectory& traj) {
    if (env.id != "mountain-car-8x8") return false;
    return !traj.empty() && traj.back().reward == 0.0;
}

}  // namespace detail

inline trajtree::TreeOptions tree_options(const VdrConfig& cfg, const envs::EnvBundle& env) {
    trajtree::TreeOptions t;
    t.gamma = env.gamma();
    t.pseudo_count = cfg.pseudo_count;
    t.r_max = env.r_max();
    t.playback = cfg.playback;
    t.single_root = false;
    return t;
}

inline augment::ProposeConfig propose_config(const VdrConfig& cfg, const envs::EnvBundle& env) {
    augment::ProposeConfig p;
    p.mode = cfg.score_mode;
    p.bootstrap = cfg.bootstrap;
    p.n_rollouts = cfg.n_rollouts;
    p.threshold = cfg.c;
    p.weighted_kl = cfg.weighted_kl;
    p.old_policy = cfg.old_policy;
    p.optimistic = cfg.candidate_optimistic;
    p.threads = cfg.threads;
    p.em.restarts = cfg.em_restarts;
    p.em.n_actions = env.num_actions();
    p.opto.learning_rate = cfg.learning_rate;
    p.opto.episodes = cfg.opto_episodes;
    p.opto.eval_rollouts = cfg.n_rollouts;
    p.opto.leaf.unseen = cfg.unseen_value;
    p.tree = tree_options(cfg, env);
    p.n_actions = env.num_actions();
    return p;
}

/// The VDR loop: optimistic tree optimization, one episode, and every
/// `propose_every` episodes a split proposal routed to the designer.
inline RunRecord run(VdrConfig config, const RunHooks& hooks = {}) {
    const VdrConfig cfg = config.resolved();
    if (cfg.designer == DesignerMode::Interactive && !hooks.decide)
        throw InvalidArgument("interactive mode needs a decision hook");
    envs::EnvBundle env = envs::make_env(cfg.env, cfg.gamma, cfg.max_episode_len);
    const int n_actions = env.num_actions();
    const auto topts = tree_options(cfg, env);
    const auto pcfg = propose_config(cfg, env);
    policyopt::OptoConfig ocfg = pcfg.opto;

    RunRecord rec;
    envs::ObservationSpace obs = env.observations;
    Dataset data;
    policyopt::Policy behavior = policyopt::Policy::uniform(obs.observations(), n_actions);
    int n_rounds = 0;

    for (int ep = 0; ep < cfg.total_episodes; ++ep) {
        auto t0 = std::chrono::steady_clock::now();
        if (!data.empty() && ep % cfg.optimize_every == 0) {
            const auto tree = trajtree::build(data, topts);
            Rng rng = substream(cfg.seed, detail::kTagOptimize, ep);
            behavior = policyopt::opto(tree, n_actions, cfg.behavior_optimistic, ocfg, rng, obs.observations()).policy;
            if (hooks.on_policy) hooks.on_policy(behavior, ep);
        }
        for (ObsId o : obs.observations()) behavior.ensure(o);
        rec.times.optimize_s += detail::seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        Rng act_rng = substream(cfg.seed, detail::kTagAct, ep);
        const policyopt::Policy& actor = cfg.greedy_behavior ? behavior.greedy_policy() : behavior;
        Trajectory traj = std::visit([&](auto& e) { return envs::run_episode(e, obs, actor, act_rng); }, env.env);
        const EpisodeRecord er{ep, undiscounted_return(traj), static_cast<int>(traj.size()),
                               detail::reached_goal(env, traj), obs.size()};
        data.push_back(std::move(traj));
        rec.episodes.push_back(er);
        if (hooks.on_episode) hooks.on_episode(er);
        if (hooks.on_data) hooks.on_data(data, obs);
        rec.times.act_s += detail::seconds_since(t0);

        if ((ep + 1) % cfg.propose_every != 0) continue;

        t0 = std::chrono::steady_clock::now();
        const auto tree = trajtree::build(data, topts);
        const auto round = augment::evaluate_candidates(data, obs, tree, behavior, pcfg,
                                                        derive_seed(cfg.seed, detail::kTagPropose), ep);
        rec.times.propose_s += detail::seconds_since(t0);
        if (hooks.on_round) hooks.on_round(round, ep);

        ProposalLogEntry log;
        log.id = "p" + std::to_string(n_rounds++);
        log.episode = ep;
        const augment::SplitProposal* best = round.best();
        if (!best) {
            log.outcome = "no_candidates";
            rec.proposals.push_back(log);
            if (hooks.on_decision) hooks.on_decision(log, obs);
            continue;
        }
        log.target = best->target;
        log.child1 = best->child1;
        log.child2 = best->child2;
        log.score = best->score;
        log.kl = best->kl;
        log.v_old = best->v_old;
        log.v_new_mean = augment::mean(best->v_new);
        log.above_threshold = best->score >= cfg.c;
        if (!log.above_threshold) {
            log.outcome = "below_threshold";
            rec.proposals.push_back(log);
            if (hooks.on_decision) hooks.on_decision(log, obs);
            continue;
        }

        t0 = std::chrono::steady_clock::now();
        Decision d;
        if (hooks.decide)
            d = hooks.decide(log.id, *best, data);
        else
            d = {DecisionStatus::Approved, "simulated"};
        rec.times.decide_s += detail::seconds_since(t0);
        log.decided_by = d.decided_by;
        log.outcome = to_string(d.status);
        if (d.status == DecisionStatus::Approved) {
            // The designer maps every latent state to the child Viterbi chose
            // for most of its occurrences.
            envs::ObservationSpace refined = envs::resolve_split_simulated(best->assignments, data, obs, ep);
            if (refined.size() == obs.size()) {
                log.outcome = "vacuous";
            } else {
                data = trajtree::relabel(data, best->assignments);
                behavior = augment_policy(behavior, best->target, best->child1, best->child2);
                obs = std::move(refined);
                log.applied = true;
            }
        }
        rec.proposals.push_back(log);
        if (hooks.on_decision) hooks.on_decision(log, obs);
    }

    auto t0 = std::chrono::steady_clock::now();
    const auto tree = trajtree::build(data, topts);
    Rng frng = substream(cfg.seed, detail::kTagFinal);
    policyopt::OptoConfig fcfg = ocfg;
    fcfg.episodes = cfg.final_opto_episodes;
    rec.final_policy = policyopt::opto(tree, n_actions, false, fcfg, frng, obs.observations()).policy;
    for (ObsId o : obs.observations()) rec.final_policy.ensure(o);
    rec.times.final_s = detail::seconds_since(t0);
    rec.final_observations = std::move(obs);
    rec.behavior_policy = std::move(behavior);
    rec.data = std::move(data);
    return rec;
}

/// Undiscounted return of one episode of `policy` in a fresh copy of the
/// environment under `obs`.
template <typename Sampler>
double evaluate_in_env(const VdrConfig& config, const envs::ObservationSpace& obs, const Sampler& policy,
                       std::uint64_t seed, int* length = nullptr) {
    const VdrConfig cfg = config.resolved();
    envs::EnvBundle env = envs::make_env(cfg.env, cfg.gamma, cfg.max_episode_len);
    Rng rng(seed);
    const Trajectory traj = std::visit([&](auto& e) { return envs::run_episode(e, obs, policy, rng); }, env.env);
    if (length) *length = static_cast<int>(traj.size());
    return undiscounted_return(traj);
}

}  // namespace vdr
