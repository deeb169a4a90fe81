#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdr/augment/propose.hpp"
#include "vdr/envs/observation_space.hpp"
#include "vdr/loop/run.hpp"
#include "vdr/policyopt/policy.hpp"
#include "vdr/trajtree/tree.hpp"

namespace vdr::io {

using json = nlohmann::json;

/// Malformed or schema-violating document.
class SchemaError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// ---- observation space ----

inline json to_json(const envs::ObservationSpace& obs) {
    json assignment = json::object();
    for (std::size_t s = 0; s < obs.assignment().size(); ++s) assignment[std::to_string(s)] = obs.assignment()[s];
    json log = json::array();
    for (const auto& r : obs.split_log())
        log.push_back({{"parent", r.parent}, {"child1", r.child1}, {"child2", r.child2}, {"episode", r.episode}});
    return {{"observations", obs.observations()}, {"assignment", assignment}, {"split_log", log}};
}

inline envs::ObservationSpace observation_space_from_json(const json& j) {
    try {
        const auto& a = j.at("assignment");
        std::vector<ObsId> assignment(a.size(), -1);
        for (const auto& [k, v] : a.items()) {
            const std::size_t s = std::stoul(k);
            if (s >= assignment.size()) throw SchemaError("assignment state ids must be dense");
            assignment[s] = v.get<ObsId>();
        }
        std::vector<envs::SplitRecord> log;
        for (const auto& r : j.at("split_log"))
            log.push_back({r.at("parent").get<ObsId>(), r.at("child1").get<ObsId>(), r.at("child2").get<ObsId>(),
                           r.at("episode").get<int>()});
        envs::ObservationSpace out(std::move(assignment), std::move(log));
        if (j.contains("observations") && j.at("observations").get<std::vector<ObsId>>() != out.observations())
            throw SchemaError("observation list disagrees with the assignment");
        return out;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad observation space: ") + e.what());
    } catch (const std::logic_error& e) {
        throw SchemaError(std::string("bad observation space: ") + e.what());
    }
}

// ---- policy ----

inline json to_json(const policyopt::Policy& pi) {
    json out = json::object();
    for (ObsId o : pi.observations()) {
        json row = json::object();
        const auto p = pi.probs(o);
        for (std::size_t a = 0; a < p.size(); ++a) row[std::to_string(a)] = p[a];
        out[std::to_string(o)] = row;
    }
    return out;
}

inline policyopt::Policy policy_from_json(const json& j) {
    try {
        std::map<ObsId, std::vector<double>> rows;
        for (const auto& [k, row] : j.items()) {
            std::vector<double> p(row.size(), 0.0);
            for (const auto& [ak, v] : row.items()) {
                const std::size_t a = std::stoul(ak);
                if (a >= p.size()) throw SchemaError("action ids must be dense");
                p[a] = v.get<double>();
            }
            rows[std::stoi(k)] = std::move(p);
        }
        return policyopt::Policy::from_probabilities(rows);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad policy: ") + e.what());
    } catch (const std::logic_error& e) {
        throw SchemaError(std::string("bad policy: ") + e.what());
    }
}

// ---- trajectories ----

inline json to_json(const Step& s) {
    json j = {{"observation", s.observation}, {"action", s.action}, {"reward", s.reward}, {"done", s.done}};
    if (s.true_state) j["true_state"] = *s.true_state;
    return j;
}

inline json to_json(const Trajectory& traj) {
    json j = json::array();
    for (const auto& s : traj) j.push_back(to_json(s));
    return j;
}

inline Trajectory trajectory_from_json(const json& j) {
    try {
        Trajectory traj;
        for (const auto& s : j) {
            Step st{s.at("observation").get<ObsId>(), s.at("action").get<ActionId>(), s.at("reward").get<double>(),
                    s.at("done").get<bool>(), std::nullopt};
            if (s.contains("true_state")) st.true_state = s.at("true_state").get<StateId>();
            traj.push_back(st);
        }
        return traj;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad trajectory: ") + e.what());
    }
}

/// One trajectory per line.
inline void write_jsonl(std::ostream& os, const Dataset& data) {
    for (const auto& t : data) os << to_json(t).dump() << '\n';
}

inline Dataset read_jsonl(std::istream& is) {
    Dataset data;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            data.push_back(trajectory_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw SchemaError(std::string("bad JSON line: ") + e.what());
        }
    }
    return data;
}

// ---- trajectory tree ----

inline json to_json(const trajtree::TrajectoryTree& tree) {
    const auto& o = tree.options();
    json nodes = json::array();
    for (const auto& n : tree.nodes()) {
        json edges = json::array();
        for (std::size_t a = 0; a < n.edges.size(); ++a)
            for (const auto& e : n.edges[a])
                edges.push_back({{"action", a},
                                 {"child", e.child},
                                 {"next_observation", e.next_observation},
                                 {"count", e.count},
                                 {"rewards", e.rewards},
                                 {"done", e.done}});
        nodes.push_back(
            {{"id", n.id}, {"observation", n.observation}, {"depth", n.depth}, {"count", n.count}, {"edges", edges}});
    }
    json q = json::array();
    const auto& qs = tree.qstats();
    for (ObsId ob : qs.observations())
        for (ActionId a = 0; a < qs.width(ob); ++a)
            if (qs.n_oa(ob, a) > 0)
                q.push_back({{"observation", ob}, {"action", a}, {"n", qs.n_oa(ob, a)}, {"sum", qs.sum(ob, a)},
                             {"q", qs.q(ob, a)}});
    return {{"options",
             {{"gamma", o.gamma},
              {"pseudo_count", o.pseudo_count},
              {"r_max", o.r_max},
              {"playback", o.playback == trajtree::RewardPlayback::Mean ? "mean" : "sample"},
              {"single_root", o.single_root}}},
            {"n_trajectories", tree.num_trajectories()},
            {"roots", tree.roots()},
            {"nodes", nodes},
            {"qstats", q}};
}

inline trajtree::TrajectoryTree tree_from_json(const json& j) {
    try {
        const auto& jo = j.at("options");
        trajtree::TreeOptions o;
        o.gamma = jo.at("gamma").get<double>();
        o.pseudo_count = jo.at("pseudo_count").get<double>();
        o.r_max = jo.at("r_max").get<double>();
        o.playback = jo.at("playback").get<std::string>() == "sample" ? trajtree::RewardPlayback::Sample
                                                                      : trajtree::RewardPlayback::Mean;
        o.single_root = jo.at("single_root").get<bool>();
        std::vector<trajtree::TreeNode> nodes;
        for (const auto& jn : j.at("nodes")) {
            trajtree::TreeNode n;
            n.id = jn.at("id").get<trajtree::NodeId>();
            n.observation = jn.at("observation").get<ObsId>();
            n.depth = jn.at("depth").get<int>();
            n.count = jn.at("count").get<int>();
            for (const auto& je : jn.at("edges")) {
                const auto a = je.at("action").get<std::size_t>();
                if (a >= n.edges.size()) n.edges.resize(a + 1);
                trajtree::Edge e;
                e.child = je.at("child").get<trajtree::NodeId>();
                e.next_observation = je.at("next_observation").get<ObsId>();
                e.count = je.at("count").get<int>();
                e.rewards = je.at("rewards").get<std::vector<double>>();
                e.done = je.at("done").get<bool>();
                if (static_cast<std::size_t>(e.count) != e.rewards.size())
                    throw SchemaError("edge count must equal the number of rewards");
                n.edges[a].push_back(std::move(e));
            }
            if (static_cast<std::size_t>(n.id) != nodes.size()) throw SchemaError("node ids must be dense and ordered");
            nodes.push_back(std::move(n));
        }
        trajtree::QStats q;
        for (const auto& jq : j.at("qstats"))
            q.add_many(jq.at("observation").get<ObsId>(), jq.at("action").get<ActionId>(), jq.at("n").get<int>(),
                       jq.at("sum").get<double>());
        return trajtree::TrajectoryTree::from_parts(o, std::move(nodes),
                                                    j.at("roots").get<std::vector<trajtree::NodeId>>(), std::move(q),
                                                    j.at("n_trajectories").get<int>());
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad tree: ") + e.what());
    }
}

/// Size figures for the console's tree panel.
inline json tree_summary(const trajtree::TrajectoryTree& tree) {
    std::size_t edges = 0;
    for (const auto& n : tree.nodes())
        for (const auto& row : n.edges) edges += row.size();
    json roots = json::array();
    for (auto r : tree.roots()) roots.push_back({{"observation", tree.node(r).observation}, {"count", tree.node(r).count}});
    return {{"n_trajectories", tree.num_trajectories()},
            {"n_nodes", tree.nodes().size()},
            {"n_edges", edges},
            {"max_depth", tree.empty() ? 0 : tree.max_depth()},
            {"roots", roots},
            {"observations", tree.observations()}};
}

// ---- proposals ----

inline constexpr std::size_t kMaxExemplars = 20;

/// Empirical statistics of each child in the relabeled data, plus up to
/// kMaxExemplars trajectory fragments around occurrences of the target.
inline json proposal_evidence(const augment::SplitProposal& p, const Dataset& data, int n_actions) {
    struct ChildStats {
        int occurrences = 0;
        std::vector<int> n;
        std::vector<double> reward_sum;
        std::vector<std::map<ObsId, int>> next;
    };
    std::map<int, ChildStats> stats;
    for (int l : {1, 2}) {
        auto& cs = stats[l];
        cs.n.assign(static_cast<std::size_t>(n_actions), 0);
        cs.reward_sum.assign(static_cast<std::size_t>(n_actions), 0.0);
        cs.next.resize(static_cast<std::size_t>(n_actions));
    }
    const auto& L = p.assignments.labels;
    const Dataset relabeled = L.empty() ? data : trajtree::relabel(data, p.assignments);
    json exemplars = json::array();
    std::map<int, std::size_t> per_child;
    for (std::size_t i = 0; i < data.size() && i < L.size(); ++i) {
        const auto& traj = data[i];
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const int l = L[i][t];
            if (l == 0) continue;
            auto& cs = stats[l];
            const auto a = static_cast<std::size_t>(traj[t].action);
            cs.occurrences += 1;
            if (a < cs.n.size()) {
                cs.n[a] += 1;
                cs.reward_sum[a] += traj[t].reward;
                const ObsId nxt = t + 1 < traj.size() ? relabeled[i][t + 1].observation : trajtree::kEndOfEpisode;
                cs.next[a][nxt] += 1;
            }
            if (per_child[l] < kMaxExemplars / 2) {
                per_child[l] += 1;
                const std::size_t lo = t >= 2 ? t - 2 : 0;
                const std::size_t hi = std::min(traj.size(), t + 3);
                json steps = json::array();
                for (std::size_t k = lo; k < hi; ++k)
                    steps.push_back({{"observation", relabeled[i][k].observation},
                                     {"original_observation", traj[k].observation},
                                     {"action", traj[k].action},
                                     {"reward", traj[k].reward},
                                     {"label", L[i][k]}});
                exemplars.push_back({{"trajectory", i}, {"step", t}, {"child", p.assignments.child(static_cast<std::uint8_t>(l))}, {"steps", steps}});
            }
        }
    }
    json children = json::array();
    for (int l : {1, 2}) {
        const auto& cs = stats[l];
        json actions = json::array();
        for (std::size_t a = 0; a < cs.n.size(); ++a) {
            json next = json::object();
            for (const auto& [o, c] : cs.next[a]) next[std::to_string(o)] = c;
            actions.push_back({{"action", a},
                               {"count", cs.n[a]},
                               {"mean_reward", cs.n[a] > 0 ? cs.reward_sum[a] / cs.n[a] : 0.0},
                               {"next_observations", next}});
        }
        children.push_back({{"child", l == 1 ? p.child1 : p.child2}, {"occurrences", cs.occurrences}, {"actions", actions}});
    }
    json j = {{"target", p.target},
              {"child1", p.child1},
              {"child2", p.child2},
              {"episode", p.episode},
              {"mode", augment::to_string(p.mode)},
              {"score", p.score},
              {"kl", p.kl},
              {"v_old", p.v_old},
              {"v_new", p.v_new},
              {"v_new_mean", augment::mean(p.v_new)},
              {"v_new_std", augment::sample_std(p.v_new)},
              {"gain", augment::mean(p.v_new) - p.v_old},
              {"em_loglik", p.em_loglik},
              {"unsplit_loglik", p.unsplit_loglik},
              {"candidate_policy", to_json(p.candidate_policy)},
              {"children", children},
              {"exemplars", exemplars}};
    return j;
}

// ---- run records ----

inline json to_json(const EpisodeRecord& e) {
    return {{"type", "episode"},
            {"episode", e.episode},
            {"return", e.ret},
            {"length", e.length},
            {"reached_goal", e.reached_goal},
            {"obs_size", e.obs_size}};
}

inline json to_json(const ProposalLogEntry& p) {
    return {{"type", "decision"},      {"id", p.id},
            {"episode", p.episode},    {"target", p.target},
            {"child1", p.child1},      {"child2", p.child2},
            {"score", p.score},        {"kl", p.kl},
            {"v_old", p.v_old},        {"v_new_mean", p.v_new_mean},
            {"above_threshold", p.above_threshold},
            {"applied", p.applied},    {"outcome", p.outcome},
            {"decided_by", p.decided_by}};
}

// ---- configuration ----

inline const char* to_string(policyopt::UnseenValue u) {
    return u == policyopt::UnseenValue::Zero ? "zero" : "observation_mean";
}

inline json to_json(const VdrConfig& c) {
    return {{"env", c.env},
            {"gamma", c.gamma},
            {"max_episode_len", c.max_episode_len},
            {"c", c.c},
            {"propose_every", c.propose_every},
            {"n_rollouts", c.n_rollouts},
            {"bootstrap", c.bootstrap},
            {"score_mode", augment::to_string(c.score_mode)},
            {"total_episodes", c.total_episodes},
            {"seed", c.seed},
            {"designer", to_string(c.designer)},
            {"optimize_every", c.optimize_every},
            {"pseudo_count", c.pseudo_count},
            {"learning_rate", c.learning_rate},
            {"opto_episodes", c.opto_episodes},
            {"final_opto_episodes", c.final_opto_episodes},
            {"behavior_optimistic", c.behavior_optimistic},
            {"candidate_optimistic", c.candidate_optimistic},
            {"greedy_behavior", c.greedy_behavior},
            {"weighted_kl", c.weighted_kl},
            {"old_policy", c.old_policy == augment::OldPolicy::Behavior ? "behavior" : "reoptimized"},
            {"unseen_value", to_string(c.unseen_value)},
            {"reward_playback", c.playback == trajtree::RewardPlayback::Mean ? "mean" : "sample"},
            {"em_restarts", c.em_restarts},
            {"decision_deadline_s", c.decision_deadline_s},
            {"threads", c.threads}};
}

/// Overlay the keys of `j` onto `base`. Unknown keys and wrongly typed values
/// are schema errors.
inline VdrConfig config_from_json(const json& j, VdrConfig base = {}) {
    if (!j.is_object()) throw SchemaError("config must be a JSON object");
    static const std::set<std::string> known = [] {
        std::set<std::string> k;
        const json defaults = to_json(VdrConfig{});
        for (const auto& [key, _] : defaults.items()) k.insert(key);
        return k;
    }();
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw SchemaError("unknown config key: " + key);
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        auto get_num = [&](const char* key, auto& field) {
            if (!j.contains(key)) return;
            if (!j.at(key).is_number()) throw SchemaError(std::string("config key ") + key + " must be a number");
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        auto get_bool = [&](const char* key, bool& field) {
            if (!j.contains(key)) return;
            if (!j.at(key).is_boolean()) throw SchemaError(std::string("config key ") + key + " must be a boolean");
            field = j.at(key).get<bool>();
        };
        get("env", base.env);
        get_num("gamma", base.gamma);
        get_num("max_episode_len", base.max_episode_len);
        get_num("c", base.c);
        get_num("propose_every", base.propose_every);
        get_num("n_rollouts", base.n_rollouts);
        get_num("bootstrap", base.bootstrap);
        if (j.contains("score_mode")) base.score_mode = augment::score_mode_from(j.at("score_mode").get<std::string>());
        get_num("total_episodes", base.total_episodes);
        get_num("seed", base.seed);
        if (j.contains("designer")) base.designer = designer_mode_from(j.at("designer").get<std::string>());
        get_num("optimize_every", base.optimize_every);
        get_num("pseudo_count", base.pseudo_count);
        get_num("learning_rate", base.learning_rate);
        get_num("opto_episodes", base.opto_episodes);
        get_num("final_opto_episodes", base.final_opto_episodes);
        get_bool("behavior_optimistic", base.behavior_optimistic);
        get_bool("candidate_optimistic", base.candidate_optimistic);
        get_bool("greedy_behavior", base.greedy_behavior);
        get_bool("weighted_kl", base.weighted_kl);
        if (j.contains("old_policy")) {
            const auto v = j.at("old_policy").get<std::string>();
            if (v != "behavior" && v != "reoptimized") throw SchemaError("old_policy must be behavior or reoptimized");
            base.old_policy = v == "behavior" ? augment::OldPolicy::Behavior : augment::OldPolicy::Reoptimized;
        }
        if (j.contains("unseen_value")) {
            const auto v = j.at("unseen_value").get<std::string>();
            if (v != "zero" && v != "observation_mean") throw SchemaError("unseen_value must be zero or observation_mean");
            base.unseen_value = v == "zero" ? policyopt::UnseenValue::Zero : policyopt::UnseenValue::ObservationMean;
        }
        if (j.contains("reward_playback")) {
            const auto v = j.at("reward_playback").get<std::string>();
            if (v != "mean" && v != "sample") throw SchemaError("reward_playback must be mean or sample");
            base.playback = v == "mean" ? trajtree::RewardPlayback::Mean : trajtree::RewardPlayback::Sample;
        }
        get_num("em_restarts", base.em_restarts);
        get_num("decision_deadline_s", base.decision_deadline_s);
        get_num("threads", base.threads);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("bad config: ") + e.what());
    }
    if (std::find(envs::env_ids().begin(), envs::env_ids().end(), base.env) == envs::env_ids().end())
        throw SchemaError("unknown environment id: " + base.env);
    (void)base.resolved();
    return base;
}

}  // namespace vdr::io
