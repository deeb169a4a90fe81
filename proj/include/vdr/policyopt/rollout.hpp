#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "vdr/policyopt/policy.hpp"
#include "vdr/trajtree/tree.hpp"
#include "vdr/types.hpp"

namespace vdr::policyopt {

using trajtree::NodeId;
using trajtree::TrajectoryTree;

/// What a leaf returns for an (o, a) pair with no logged data when the
/// optimism flag is off.
enum class UnseenValue {
    /// Zero.
    Zero,
    /// The count-weighted mean return logged at o (falling back to the mean
    /// over all steps when o itself was never logged).
    ObservationMean,
};

struct LeafOptions {
    UnseenValue unseen = UnseenValue::ObservationMean;
};

/// Scale of the optimism bonus, r_max / (1 - gamma). For gamma = 1 the
/// horizon replaces the geometric sum.
inline double bonus_scale(const TrajectoryTree& tree) {
    const auto& o = tree.options();
    if (o.gamma < 1.0) return o.r_max / (1.0 - o.gamma);
    return o.r_max * (tree.max_depth() + 1);
}

/// Count-based optimism bonus for one (o, a) pair.
inline double optimism_bonus(double r_max, double gamma, int n_o, int n_oa) {
    return r_max / (1.0 - gamma) * std::sqrt(std::log(static_cast<double>(n_o)) / n_oa);
}

/// Bootstrap value used when a rollout leaves the logged data at (o, a).
inline double leaf_value(const TrajectoryTree& tree, ObsId o, ActionId a, bool opt,
                         const LeafOptions& leaf = {}) {
    const auto& q = tree.qstats();
    const int n_oa = q.n_oa(o, a);
    if (opt) {
        const double scale = bonus_scale(tree);
        if (n_oa == 0) return scale;
        const double n_o = q.n_o(o);
        return q.q(o, a) + scale * std::sqrt(std::log(n_o) / n_oa);
    }
    if (n_oa > 0) return q.q(o, a);
    if (leaf.unseen == UnseenValue::Zero) return 0.0;
    if (auto v = q.v(o)) return *v;
    return q.overall_mean();
}

struct NextResult {
    /// Child node, or trajtree::kNoNode when the rollout ended.
    NodeId node = trajtree::kNoNode;
    double reward = 0.0;
    bool done = false;
    /// True when the phantom "unseen outcome" was drawn.
    bool unseen = false;
};

/// One simulated transition from `node` under action `a`.
///
/// Children are drawn in proportion to their counts, with the tree's
/// pseudo-count reserved for an unobserved outcome. Drawing that outcome, or
/// taking an action never logged at this node, ends the rollout with the
/// model-free bootstrap value.
inline NextResult next(const TrajectoryTree& tree, NodeId node, ActionId a, bool opt, Rng& rng,
                       const LeafOptions& leaf = {}) {
    const auto& n = tree.node(node);
    const auto& outs = n.outcomes(a);
    double total = 0.0;
    for (const auto& e : outs) total += e.count;
    const double c = tree.options().pseudo_count;
    double u = uniform01(rng) * (total + c);
    if (total > 0.0 && u < total) {
        for (const auto& e : outs) {
            if (u < e.count || &e == &outs.back()) {
                double r = e.mean_reward();
                if (tree.options().playback == trajtree::RewardPlayback::Sample)
                    r = e.rewards[uniform_index(rng, e.rewards.size())];
                return {e.child, r, e.done, false};
            }
            u -= e.count;
        }
    }
    return {trajtree::kNoNode, leaf_value(tree, n.observation, a, opt, leaf), true, true};
}

/// Probability that `next` draws the unseen outcome for (node, a).
inline double unseen_probability(const TrajectoryTree& tree, NodeId node, ActionId a) {
    const double total = tree.node(node).action_count(a);
    const double c = tree.options().pseudo_count;
    if (total + c <= 0.0) return 1.0;
    return c / (total + c);
}

inline NodeId sample_root(const TrajectoryTree& tree, Rng& rng) {
    const auto& roots = tree.roots();
    if (roots.size() == 1) return roots.front();
    std::vector<double> w;
    w.reserve(roots.size());
    for (NodeId r : roots) w.push_back(tree.node(r).count);
    return roots[sample_categorical(w, rng)];
}

struct SimStep {
    ObsId observation;
    ActionId action;
    double reward;
};

/// One rollout on the tree; returns the visited (o, a, r) sequence.
template <typename Sampler>
void simulate(const Sampler& policy, const TrajectoryTree& tree, bool opt, Rng& rng,
              std::vector<SimStep>& out, const LeafOptions& leaf = {}) {
    out.clear();
    NodeId node = sample_root(tree, rng);
    while (true) {
        const ObsId o = tree.node(node).observation;
        const ActionId a = policy.sample(o, rng);
        const NextResult res = next(tree, node, a, opt, rng, leaf);
        out.push_back({o, a, res.reward});
        if (res.done) break;
        node = res.node;
    }
}

inline double discounted(const std::vector<SimStep>& steps, double gamma) {
    double g = 0.0;
    for (std::size_t t = steps.size(); t-- > 0;) g = steps[t].reward + gamma * g;
    return g;
}

struct ValueEstimate {
    double mean = 0.0;
    int n_rollouts = 0;
    bool optimistic = false;

    friend bool operator==(const ValueEstimate&, const ValueEstimate&) = default;
};

/// Off-policy tree evaluation: mean discounted return of `n` rollouts.
template <typename Sampler>
ValueEstimate opte(const Sampler& policy, const TrajectoryTree& tree, int n, bool opt, Rng& rng,
                   const LeafOptions& leaf = {}) {
    if (n < 1) throw InvalidArgument("OPTE needs at least one rollout");
    if (tree.empty()) throw InvalidArgument("OPTE on an empty tree");
    std::vector<SimStep> steps;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        simulate(policy, tree, opt, rng, steps, leaf);
        total += discounted(steps, tree.options().gamma);
    }
    return {total / n, n, opt};
}

}  // namespace vdr::policyopt
