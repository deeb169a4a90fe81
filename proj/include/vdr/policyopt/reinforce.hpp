#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vdr/policyopt/policy.hpp"
#include "vdr/policyopt/rollout.hpp"

namespace vdr::policyopt {

struct OptoConfig {
    double learning_rate = 0.1;
    /// Simulated episodes per optimization call.
    int episodes = 2000;
    /// Rollouts for the value estimate returned with the policy.
    int eval_rollouts = 100;
    /// Returns are divided by this before the update; 0 uses
    /// value_scale(tree).
    double return_scale = 0.0;
    LeafOptions leaf;
};

/// Largest discounted return magnitude the tree can produce, up to the
/// optimism bonus: r_max times the shorter of the effective horizon
/// 1 / (1 - gamma) and the longest logged episode.
inline double value_scale(const TrajectoryTree& tree) {
    const auto& o = tree.options();
    const double depth = tree.max_depth() + 1.0;
    const double horizon = o.gamma < 1.0 ? std::min(1.0 / (1.0 - o.gamma), depth) : depth;
    return std::max(o.r_max * horizon, 1e-12);
}

struct OptoResult {
    Policy policy;
    ValueEstimate value;
};

/// Called after every parameter update with the observation that changed.
using UpdateObserver = std::function<void(const Policy&, ObsId)>;

/// REINFORCE on simulated tree episodes, starting from `init`.
///
/// theta(o_t, .) += alpha * gamma^t * G_t * grad log pi(a_t | o_t), applied
/// step by step as in the textbook episodic algorithm. G_t is measured in
/// units of `return_scale` so one learning rate fits every reward range.
inline OptoResult opto_from(Policy init, const TrajectoryTree& tree, bool opt, const OptoConfig& cfg,
                            Rng& rng, const UpdateObserver& observer = {}) {
    if (tree.empty()) throw InvalidArgument("OPTO on an empty tree");
    if (cfg.episodes < 0) throw InvalidArgument("negative episode budget");
    for (ObsId o : tree.observations()) init.ensure(o);
    Policy pi = std::move(init);
    const double gamma = tree.options().gamma;
    const double alpha = cfg.learning_rate / (cfg.return_scale > 0.0 ? cfg.return_scale : value_scale(tree));
    std::vector<SimStep> steps;
    std::vector<double> returns;
    std::vector<double> probs;
    for (int ep = 0; ep < cfg.episodes; ++ep) {
        simulate(pi, tree, opt, rng, steps, cfg.leaf);
        returns.resize(steps.size());
        double g = 0.0;
        for (std::size_t t = steps.size(); t-- > 0;) returns[t] = g = steps[t].reward + gamma * g;
        if (cfg.learning_rate == 0.0) continue;
        double discount = 1.0;
        for (std::size_t t = 0; t < steps.size(); ++t) {
            const auto& st = steps[t];
            pi.probs_into(st.observation, probs);
            const double scale = alpha * discount * returns[t];
            for (std::size_t a = 0; a < probs.size(); ++a) {
                const double step = scale * ((static_cast<ActionId>(a) == st.action ? 1.0 : 0.0) - probs[a]);
                if (!std::isfinite(step))
                    throw Error("non-finite REINFORCE step at observation " + std::to_string(st.observation) +
                                " (return " + std::to_string(returns[t]) + ")");
                pi.add_logit(st.observation, static_cast<ActionId>(a), step);
            }
            if (observer) observer(pi, st.observation);
            discount *= gamma;
        }
    }
    const ValueEstimate v = opte(pi, tree, std::max(1, cfg.eval_rollouts), opt, rng, cfg.leaf);
    return {std::move(pi), v};
}

/// Off-policy tree optimization from the uniform policy over `observations`
/// (plus every observation present in the tree).
inline OptoResult opto(const TrajectoryTree& tree, int n_actions, bool opt, const OptoConfig& cfg, Rng& rng,
                       const std::vector<ObsId>& observations = {}, const UpdateObserver& observer = {}) {
    return opto_from(Policy::uniform(observations, n_actions), tree, opt, cfg, rng, observer);
}

}  // namespace vdr::policyopt
