#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vdr/types.hpp"

namespace vdr::policyopt {

/// Tabular softmax policy over observations.
class Policy {
public:
    /// Logits are kept inside [-kLogitClip, kLogitClip] so that every action
    /// keeps a strictly positive probability.
    static constexpr double kLogitClip = 30.0;

    Policy() = default;
    explicit Policy(int n_actions) : n_actions_(n_actions) {
        if (n_actions < 1) throw InvalidArgument("policy needs at least one action");
    }

    static Policy uniform(const std::vector<ObsId>& observations, int n_actions) {
        Policy p(n_actions);
        for (ObsId o : observations) p.ensure(o);
        return p;
    }

    /// Policy whose action probabilities equal the given rows (renormalized).
    static Policy from_probabilities(const std::map<ObsId, std::vector<double>>& rows) {
        if (rows.empty()) throw InvalidArgument("empty probability table");
        Policy p(static_cast<int>(rows.begin()->second.size()));
        for (const auto& [o, probs] : rows) {
            if (probs.size() != static_cast<std::size_t>(p.n_actions_))
                throw InvalidArgument("inconsistent action count in probability table");
            auto& l = p.logits_[o];
            l.resize(probs.size());
            for (std::size_t a = 0; a < probs.size(); ++a) {
                if (!(probs[a] >= 0.0)) throw InvalidArgument("negative probability");
                l[a] = std::clamp(std::log(std::max(probs[a], 1e-300)), -kLogitClip, kLogitClip);
            }
        }
        return p;
    }

    int num_actions() const { return n_actions_; }
    bool covers(ObsId o) const { return logits_.count(o) > 0; }

    void ensure(ObsId o) {
        if (!covers(o)) logits_[o].assign(static_cast<std::size_t>(n_actions_), 0.0);
    }

    std::vector<ObsId> observations() const {
        std::vector<ObsId> out;
        out.reserve(logits_.size());
        for (const auto& [o, _] : logits_) out.push_back(o);
        return out;
    }

    const std::vector<double>& logits(ObsId o) const { return row(o); }
    const std::map<ObsId, std::vector<double>>& table() const { return logits_; }

    void set_logits(ObsId o, std::vector<double> l) {
        if (l.size() != static_cast<std::size_t>(n_actions_))
            throw InvalidArgument("logit row has the wrong length");
        for (double& x : l) x = std::clamp(x, -kLogitClip, kLogitClip);
        logits_[o] = std::move(l);
    }

    /// Add `delta` to the logit of (o, a), keeping the row within the clip.
    void add_logit(ObsId o, ActionId a, double delta) {
        auto& l = mutable_row(o);
        l[static_cast<std::size_t>(a)] = std::clamp(l[static_cast<std::size_t>(a)] + delta, -kLogitClip, kLogitClip);
    }

    std::vector<double> probs(ObsId o) const {
        std::vector<double> p;
        probs_into(o, p);
        return p;
    }

    void probs_into(ObsId o, std::vector<double>& out) const {
        const auto& l = row(o);
        out.resize(l.size());
        const double m = *std::max_element(l.begin(), l.end());
        double z = 0.0;
        for (std::size_t a = 0; a < l.size(); ++a) z += out[a] = std::exp(l[a] - m);
        for (double& x : out) x /= z;
    }

    double prob(ObsId o, ActionId a) const { return probs(o)[static_cast<std::size_t>(a)]; }

    ActionId sample(ObsId o, Rng& rng) const {
        thread_local std::vector<double> p;
        probs_into(o, p);
        return static_cast<ActionId>(sample_categorical(p, rng));
    }

    /// Most probable action; ties go to the lowest index.
    ActionId greedy(ObsId o) const {
        const auto& l = row(o);
        return static_cast<ActionId>(std::max_element(l.begin(), l.end()) - l.begin());
    }

    /// Deterministic policy that always plays the greedy action.
    Policy greedy_policy() const {
        Policy g(n_actions_);
        for (const auto& [o, l] : logits_) {
            std::vector<double> row(l.size(), -kLogitClip);
            row[static_cast<std::size_t>(greedy(o))] = kLogitClip;
            g.logits_[o] = std::move(row);
        }
        return g;
    }

    friend bool operator==(const Policy&, const Policy&) = default;

private:
    const std::vector<double>& row(ObsId o) const {
        auto it = logits_.find(o);
        if (it == logits_.end())
            throw InvalidArgument("policy does not cover observation " + std::to_string(o));
        return it->second;
    }
    std::vector<double>& mutable_row(ObsId o) {
        auto it = logits_.find(o);
        if (it == logits_.end())
            throw InvalidArgument("policy does not cover observation " + std::to_string(o));
        return it->second;
    }

    int n_actions_ = 0;
    std::map<ObsId, std::vector<double>> logits_;
};

inline constexpr double kKlFloor = 1e-8;

/// Sum over `observations` of KL(p(.|o) || q(.|o)), probabilities floored at
/// 1e-8. Optional per-observation weights (missing entries weigh zero).
inline double kl_policies(const Policy& p, const Policy& q, const std::vector<ObsId>& observations,
                          const std::map<ObsId, double>* weights = nullptr) {
    if (p.num_actions() != q.num_actions()) throw InvalidArgument("policies disagree on action count");
    double total = 0.0;
    for (ObsId o : observations) {
        double w = 1.0;
        if (weights) {
            auto it = weights->find(o);
            w = it == weights->end() ? 0.0 : it->second;
            if (w == 0.0) continue;
        }
        const auto pp = p.probs(o);
        const auto qq = q.probs(o);
        double kl = 0.0;
        for (std::size_t a = 0; a < pp.size(); ++a) {
            const double pa = std::max(pp[a], kKlFloor);
            const double qa = std::max(qq[a], kKlFloor);
            kl += pa * std::log(pa / qa);
        }
        total += w * kl;
    }
    return total;
}

}  // namespace vdr::policyopt
