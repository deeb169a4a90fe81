#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "vdr/types.hpp"

namespace vdr::augment {

struct EmOptions {
    int restarts = 5;
    int max_iterations = 100;
    /// Stop when one iteration gains less log-likelihood than this.
    double tolerance = 1e-6;
    /// Relative size of the uniform perturbation applied per restart.
    double perturbation = 0.1;
    double variance_floor = 1e-4;
    /// 0 derives the action count from the data.
    int n_actions = 0;
};

/// Two-child hypothesis for one observation.
///
/// Symbols index the augmented observation alphabet: every other logged
/// observation, then child 1 and child 2 as the last two entries.
struct EmModel {
    ObsId target = 0;
    ObsId child1 = 0;
    ObsId child2 = 0;
    int n_actions = 0;
    std::vector<ObsId> symbols;
    std::vector<double> init;
    /// p(next symbol | symbol, action), flattened [z][a][z'].
    std::vector<double> trans;
    /// Gaussian reward mean per [z][a].
    std::vector<double> reward_mean;
    double reward_var = 1.0;
    double loglik = -std::numeric_limits<double>::infinity();
    /// Log-likelihood after every EM iteration of the winning restart.
    std::vector<double> loglik_trace;
    int restart = 0;

    int num_symbols() const { return static_cast<int>(symbols.size()); }
    int c1() const { return num_symbols() - 2; }
    int c2() const { return num_symbols() - 1; }

    double t(int z, int a, int z2) const {
        const auto k = static_cast<std::size_t>(num_symbols());
        return trans[(static_cast<std::size_t>(z) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)) * k +
                     static_cast<std::size_t>(z2)];
    }
    double& t(int z, int a, int z2) {
        const auto k = static_cast<std::size_t>(num_symbols());
        return trans[(static_cast<std::size_t>(z) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)) * k +
                     static_cast<std::size_t>(z2)];
    }
    double mu(int z, int a) const {
        return reward_mean[static_cast<std::size_t>(z) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)];
    }
    double& mu(int z, int a) {
        return reward_mean[static_cast<std::size_t>(z) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a)];
    }

    /// Same model with the two children exchanged.
    EmModel swapped() const {
        EmModel m = *this;
        const int k = num_symbols();
        auto perm = [&](int z) { return z == c1() ? c2() : z == c2() ? c1() : z; };
        for (int z = 0; z < k; ++z) {
            m.init[static_cast<std::size_t>(perm(z))] = init[static_cast<std::size_t>(z)];
            for (int a = 0; a < n_actions; ++a) {
                m.mu(perm(z), a) = mu(z, a);
                for (int z2 = 0; z2 < k; ++z2) m.t(perm(z), a, perm(z2)) = t(z, a, z2);
            }
        }
        return m;
    }
};

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double log_normal(double r, double mu, double var) {
    const double d = r - mu;
    return -0.5 * (kLog2Pi + std::log(var)) - d * d / (2.0 * var);
}

inline double safe_log(double p) {
    return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

/// A maximal run of consecutive target steps inside one trajectory.
struct Segment {
    std::size_t traj = 0;
    std::size_t begin = 0;  // first step index
    std::size_t len = 0;
    int prev_sym = -1;       // symbol of the step before, -1 at episode start
    int prev_action = -1;
    int next_sym = -1;       // symbol of the step after, -1 at episode end
};

/// Dataset re-expressed over the augmented alphabet, with the sufficient
/// statistics of all fully observed steps precomputed.
struct Encoded {
    int k = 0;  // number of symbols (including both children)
    int n_actions = 0;
    std::vector<ObsId> symbols;
    std::vector<std::vector<int>> sym;  // per step, -1 on target steps
    std::vector<Segment> segments;
    std::size_t target_steps = 0;
    // Fully observed statistics.
    std::vector<double> init_fixed;    // [z]
    std::vector<double> trans_fixed;   // [z][a][z']
    std::vector<double> n_fixed;       // [z][a]
    std::vector<double> s1_fixed;      // [z][a]
    std::vector<double> s2_fixed;      // [z][a]
    double reward_mean_all = 0.0;
    double reward_var_all = 0.0;
    double total_steps = 0.0;

    std::size_t za(int z, int a) const {
        return static_cast<std::size_t>(z) * static_cast<std::size_t>(n_actions) + static_cast<std::size_t>(a);
    }
    std::size_t zaz(int z, int a, int z2) const {
        return za(z, a) * static_cast<std::size_t>(k) + static_cast<std::size_t>(z2);
    }
};

inline Encoded encode(const Dataset& data, ObsId target, int n_actions) {
    Encoded enc;
    int max_action = -1;
    std::vector<ObsId> others;
    for (const auto& traj : data)
        for (const auto& st : traj) {
            max_action = std::max(max_action, st.action);
            if (st.observation != target) others.push_back(st.observation);
        }
    std::sort(others.begin(), others.end());
    others.erase(std::unique(others.begin(), others.end()), others.end());
    enc.n_actions = n_actions > 0 ? n_actions : max_action + 1;
    if (max_action >= enc.n_actions) throw InvalidArgument("action id exceeds n_actions");
    enc.symbols = others;
    enc.k = static_cast<int>(others.size()) + 2;
    auto symbol_of = [&](ObsId o) {
        return static_cast<int>(std::lower_bound(others.begin(), others.end(), o) - others.begin());
    };
    const auto k = static_cast<std::size_t>(enc.k);
    const auto a_n = static_cast<std::size_t>(enc.n_actions);
    enc.init_fixed.assign(k, 0.0);
    enc.trans_fixed.assign(k * a_n * k, 0.0);
    enc.n_fixed.assign(k * a_n, 0.0);
    enc.s1_fixed.assign(k * a_n, 0.0);
    enc.s2_fixed.assign(k * a_n, 0.0);

    double rs = 0.0, rs2 = 0.0;
    enc.sym.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& traj = data[i];
        auto& row = enc.sym[i];
        row.resize(traj.size());
        for (std::size_t t = 0; t < traj.size(); ++t)
            row[t] = traj[t].observation == target ? -1 : symbol_of(traj[t].observation);
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const auto& st = traj[t];
            rs += st.reward;
            rs2 += st.reward * st.reward;
            enc.total_steps += 1.0;
            if (row[t] < 0) continue;
            if (t == 0) enc.init_fixed[static_cast<std::size_t>(row[t])] += 1.0;
            const auto idx = enc.za(row[t], st.action);
            enc.n_fixed[idx] += 1.0;
            enc.s1_fixed[idx] += st.reward;
            enc.s2_fixed[idx] += st.reward * st.reward;
            if (t + 1 < traj.size() && row[t + 1] >= 0)
                enc.trans_fixed[enc.zaz(row[t], st.action, row[t + 1])] += 1.0;
        }
        for (std::size_t t = 0; t < traj.size();) {
            if (row[t] >= 0) {
                ++t;
                continue;
            }
            Segment seg;
            seg.traj = i;
            seg.begin = t;
            while (t < traj.size() && row[t] < 0) ++t;
            seg.len = t - seg.begin;
            if (seg.begin > 0) {
                seg.prev_sym = row[seg.begin - 1];
                seg.prev_action = traj[seg.begin - 1].action;
            }
            if (t < traj.size()) seg.next_sym = row[t];
            enc.target_steps += seg.len;
            enc.segments.push_back(seg);
        }
    }
    if (enc.total_steps > 0) {
        enc.reward_mean_all = rs / enc.total_steps;
        enc.reward_var_all = std::max(0.0, rs2 / enc.total_steps - enc.reward_mean_all * enc.reward_mean_all);
    }
    return enc;
}

/// Expected sufficient statistics accumulated by the E-step.
struct Stats {
    std::vector<double> init, trans, n, s1, s2;
    double loglik = 0.0;

    void reset(const Encoded& enc) {
        init = enc.init_fixed;
        trans = enc.trans_fixed;
        n = enc.n_fixed;
        s1 = enc.s1_fixed;
        s2 = enc.s2_fixed;
        loglik = 0.0;
    }
};

/// Log-likelihood of the fully observed part of the data under `m`.
inline double fixed_loglik(const Encoded& enc, const EmModel& m) {
    double ll = 0.0;
    const int k = enc.k;
    for (int z = 0; z < k; ++z) {
        if (enc.init_fixed[static_cast<std::size_t>(z)] > 0)
            ll += enc.init_fixed[static_cast<std::size_t>(z)] * safe_log(m.init[static_cast<std::size_t>(z)]);
        for (int a = 0; a < enc.n_actions; ++a) {
            const auto idx = enc.za(z, a);
            const double n = enc.n_fixed[idx];
            if (n > 0) {
                const double mu = m.mu(z, a);
                const double sq = enc.s2_fixed[idx] - 2.0 * mu * enc.s1_fixed[idx] + n * mu * mu;
                ll += -0.5 * n * (kLog2Pi + std::log(m.reward_var)) - sq / (2.0 * m.reward_var);
            }
            for (int z2 = 0; z2 < k; ++z2) {
                const double c = enc.trans_fixed[enc.zaz(z, a, z2)];
                if (c > 0) ll += c * safe_log(m.t(z, a, z2));
            }
        }
    }
    return ll;
}

/// Scratch buffers reused across segments.
struct Scratch {
    std::vector<std::array<double, 2>> f, b, e;
    std::vector<double> c;
};

/// Forward-backward over every latent segment; fills `st` when non-null and
/// returns the total data log-likelihood.
inline double e_step(const Dataset& data, const Encoded& enc, const EmModel& m, Stats* st, Scratch& s) {
    if (st) st->reset(enc);
    double ll = fixed_loglik(enc, m);
    const int c1 = enc.k - 2;
    for (const auto& seg : enc.segments) {
        const auto& traj = data[seg.traj];
        const std::size_t len = seg.len;
        s.f.resize(len);
        s.b.resize(len);
        s.e.resize(len);
        s.c.resize(len + 1);
        for (std::size_t j = 0; j < len; ++j) {
            const auto& stp = traj[seg.begin + j];
            const double l0 = log_normal(stp.reward, m.mu(c1, stp.action), m.reward_var);
            const double l1 = log_normal(stp.reward, m.mu(c1 + 1, stp.action), m.reward_var);
            const double mx = std::max(l0, l1);
            s.e[j] = {std::exp(l0 - mx), std::exp(l1 - mx)};
            ll += mx;
        }
        std::array<double, 2> entry;
        for (int z = 0; z < 2; ++z)
            entry[static_cast<std::size_t>(z)] = seg.prev_sym < 0 ? m.init[static_cast<std::size_t>(c1 + z)]
                                                                  : m.t(seg.prev_sym, seg.prev_action, c1 + z);
        std::array<double, 2> exit{1.0, 1.0};
        const int last_action = traj[seg.begin + len - 1].action;
        if (seg.next_sym >= 0)
            for (int z = 0; z < 2; ++z) exit[static_cast<std::size_t>(z)] = m.t(c1 + z, last_action, seg.next_sym);

        // Forward with per-step normalization.
        for (std::size_t j = 0; j < len; ++j) {
            std::array<double, 2> f;
            if (j == 0) {
                f = {entry[0] * s.e[0][0], entry[1] * s.e[0][1]};
            } else {
                const int a = traj[seg.begin + j - 1].action;
                for (int z2 = 0; z2 < 2; ++z2)
                    f[static_cast<std::size_t>(z2)] =
                        (s.f[j - 1][0] * m.t(c1, a, c1 + z2) + s.f[j - 1][1] * m.t(c1 + 1, a, c1 + z2)) *
                        s.e[j][static_cast<std::size_t>(z2)];
            }
            const double cj = f[0] + f[1];
            if (!(cj > 0.0)) return -std::numeric_limits<double>::infinity();
            s.c[j] = cj;
            s.f[j] = {f[0] / cj, f[1] / cj};
            ll += std::log(cj);
        }
        const double zx = s.f[len - 1][0] * exit[0] + s.f[len - 1][1] * exit[1];
        if (!(zx > 0.0)) return -std::numeric_limits<double>::infinity();
        ll += std::log(zx);
        if (!st) continue;

        // Backward, scaled by the same constants.
        s.b[len - 1] = {exit[0] / zx, exit[1] / zx};
        for (std::size_t j = len - 1; j-- > 0;) {
            const int a = traj[seg.begin + j].action;
            for (int z = 0; z < 2; ++z) {
                double acc = 0.0;
                for (int z2 = 0; z2 < 2; ++z2)
                    acc += m.t(c1 + z, a, c1 + z2) * s.e[j + 1][static_cast<std::size_t>(z2)] *
                           s.b[j + 1][static_cast<std::size_t>(z2)];
                s.b[j][static_cast<std::size_t>(z)] = acc / s.c[j + 1];
            }
        }
        for (std::size_t j = 0; j < len; ++j) {
            const auto& stp = traj[seg.begin + j];
            const double g0 = s.f[j][0] * s.b[j][0];
            const double g1 = s.f[j][1] * s.b[j][1];
            const double gs = g0 + g1;
            const std::array<double, 2> g{g0 / gs, g1 / gs};
            for (int z = 0; z < 2; ++z) {
                const auto idx = enc.za(c1 + z, stp.action);
                const double w = g[static_cast<std::size_t>(z)];
                st->n[idx] += w;
                st->s1[idx] += w * stp.reward;
                st->s2[idx] += w * stp.reward * stp.reward;
            }
            if (j == 0) {
                for (int z = 0; z < 2; ++z) {
                    if (seg.prev_sym < 0)
                        st->init[static_cast<std::size_t>(c1 + z)] += g[static_cast<std::size_t>(z)];
                    else
                        st->trans[enc.zaz(seg.prev_sym, seg.prev_action, c1 + z)] += g[static_cast<std::size_t>(z)];
                }
            }
            if (j + 1 == len) {
                if (seg.next_sym >= 0)
                    for (int z = 0; z < 2; ++z)
                        st->trans[enc.zaz(c1 + z, stp.action, seg.next_sym)] += g[static_cast<std::size_t>(z)];
            } else {
                double xs[2][2];
                double tot = 0.0;
                for (int z = 0; z < 2; ++z)
                    for (int z2 = 0; z2 < 2; ++z2)
                        tot += xs[z][z2] = s.f[j][static_cast<std::size_t>(z)] * m.t(c1 + z, stp.action, c1 + z2) *
                                           s.e[j + 1][static_cast<std::size_t>(z2)] *
                                           s.b[j + 1][static_cast<std::size_t>(z2)];
                for (int z = 0; z < 2; ++z)
                    for (int z2 = 0; z2 < 2; ++z2)
                        st->trans[enc.zaz(c1 + z, stp.action, c1 + z2)] += xs[z][z2] / tot;
            }
        }
    }
    if (st) st->loglik = ll;
    return ll;
}

/// Maximization step; keeps previous means where a pair carries no weight.
inline void m_step(const Encoded& enc, const Stats& st, EmModel& m, double var_floor) {
    const int k = enc.k;
    const int na = enc.n_actions;
    double init_total = 0.0;
    for (double x : st.init) init_total += x;
    for (int z = 0; z < k; ++z)
        m.init[static_cast<std::size_t>(z)] = init_total > 0 ? st.init[static_cast<std::size_t>(z)] / init_total : 1.0 / k;
    double sq_total = 0.0, n_total = 0.0;
    for (int z = 0; z < k; ++z)
        for (int a = 0; a < na; ++a) {
            double row = 0.0;
            for (int z2 = 0; z2 < k; ++z2) row += st.trans[enc.zaz(z, a, z2)];
            for (int z2 = 0; z2 < k; ++z2) m.t(z, a, z2) = row > 0 ? st.trans[enc.zaz(z, a, z2)] / row : 1.0 / k;
            const auto idx = enc.za(z, a);
            if (st.n[idx] > 0) {
                const double mu = st.s1[idx] / st.n[idx];
                m.mu(z, a) = mu;
                sq_total += std::max(0.0, st.s2[idx] - st.s1[idx] * mu);
                n_total += st.n[idx];
            }
        }
    m.reward_var = std::max(var_floor, n_total > 0 ? sq_total / n_total : var_floor);
}

/// Closed-form model with the target kept as one symbol, duplicated into both
/// child slots with the inbound mass split evenly.
inline EmModel unsplit_model(const Dataset& data, const Encoded& enc, ObsId target, double var_floor) {
    // Treat every target step as child 1 and fit in closed form.
    const int k = enc.k;
    const int c1 = k - 2;
    Stats st;
    st.reset(enc);
    for (const auto& seg : enc.segments) {
        const auto& traj = data[seg.traj];
        for (std::size_t j = 0; j < seg.len; ++j) {
            const auto& stp = traj[seg.begin + j];
            const auto idx = enc.za(c1, stp.action);
            st.n[idx] += 1.0;
            st.s1[idx] += stp.reward;
            st.s2[idx] += stp.reward * stp.reward;
            if (j + 1 < seg.len) st.trans[enc.zaz(c1, stp.action, c1)] += 1.0;
        }
        if (seg.prev_sym < 0)
            st.init[static_cast<std::size_t>(c1)] += 1.0;
        else
            st.trans[enc.zaz(seg.prev_sym, seg.prev_action, c1)] += 1.0;
        if (seg.next_sym >= 0) st.trans[enc.zaz(c1, traj[seg.begin + seg.len - 1].action, seg.next_sym)] += 1.0;
    }
    EmModel m;
    m.target = target;
    m.n_actions = enc.n_actions;
    m.symbols = enc.symbols;
    m.symbols.push_back(target);
    m.symbols.push_back(target);
    m.init.assign(static_cast<std::size_t>(k), 0.0);
    m.trans.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(enc.n_actions) * static_cast<std::size_t>(k), 0.0);
    m.reward_mean.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(enc.n_actions), 0.0);
    m_step(enc, st, m, var_floor);
    // Child 2 mirrors child 1; inbound probability is shared equally.
    for (int a = 0; a < enc.n_actions; ++a) {
        m.mu(c1 + 1, a) = m.mu(c1, a);
        for (int z2 = 0; z2 < k; ++z2) m.t(c1 + 1, a, z2) = m.t(c1, a, z2);
    }
    for (int z = 0; z < k; ++z)
        for (int a = 0; a < enc.n_actions; ++a) {
            const double p = m.t(z, a, c1) + m.t(z, a, c1 + 1);
            m.t(z, a, c1) = p / 2.0;
            m.t(z, a, c1 + 1) = p / 2.0;
        }
    const double pi = m.init[static_cast<std::size_t>(c1)];
    m.init[static_cast<std::size_t>(c1)] = pi / 2.0;
    m.init[static_cast<std::size_t>(c1 + 1)] = pi / 2.0;
    return m;
}

inline void perturb(EmModel& m, const Encoded& enc, double eps, Rng& rng) {
    const int k = enc.k;
    auto noise = [&] { return 1.0 + eps * (2.0 * uniform01(rng) - 1.0); };
    for (auto& p : m.init) p *= noise();
    double s = 0.0;
    for (double p : m.init) s += p;
    for (auto& p : m.init) p /= s;
    for (int z = 0; z < k; ++z)
        for (int a = 0; a < enc.n_actions; ++a) {
            double row = 0.0;
            for (int z2 = 0; z2 < k; ++z2) row += m.t(z, a, z2) *= noise();
            for (int z2 = 0; z2 < k; ++z2) m.t(z, a, z2) /= row;
        }
    const double sd = std::sqrt(m.reward_var);
    for (int z = k - 2; z < k; ++z)
        for (int a = 0; a < enc.n_actions; ++a) {
            const double scale = std::max(std::abs(m.mu(z, a)), sd);
            m.mu(z, a) += eps * (2.0 * uniform01(rng) - 1.0) * scale;
        }
}

}  // namespace detail

/// Count of steps carrying observation `o`.
inline std::size_t occurrences(const Dataset& data, ObsId o) {
    std::size_t n = 0;
    for (const auto& traj : data)
        for (const auto& st : traj) n += st.observation == o;
    return n;
}

/// Fit a two-child latent model of `target` by EM, keeping the best restart.
inline EmModel em_split(const Dataset& data, ObsId target, ObsId child1, ObsId child2, Rng& rng,
                        const EmOptions& opts = {}) {
    if (occurrences(data, target) < 2)
        throw InvalidArgument("observation " + std::to_string(target) + " occurs fewer than twice; nothing to split");
    if (opts.restarts < 1) throw InvalidArgument("EM needs at least one restart");
    const detail::Encoded enc = detail::encode(data, target, opts.n_actions);
    EmModel base = detail::unsplit_model(data, enc, target, opts.variance_floor);
    base.reward_var = std::max(opts.variance_floor, enc.reward_var_all);
    base.child1 = child1;
    base.child2 = child2;
    base.symbols[static_cast<std::size_t>(enc.k - 2)] = child1;
    base.symbols[static_cast<std::size_t>(enc.k - 1)] = child2;

    detail::Scratch scratch;
    detail::Stats stats;
    EmModel best;
    for (int r = 0; r < opts.restarts; ++r) {
        EmModel m = base;
        m.restart = r;
        detail::perturb(m, enc, opts.perturbation, rng);
        double ll = detail::e_step(data, enc, m, &stats, scratch);
        m.loglik_trace = {ll};
        for (int it = 0; it < opts.max_iterations; ++it) {
            EmModel next = m;
            detail::m_step(enc, stats, next, opts.variance_floor);
            const double ll_next = detail::e_step(data, enc, next, &stats, scratch);
            next.loglik_trace.push_back(ll_next);
            const double gain = ll_next - ll;
            m = std::move(next);
            ll = ll_next;
            if (gain < opts.tolerance) break;
        }
        m.loglik = ll;
        if (r == 0 || m.loglik > best.loglik) best = std::move(m);
    }
    return best;
}

/// Data log-likelihood under a fitted model.
inline double log_likelihood(const Dataset& data, const EmModel& m) {
    const detail::Encoded enc = detail::encode(data, m.target, m.n_actions);
    if (enc.symbols.size() + 2 != m.symbols.size()) throw InvalidArgument("model does not match the dataset");
    detail::Scratch s;
    return detail::e_step(data, enc, m, nullptr, s);
}

/// Log-likelihood of the closed-form model in which `target` is not split.
inline double unsplit_log_likelihood(const Dataset& data, ObsId target, const EmOptions& opts = {}) {
    const detail::Encoded enc = detail::encode(data, target, opts.n_actions);
    EmModel m = detail::unsplit_model(data, enc, target, opts.variance_floor);
    detail::Scratch s;
    // Summing over the two identical children reproduces the unsplit chain.
    return detail::e_step(data, enc, m, nullptr, s);
}

/// MAP child sequence for every occurrence of the model's target.
/// Exact ties resolve to child 1.
inline SplitLabels viterbi_relabel(const Dataset& data, const EmModel& m) {
    const detail::Encoded enc = detail::encode(data, m.target, m.n_actions);
    if (enc.symbols.size() + 2 != m.symbols.size()) throw InvalidArgument("model does not match the dataset");
    SplitLabels out;
    out.target = m.target;
    out.child1 = m.child1;
    out.child2 = m.child2;
    out.labels.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.labels[i].assign(data[i].size(), 0);
    const int c1 = m.c1();
    using detail::safe_log;
    std::vector<std::array<double, 2>> delta;
    std::vector<std::array<std::uint8_t, 2>> back;
    for (const auto& seg : enc.segments) {
        const auto& traj = data[seg.traj];
        delta.resize(seg.len);
        back.resize(seg.len);
        for (std::size_t j = 0; j < seg.len; ++j) {
            const auto& stp = traj[seg.begin + j];
            for (int z = 0; z < 2; ++z) {
                const double le = detail::log_normal(stp.reward, m.mu(c1 + z, stp.action), m.reward_var);
                if (j == 0) {
                    const double entry = seg.prev_sym < 0 ? m.init[static_cast<std::size_t>(c1 + z)]
                                                          : m.t(seg.prev_sym, seg.prev_action, c1 + z);
                    delta[0][static_cast<std::size_t>(z)] = safe_log(entry) + le;
                    back[0][static_cast<std::size_t>(z)] = 0;
                } else {
                    const int a = traj[seg.begin + j - 1].action;
                    const double from1 = delta[j - 1][0] + safe_log(m.t(c1, a, c1 + z));
                    const double from2 = delta[j - 1][1] + safe_log(m.t(c1 + 1, a, c1 + z));
                    const bool take2 = from2 > from1;
                    delta[j][static_cast<std::size_t>(z)] = (take2 ? from2 : from1) + le;
                    back[j][static_cast<std::size_t>(z)] = take2 ? 1 : 0;
                }
            }
        }
        std::array<double, 2> fin = delta[seg.len - 1];
        if (seg.next_sym >= 0) {
            const int a = traj[seg.begin + seg.len - 1].action;
            for (int z = 0; z < 2; ++z) fin[static_cast<std::size_t>(z)] += safe_log(m.t(c1 + z, a, seg.next_sym));
        }
        std::uint8_t z = fin[1] > fin[0] ? 1 : 0;
        for (std::size_t j = seg.len; j-- > 0;) {
            out.labels[seg.traj][seg.begin + j] = static_cast<std::uint8_t>(z + 1);
            z = back[j][z];
        }
    }
    return out;
}

}  // namespace vdr::augment
