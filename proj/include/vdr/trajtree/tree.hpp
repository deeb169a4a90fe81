#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vdr/types.hpp"

namespace vdr::trajtree {

using NodeId = int;
inline constexpr NodeId kNoNode = -1;
/// Next-observation key of an edge that ends the episode.
inline constexpr ObsId kEndOfEpisode = -1;

/// Raised when a trajectory does not start at the tree's root observation.
class RootMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

enum class RewardPlayback { Mean, Sample };

struct TreeOptions {
    double gamma = 0.95;
    /// Phantom count of the "unseen outcome" per (node, action).
    double pseudo_count = 1.0;
    /// Largest reward magnitude; scales the optimism bonus.
    double r_max = 1.0;
    RewardPlayback playback = RewardPlayback::Mean;
    /// When false, trajectories may start from different observations and
    /// rollouts pick a root in proportion to its count.
    bool single_root = true;

    friend bool operator==(const TreeOptions&, const TreeOptions&) = default;
};

struct Edge {
    /// Child node, or kNoNode when the episode ended on this step.
    NodeId child = kNoNode;
    ObsId next_observation = kEndOfEpisode;
    int count = 0;
    std::vector<double> rewards;
    bool done = false;
    double reward_sum = 0.0;

    double mean_reward() const { return count > 0 ? reward_sum / count : 0.0; }

    friend bool operator==(const Edge& a, const Edge& b) {
        return a.child == b.child && a.next_observation == b.next_observation &&
               a.count == b.count && a.rewards == b.rewards && a.done == b.done;
    }
};

struct TreeNode {
    NodeId id = 0;
    ObsId observation = 0;
    int depth = 0;
    /// Number of trajectories whose prefix reaches this node.
    int count = 0;
    /// edges[a] holds one entry per distinct outcome of action a.
    std::vector<std::vector<Edge>> edges;

    const std::vector<Edge>& outcomes(ActionId a) const {
        static const std::vector<Edge> kNone;
        return static_cast<std::size_t>(a) < edges.size() ? edges[static_cast<std::size_t>(a)] : kNone;
    }

    int action_count(ActionId a) const {
        int n = 0;
        for (const auto& e : outcomes(a)) n += e.count;
        return n;
    }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Model-free Monte-Carlo statistics over (observation, action) pairs.
class QStats {
public:
    double q(ObsId o, ActionId a) const {
        const auto n = n_oa(o, a);
        return n > 0 ? sum_[idx(o)][static_cast<std::size_t>(a)] / n : 0.0;
    }
    bool has(ObsId o, ActionId a) const { return n_oa(o, a) > 0; }
    /// Sum of the returns logged after (o, a).
    double sum(ObsId o, ActionId a) const { return n_oa(o, a) > 0 ? sum_[idx(o)][static_cast<std::size_t>(a)] : 0.0; }
    /// Largest action id with a slot at o, plus one.
    int width(ObsId o) const {
        if (o < 0 || static_cast<std::size_t>(o) >= count_.size()) return 0;
        return static_cast<int>(count_[idx(o)].size());
    }
    int n_oa(ObsId o, ActionId a) const {
        if (o < 0 || static_cast<std::size_t>(o) >= count_.size()) return 0;
        const auto& row = count_[idx(o)];
        return static_cast<std::size_t>(a) < row.size() ? row[static_cast<std::size_t>(a)] : 0;
    }
    int n_o(ObsId o) const {
        if (o < 0 || static_cast<std::size_t>(o) >= count_.size()) return 0;
        int n = 0;
        for (int c : count_[idx(o)]) n += c;
        return n;
    }
    /// Count-weighted mean return over all actions taken at o.
    std::optional<double> v(ObsId o) const {
        const int n = n_o(o);
        if (n == 0) return std::nullopt;
        double s = 0.0;
        for (double x : sum_[idx(o)]) s += x;
        return s / n;
    }
    /// Mean return over every logged step.
    double overall_mean() const { return total_n_ > 0 ? total_sum_ / total_n_ : 0.0; }

    void add(ObsId o, ActionId a, double ret) { add_many(o, a, 1, ret); }

    /// Record `n` returns summing to `sum` (deserialization).
    void add_many(ObsId o, ActionId a, int n, double sum) {
        if (o < 0) throw InvalidArgument("negative observation id");
        if (a < 0 || n < 0) throw InvalidArgument("negative action id or count");
        if (static_cast<std::size_t>(o) >= count_.size()) {
            count_.resize(static_cast<std::size_t>(o) + 1);
            sum_.resize(static_cast<std::size_t>(o) + 1);
        }
        auto& c = count_[idx(o)];
        auto& s = sum_[idx(o)];
        if (static_cast<std::size_t>(a) >= c.size()) {
            c.resize(static_cast<std::size_t>(a) + 1, 0);
            s.resize(static_cast<std::size_t>(a) + 1, 0.0);
        }
        c[static_cast<std::size_t>(a)] += n;
        s[static_cast<std::size_t>(a)] += sum;
        total_sum_ += sum;
        total_n_ += n;
    }

    /// Observations with at least one logged step.
    std::vector<ObsId> observations() const {
        std::vector<ObsId> out;
        for (std::size_t o = 0; o < count_.size(); ++o)
            if (n_o(static_cast<ObsId>(o)) > 0) out.push_back(static_cast<ObsId>(o));
        return out;
    }

    friend bool operator==(const QStats&, const QStats&) = default;

private:
    static std::size_t idx(ObsId o) { return static_cast<std::size_t>(o); }

    std::vector<std::vector<int>> count_;
    std::vector<std::vector<double>> sum_;
    double total_sum_ = 0.0;
    long total_n_ = 0;
};

/// History-indexed tree of logged (observation, action) sequences.
///
/// A node is identified by the full history from the root, never by its
/// observation alone, so aliased observations reached through different
/// histories stay separate.
class TrajectoryTree {
public:
    TrajectoryTree() = default;
    explicit TrajectoryTree(TreeOptions opts) : opts_(opts) {}

    void insert(const Trajectory& traj) {
        if (traj.empty()) throw InvalidArgument("cannot insert an empty trajectory");
        NodeId node = root_for(traj.front().observation);
        nodes_[static_cast<std::size_t>(node)].count += 1;
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const Step& st = traj[t];
            if (st.action < 0) throw InvalidArgument("negative action id");
            const bool last = t + 1 == traj.size();
            const ObsId next_obs = last ? kEndOfEpisode : traj[t + 1].observation;
            Edge& e = edge_for(node, st.action, next_obs, last);
            e.count += 1;
            e.rewards.push_back(st.reward);
            e.reward_sum += st.reward;
            if (!last) {
                node = e.child;
                nodes_[static_cast<std::size_t>(node)].count += 1;
            }
        }
        // Discounted suffix returns feed the model-free Q table.
        double g = 0.0;
        for (std::size_t t = traj.size(); t-- > 0;) {
            g = traj[t].reward + opts_.gamma * g;
            q_.add(traj[t].observation, traj[t].action, g);
        }
        ++n_trajectories_;
        max_action_ = std::max(max_action_, max_action_in(traj));
    }

    const TreeOptions& options() const { return opts_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const std::vector<NodeId>& roots() const { return roots_; }
    NodeId root() const {
        if (roots_.empty()) throw InvalidArgument("empty trajectory tree");
        return roots_.front();
    }
    const QStats& qstats() const { return q_; }
    int num_trajectories() const { return n_trajectories_; }
    bool empty() const { return n_trajectories_ == 0; }
    int max_depth() const {
        int d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.depth);
        return d;
    }
    /// One past the largest action id seen in the data.
    int num_actions_seen() const { return max_action_ + 1; }

    /// Observations carried by some node.
    std::vector<ObsId> observations() const {
        std::vector<ObsId> out;
        for (const auto& n : nodes_) out.push_back(n.observation);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Construct a tree from raw parts (deserialization). Q statistics are not
    /// stored in the nodes, so the caller passes them separately.
    static TrajectoryTree from_parts(TreeOptions opts, std::vector<TreeNode> nodes,
                                     std::vector<NodeId> roots, QStats q, int n_trajectories) {
        TrajectoryTree t(opts);
        t.nodes_ = std::move(nodes);
        t.roots_ = std::move(roots);
        t.q_ = std::move(q);
        t.n_trajectories_ = n_trajectories;
        for (auto& n : t.nodes_) {
            t.max_action_ = std::max(t.max_action_, static_cast<int>(n.edges.size()) - 1);
            for (auto& row : n.edges)
                for (auto& e : row) {
                    e.reward_sum = 0.0;
                    for (double r : e.rewards) e.reward_sum += r;
                }
        }
        return t;
    }

    friend bool operator==(const TrajectoryTree& a, const TrajectoryTree& b) {
        return a.opts_ == b.opts_ && a.nodes_ == b.nodes_ && a.roots_ == b.roots_ &&
               a.n_trajectories_ == b.n_trajectories_;
    }

private:
    static int max_action_in(const Trajectory& traj) {
        int m = -1;
        for (const auto& s : traj) m = std::max(m, s.action);
        return m;
    }

    NodeId new_node(ObsId o, int depth) {
        const NodeId id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back({id, o, depth, 0, {}});
        return id;
    }

    NodeId root_for(ObsId o) {
        for (NodeId r : roots_)
            if (nodes_[static_cast<std::size_t>(r)].observation == o) return r;
        if (!roots_.empty() && opts_.single_root)
            throw RootMismatch("trajectory starts at observation " + std::to_string(o) +
                               " but the tree is rooted at " +
                               std::to_string(nodes_[static_cast<std::size_t>(roots_.front())].observation));
        const NodeId r = new_node(o, 0);
        roots_.push_back(r);
        return r;
    }

    Edge& edge_for(NodeId node, ActionId a, ObsId next_obs, bool done) {
        auto* n = &nodes_[static_cast<std::size_t>(node)];
        if (static_cast<std::size_t>(a) >= n->edges.size()) n->edges.resize(static_cast<std::size_t>(a) + 1);
        for (auto& e : n->edges[static_cast<std::size_t>(a)])
            if (e.next_observation == next_obs && e.done == done) return e;
        NodeId child = kNoNode;
        if (!done) {
            const int depth = n->depth + 1;
            child = new_node(next_obs, depth);
            n = &nodes_[static_cast<std::size_t>(node)];  // new_node may reallocate
        }
        auto& row = n->edges[static_cast<std::size_t>(a)];
        row.push_back({child, done ? kEndOfEpisode : next_obs, 0, {}, done, 0.0});
        return row.back();
    }

    TreeOptions opts_;
    std::vector<TreeNode> nodes_;
    std::vector<NodeId> roots_;
    QStats q_;
    int n_trajectories_ = 0;
    int max_action_ = -1;
};

inline TrajectoryTree build(const Dataset& data, const TreeOptions& opts) {
    if (data.empty()) throw InvalidArgument("cannot build a tree from an empty dataset");
    TrajectoryTree tree(opts);
    for (const auto& traj : data) tree.insert(traj);
    return tree;
}

inline TrajectoryTree build(const Dataset& data, double gamma) {
    TreeOptions opts;
    opts.gamma = gamma;
    return build(data, opts);
}

/// Rename every occurrence of the split observation to its labelled child.
inline Dataset relabel(const Dataset& data, const SplitLabels& split) {
    Dataset out = data;
    const bool no_labels = split.labels.empty();
    if (!no_labels && split.labels.size() != data.size())
        throw InvalidArgument("labels do not cover the dataset");
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& traj = out[i];
        for (std::size_t t = 0; t < traj.size(); ++t) {
            if (traj[t].observation != split.target) continue;
            if (no_labels || t >= split.labels[i].size() ||
                (split.labels[i][t] != 1 && split.labels[i][t] != 2))
                throw InvalidArgument("missing child label for trajectory " + std::to_string(i) +
                                      " step " + std::to_string(t));
            traj[t].observation = split.child(split.labels[i][t]);
        }
    }
    return out;
}

/// Undo a relabel: map both children back onto the parent observation.
inline Dataset merge_children(const Dataset& data, ObsId parent, ObsId child1, ObsId child2) {
    Dataset out = data;
    for (auto& traj : out)
        for (auto& st : traj)
            if (st.observation == child1 || st.observation == child2) st.observation = parent;
    return out;
}

/// Resample whole trajectories with replacement.
inline Dataset bootstrap_resample(const Dataset& data, Rng& rng) {
    if (data.empty()) throw InvalidArgument("cannot resample an empty dataset");
    Dataset out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) out.push_back(data[uniform_index(rng, data.size())]);
    return out;
}

/// Like bootstrap_resample but returns indices, for callers that resample
/// labels alongside the data.
inline std::vector<std::size_t> bootstrap_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = uniform_index(rng, n);
    return idx;
}

}  // namespace vdr::trajtree
