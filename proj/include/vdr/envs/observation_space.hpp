#pragma once

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

#include "vdr/types.hpp"

namespace vdr::envs {

struct SplitRecord {
    ObsId parent = 0;
    ObsId child1 = 0;
    ObsId child2 = 0;
    int episode = 0;

    friend bool operator==(const SplitRecord&, const SplitRecord&) = default;
};

/// Many-to-one mapping of latent states onto observations.
///
/// Observation ids are never reused: a split retires the parent id and mints
/// two fresh ids, so logged data stays unambiguous about which space it was
/// recorded under.
class ObservationSpace {
public:
    ObservationSpace() = default;

    explicit ObservationSpace(std::vector<ObsId> assignment, std::vector<SplitRecord> log = {})
        : assignment_(std::move(assignment)), split_log_(std::move(log)) {
        for (ObsId o : assignment_) {
            if (o < 0) throw InvalidArgument("observation ids must be nonnegative");
            if (std::find(observations_.begin(), observations_.end(), o) == observations_.end())
                observations_.push_back(o);
        }
        std::sort(observations_.begin(), observations_.end());
        next_id_ = observations_.empty() ? 0 : observations_.back() + 1;
        for (const auto& rec : split_log_)
            next_id_ = std::max({next_id_, rec.parent + 1, rec.child1 + 1, rec.child2 + 1});
    }

    /// Every state maps to its own observation.
    static ObservationSpace identity(int n_states) {
        std::vector<ObsId> a(static_cast<std::size_t>(n_states));
        for (int s = 0; s < n_states; ++s) a[static_cast<std::size_t>(s)] = s;
        return ObservationSpace(std::move(a));
    }

    /// All states share one observation.
    static ObservationSpace aliased(int n_states) {
        return ObservationSpace(std::vector<ObsId>(static_cast<std::size_t>(n_states), 0));
    }

    ObsId observe(StateId s) const {
        if (s < 0 || static_cast<std::size_t>(s) >= assignment_.size())
            throw InvalidArgument("state id out of range: " + std::to_string(s));
        return assignment_[static_cast<std::size_t>(s)];
    }

    const std::vector<ObsId>& observations() const { return observations_; }
    const std::vector<ObsId>& assignment() const { return assignment_; }
    const std::vector<SplitRecord>& split_log() const { return split_log_; }
    int num_states() const { return static_cast<int>(assignment_.size()); }
    std::size_t size() const { return observations_.size(); }
    bool contains(ObsId o) const {
        return std::binary_search(observations_.begin(), observations_.end(), o);
    }

    std::vector<StateId> states_of(ObsId o) const {
        std::vector<StateId> out;
        for (std::size_t s = 0; s < assignment_.size(); ++s)
            if (assignment_[s] == o) out.push_back(static_cast<StateId>(s));
        return out;
    }

    /// Ids the next split will use for its two children.
    std::pair<ObsId, ObsId> next_children() const { return {next_id_, next_id_ + 1}; }
    ObsId next_id() const { return next_id_; }

    /// Replace `parent` by two children; `to_child2[s]` selects the child for
    /// each state currently mapped to `parent` (other entries are ignored).
    ObservationSpace split(ObsId parent, ObsId child1, ObsId child2,
                           const std::vector<bool>& to_child2, int episode) const {
        if (!contains(parent)) throw InvalidArgument("cannot split unknown observation");
        if (child1 < next_id_ || child2 < next_id_ || child1 == child2)
            throw InvalidArgument("split children must be fresh, distinct ids");
        if (to_child2.size() != assignment_.size())
            throw InvalidArgument("split mask must cover every state");
        auto assignment = assignment_;
        for (std::size_t s = 0; s < assignment.size(); ++s)
            if (assignment[s] == parent) assignment[s] = to_child2[s] ? child2 : child1;
        auto log = split_log_;
        log.push_back({parent, child1, child2, episode});
        ObservationSpace out(std::move(assignment), std::move(log));
        // A child that received no state does not exist as an observation yet,
        // but its id is still consumed.
        out.next_id_ = std::max({out.next_id_, child1 + 1, child2 + 1});
        return out;
    }

    /// True when every observation of `finer` lies inside one observation of *this.
    bool refined_by(const ObservationSpace& finer) const {
        if (finer.num_states() != num_states()) return false;
        std::map<ObsId, ObsId> parent_of;
        for (std::size_t s = 0; s < assignment_.size(); ++s) {
            auto [it, inserted] = parent_of.emplace(finer.assignment_[s], assignment_[s]);
            if (!inserted && it->second != assignment_[s]) return false;
        }
        return true;
    }

    friend bool operator==(const ObservationSpace& a, const ObservationSpace& b) {
        return a.assignment_ == b.assignment_ && a.split_log_ == b.split_log_;
    }

private:
    std::vector<ObsId> observations_;
    std::vector<ObsId> assignment_;
    std::vector<SplitRecord> split_log_;
    ObsId next_id_ = 0;
};

}  // namespace vdr::envs
