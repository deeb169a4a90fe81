#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdr/loop/run.hpp"

namespace vdr::runner {

using json = nlohmann::json;

enum class ReviewStatus { Pending, Approved, Rejected, Expired };

inline const char* to_string(ReviewStatus s) {
    switch (s) {
        case ReviewStatus::Pending: return "pending";
        case ReviewStatus::Approved: return "approved";
        case ReviewStatus::Rejected: return "rejected";
        default: return "expired";
    }
}

struct ReviewItem {
    std::string id;
    json evidence;
    ReviewStatus status = ReviewStatus::Pending;
    /// "simulated", "human" or "timeout"; empty while pending.
    std::string decided_by;
    double created_at = 0.0;
    double decided_at = 0.0;
};

inline json to_json(const ReviewItem& it) {
    json j = {{"id", it.id},
              {"status", to_string(it.status)},
              {"decided_by", it.decided_by},
              {"created_at", it.created_at},
              {"proposal", it.evidence}};
    if (it.status != ReviewStatus::Pending) j["decided_at"] = it.decided_at;
    return j;
}

enum class DecideOutcome { Ok, NotFound, Conflict };

/// Serialized decision channel between the review service and the VDR loop.
///
/// Every status change passes through `journal` before it becomes visible or
/// is acknowledged, so an acknowledged decision is always on disk.
class ReviewQueue {
public:
    using Clock = std::chrono::system_clock;
    using Journal = std::function<void(const json&)>;

    explicit ReviewQueue(Journal journal = {}) : journal_(std::move(journal)) {}

    void set_journal(Journal j) {
        std::lock_guard lk(mu_);
        journal_ = std::move(j);
    }

    /// Park a proposal for review. Ids must be unique.
    void submit(const std::string& id, json evidence) {
        std::lock_guard lk(mu_);
        if (items_.count(id)) throw InvalidArgument("duplicate review item " + id);
        ReviewItem it{id, std::move(evidence), ReviewStatus::Pending, "", now(), 0.0};
        items_.emplace(id, std::move(it));
        order_.push_back(id);
    }

    /// Oldest pending item, if any.
    std::optional<ReviewItem> pending() const {
        std::lock_guard lk(mu_);
        for (const auto& id : order_) {
            const auto& it = items_.at(id);
            if (it.status == ReviewStatus::Pending) return it;
        }
        return std::nullopt;
    }

    std::optional<ReviewItem> get(const std::string& id) const {
        std::lock_guard lk(mu_);
        auto it = items_.find(id);
        if (it == items_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<ReviewItem> items() const {
        std::lock_guard lk(mu_);
        std::vector<ReviewItem> out;
        for (const auto& id : order_) out.push_back(items_.at(id));
        return out;
    }

    DecideOutcome decide(const std::string& id, bool approve, const std::string& decided_by = "human") {
        std::unique_lock lk(mu_);
        auto it = items_.find(id);
        if (it == items_.end()) return DecideOutcome::NotFound;
        if (it->second.status != ReviewStatus::Pending) return DecideOutcome::Conflict;
        finish(it->second, approve ? ReviewStatus::Approved : ReviewStatus::Rejected, decided_by);
        lk.unlock();
        cv_.notify_all();
        return DecideOutcome::Ok;
    }

    /// Block until `id` is decided or `timeout` elapses; an undecided item
    /// expires, which counts as a rejection.
    Decision wait(const std::string& id, std::chrono::duration<double> timeout) {
        std::unique_lock lk(mu_);
        auto it = items_.find(id);
        if (it == items_.end()) throw InvalidArgument("unknown review item " + id);
        const auto until = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
        cv_.wait_until(lk, until, [&] { return it->second.status != ReviewStatus::Pending; });
        if (it->second.status == ReviewStatus::Pending) finish(it->second, ReviewStatus::Expired, "timeout");
        return to_decision(it->second);
    }

    static Decision to_decision(const ReviewItem& it) {
        switch (it.status) {
            case ReviewStatus::Approved: return {DecisionStatus::Approved, it.decided_by};
            case ReviewStatus::Rejected: return {DecisionStatus::Rejected, it.decided_by};
            default: return {DecisionStatus::Expired, it.decided_by.empty() ? "timeout" : it.decided_by};
        }
    }

private:
    static double now() {
        return std::chrono::duration<double>(Clock::now().time_since_epoch()).count();
    }

    void finish(ReviewItem& it, ReviewStatus s, const std::string& by) {
        const double t = now();
        if (journal_)
            journal_({{"type", "review"}, {"id", it.id}, {"status", to_string(s)}, {"decided_by", by}, {"decided_at", t}});
        it.status = s;
        it.decided_by = by;
        it.decided_at = t;
    }

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, ReviewItem> items_;
    std::vector<std::string> order_;
    Journal journal_;
};

}  // namespace vdr::runner
