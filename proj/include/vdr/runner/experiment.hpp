#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <string>

#include <unistd.h>

#include <json.hpp>

#include "vdr/loop/run.hpp"
#include "vdr/runner/json_io.hpp"
#include "vdr/runner/review_queue.hpp"
#include "vdr/runner/service.hpp"

namespace vdr::runner {

namespace fs = std::filesystem;

/// Append-only JSON-lines log; every line is flushed and synced before
/// append() returns.
class EventLog {
public:
    EventLog() = default;
    explicit EventLog(const fs::path& path, bool truncate = true) { open(path, truncate); }
    ~EventLog() { close(); }
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    void open(const fs::path& path, bool truncate = true) {
        close();
        f_ = std::fopen(path.c_str(), truncate ? "w" : "a");
        if (!f_) throw Error("cannot open " + path.string());
    }

    void append(const json& event) {
        std::lock_guard lk(mu_);
        if (!f_) throw Error("event log is closed");
        const std::string line = event.dump() + "\n";
        if (std::fwrite(line.data(), 1, line.size(), f_) != line.size() || std::fflush(f_) != 0)
            throw Error("cannot write event log");
        ::fsync(::fileno(f_));
    }

    void close() {
        if (f_) std::fclose(f_);
        f_ = nullptr;
    }

private:
    std::mutex mu_;
    std::FILE* f_ = nullptr;
};

/// Review events recorded in an events.jsonl, keyed by proposal id.
inline std::map<std::string, json> read_review_events(const fs::path& path) {
    std::map<std::string, json> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            break;  // a torn final line from a crash
        }
        if (j.value("type", "") == "review" && j.value("status", "") != "pending") out[j.at("id").get<std::string>()] = j;
    }
    return out;
}

inline Decision decision_from_review(const json& j) {
    const auto s = j.at("status").get<std::string>();
    const auto by = j.value("decided_by", "human");
    if (s == "approved") return {DecisionStatus::Approved, by};
    if (s == "rejected") return {DecisionStatus::Rejected, by};
    return {DecisionStatus::Expired, by};
}

inline void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline void write_results_csv(std::ostream& os, const RunRecord& rec) {
    os << "episode,return,obs_size\n";
    os << std::setprecision(17);
    for (const auto& e : rec.episodes) os << e.episode << ',' << e.ret << ',' << e.obs_size << '\n';
}

struct ExperimentOptions {
    /// Run directory; created when missing.
    fs::path out;
    /// Interactive mode: proposals are parked here and the run blocks on them.
    ReviewQueue* queue = nullptr;
    /// Live snapshot for the review service.
    RunState* state = nullptr;
    /// Replay decisions recorded in an existing events.jsonl of `out`.
    bool resume = false;
};

/// Run VDR and persist config.json, events.jsonl, results.csv,
/// final_obs_space.json, final_policy.json and dataset.jsonl.
inline RunRecord run_experiment(const VdrConfig& config, const ExperimentOptions& opts) {
    const VdrConfig cfg = config.resolved();
    if (cfg.designer == DesignerMode::Interactive && !opts.queue)
        throw InvalidArgument("interactive mode needs a review queue");
    fs::create_directories(opts.out);
    const fs::path events_path = opts.out / "events.jsonl";
    std::map<std::string, json> replay;
    if (opts.resume) {
        replay = read_review_events(events_path);
        if (fs::exists(opts.out / "config.json")) {
            std::ifstream in(opts.out / "config.json");
            const VdrConfig saved = io::config_from_json(json::parse(in));
            if (io::to_json(saved.resolved()) != io::to_json(cfg))
                throw InvalidArgument("resume config differs from the one in " + opts.out.string());
        }
    }
    write_json_file(opts.out / "config.json", io::to_json(cfg));

    EventLog events(events_path);
    events.append({{"type", "start"}, {"config", io::to_json(cfg)}, {"resumed", opts.resume}});
    if (opts.queue) opts.queue->set_journal([&events](const json& j) { events.append(j); });
    RunState* state = opts.state;
    if (state) {
        state->set_run_info(io::to_json(cfg));
        state->set_status("running");
    }
    const envs::EnvBundle env = envs::make_env(cfg.env, cfg.gamma, cfg.max_episode_len);
    const int n_actions = env.num_actions();
    if (state) state->set_obs_space(io::to_json(env.observations));

    RunHooks hooks;
    hooks.on_episode = [&](const EpisodeRecord& e) {
        events.append(io::to_json(e));
        if (state) state->add_episode(e.episode, e.ret, e.obs_size);
    };
    if (state)
        hooks.on_data = [&](const Dataset& data, const envs::ObservationSpace&) {
            state->set_tree_summary(io::tree_summary(trajtree::build(data, tree_options(cfg, env))));
        };
    hooks.on_round = [&](const augment::ProposalRound& round, int episode) {
        json cands = json::array();
        for (const auto& c : round.candidates)
            cands.push_back({{"target", c.target},
                             {"score", c.score},
                             {"kl", c.kl},
                             {"v_new_mean", augment::mean(c.v_new)},
                             {"em_loglik", c.em_loglik}});
        json skipped = json::array();
        for (const auto& [o, why] : round.skipped) skipped.push_back({{"target", o}, {"reason", why}});
        events.append({{"type", "round"}, {"episode", episode}, {"v_old", round.v_old}, {"candidates", cands},
                       {"skipped", skipped}});
    };
    hooks.decide = [&](const std::string& id, const augment::SplitProposal& p, const Dataset& data) -> Decision {
        json evidence = io::proposal_evidence(p, data, n_actions);
        events.append({{"type", "proposal"}, {"id", id}, {"evidence", evidence}});
        if (auto it = replay.find(id); it != replay.end()) {
            events.append(it->second);
            return decision_from_review(it->second);
        }
        if (cfg.designer == DesignerMode::Simulated) {
            events.append({{"type", "review"}, {"id", id}, {"status", "approved"}, {"decided_by", "simulated"}});
            return {DecisionStatus::Approved, "simulated"};
        }
        opts.queue->submit(id, std::move(evidence));
        if (state) state->set_status("awaiting_decision");
        const Decision d = opts.queue->wait(id, std::chrono::duration<double>(cfg.decision_deadline_s));
        if (state) state->set_status("running");
        return d;
    };
    hooks.on_decision = [&](const ProposalLogEntry& log, const envs::ObservationSpace& obs) {
        events.append(io::to_json(log));
        if (state) state->set_obs_space(io::to_json(obs));
    };

    RunRecord rec = run(cfg, hooks);

    {
        std::ofstream csv(opts.out / "results.csv");
        write_results_csv(csv, rec);
    }
    write_json_file(opts.out / "final_obs_space.json", io::to_json(rec.final_observations));
    write_json_file(opts.out / "final_policy.json", io::to_json(rec.final_policy));
    {
        std::ofstream ds(opts.out / "dataset.jsonl");
        io::write_jsonl(ds, rec.data);
    }
    events.append({{"type", "finished"},
                   {"episodes", rec.episodes.size()},
                   {"accepted_splits", rec.accepted_splits()},
                   {"obs_size", rec.final_observations.size()}});
    if (opts.queue) opts.queue->set_journal({});
    if (state) state->set_status("finished");
    return rec;
}

}  // namespace vdr::runner
