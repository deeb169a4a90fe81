#pragma once

#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "vdr/runner/review_queue.hpp"

namespace vdr::runner {

/// Snapshot of a live run that the service exposes read-only. The VDR loop
/// is the only writer.
class RunState {
public:
    void set_status(const std::string& s) {
        std::lock_guard lk(mu_);
        status_ = s;
    }
    void set_run_info(json info) {
        std::lock_guard lk(mu_);
        info_ = std::move(info);
    }
    void add_episode(int episode, double ret, std::size_t obs_size) {
        std::lock_guard lk(mu_);
        curve_.push_back({{"episode", episode}, {"return", ret}, {"obs_size", obs_size}});
    }
    void set_obs_space(json j) {
        std::lock_guard lk(mu_);
        obs_space_ = std::move(j);
    }
    void set_tree_summary(json j) {
        std::lock_guard lk(mu_);
        tree_summary_ = std::move(j);
    }

    json run_json() const {
        std::lock_guard lk(mu_);
        return {{"status", status_}, {"run", info_}, {"curve", curve_}};
    }
    json obs_space() const {
        std::lock_guard lk(mu_);
        return obs_space_;
    }
    json tree_summary() const {
        std::lock_guard lk(mu_);
        return tree_summary_;
    }

private:
    mutable std::mutex mu_;
    std::string status_ = "starting";
    json info_ = json::object();
    json curve_ = json::array();
    json obs_space_ = json::object();
    json tree_summary_ = json::object();
};

/// HTTP/JSON review API over a RunState and a ReviewQueue.
class ReviewService {
public:
    ReviewService(RunState& state, ReviewQueue& queue) : state_(state), queue_(queue) { routes(); }
    ~ReviewService() { stop(); }

    ReviewService(const ReviewService&) = delete;
    ReviewService& operator=(const ReviewService&) = delete;

    /// Bind and serve on a background thread. Port 0 picks a free port.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        if (port == 0)
            port_ = server_.bind_to_any_port(host);
        else
            port_ = server_.bind_to_port(host, port) ? port : -1;
        if (port_ < 0) throw Error("cannot bind review service to " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Serve on the calling thread until stop() is called elsewhere.
    void listen(const std::string& host, int port) {
        port_ = port;
        if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }

private:
    static void send(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json; charset=utf-8");
    }

    void routes() {
        server_.Get("/api/run", [this](const httplib::Request&, httplib::Response& res) {
            send(res, 200, state_.run_json());
        });
        server_.Get("/api/proposals/pending", [this](const httplib::Request&, httplib::Response& res) {
            if (auto item = queue_.pending())
                send(res, 200, to_json(*item));
            else
                res.status = 204;
        });
        server_.Post(R"(/api/proposals/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception&) {
                return send(res, 400, {{"error", "body is not valid JSON"}});
            }
            if (!body.is_object() || !body.contains("approve") || !body.at("approve").is_boolean())
                return send(res, 400, {{"error", "body must be an object with a boolean 'approve'"}});
            switch (queue_.decide(id, body.at("approve").get<bool>(), "human")) {
                case DecideOutcome::NotFound: return send(res, 404, {{"error", "no proposal " + id}});
                case DecideOutcome::Conflict: {
                    const auto item = queue_.get(id);
                    return send(res, 409, {{"error", "proposal " + id + " is not pending"},
                                           {"status", item ? to_string(item->status) : "unknown"}});
                }
                default: {
                    const auto item = queue_.get(id);
                    return send(res, 200, to_json(*item));
                }
            }
        });
        server_.Get("/api/obs-space", [this](const httplib::Request&, httplib::Response& res) {
            send(res, 200, state_.obs_space());
        });
        server_.Get("/api/tree/summary", [this](const httplib::Request&, httplib::Response& res) {
            send(res, 200, state_.tree_summary());
        });
        server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            std::string msg = "internal error";
            try {
                if (ep) std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                msg = e.what();
            } catch (...) {
            }
            send(res, 500, {{"error", msg}});
        });
    }

    RunState& state_;
    ReviewQueue& queue_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace vdr::runner
