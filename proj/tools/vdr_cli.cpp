#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "vdr/runner/experiment.hpp"
#include "vdr/runner/q_learning.hpp"
#include "vdr/runner/report.hpp"

namespace fs = std::filesystem;
using namespace vdr;

namespace {

struct RunArgs {
    std::string env;
    std::string config;
    std::string designer;
    std::string out = "runs/latest";
    std::string host = "127.0.0.1";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int port = 8080;
    int episodes = 0;
    bool resume = false;
};

VdrConfig load_config(const RunArgs& a) {
    nlohmann::json j = nlohmann::json::object();
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw InvalidArgument("cannot open config " + a.config);
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw io::SchemaError(std::string("config is not valid JSON: ") + e.what());
        }
    } else if (a.resume && fs::exists(fs::path(a.out) / "config.json")) {
        std::ifstream in(fs::path(a.out) / "config.json");
        j = nlohmann::json::parse(in);
    }
    if (!a.env.empty()) j["env"] = a.env;
    if (a.seed_set) j["seed"] = a.seed;
    if (!a.designer.empty()) j["designer"] = a.designer;
    if (a.episodes > 0) j["total_episodes"] = a.episodes;
    return io::config_from_json(j);
}

int cmd_run(const RunArgs& a) {
    const VdrConfig cfg = load_config(a).resolved();
    runner::ExperimentOptions opts;
    opts.out = a.out;
    opts.resume = a.resume;
    std::unique_ptr<runner::ReviewQueue> queue;
    std::unique_ptr<runner::RunState> state;
    std::unique_ptr<runner::ReviewService> service;
    if (cfg.designer == DesignerMode::Interactive) {
        queue = std::make_unique<runner::ReviewQueue>();
        state = std::make_unique<runner::RunState>();
        service = std::make_unique<runner::ReviewService>(*state, *queue);
        const int port = service->start(a.host, a.port);
        std::cerr << "review service listening on http://" << a.host << ':' << port << '\n';
        opts.queue = queue.get();
        opts.state = state.get();
    }
    const RunRecord rec = runner::run_experiment(cfg, opts);
    if (service) service->stop();
    std::cout << "episodes " << rec.episodes.size() << ", accepted splits " << rec.accepted_splits()
              << ", observations " << rec.final_observations.size() << ", run directory " << a.out << '\n';
    return 0;
}

int cmd_baseline(runner::BaselineConfig cfg, const std::string& out) {
    const runner::BaselineResult res = runner::q_learning(cfg);
    fs::create_directories(out);
    std::ofstream csv(fs::path(out) / "results.csv");
    csv << "episode,return,length,reached_goal\n" << std::setprecision(17);
    for (const auto& e : res.curve) csv << e.episode << ',' << e.ret << ',' << e.length << ',' << (e.reached_goal ? 1 : 0) << '\n';
    std::cout << "episodes " << res.curve.size() << ", first goal episode " << res.first_goal() << '\n';
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<std::vector<double>> runs;
    for (const auto& in : inputs) {
        fs::path p(in);
        if (fs::is_directory(p)) p /= "results.csv";
        runs.push_back(runner::read_returns_csv(p.string()));
    }
    const auto curve = runner::aggregate(runs);
    if (out.empty() || out == "-") {
        runner::write_report_csv(std::cout, curve);
    } else {
        std::ofstream os(out);
        if (!os) throw InvalidArgument("cannot write " + out);
        runner::write_report_csv(os, curve);
    }
    return 0;
}

void add_run_options(CLI::App* sub, RunArgs& a) {
    sub->add_option("--env", a.env, "Environment id")->check(CLI::IsMember(envs::env_ids()));
    sub->add_option("--config", a.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>("--seed", [&a](std::uint64_t s) { a.seed = s; a.seed_set = true; }, "Run seed");
    sub->add_option("--out", a.out, "Run directory");
    sub->add_option("--episodes", a.episodes, "Episode budget (overrides the config)");
    sub->add_option("--port", a.port, "Review service port (interactive mode)");
    sub->add_option("--host", a.host, "Review service bind address");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Value driven representation experiments"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run a VDR experiment");
    add_run_options(run, run_args);
    run->add_option("--designer", run_args.designer, "Designer mode")->check(CLI::IsMember({"simulated", "interactive"}));
    run->add_flag("--resume", run_args.resume, "Replay recorded decisions from the run directory");

    RunArgs serve_args;
    auto* serve = app.add_subcommand("serve", "Run an interactive VDR experiment behind the review service");
    add_run_options(serve, serve_args);
    serve->add_flag("--resume", serve_args.resume, "Replay recorded decisions from the run directory");

    runner::BaselineConfig base;
    std::string base_out = "runs/baseline";
    auto* baseline = app.add_subcommand("baseline", "Tabular Q-learning baseline");
    baseline->add_option("--env", base.env, "Environment id")->check(CLI::IsMember(envs::env_ids()));
    baseline->add_option("--seed", base.seed, "Run seed");
    baseline->add_option("--episodes", base.episodes, "Episodes");
    baseline->add_option("--lr", base.learning_rate, "Learning rate");
    baseline->add_option("--gamma", base.gamma, "Discount");
    baseline->add_option("--epsilon-start", base.epsilon_start, "Initial exploration rate");
    baseline->add_option("--epsilon-end", base.epsilon_end, "Final exploration rate");
    baseline->add_option("--grid", base.grid_resolution, "Mountain car grid cells per axis");
    baseline->add_option("--out", base_out, "Output directory");

    std::vector<std::string> report_inputs;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Aggregate run results into a learning-curve CSV");
    report->add_option("inputs", report_inputs, "Run directories or results.csv files")->required();
    report->add_option("--out", report_out, "Output CSV (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(run_args);
        if (*serve) {
            serve_args.designer = "interactive";
            return cmd_run(serve_args);
        }
        if (*baseline) return cmd_baseline(base, base_out);
        if (*report) return cmd_report(report_inputs, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
