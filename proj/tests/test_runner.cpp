#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "vdr/runner/experiment.hpp"
#include "vdr/runner/q_learning.hpp"
#include "vdr/runner/report.hpp"

using namespace vdr;
using namespace vdr::runner;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vdr_runner_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

VdrConfig tiny_cheese() {
    VdrConfig c;
    c.env = "cheese-maze";
    c.total_episodes = 20;
    c.opto_episodes = 200;
    c.final_opto_episodes = 500;
    c.n_rollouts = 30;
    c.bootstrap = 4;
    c.c = 0.0;
    c.seed = 2;
    return c;
}

}  // namespace

TEST(ConfigJson, OverlaysKnownKeys) {
    const VdrConfig c = io::config_from_json(json{{"env", "cheese-maze"}, {"c", 0.5}, {"seed", 9}, {"designer", "interactive"}});
    EXPECT_EQ(c.env, "cheese-maze");
    EXPECT_DOUBLE_EQ(c.c, 0.5);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.designer, DesignerMode::Interactive);
    const VdrConfig back = io::config_from_json(io::to_json(c));
    EXPECT_EQ(io::to_json(back), io::to_json(c));
}

TEST(ConfigJson, RejectsBadInput) {
    EXPECT_THROW(io::config_from_json(json{{"nonsense", 1}}), io::SchemaError);
    EXPECT_THROW(io::config_from_json(json{{"c", "high"}}), io::SchemaError);
    EXPECT_THROW(io::config_from_json(json::array()), io::SchemaError);
    EXPECT_THROW(io::config_from_json(json{{"greedy_behavior", 1}}), io::SchemaError);
    EXPECT_THROW(io::config_from_json(json{{"env", "pong"}}).resolved(), InvalidArgument);
}

TEST(Json, ObservationSpaceRoundTrip) {
    auto obs = envs::make_env("cheese-maze").observations;
    const ObsId target = obs.observe(1);
    const auto [c1, c2] = obs.next_children();
    std::vector<bool> mask(11, false);
    mask[1] = true;
    obs = obs.split(target, c1, c2, mask, 12);
    const auto back = io::observation_space_from_json(io::to_json(obs));
    EXPECT_EQ(back, obs);
    EXPECT_THROW(io::observation_space_from_json(json{{"bogus", 1}}), InvalidArgument);
}

TEST(Json, PolicyRoundTrip) {
    const auto pi = policyopt::Policy::from_probabilities({{0, {0.2, 0.8}}, {3, {0.5, 0.5}}});
    EXPECT_EQ(io::policy_from_json(io::to_json(pi)), pi);
}

TEST(Json, DatasetJsonlRoundTrip) {
    const Dataset data = {{{0, 1, 0.5, false, 0}, {2, 0, -1.0, true, 4}}, {{0, 0, 0.25, true, 1}}};
    std::stringstream ss;
    io::write_jsonl(ss, data);
    EXPECT_EQ(io::read_jsonl(ss), data);
    std::stringstream bad("{\"steps\": 3}\n");
    EXPECT_THROW(io::read_jsonl(bad), InvalidArgument);
}

TEST(Report, QuantilesInterpolate) {
    EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(median({7}), 7.0);
    EXPECT_THROW(quantile({}, 0.5), InvalidArgument);
    constexpr double inf = std::numeric_limits<double>::infinity();
    EXPECT_DOUBLE_EQ(median({3, inf, 1, inf, 2}), 3.0);
    EXPECT_EQ(median({inf, inf, 1}), inf);
}

TEST(Report, AggregatesRunsIntoCsv) {
    const auto curve = aggregate({{0, 10}, {2, 20}, {4}});
    ASSERT_EQ(curve.size(), 2u);
    EXPECT_DOUBLE_EQ(curve[0].median, 2.0);
    EXPECT_DOUBLE_EQ(curve[0].q25, 1.0);
    EXPECT_DOUBLE_EQ(curve[0].q75, 3.0);
    EXPECT_EQ(curve[1].n_runs, 2);
    EXPECT_DOUBLE_EQ(curve[1].median, 15.0);
    std::stringstream ss;
    write_report_csv(ss, curve);
    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header, "episode,median_return,q25,q75");
    std::string row;
    std::getline(ss, row);
    EXPECT_EQ(row, "0,2,1,3");
}

TEST(Report, ReadsReturnsAndRejectsMalformedFiles) {
    std::stringstream ok("episode,return,obs_size\n0,1.5,7\n1,-2,8\n");
    EXPECT_EQ(read_returns_csv(ok), (std::vector<double>{1.5, -2}));
    std::stringstream missing("episode,score\n0,1\n");
    EXPECT_THROW(read_returns_csv(missing), InvalidArgument);
    std::stringstream gap("episode,return\n0,1\n2,1\n");
    EXPECT_THROW(read_returns_csv(gap), InvalidArgument);
    std::stringstream empty("");
    EXPECT_THROW(read_returns_csv(empty), InvalidArgument);
}

TEST(QLearning, GreedyStartPicksFirstAction) {
    BaselineConfig c;
    c.env = "three-state";
    c.episodes = 1;
    c.epsilon_start = c.epsilon_end = 0.0;
    c.learning_rate = 0.0;
    const auto r = q_learning(c);
    for (const auto& row : r.q)
        for (double q : row) EXPECT_EQ(q, 0.0);
    EXPECT_EQ(r.curve[0].length, 10);
    // Always a1 from s1: 0.7, then -0.5 from s3, and so on.
    EXPECT_NEAR(r.curve[0].ret, 0.7 - 0.5 + 0.7 - 0.5 + 0.7 - 0.5 + 0.7 - 0.5 + 0.7 - 0.5, 1e-12);
}

TEST(QLearning, ConvergesToOptimalActionsOnThreeState) {
    BaselineConfig c;
    c.env = "three-state";
    c.episodes = 5000;
    c.gamma = 0.95;
    c.epsilon_start = 1.0;
    c.epsilon_end = 0.05;
    c.seed = 1;
    const auto r = q_learning(c);
    const auto best = oracle::optimal_actions(envs::make_three_state(10, 0.95), 400, 0.95);
    for (int s = 0; s < 3; ++s) {
        const auto& row = r.q[static_cast<std::size_t>(s)];
        EXPECT_EQ(std::max_element(row.begin(), row.end()) - row.begin(), best[static_cast<std::size_t>(s)]) << "state " << s;
    }
}

TEST(QLearning, MountainCarRecordsGoal) {
    BaselineConfig c;
    c.episodes = 3;
    const auto r = q_learning(c);
    ASSERT_EQ(r.curve.size(), 3u);
    for (const auto& e : r.curve) {
        EXPECT_EQ(e.reached_goal, e.length < 500);
        EXPECT_NEAR(e.ret, -(e.length - (e.reached_goal ? 1 : 0)), 1e-9);
    }
    c.grid_resolution = 0;
    EXPECT_THROW(q_learning(c), InvalidArgument);
}

TEST(Experiment, WritesArtifactsDeterministically) {
    const fs::path a = scratch("a"), b = scratch("b");
    const RunRecord ra = run_experiment(tiny_cheese(), {a});
    run_experiment(tiny_cheese(), {b});
    for (const char* f : {"config.json", "events.jsonl", "results.csv", "final_obs_space.json", "final_policy.json", "dataset.jsonl"})
        EXPECT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
    EXPECT_EQ(slurp(a / "final_policy.json"), slurp(b / "final_policy.json"));
    EXPECT_EQ(read_returns_csv((a / "results.csv").string()), ra.returns());

    std::ifstream ds(a / "dataset.jsonl");
    EXPECT_EQ(io::read_jsonl(ds), ra.data);
    std::ifstream ev(a / "events.jsonl");
    std::string line, last;
    int proposals = 0, reviews = 0;
    while (std::getline(ev, line)) {
        const json j = json::parse(line);
        if (j["type"] == "proposal") {
            ++proposals;
            EXPECT_LE(j["evidence"]["exemplars"].size(), io::kMaxExemplars);
            EXPECT_EQ(j["evidence"]["children"].size(), 2u);
        }
        if (j["type"] == "review") ++reviews;
        last = j["type"];
    }
    EXPECT_EQ(last, "finished");
    EXPECT_EQ(proposals, reviews);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, ResumeReplaysRecordedDecisions) {
    const fs::path dir = scratch("resume");
    VdrConfig c = tiny_cheese();
    c.designer = DesignerMode::Interactive;
    c.decision_deadline_s = 0.0;
    ReviewQueue q;
    const RunRecord first = run_experiment(c, {dir, &q});
    for (const auto& p : first.proposals) {
        if (p.above_threshold) {
            EXPECT_EQ(p.outcome, "expired");
        }
    }
    const std::string before = slurp(dir / "results.csv");

    // A second run with no queue at all must take every decision from the log.
    ReviewQueue unused;
    const RunRecord second = run_experiment(c, {dir, &unused, nullptr, true});
    EXPECT_TRUE(unused.items().empty());
    EXPECT_EQ(slurp(dir / "results.csv"), before);
    EXPECT_EQ(second.returns(), first.returns());

    VdrConfig other = c;
    other.seed = 99;
    EXPECT_THROW(run_experiment(other, {dir, &unused, nullptr, true}), InvalidArgument);
    fs::remove_all(dir);
}

TEST(Experiment, InteractiveWithoutQueueThrows) {
    VdrConfig c = tiny_cheese();
    c.designer = DesignerMode::Interactive;
    EXPECT_THROW(run_experiment(c, {scratch("noq")}), InvalidArgument);
}

TEST(EventLog, ReaderStopsAtTornLine) {
    const fs::path dir = scratch("torn");
    fs::create_directories(dir);
    {
        EventLog log(dir / "e.jsonl");
        log.append({{"type", "review"}, {"id", "p1"}, {"status", "approved"}, {"decided_by", "human"}});
        log.append({{"type", "review"}, {"id", "p2"}, {"status", "pending"}});
    }
    {
        std::ofstream out(dir / "e.jsonl", std::ios::app);
        out << "{\"type\": \"review\", \"id\": \"p3\"";
    }
    const auto ev = read_review_events(dir / "e.jsonl");
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(decision_from_review(ev.at("p1")).status, DecisionStatus::Approved);
    fs::remove_all(dir);
}
