#include "wpfed/simulation.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wpfed/experiments.hpp"

using namespace wpfed;
namespace fs = std::filesystem;

namespace {

ScenarioConfig tiny_config() {
    ScenarioConfig cfg;
    cfg.data.num_clients = 5;
    cfg.data.num_classes = 4;
    cfg.data.num_features = 6;
    cfg.data.samples_per_class = 120;
    cfg.data.reference_size_per_client = 15;
    cfg.selection.n_neighbors = 3;
    cfg.rounds = 6;
    cfg.master_seed = 17;
    return cfg;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST(Config, ParseAppliesAllKeys) {
    std::stringstream ss(R"(
# scenario
num_clients = 6
num_classes = 5
num_features = 9
informative_features = 4
samples_per_class = 50
shards_per_client = 3
removed_classes_per_shard = 2
reference_fraction = 0.25
reference_size_per_client = 7
train_test_ratio = 0.8
class_separation = 2.5
confusable_pair_separation = 0.9
n_neighbors = 2
gamma = 0.7
mode = no_rank
kind = poison
start_round = 9
malicious_fraction = 0.5
target_id = 1
reinit_period = 4
lsh_verification_enabled = off
alpha = 0.4
top_k = 3
lsh_bits = 48
rounds = 33
lr = 0.05
local_steps = 2
master_seed = 987654321
output_dir = /tmp/somewhere
salted_commitments = false
)");
    ScenarioConfig cfg = parse_scenario_config(ss);
    EXPECT_EQ(cfg.data.num_clients, 6);
    EXPECT_EQ(cfg.data.num_classes, 5);
    EXPECT_EQ(cfg.data.num_features, 9);
    EXPECT_EQ(cfg.data.informative_features, 4);
    EXPECT_EQ(cfg.data.samples_per_class, 50);
    EXPECT_EQ(cfg.data.shards_per_client, 3);
    EXPECT_EQ(cfg.data.removed_classes_per_shard, 2);
    EXPECT_DOUBLE_EQ(cfg.data.reference_fraction, 0.25);
    EXPECT_EQ(cfg.data.reference_size_per_client, 7);
    EXPECT_DOUBLE_EQ(cfg.data.train_test_ratio, 0.8);
    EXPECT_DOUBLE_EQ(cfg.data.class_separation, 2.5);
    EXPECT_DOUBLE_EQ(cfg.data.confusable_pair_separation, 0.9);
    EXPECT_EQ(cfg.selection.n_neighbors, 2);
    EXPECT_DOUBLE_EQ(cfg.selection.gamma, 0.7);
    EXPECT_EQ(cfg.selection.mode, SelectionMode::no_rank);
    EXPECT_EQ(cfg.attack.kind, AttackKind::poison);
    EXPECT_EQ(cfg.attack.start_round, 9);
    EXPECT_DOUBLE_EQ(cfg.attack.malicious_fraction, 0.5);
    EXPECT_EQ(cfg.attack.target_id, 1);
    EXPECT_EQ(cfg.attack.reinit_period, 4);
    EXPECT_FALSE(cfg.attack.lsh_verification_enabled);
    EXPECT_DOUBLE_EQ(cfg.alpha, 0.4);
    EXPECT_EQ(cfg.top_k, 3);
    EXPECT_EQ(cfg.lsh_bits, 48);
    EXPECT_EQ(cfg.rounds, 33);
    EXPECT_DOUBLE_EQ(cfg.lr, 0.05);
    EXPECT_EQ(cfg.local_steps, 2);
    EXPECT_EQ(cfg.master_seed, 987654321u);
    EXPECT_EQ(cfg.output_dir, "/tmp/somewhere");
    EXPECT_FALSE(cfg.salted_commitments);
}

TEST(Config, UnknownKeyAndBadValuesRejected) {
    std::stringstream unknown("no_such_key = 3\n");
    EXPECT_THROW(parse_scenario_config(unknown), ConfigError);
    std::stringstream bad_bool("salted_commitments = maybe\n");
    EXPECT_THROW(parse_scenario_config(bad_bool), ConfigError);
    std::stringstream bad_int("rounds = seven\n");
    EXPECT_THROW(parse_scenario_config(bad_int), ConfigError);
    std::stringstream no_eq("rounds 7\n");
    EXPECT_THROW(parse_scenario_config(no_eq), ConfigError);
}

TEST(Config, ValidationCatchesBadScenarios) {
    ScenarioConfig cfg = tiny_config();
    cfg.rounds = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);

    cfg = tiny_config();
    cfg.alpha = 1.5;
    EXPECT_THROW(cfg.validate(), ConfigError);

    cfg = tiny_config();
    cfg.selection.n_neighbors = 5;  // == num_clients
    EXPECT_THROW(cfg.validate(), ConfigError);

    // Config errors surface before any round executes.
    cfg = tiny_config();
    cfg.data.reference_size_per_client = 10000;
    EXPECT_THROW(Simulator{cfg}, ConfigError);
}

TEST(Config, TopKDefaultsToHalfNeighbors) {
    ScenarioConfig cfg = tiny_config();
    cfg.top_k = 0;
    cfg.selection.n_neighbors = 5;
    EXPECT_EQ(cfg.effective_top_k(), 3);
    cfg.selection.n_neighbors = 6;
    EXPECT_EQ(cfg.effective_top_k(), 3);
    cfg.top_k = 2;
    EXPECT_EQ(cfg.effective_top_k(), 2);
}

TEST(Manifest, RoundTripsThroughParser) {
    ScenarioConfig cfg = tiny_config();
    cfg.selection.mode = SelectionMode::no_lsh;
    cfg.attack.kind = AttackKind::poison;
    cfg.attack.malicious_fraction = 0.25;
    cfg.salted_commitments = false;

    std::stringstream ss;
    write_manifest(cfg, ss);
    ScenarioConfig parsed = parse_scenario_config(ss);

    std::stringstream again;
    write_manifest(parsed, again);
    std::stringstream original;
    write_manifest(cfg, original);
    EXPECT_EQ(original.str(), again.str());
}

TEST(RunScenario, SingleRoundEmitsOneRowPerClient) {
    TempDir dir("wpfed_test_single_round");
    ScenarioConfig cfg = tiny_config();
    cfg.rounds = 1;
    cfg.output_dir = (dir.path / "run").string();
    RunSummary summary = run_scenario(cfg);
    EXPECT_EQ(summary.metrics.size(), 5u);
    EXPECT_TRUE(fs::exists(dir.path / "run" / "metrics.csv"));
    EXPECT_TRUE(fs::exists(dir.path / "run" / "board.log"));
    EXPECT_TRUE(fs::exists(dir.path / "run" / "summary.csv"));
    EXPECT_TRUE(fs::exists(dir.path / "run" / "manifest.txt"));
}

TEST(RunScenario, RoundsZeroRejectedBeforeExecution) {
    ScenarioConfig cfg = tiny_config();
    cfg.rounds = 0;
    EXPECT_THROW(run_scenario(cfg), ConfigError);
}

TEST(RunScenario, IdenticalSeedsGiveByteIdenticalOutputs) {
    TempDir dir("wpfed_test_determinism");
    ScenarioConfig cfg = tiny_config();
    cfg.rounds = 5;

    cfg.output_dir = (dir.path / "a").string();
    run_scenario(cfg);
    cfg.output_dir = (dir.path / "b").string();
    run_scenario(cfg);

    EXPECT_EQ(slurp(dir.path / "a" / "metrics.csv"), slurp(dir.path / "b" / "metrics.csv"));
    EXPECT_EQ(slurp(dir.path / "a" / "board.log"), slurp(dir.path / "b" / "board.log"));
    EXPECT_EQ(slurp(dir.path / "a" / "summary.csv"), slurp(dir.path / "b" / "summary.csv"));
}

TEST(RunScenario, ReplayFromManifestMatches) {
    TempDir dir("wpfed_test_replay");
    ScenarioConfig cfg = tiny_config();
    cfg.output_dir = (dir.path / "a").string();
    run_scenario(cfg);

    ScenarioConfig replayed = load_scenario_config((dir.path / "a" / "manifest.txt").string());
    replayed.output_dir = (dir.path / "b").string();
    run_scenario(replayed);

    EXPECT_EQ(slurp(dir.path / "a" / "metrics.csv"), slurp(dir.path / "b" / "metrics.csv"));
    EXPECT_EQ(slurp(dir.path / "a" / "board.log"), slurp(dir.path / "b" / "board.log"));
}

TEST(RunScenario, ReportedAccuracyMatchesDirectEvaluation) {
    ScenarioConfig cfg = tiny_config();
    Simulator sim(cfg);
    // Capture client test sets before the run consumes the simulator.
    std::vector<Dataset> tests;
    for (auto& c : sim.clients()) tests.push_back(c.data.local_test);
    RunSummary summary = sim.run();

    for (int id = 0; id < cfg.data.num_clients; ++id) {
        double direct = accuracy(summary.final_params.at(id), tests[id]);
        EXPECT_NEAR(summary.final_accuracy(id), direct, 1e-12);
    }
}

TEST(RunScenario, BoardLogPassesDumpAudit) {
    ScenarioConfig cfg = tiny_config();
    Simulator sim(cfg);
    RunSummary summary = sim.run();
    std::stringstream ss(summary.board_log);
    DumpAudit audit = audit_dump(parse_board_dump(ss));
    EXPECT_EQ(audit.pairs_checked, cfg.data.num_clients * (cfg.rounds - 1));
    EXPECT_EQ(audit.pairs_passed, audit.pairs_checked);
    EXPECT_EQ(audit.unmatched_reveals, 0);
}

TEST(CompareModes, SingleModeSingleSeed) {
    ScenarioConfig cfg = tiny_config();
    ModeComparison cmp = compare_modes(cfg, {"full"}, {7});
    ASSERT_EQ(cmp.runs.size(), 1u);
    ASSERT_EQ(cmp.aggregates.size(), 1u);
    EXPECT_EQ(cmp.runs[0].mode, "full");
    EXPECT_EQ(cmp.runs[0].seed, 7u);
    EXPECT_DOUBLE_EQ(cmp.aggregates[0].mean, cmp.runs[0].honest_mean_final_acc);
    EXPECT_EQ(cmp.aggregates[0].n_seeds, 1);

    std::stringstream rows, summary;
    write_mode_runs_csv(cmp, rows);
    write_mode_summary_csv(cmp, summary);
    EXPECT_NE(rows.str().find("full,7,"), std::string::npos);
    EXPECT_NE(summary.str().find("full,"), std::string::npos);
}

TEST(CompareModes, SiloIsIsolatedTraining) {
    ScenarioConfig cfg = tiny_config();
    ScenarioConfig silo = config_for_mode(cfg, "silo");
    EXPECT_DOUBLE_EQ(silo.alpha, 1.0);

    // Alpha = 1 decouples clients: selection mode must not matter.
    ScenarioConfig a = silo;
    a.selection.mode = SelectionMode::full;
    ScenarioConfig b = silo;
    b.selection.mode = SelectionMode::random;
    Simulator sa(a), sb(b);
    RunSummary ra = sa.run(), rb = sb.run();
    for (int id = 0; id < cfg.data.num_clients; ++id) {
        EXPECT_EQ(ra.final_params.at(id), rb.final_params.at(id));
    }
}

TEST(Metrics, CsvShapeAndIdLists) {
    ScenarioConfig cfg = tiny_config();
    Simulator sim(cfg);
    RunSummary summary = sim.run();
    std::stringstream ss;
    write_metrics_csv(summary.metrics, ss);

    std::string header;
    std::getline(ss, header);
    EXPECT_EQ(header,
              "round,client_id,test_accuracy,local_loss,ref_loss,neighbor_ids,excluded_ids,"
              "verify_failures");
    int rows = 0;
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty()) ++rows;
    }
    EXPECT_EQ(rows, cfg.rounds * cfg.data.num_clients);
}
