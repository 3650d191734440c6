#pragma once

// Scenario configuration, the bulk-synchronous network simulator, and the
// run outputs (metrics CSV, board dump, summary, replay manifest).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wpfed/adversary.hpp"
#include "wpfed/announce.hpp"
#include "wpfed/data.hpp"
#include "wpfed/protocol.hpp"

namespace wpfed {

struct ScenarioConfig {
    DataConfig data;
    SelectionConfig selection;
    AttackConfig attack;
    double alpha = 0.45;
    int top_k = 0;  // 0 selects ceil(n_neighbors / 2)
    int lsh_bits = 64;
    int rounds = 40;
    double lr = 0.1;
    int local_steps = 5;
    uint64_t master_seed = 42;
    std::string output_dir = "out";
    bool salted_commitments = true;

    int effective_top_k() const {
        return top_k > 0 ? top_k : (selection.n_neighbors + 1) / 2;
    }

    void validate() const {
        data.validate();
        selection.validate(data.num_clients);
        attack.validate(data.num_clients);
        if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0,1]");
        if (top_k < 0) throw ConfigError("top_k must be >= 0 (0 = auto)");
        if (lsh_bits < 1) throw ConfigError("lsh_bits must be >= 1");
        if (rounds < 1) throw ConfigError("rounds must be >= 1");
        if (lr < 0.0 || !std::isfinite(lr)) throw ConfigError("lr must be >= 0");
        if (local_steps < 1) throw ConfigError("local_steps must be >= 1");
    }
};

// --- config file ------------------------------------------------------------
// Plain `key = value` lines, '#' comments. Field names match the scenario
// fields; CLI flags override file values. Manifests reuse the same format,
// so a run can be replayed from its own manifest.

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

inline void apply_config_entry(ScenarioConfig& cfg, const std::string& key,
                               const std::string& value) {
    try {
        if (key == "num_clients") cfg.data.num_clients = std::stoi(value);
        else if (key == "num_classes") cfg.data.num_classes = std::stoi(value);
        else if (key == "num_features") cfg.data.num_features = std::stoi(value);
        else if (key == "informative_features") cfg.data.informative_features = std::stoi(value);
        else if (key == "samples_per_class") cfg.data.samples_per_class = std::stoi(value);
        else if (key == "shards_per_client") cfg.data.shards_per_client = std::stoi(value);
        else if (key == "removed_classes_per_shard")
            cfg.data.removed_classes_per_shard = std::stoi(value);
        else if (key == "reference_fraction") cfg.data.reference_fraction = std::stod(value);
        else if (key == "reference_size_per_client")
            cfg.data.reference_size_per_client = std::stoi(value);
        else if (key == "train_test_ratio") cfg.data.train_test_ratio = std::stod(value);
        else if (key == "class_separation") cfg.data.class_separation = std::stod(value);
        else if (key == "confusable_pair_separation")
            cfg.data.confusable_pair_separation = std::stod(value);
        else if (key == "n_neighbors") cfg.selection.n_neighbors = std::stoi(value);
        else if (key == "gamma") cfg.selection.gamma = std::stod(value);
        else if (key == "mode") cfg.selection.mode = selection_mode_from_string(value);
        else if (key == "kind") cfg.attack.kind = attack_kind_from_string(value);
        else if (key == "start_round") cfg.attack.start_round = std::stoi(value);
        else if (key == "malicious_fraction") cfg.attack.malicious_fraction = std::stod(value);
        else if (key == "target_id") cfg.attack.target_id = std::stoi(value);
        else if (key == "reinit_period") cfg.attack.reinit_period = std::stoi(value);
        else if (key == "lsh_verification_enabled")
            cfg.attack.lsh_verification_enabled = detail::parse_bool(value, key);
        else if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "top_k") cfg.top_k = std::stoi(value);
        else if (key == "lsh_bits") cfg.lsh_bits = std::stoi(value);
        else if (key == "rounds") cfg.rounds = std::stoi(value);
        else if (key == "lr") cfg.lr = std::stod(value);
        else if (key == "local_steps") cfg.local_steps = std::stoi(value);
        else if (key == "master_seed") cfg.master_seed = std::stoull(value);
        else if (key == "output_dir") cfg.output_dir = value;
        else if (key == "salted_commitments")
            cfg.salted_commitments = detail::parse_bool(value, key);
        else if (key == "hash_algorithm") {
            if (value != kHashAlgorithm) {
                throw ConfigError("unsupported hash_algorithm '" + value + "'");
            }
        } else if (key == "version") {
            // informational; accepted for manifest replay
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("invalid value for " + key + ": '" + value + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range for " + key + ": '" + value + "'");
    }
}

inline ScenarioConfig parse_scenario_config(std::istream& is) {
    ScenarioConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        apply_config_entry(cfg, detail::trim(line.substr(0, eq)),
                           detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_scenario_config(in);
}

inline void write_manifest(const ScenarioConfig& cfg, std::ostream& os) {
    char buf[40];
    auto fmt = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    os << "# wpfed run manifest\n";
    os << "version = " << kVersion << "\n";
    os << "hash_algorithm = " << kHashAlgorithm << "\n";
    os << "num_clients = " << cfg.data.num_clients << "\n";
    os << "num_classes = " << cfg.data.num_classes << "\n";
    os << "num_features = " << cfg.data.num_features << "\n";
    os << "informative_features = " << cfg.data.informative_features << "\n";
    os << "samples_per_class = " << cfg.data.samples_per_class << "\n";
    os << "shards_per_client = " << cfg.data.shards_per_client << "\n";
    os << "removed_classes_per_shard = " << cfg.data.removed_classes_per_shard << "\n";
    os << "reference_fraction = " << fmt(cfg.data.reference_fraction) << "\n";
    os << "reference_size_per_client = " << cfg.data.reference_size_per_client << "\n";
    os << "train_test_ratio = " << fmt(cfg.data.train_test_ratio) << "\n";
    os << "class_separation = " << fmt(cfg.data.class_separation) << "\n";
    os << "confusable_pair_separation = " << fmt(cfg.data.confusable_pair_separation) << "\n";
    os << "n_neighbors = " << cfg.selection.n_neighbors << "\n";
    os << "gamma = " << fmt(cfg.selection.gamma) << "\n";
    os << "mode = " << to_string(cfg.selection.mode) << "\n";
    os << "kind = " << to_string(cfg.attack.kind) << "\n";
    os << "start_round = " << cfg.attack.start_round << "\n";
    os << "malicious_fraction = " << fmt(cfg.attack.malicious_fraction) << "\n";
    os << "target_id = " << cfg.attack.target_id << "\n";
    os << "reinit_period = " << cfg.attack.reinit_period << "\n";
    os << "lsh_verification_enabled = " << (cfg.attack.lsh_verification_enabled ? "true" : "false")
       << "\n";
    os << "alpha = " << fmt(cfg.alpha) << "\n";
    os << "top_k = " << cfg.top_k << "\n";
    os << "lsh_bits = " << cfg.lsh_bits << "\n";
    os << "rounds = " << cfg.rounds << "\n";
    os << "lr = " << fmt(cfg.lr) << "\n";
    os << "local_steps = " << cfg.local_steps << "\n";
    os << "master_seed = " << cfg.master_seed << "\n";
    os << "output_dir = " << cfg.output_dir << "\n";
    os << "salted_commitments = " << (cfg.salted_commitments ? "true" : "false") << "\n";
}

// --- simulator ---------------------------------------------------------------

struct RunSummary {
    ScenarioConfig config;
    std::vector<RoundMetrics> metrics;  // round-major, then client id
    std::map<int, ModelParams> final_params;
    std::vector<int> attacker_ids;
    std::vector<int> honest_ids;
    double honest_mean_final_acc = 0.0;
    double honest_std_final_acc = 0.0;
    std::string board_log;

    double final_accuracy(int client_id) const {
        for (auto it = metrics.rbegin(); it != metrics.rend(); ++it) {
            if (it->client_id == client_id) return it->test_accuracy;
        }
        throw InvalidInputError("final_accuracy: unknown client id");
    }
};

inline double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

inline double stddev_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double m = mean_of(xs);
    double s2 = 0.0;
    for (double x : xs) s2 += (x - m) * (x - m);
    return std::sqrt(s2 / (xs.size() - 1));
}

/// Bulk-synchronous simulator: every round snapshots all parameters, then
/// each client runs its round against that snapshot. Clients only interact
/// through the board and the snapshot, so results do not depend on the
/// iteration order within a round.
class Simulator {
public:
    explicit Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        build_clients();
    }

    /// Test hook: replace generated client data before running.
    std::vector<ClientState>& clients() { return clients_; }

    RunSummary run(MessageTrace* trace = nullptr) {
        RunSummary summary;
        summary.config = cfg_;
        summary.attacker_ids = attacker_ids_;
        for (auto& c : clients_) {
            bool attacker = std::find(attacker_ids_.begin(), attacker_ids_.end(), c.id) !=
                            attacker_ids_.end();
            if (!attacker) summary.honest_ids.push_back(c.id);
        }

        Board board;
        std::vector<int> all_ids;
        for (const auto& c : clients_) all_ids.push_back(c.id);

        for (int round = 1; round <= cfg_.rounds; ++round) {
            std::map<int, ModelParams> snapshot;
            for (const auto& c : clients_) snapshot.emplace(c.id, c.params);

            RoundContext ctx;
            ctx.basis = &basis_;
            ctx.selection = cfg_.selection;
            ctx.top_k = cfg_.effective_top_k();
            ctx.lr = cfg_.lr;
            ctx.local_steps = cfg_.local_steps;
            ctx.lsh_verification_enabled =
                cfg_.attack.lsh_verification_enabled && mode_keeps_verification(cfg_.selection.mode);
            ctx.salted_commitments = cfg_.salted_commitments;
            ctx.all_ids = all_ids;
            ctx.net.snapshot = &snapshot;
            ctx.net.trace = trace;

            board.begin_round(round);
            for (auto& c : clients_) {
                summary.metrics.push_back(run_round(c, board, round, ctx));
            }
        }

        for (const auto& c : clients_) summary.final_params.emplace(c.id, c.params);

        std::vector<double> finals;
        for (int id : summary.honest_ids) finals.push_back(summary.final_accuracy(id));
        summary.honest_mean_final_acc = mean_of(finals);
        summary.honest_std_final_acc = stddev_of(finals);

        std::ostringstream dump;
        dump_board(board, dump, cfg_.salted_commitments);
        summary.board_log = dump.str();
        return summary;
    }

private:
    void build_clients() {
        DataConfig data_cfg = cfg_.data;
        data_cfg.seed = derive_seed(cfg_.master_seed, "data");
        Dataset pool = generate_synthetic(data_cfg);
        std::vector<ClientData> client_data = partition_non_iid(pool, data_cfg);

        attacker_ids_ = choose_attackers(cfg_.data.num_clients, cfg_.attack);

        clients_.resize(cfg_.data.num_clients);
        for (int i = 0; i < cfg_.data.num_clients; ++i) {
            ClientState& c = clients_[i];
            c.id = i;
            c.data = std::move(client_data[i]);
            c.seed_base = cfg_.master_seed;
            c.alpha = cfg_.alpha;
            Rng init_rng(derive_seed(cfg_.master_seed, "init", {static_cast<uint64_t>(i)}));
            c.params = init_params(cfg_.data.num_classes, cfg_.data.num_features, init_rng);

            if (std::find(attacker_ids_.begin(), attacker_ids_.end(), i) != attacker_ids_.end()) {
                c.behavior.kind = cfg_.attack.kind;
                c.behavior.start_round = cfg_.attack.start_round;
                c.behavior.reinit_period = cfg_.attack.reinit_period;
                c.behavior.target_id = cfg_.attack.target_id;
                if (cfg_.attack.kind == AttackKind::lsh_cheat) {
                    Rng perm_rng(
                        derive_seed(cfg_.master_seed, "label-permute", {static_cast<uint64_t>(i)}));
                    c.data.local_train.labels = permuted_labels(
                        c.data.local_train.labels, cfg_.data.num_classes, perm_rng);
                }
            }
        }

        int flat_dim = cfg_.data.num_classes * cfg_.data.num_features + cfg_.data.num_classes;
        basis_ = make_basis(flat_dim, cfg_.lsh_bits, derive_seed(cfg_.master_seed, "network"));
    }

    ScenarioConfig cfg_;
    std::vector<ClientState> clients_;
    std::vector<int> attacker_ids_;
    LshBasis basis_;
};

// --- run outputs --------------------------------------------------------------

inline std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out.push_back(';');
        out += std::to_string(ids[i]);
    }
    return out;
}

inline void write_metrics_csv(const std::vector<RoundMetrics>& metrics, std::ostream& os) {
    os << "round,client_id,test_accuracy,local_loss,ref_loss,neighbor_ids,excluded_ids,"
          "verify_failures\n";
    char buf[40];
    auto fmt = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    for (const auto& m : metrics) {
        os << m.round << ',' << m.client_id << ',' << fmt(m.test_accuracy) << ','
           << fmt(m.local_loss) << ',' << fmt(m.ref_loss) << ',' << join_ids(m.neighbor_ids)
           << ',' << join_ids(m.excluded_ids) << ',' << join_ids(m.verify_failures) << '\n';
    }
}

inline void write_run_summary_csv(const RunSummary& summary, std::ostream& os) {
    char buf[40];
    auto fmt = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    os << "mean_final_accuracy,std_final_accuracy,n_honest,rounds\n";
    os << fmt(summary.honest_mean_final_acc) << ',' << fmt(summary.honest_std_final_acc) << ','
       << summary.honest_ids.size() << ',' << summary.config.rounds << '\n';
}

/// Full scenario run: validates, simulates, and writes metrics.csv,
/// board.log, summary.csv and manifest.txt into the output directory.
inline RunSummary run_scenario(const ScenarioConfig& cfg, MessageTrace* trace = nullptr) {
    cfg.validate();
    Simulator sim(cfg);
    RunSummary summary = sim.run(trace);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(fs::path(cfg.output_dir) / "metrics.csv");
        write_metrics_csv(summary.metrics, os);
    }
    {
        std::ofstream os(fs::path(cfg.output_dir) / "board.log");
        os << summary.board_log;
    }
    {
        std::ofstream os(fs::path(cfg.output_dir) / "summary.csv");
        write_run_summary_csv(summary, os);
    }
    {
        std::ofstream os(fs::path(cfg.output_dir) / "manifest.txt");
        write_manifest(cfg, os);
    }
    return summary;
}

}  // namespace wpfed
