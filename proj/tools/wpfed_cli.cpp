// wpfed command line: run simulation scenarios, the selection-mode ablation,
// the two attack experiments, and board-dump audits.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wpfed/wpfed.hpp"

namespace {

namespace fs = std::filesystem;

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<int> rounds;
    std::optional<std::string> mode;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "scenario config file (key = value lines)");
    cmd->add_option("--seed", opts.seed, "master seed (overrides config)");
    cmd->add_option("--rounds", opts.rounds, "number of protocol rounds (overrides config)");
    cmd->add_option("--mode", opts.mode, "selection mode: full|no_lsh|no_rank|random");
    cmd->add_option("--out", opts.out, "output directory");
}

wpfed::ScenarioConfig resolve_config(const CommonOpts& opts) {
    wpfed::ScenarioConfig cfg;
    if (!opts.config_path.empty()) {
        cfg = wpfed::load_scenario_config(opts.config_path);
    }
    if (opts.seed) cfg.master_seed = *opts.seed;
    if (opts.rounds) cfg.rounds = *opts.rounds;
    if (opts.mode) cfg.selection.mode = wpfed::selection_mode_from_string(*opts.mode);
    if (opts.out) cfg.output_dir = *opts.out;
    return cfg;
}

std::vector<uint64_t> parse_seed_list(const std::string& s) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    }
    if (seeds.empty()) throw wpfed::ConfigError("empty seed list");
    return seeds;
}

std::vector<double> parse_fraction_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw wpfed::ConfigError("empty fraction list");
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    os << text;
}

int cmd_run(const CommonOpts& opts) {
    wpfed::ScenarioConfig cfg = resolve_config(opts);
    wpfed::RunSummary summary = wpfed::run_scenario(cfg);
    std::printf("rounds=%d clients=%d honest=%zu\n", cfg.rounds, cfg.data.num_clients,
                summary.honest_ids.size());
    std::printf("honest mean final accuracy = %.4f +/- %.4f\n", summary.honest_mean_final_acc,
                summary.honest_std_final_acc);
    std::printf("outputs written to %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& modes_csv,
               const std::string& seeds_csv) {
    wpfed::ScenarioConfig cfg = resolve_config(opts);
    std::vector<std::string> modes;
    {
        std::stringstream ss(modes_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) modes.push_back(tok);
        }
    }
    std::vector<uint64_t> seeds = parse_seed_list(seeds_csv);

    wpfed::ModeComparison cmp = wpfed::compare_modes(cfg, modes, seeds);

    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(fs::path(cfg.output_dir) / "ablation.csv");
        wpfed::write_mode_runs_csv(cmp, os);
    }
    {
        std::ofstream os(fs::path(cfg.output_dir) / "summary.csv");
        wpfed::write_mode_summary_csv(cmp, os);
    }
    for (const auto& a : cmp.aggregates) {
        std::printf("%-8s mean=%.4f std=%.4f (n=%d)\n", a.mode.c_str(), a.mean, a.stddev,
                    a.n_seeds);
    }
    std::printf("outputs written to %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_attack_lsh(const CommonOpts& opts, const std::string& seeds_csv, double fraction,
                   int target, int start_round) {
    wpfed::ScenarioConfig cfg = resolve_config(opts);
    cfg.attack.kind = wpfed::AttackKind::lsh_cheat;
    cfg.attack.malicious_fraction = fraction;
    cfg.attack.target_id = target;
    cfg.attack.start_round = start_round;

    std::vector<uint64_t> seeds = parse_seed_list(seeds_csv);
    auto outcomes = wpfed::run_lsh_attack_experiment(cfg, seeds);

    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(fs::path(cfg.output_dir) / "attack_lsh.csv");
        wpfed::write_lsh_attack_csv(outcomes, os);
    }
    int gap_positive = 0;
    double mean_drop_on = 0.0, mean_drop_off = 0.0;
    for (const auto& o : outcomes) {
        if (o.target_attacked_on > o.target_attacked_off) ++gap_positive;
        mean_drop_on += o.drop_on();
        mean_drop_off += o.drop_off();
        std::printf("seed=%llu drop(verify on)=%.4f drop(verify off)=%.4f\n",
                    static_cast<unsigned long long>(o.seed), o.drop_on(), o.drop_off());
    }
    mean_drop_on /= outcomes.size();
    mean_drop_off /= outcomes.size();
    std::printf("mean drop: verification on %.4f, off %.4f; on>off accuracy in %d/%zu seeds\n",
                mean_drop_on, mean_drop_off, gap_positive, outcomes.size());
    std::printf("outputs written to %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_attack_poison(const CommonOpts& opts, const std::string& seeds_csv,
                      const std::string& fractions_csv, int start_round, int reinit_period) {
    wpfed::ScenarioConfig cfg = resolve_config(opts);
    cfg.attack.start_round = start_round;
    cfg.attack.reinit_period = reinit_period;

    std::vector<uint64_t> seeds = parse_seed_list(seeds_csv);
    std::vector<double> fractions = parse_fraction_list(fractions_csv);
    auto outcomes = wpfed::run_poison_experiment(cfg, fractions, seeds);

    fs::create_directories(cfg.output_dir);
    {
        std::ofstream os(fs::path(cfg.output_dir) / "attack_poison.csv");
        wpfed::write_poison_csv(outcomes, os);
    }
    for (double f : fractions) {
        double wpfed_deg = 0.0, random_deg = 0.0;
        int n = 0;
        for (const auto& o : outcomes) {
            if (o.fraction != f) continue;
            wpfed_deg += o.wpfed_degradation();
            random_deg += o.random_degradation();
            ++n;
        }
        std::printf("fraction=%.2f mean degradation: wpfed=%.4f random=%.4f (n=%d)\n", f,
                    wpfed_deg / n, random_deg / n, n);
    }
    std::printf("outputs written to %s\n", cfg.output_dir.c_str());
    return 0;
}

int cmd_verify_dump(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        std::fprintf(stderr, "cannot open board dump '%s'\n", path.c_str());
        return 2;
    }
    wpfed::BoardDump dump = wpfed::parse_board_dump(is);
    wpfed::DumpAudit audit = wpfed::audit_dump(dump);
    std::printf("records: %zu announcements, %zu reveals (salted=%d)\n",
                dump.announcements.size(), dump.reveals.size(), dump.salted ? 1 : 0);
    std::printf("commitment pairs checked: %d, passed: %d, unmatched reveals: %d\n",
                audit.pairs_checked, audit.pairs_passed, audit.unmatched_reveals);
    for (const auto& [client, round] : audit.failures) {
        std::printf("FAILED verification: client %d round %d\n", client, round);
    }
    return audit.failures.empty() && audit.unmatched_reveals == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"WPFed decentralized personalized-federation simulator"};
    app.require_subcommand(1);

    CommonOpts run_opts, ablate_opts, lsh_opts, poison_opts;

    auto* run_cmd = app.add_subcommand("run", "run one scenario and write its outputs");
    add_common(run_cmd, run_opts);

    auto* ablate_cmd = app.add_subcommand("ablate", "compare selection modes over seeds");
    add_common(ablate_cmd, ablate_opts);
    std::string modes_csv = "full,no_lsh,no_rank,random,silo";
    std::string ablate_seeds = "1,2,3,4,5";
    ablate_cmd->add_option("--modes", modes_csv, "comma-separated mode list (may include silo)");
    ablate_cmd->add_option("--seeds", ablate_seeds, "comma-separated master seeds");

    auto* lsh_cmd = app.add_subcommand("attack-lsh", "LSH cheating attack experiment");
    add_common(lsh_cmd, lsh_opts);
    std::string lsh_seeds = "1,2,3,4,5";
    double lsh_fraction = 0.5;
    int lsh_target = 0;
    int lsh_start = 50;
    lsh_cmd->add_option("--seeds", lsh_seeds, "comma-separated master seeds");
    lsh_cmd->add_option("--fraction", lsh_fraction, "fraction of the target's peers attacking");
    lsh_cmd->add_option("--target", lsh_target, "target client id");
    lsh_cmd->add_option("--start-round", lsh_start, "first attack round");

    auto* poison_cmd = app.add_subcommand("attack-poison", "poisoning attack experiment");
    add_common(poison_cmd, poison_opts);
    std::string poison_seeds = "1,2,3,4,5";
    std::string fractions_csv = "0.2,0.4";
    int poison_start = 50;
    int reinit_period = 3;
    poison_cmd->add_option("--seeds", poison_seeds, "comma-separated master seeds");
    poison_cmd->add_option("--fractions", fractions_csv, "comma-separated malicious fractions");
    poison_cmd->add_option("--start-round", poison_start, "first attack round");
    poison_cmd->add_option("--reinit-period", reinit_period, "rounds between reinitializations");

    auto* verify_cmd =
        app.add_subcommand("verify-dump", "re-check every commitment/reveal pair in a board dump");
    std::string dump_path;
    verify_cmd->add_option("dump", dump_path, "board.log file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(run_opts);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_opts, modes_csv, ablate_seeds);
        if (lsh_cmd->parsed())
            return cmd_attack_lsh(lsh_opts, lsh_seeds, lsh_fraction, lsh_target, lsh_start);
        if (poison_cmd->parsed())
            return cmd_attack_poison(poison_opts, poison_seeds, fractions_csv, poison_start,
                                     reinit_period);
        if (verify_cmd->parsed()) return cmd_verify_dump(dump_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
