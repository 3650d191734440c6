#pragma once

// Multi-run experiment drivers: selection-mode ablations and the two attack
// scenarios, each evaluated over paired seeds (same seed -> same data and
// initialization across arms, so differences isolate the arm under test).

#include <ostream>
#include <string>
#include <vector>

#include "wpfed/simulation.hpp"

namespace wpfed {

/// Honest-client mean of final accuracy restricted to the given ids, so an
/// attack run and its no-attack baseline average over the same clients.
inline double honest_mean_final(const RunSummary& summary, const std::vector<int>& ids) {
    std::vector<double> finals;
    for (int id : ids) finals.push_back(summary.final_accuracy(id));
    return mean_of(finals);
}

// --- selection-mode ablation ---------------------------------------------

struct ModeRun {
    std::string mode;
    uint64_t seed = 0;
    double honest_mean_final_acc = 0.0;
};

struct ModeAggregate {
    std::string mode;
    double mean = 0.0;
    double stddev = 0.0;
    int n_seeds = 0;
};

struct ModeComparison {
    std::vector<ModeRun> runs;
    std::vector<ModeAggregate> aggregates;

    double run_value(const std::string& mode, uint64_t seed) const {
        for (const auto& r : runs) {
            if (r.mode == mode && r.seed == seed) return r.honest_mean_final_acc;
        }
        throw InvalidInputError("no run for mode '" + mode + "'");
    }

    const ModeAggregate& aggregate(const std::string& mode) const {
        for (const auto& a : aggregates) {
            if (a.mode == mode) return a;
        }
        throw InvalidInputError("no aggregate for mode '" + mode + "'");
    }
};

/// Applies a mode name to a scenario. Besides the four selection modes this
/// accepts "silo": isolated local training via alpha = 1.
inline ScenarioConfig config_for_mode(ScenarioConfig cfg, const std::string& mode) {
    if (mode == "silo") {
        cfg.alpha = 1.0;
        cfg.selection.mode = SelectionMode::full;
    } else {
        cfg.selection.mode = selection_mode_from_string(mode);
    }
    return cfg;
}

inline ModeComparison compare_modes(const ScenarioConfig& base,
                                    const std::vector<std::string>& modes,
                                    const std::vector<uint64_t>& seeds) {
    ModeComparison cmp;
    for (const auto& mode : modes) {
        std::vector<double> finals;
        for (uint64_t seed : seeds) {
            ScenarioConfig cfg = config_for_mode(base, mode);
            cfg.master_seed = seed;
            Simulator sim(cfg);
            RunSummary summary = sim.run();
            cmp.runs.push_back(ModeRun{mode, seed, summary.honest_mean_final_acc});
            finals.push_back(summary.honest_mean_final_acc);
        }
        cmp.aggregates.push_back(
            ModeAggregate{mode, mean_of(finals), stddev_of(finals),
                          static_cast<int>(finals.size())});
    }
    return cmp;
}

inline void write_mode_runs_csv(const ModeComparison& cmp, std::ostream& os) {
    os << "mode,seed,honest_mean_final_accuracy\n";
    char buf[40];
    for (const auto& r : cmp.runs) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.honest_mean_final_acc);
        os << r.mode << ',' << r.seed << ',' << buf << '\n';
    }
}

inline void write_mode_summary_csv(const ModeComparison& cmp, std::ostream& os) {
    os << "mode,mean_final_accuracy,std_final_accuracy,n_seeds\n";
    char mbuf[40], sbuf[40];
    for (const auto& a : cmp.aggregates) {
        std::snprintf(mbuf, sizeof(mbuf), "%.17g", a.mean);
        std::snprintf(sbuf, sizeof(sbuf), "%.17g", a.stddev);
        os << a.mode << ',' << mbuf << ',' << sbuf << ',' << a.n_seeds << '\n';
    }
}

// --- LSH cheating experiment -----------------------------------------------

struct LshAttackOutcome {
    uint64_t seed = 0;
    double target_baseline_on = 0.0;   // no attack, verification on
    double target_baseline_off = 0.0;  // no attack, verification off
    double target_attacked_on = 0.0;   // attack, verification on
    double target_attacked_off = 0.0;  // attack, verification off

    double drop_on() const { return target_baseline_on - target_attacked_on; }
    double drop_off() const { return target_baseline_off - target_attacked_off; }
};

/// Four runs per seed: {attack, no attack} x {verification on, off}, all on
/// identical data. The target's final accuracy is the outcome of interest.
inline std::vector<LshAttackOutcome> run_lsh_attack_experiment(
    const ScenarioConfig& base, const std::vector<uint64_t>& seeds) {
    std::vector<LshAttackOutcome> outcomes;
    for (uint64_t seed : seeds) {
        LshAttackOutcome out;
        out.seed = seed;
        for (bool attacked : {false, true}) {
            for (bool verification : {true, false}) {
                ScenarioConfig cfg = base;
                cfg.master_seed = seed;
                cfg.attack.kind = attacked ? AttackKind::lsh_cheat : AttackKind::none;
                cfg.attack.lsh_verification_enabled = verification;
                Simulator sim(cfg);
                double acc = sim.run().final_accuracy(base.attack.target_id);
                if (attacked && verification) out.target_attacked_on = acc;
                else if (attacked) out.target_attacked_off = acc;
                else if (verification) out.target_baseline_on = acc;
                else out.target_baseline_off = acc;
            }
        }
        outcomes.push_back(out);
    }
    return outcomes;
}

inline void write_lsh_attack_csv(const std::vector<LshAttackOutcome>& outcomes,
                                 std::ostream& os) {
    os << "seed,baseline_on,baseline_off,attacked_on,attacked_off,drop_on,drop_off\n";
    char buf[6][40];
    for (const auto& o : outcomes) {
        double vals[6] = {o.target_baseline_on, o.target_baseline_off, o.target_attacked_on,
                          o.target_attacked_off, o.drop_on(), o.drop_off()};
        for (int i = 0; i < 6; ++i) std::snprintf(buf[i], sizeof(buf[i]), "%.17g", vals[i]);
        os << o.seed << ',' << buf[0] << ',' << buf[1] << ',' << buf[2] << ',' << buf[3] << ','
           << buf[4] << ',' << buf[5] << '\n';
    }
}

// --- poison experiment -------------------------------------------------------

struct PoisonOutcome {
    uint64_t seed = 0;
    double fraction = 0.0;
    double wpfed_attacked = 0.0;   // mode full, verification on
    double wpfed_baseline = 0.0;
    double random_attacked = 0.0;  // mode random, verification off
    double random_baseline = 0.0;

    double wpfed_degradation() const { return wpfed_baseline - wpfed_attacked; }
    double random_degradation() const { return random_baseline - random_attacked; }
};

/// WPFed (full selection, verification on) versus an unprotected
/// random-selection stand-in, under poisoning at each malicious fraction.
/// Baselines are no-attack runs of the same arm, averaged over the same
/// honest clients as the attacked run.
inline std::vector<PoisonOutcome> run_poison_experiment(const ScenarioConfig& base,
                                                        const std::vector<double>& fractions,
                                                        const std::vector<uint64_t>& seeds) {
    std::vector<PoisonOutcome> outcomes;
    for (uint64_t seed : seeds) {
        for (double fraction : fractions) {
            PoisonOutcome out;
            out.seed = seed;
            out.fraction = fraction;
            for (bool wpfed_arm : {true, false}) {
                ScenarioConfig attacked = base;
                attacked.master_seed = seed;
                attacked.attack.kind = AttackKind::poison;
                attacked.attack.malicious_fraction = fraction;
                attacked.selection.mode =
                    wpfed_arm ? SelectionMode::full : SelectionMode::random;
                attacked.attack.lsh_verification_enabled = wpfed_arm;

                ScenarioConfig baseline = attacked;
                baseline.attack.kind = AttackKind::none;
                baseline.attack.malicious_fraction = 0.0;

                Simulator attacked_sim(attacked);
                RunSummary attacked_summary = attacked_sim.run();
                Simulator baseline_sim(baseline);
                RunSummary baseline_summary = baseline_sim.run();

                double attacked_acc =
                    honest_mean_final(attacked_summary, attacked_summary.honest_ids);
                double baseline_acc =
                    honest_mean_final(baseline_summary, attacked_summary.honest_ids);
                if (wpfed_arm) {
                    out.wpfed_attacked = attacked_acc;
                    out.wpfed_baseline = baseline_acc;
                } else {
                    out.random_attacked = attacked_acc;
                    out.random_baseline = baseline_acc;
                }
            }
            outcomes.push_back(out);
        }
    }
    return outcomes;
}

inline void write_poison_csv(const std::vector<PoisonOutcome>& outcomes, std::ostream& os) {
    os << "seed,fraction,wpfed_baseline,wpfed_attacked,wpfed_degradation,random_baseline,"
          "random_attacked,random_degradation\n";
    char buf[7][40];
    for (const auto& o : outcomes) {
        double vals[7] = {o.fraction,        o.wpfed_baseline,  o.wpfed_attacked,
                          o.wpfed_degradation(), o.random_baseline, o.random_attacked,
                          o.random_degradation()};
        for (int i = 0; i < 7; ++i) std::snprintf(buf[i], sizeof(buf[i]), "%.17g", vals[i]);
        os << o.seed << ',' << buf[0] << ',' << buf[1] << ',' << buf[2] << ',' << buf[3] << ','
           << buf[4] << ',' << buf[5] << ',' << buf[6] << '\n';
    }
}

}  // namespace wpfed
