#pragma once

// Malicious client behaviors. Attackers obey the wire protocol; their
// deviation is purely in content: lsh_cheat clients publish a copy of the
// target's LSH code (and train on label-permuted data so their responses
// are genuinely harmful), poison clients periodically reinitialize their
// parameters to inject noise.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wpfed/announce.hpp"
#include "wpfed/model.hpp"

namespace wpfed {

enum class AttackKind { none, lsh_cheat, poison };

inline std::string to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::none: return "none";
        case AttackKind::lsh_cheat: return "lsh_cheat";
        case AttackKind::poison: return "poison";
    }
    return "none";
}

inline AttackKind attack_kind_from_string(const std::string& s) {
    if (s == "none") return AttackKind::none;
    if (s == "lsh_cheat") return AttackKind::lsh_cheat;
    if (s == "poison") return AttackKind::poison;
    throw ConfigError("unknown attack kind '" + s + "'");
}

struct AttackConfig {
    AttackKind kind = AttackKind::none;
    int start_round = 50;
    double malicious_fraction = 0.0;
    int target_id = 0;       // lsh_cheat only
    int reinit_period = 3;   // poison only
    bool lsh_verification_enabled = true;

    void validate(int num_clients) const {
        if (malicious_fraction < 0.0 || malicious_fraction > 1.0) {
            throw ConfigError("malicious_fraction must be in [0,1]");
        }
        if (kind == AttackKind::none) return;
        if (start_round < 1) throw ConfigError("attack start_round must be >= 1");
        if (kind == AttackKind::lsh_cheat &&
            (target_id < 0 || target_id >= num_clients)) {
            throw ConfigError("lsh_cheat target_id out of range");
        }
        if (kind == AttackKind::poison && reinit_period < 1) {
            throw ConfigError("poison reinit_period must be >= 1");
        }
    }
};

/// Per-client behavior carried in ClientState. Honest clients keep the
/// defaults.
struct ClientBehavior {
    AttackKind kind = AttackKind::none;
    int start_round = 0;
    int reinit_period = 0;
    int target_id = -1;

    bool active(int round) const { return kind != AttackKind::none && round >= start_round; }
};

/// Deterministic attacker roster: the highest client ids, skipping the
/// lsh_cheat target. For lsh_cheat the fraction applies to the target's
/// potential neighbors (num_clients - 1), for poison to all clients.
inline std::vector<int> choose_attackers(int num_clients, const AttackConfig& config) {
    if (config.kind == AttackKind::none) return {};
    int base = config.kind == AttackKind::lsh_cheat ? num_clients - 1 : num_clients;
    int count = static_cast<int>(std::lround(config.malicious_fraction * base));
    std::vector<int> out;
    for (int id = num_clients - 1; id >= 0 && static_cast<int>(out.size()) < count; --id) {
        if (config.kind == AttackKind::lsh_cheat && id == config.target_id) continue;
        out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline bool poison_reinit_due(int round, int start_round, int reinit_period) {
    return round >= start_round && (round - start_round) % reinit_period == 0;
}

/// Poison update: on reinit rounds, parameters are resampled from the
/// initialization distribution; otherwise the attacker trains normally.
inline ModelParams poison_step(const ModelParams& params, const Dataset& local_train,
                               const Matrix& ref_features,
                               const std::optional<Prediction>& neighbor_mean, double alpha,
                               double lr, int steps, int round, const ClientBehavior& behavior,
                               Rng& reinit_rng) {
    if (poison_reinit_due(round, behavior.start_round, behavior.reinit_period)) {
        return init_params(params.num_classes(), params.num_features(), reinit_rng);
    }
    return combined_update(params, local_train, ref_features, neighbor_mean, alpha, lr, steps,
                           round);
}

/// Forged announcement: the attacker publishes a copy of the target's latest
/// LSH code instead of encoding its own parameters.
inline Announcement lsh_cheat_announce(int attacker_id, int round, const LshCode& target_code,
                                       const RankingList& ranking, const Salt& salt, bool salted) {
    return Announcement{attacker_id, round, target_code, commit(ranking, salt, salted)};
}

/// Cyclic label shift (never the identity) used to corrupt lsh_cheat
/// attackers' training data.
inline std::vector<int> permuted_labels(const std::vector<int>& labels, int num_classes,
                                        Rng& rng) {
    int shift = rng.uniform_int(1, num_classes - 1);
    std::vector<int> out(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        out[i] = (labels[i] + shift) % num_classes;
    }
    return out;
}

}  // namespace wpfed
