#pragma once

// Communication weights combining ranking score and LSH distance, top-N
// neighbor selection, and the ablation modes that drop either factor.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "wpfed/ranking.hpp"
#include "wpfed/rng.hpp"

namespace wpfed {

enum class SelectionMode { full, no_lsh, no_rank, random };

inline std::string to_string(SelectionMode mode) {
    switch (mode) {
        case SelectionMode::full: return "full";
        case SelectionMode::no_lsh: return "no_lsh";
        case SelectionMode::no_rank: return "no_rank";
        case SelectionMode::random: return "random";
    }
    return "full";
}

inline SelectionMode selection_mode_from_string(const std::string& s) {
    if (s == "full") return SelectionMode::full;
    if (s == "no_lsh") return SelectionMode::no_lsh;
    if (s == "no_rank") return SelectionMode::no_rank;
    if (s == "random") return SelectionMode::random;
    throw ConfigError("unknown selection mode '" + s + "'");
}

/// Random selection stands in for an undefended baseline: it removes both
/// ranking and similarity machinery, so runs in this mode also skip the LSH
/// verification filter. The single-component ablations keep the filter.
inline bool mode_keeps_verification(SelectionMode mode) {
    return mode != SelectionMode::random;
}

struct SelectionConfig {
    int n_neighbors = 5;
    double gamma = 0.25;
    SelectionMode mode = SelectionMode::full;

    void validate(int num_clients) const {
        if (n_neighbors < 1) throw ConfigError("n_neighbors must be >= 1");
        if (n_neighbors >= num_clients) throw ConfigError("n_neighbors must be < num_clients");
        if (gamma < 0.0 || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
    }
};

struct WeightRow {
    int owner = -1;
    std::map<int, double> weights;  // peer id -> weight, owner excluded
};

/// w_ij per mode: full = s_j * exp(-gamma * d_ij); no_lsh = s_j;
/// no_rank = exp(-gamma * d_ij); random = uniform draw from the round RNG.
inline WeightRow compute_weights(int owner, const RankingScoreTable& scores,
                                 const std::map<int, int>& distances,
                                 const SelectionConfig& config, Rng* round_rng = nullptr) {
    WeightRow row{owner, {}};
    for (const auto& [peer, score] : scores.scores) {
        if (peer == owner) continue;
        double w = 0.0;
        switch (config.mode) {
            case SelectionMode::full:
            case SelectionMode::no_rank: {
                auto it = distances.find(peer);
                if (it == distances.end()) {
                    throw InvalidInputError("compute_weights: missing distance for peer " +
                                            std::to_string(peer));
                }
                double sim = std::exp(-config.gamma * it->second);
                w = config.mode == SelectionMode::full ? score * sim : sim;
                break;
            }
            case SelectionMode::no_lsh:
                w = score;
                break;
            case SelectionMode::random:
                if (round_rng == nullptr) {
                    throw InvalidInputError("compute_weights: random mode needs the round RNG");
                }
                // Strictly positive so random weights never tie with a zero score.
                w = 1e-9 + round_rng->uniform();
                break;
        }
        row.weights[peer] = w;
    }
    return row;
}

struct SelectionResult {
    std::vector<int> ids;   // ascending id order
    bool shortfall = false; // fewer candidates than requested
};

/// Ids of the n largest weights; ties broken by smaller peer id.
inline SelectionResult select_neighbors(const WeightRow& row, int n) {
    if (n < 1) throw InvalidInputError("select_neighbors: n must be >= 1");
    std::vector<std::pair<double, int>> order;
    order.reserve(row.weights.size());
    for (const auto& [peer, w] : row.weights) {
        order.emplace_back(w, peer);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    SelectionResult result;
    if (static_cast<int>(order.size()) < n) {
        result.shortfall = true;
        n = static_cast<int>(order.size());
    }
    for (int i = 0; i < n; ++i) {
        result.ids.push_back(order[i].second);
    }
    std::sort(result.ids.begin(), result.ids.end());
    return result;
}

/// Round-1 bootstrap: uniform sample of n peers without replacement.
inline std::vector<int> first_round_neighbors(int owner, const std::vector<int>& all_peers, int n,
                                              Rng& rng) {
    std::vector<int> peers;
    peers.reserve(all_peers.size());
    for (int p : all_peers) {
        if (p != owner) peers.push_back(p);
    }
    if (n >= static_cast<int>(peers.size())) {
        std::sort(peers.begin(), peers.end());
        return peers;
    }
    std::vector<int> picked = rng.sample_without_replacement(peers, n);
    std::sort(picked.begin(), picked.end());
    return picked;
}

}  // namespace wpfed
