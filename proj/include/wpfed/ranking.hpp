#pragma once

// Per-client peer rankings by distillation loss and the network-wide
// ranking score aggregation.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "wpfed/common.hpp"

namespace wpfed {

/// Neutral score for peers that appear in no verified ranking (fresh joiners,
/// never-contacted clients). Avoids the 0/0 in the score ratio.
inline constexpr double kDefaultRankingScore = 0.5;

/// Peers ordered by ascending distillation loss: best performer first.
struct RankingList {
    int owner = -1;
    int round = 0;
    std::vector<int> ranked_peers;

    bool operator==(const RankingList& o) const {
        return owner == o.owner && round == o.round && ranked_peers == o.ranked_peers;
    }
};

struct RankingScoreTable {
    std::map<int, double> scores;  // peer id -> score in [0,1]
    int round = 0;
    int top_k = 1;

    double at(int peer) const {
        auto it = scores.find(peer);
        return it == scores.end() ? kDefaultRankingScore : it->second;
    }
};

/// Sort peers by loss ascending; ties broken by smaller peer id.
inline RankingList build_ranking(int owner, const std::map<int, double>& losses, int round) {
    std::vector<std::pair<double, int>> order;
    order.reserve(losses.size());
    for (const auto& [peer, loss] : losses) {
        if (!std::isfinite(loss)) {
            throw ProtocolError("build_ranking: non-finite loss for peer " + std::to_string(peer));
        }
        order.emplace_back(loss, peer);
    }
    std::sort(order.begin(), order.end());
    RankingList list{owner, round, {}};
    list.ranked_peers.reserve(order.size());
    for (const auto& [loss, peer] : order) {
        list.ranked_peers.push_back(peer);
    }
    return list;
}

/// Score of peer j: (# rankings placing j within the first top_k positions)
/// over (# rankings containing j). Peers in no ranking get the default score.
inline RankingScoreTable ranking_scores(const std::vector<RankingList>& rankings, int top_k,
                                        const std::vector<int>& all_peers, int round = 0) {
    if (top_k < 1) {
        throw InvalidInputError("ranking_scores: top_k must be >= 1");
    }
    RankingScoreTable table{{}, round, top_k};
    for (int peer : all_peers) {
        int appearances = 0;
        int top_appearances = 0;
        for (const auto& r : rankings) {
            auto it = std::find(r.ranked_peers.begin(), r.ranked_peers.end(), peer);
            if (it == r.ranked_peers.end()) continue;
            ++appearances;
            if (it - r.ranked_peers.begin() < top_k) ++top_appearances;
        }
        table.scores[peer] = appearances == 0
                                 ? kDefaultRankingScore
                                 : static_cast<double>(top_appearances) / appearances;
    }
    return table;
}

}  // namespace wpfed
