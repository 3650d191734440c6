#pragma once

// Per-client round orchestration: neighbor selection from board state, the
// P2P distillation exchange, the KL-based LSH verification filter, the model
// update, and announcement publication.
//
// Wire messages form a closed set. Reference features and prediction
// outputs are the only payloads that cross between clients; labels, local
// features and raw parameters never leave their owner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "wpfed/adversary.hpp"
#include "wpfed/announce.hpp"
#include "wpfed/data.hpp"
#include "wpfed/lsh.hpp"
#include "wpfed/model.hpp"
#include "wpfed/ranking.hpp"
#include "wpfed/selection.hpp"

namespace wpfed {

// --- wire messages ---------------------------------------------------------

struct RefFeaturesMsg {
    int from = -1;
    int to = -1;
    Matrix features;
};

struct PredictionMsg {
    int from = -1;
    int to = -1;
    Matrix probabilities;
};

/// Every message the simulated network or board can carry. The privacy audit
/// visits this variant exhaustively.
using WireMessage = std::variant<RefFeaturesMsg, PredictionMsg, Announcement, Reveal>;

struct MessageTrace {
    std::vector<WireMessage> messages;
};

// --- client and network ------------------------------------------------------

struct ClientState {
    int id = -1;
    ModelParams params;
    ClientData data;
    std::vector<int> neighbors;
    std::optional<std::pair<RankingList, Salt>> pending_reveal;
    uint64_t seed_base = 0;  // master seed; per-round streams derive from it
    double alpha = 0.6;
    ClientBehavior behavior;
};

/// Simulated network view for one round: the pre-update parameter snapshot
/// of every client, an optional reachability predicate, and an optional
/// message trace for audits.
struct Network {
    const std::map<int, ModelParams>* snapshot = nullptr;
    std::function<bool(int from, int to)> reachable;
    MessageTrace* trace = nullptr;

    bool can_reach(int a, int b) const { return !reachable || reachable(a, b); }
};

struct PeerResponse {
    int peer_id = -1;
    Prediction outputs;
};

// --- protocol primitives ---------------------------------------------------

/// Distillation exchange: each reachable responder evaluates the requester's
/// reference features with its own model. Labels are never transmitted.
inline std::vector<PeerResponse> exchange(const ClientState& requester,
                                          const std::vector<int>& responders,
                                          const Network& net) {
    std::vector<PeerResponse> responses;
    responses.reserve(responders.size());
    for (int peer : responders) {
        if (!net.can_reach(requester.id, peer)) continue;
        auto it = net.snapshot->find(peer);
        if (it == net.snapshot->end()) continue;
        if (net.trace) {
            net.trace->messages.push_back(
                RefFeaturesMsg{requester.id, peer, requester.data.reference.features});
        }
        Prediction outputs = predict(it->second, requester.data.reference.features);
        if (net.trace) {
            net.trace->messages.push_back(PredictionMsg{peer, requester.id, outputs.probs});
        }
        responses.push_back(PeerResponse{peer, std::move(outputs)});
    }
    return responses;
}

/// Cross-entropy of each response against the requester's true reference
/// labels, which only the requester holds.
inline std::map<int, double> evaluate_peers(const ClientState& state,
                                            const std::vector<PeerResponse>& responses) {
    std::map<int, double> losses;
    for (const auto& r : responses) {
        losses[r.peer_id] = cross_entropy(r.outputs, state.data.reference.labels);
    }
    return losses;
}

/// Mean row-wise KL(own || peer) with both distributions floored.
inline double mean_kl_divergence(const Prediction& own, const Prediction& peer) {
    if (!own.probs.same_shape(peer.probs)) {
        throw InvalidInputError("mean_kl_divergence: shape mismatch");
    }
    double total = 0.0;
    for (int i = 0; i < own.probs.rows; ++i) {
        for (int k = 0; k < own.probs.cols; ++k) {
            double p = std::max(own.probs.at(i, k), kProbFloor);
            double q = std::max(peer.probs.at(i, k), kProbFloor);
            total += p * std::log(p / q);
        }
    }
    return total / own.probs.rows;
}

struct FilterResult {
    std::vector<PeerResponse> valid;
    std::vector<int> excluded;             // peer ids, ascending
    std::map<int, double> kl;              // per-peer divergence
};

/// LSH verification filter: peers whose output similarity to the requester
/// ranks in the lower half are excluded from distillation. With m responses
/// exactly floor(m/2) are excluded; KL ties keep the smaller peer id.
inline FilterResult lsh_filter(const Prediction& own, const std::vector<PeerResponse>& responses) {
    FilterResult result;
    const int m = static_cast<int>(responses.size());
    if (m == 0) return result;

    std::vector<std::pair<double, int>> order;  // (kl, index into responses)
    for (int i = 0; i < m; ++i) {
        double kl = mean_kl_divergence(own, responses[i].outputs);
        result.kl[responses[i].peer_id] = kl;
        order.emplace_back(kl, i);
    }
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return responses[a.second].peer_id < responses[b.second].peer_id;
    });
    const int keep = m - m / 2;
    for (int i = 0; i < m; ++i) {
        if (i < keep) {
            result.valid.push_back(responses[order[i].second]);
        } else {
            result.excluded.push_back(responses[order[i].second].peer_id);
        }
    }
    std::sort(result.valid.begin(), result.valid.end(),
              [](const PeerResponse& a, const PeerResponse& b) { return a.peer_id < b.peer_id; });
    std::sort(result.excluded.begin(), result.excluded.end());
    return result;
}

/// Unweighted mean of the valid responses (the distillation target).
inline std::optional<Prediction> mean_prediction(const std::vector<PeerResponse>& responses) {
    if (responses.empty()) return std::nullopt;
    Prediction mean{Matrix(responses[0].outputs.probs.rows, responses[0].outputs.probs.cols)};
    for (const auto& r : responses) {
        if (!r.outputs.probs.same_shape(mean.probs)) {
            throw InvalidInputError("mean_prediction: response shape mismatch");
        }
        for (size_t i = 0; i < mean.probs.v.size(); ++i) {
            mean.probs.v[i] += r.outputs.probs.v[i];
        }
    }
    double inv = 1.0 / responses.size();
    for (double& x : mean.probs.v) x *= inv;
    return mean;
}

// --- round orchestration -----------------------------------------------------

/// Per-client, per-round record emitted as one CSV row.
struct RoundMetrics {
    int round = 0;
    int client_id = -1;
    double test_accuracy = 0.0;
    double local_loss = 0.0;
    double ref_loss = 0.0;
    std::vector<int> neighbor_ids;
    std::vector<int> excluded_ids;
    std::vector<int> verify_failures;
    bool selection_shortfall = false;  // not part of the CSV contract
};

struct RoundContext {
    const LshBasis* basis = nullptr;
    SelectionConfig selection;
    int top_k = 1;
    double lr = 0.1;
    int local_steps = 5;
    bool lsh_verification_enabled = true;
    bool salted_commitments = true;
    std::vector<int> all_ids;
    Network net;
};

/// One full protocol round for one client:
///   1. read the board, verify reveals, compute distances / scores / weights
///      and the personalized neighbor set (round 1: seeded uniform sample);
///   2. exchange reference features with the selected neighbors;
///   3. evaluate responses and apply the LSH verification filter;
///   4. gradient update against local loss plus the mean of valid responses;
///   5. publish the new announcement and reveal the previous round's ranking.
inline RoundMetrics run_round(ClientState& state, Board& board, int round,
                              const RoundContext& ctx) {
    RoundMetrics metrics;
    metrics.round = round;
    metrics.client_id = state.id;

    std::vector<int> peers;
    for (int id : ctx.all_ids) {
        if (id != state.id) peers.push_back(id);
    }

    // Phase 1: neighbor selection.
    std::map<int, Announcement> prev_anns;
    if (round == 1) {
        Rng rng(derive_seed(state.seed_base, "first-round", {static_cast<uint64_t>(state.id)}));
        state.neighbors =
            first_round_neighbors(state.id, peers, ctx.selection.n_neighbors, rng);
        metrics.selection_shortfall =
            static_cast<int>(state.neighbors.size()) < ctx.selection.n_neighbors;
    } else {
        prev_anns = board.announcements(round - 1);
        auto own_it = prev_anns.find(state.id);
        if (own_it == prev_anns.end()) {
            throw ProtocolError("run_round: own announcement missing for round " +
                                std::to_string(round - 1));
        }

        std::map<int, int> distances;
        std::vector<int> candidates;
        for (int peer : peers) {
            auto it = prev_anns.find(peer);
            if (it == prev_anns.end()) continue;  // silent peer: not selectable this round
            distances[peer] = hamming(own_it->second.lsh_code, it->second.lsh_code);
            candidates.push_back(peer);
        }

        // Reveals of round-2 rankings became fully visible at the end of the
        // previous round; verify them against their commitments.
        std::vector<RankingList> verified;
        if (round >= 3) {
            auto old_anns = board.announcements(round - 2);
            for (const auto& [peer_id, reveal] : board.reveals(round - 2)) {
                auto ann_it = old_anns.find(peer_id);
                if (ann_it == old_anns.end() || !verify_reveal(ann_it->second, reveal,
                                                               ctx.salted_commitments)) {
                    metrics.verify_failures.push_back(peer_id);
                    continue;
                }
                verified.push_back(reveal.ranking);
            }
        }

        RankingScoreTable scores = ranking_scores(verified, ctx.top_k, candidates, round);
        std::optional<Rng> mode_rng;
        if (ctx.selection.mode == SelectionMode::random) {
            mode_rng.emplace(derive_seed(state.seed_base, "random-select",
                                         {static_cast<uint64_t>(state.id),
                                          static_cast<uint64_t>(round)}));
        }
        WeightRow row = compute_weights(state.id, scores, distances, ctx.selection,
                                        mode_rng ? &*mode_rng : nullptr);
        SelectionResult sel = select_neighbors(row, ctx.selection.n_neighbors);
        state.neighbors = sel.ids;
        metrics.selection_shortfall = sel.shortfall;
    }
    metrics.neighbor_ids = state.neighbors;

    // Phase 2: distillation exchange against the round's parameter snapshot.
    std::vector<PeerResponse> responses = exchange(state, state.neighbors, ctx.net);
    std::map<int, double> losses = evaluate_peers(state, responses);

    // Phase 3: LSH verification filter.
    std::vector<PeerResponse> valid = responses;
    if (ctx.lsh_verification_enabled && !responses.empty()) {
        FilterResult filtered = lsh_filter(predict(state.params, state.data.reference.features),
                                           responses);
        valid = std::move(filtered.valid);
        metrics.excluded_ids = std::move(filtered.excluded);
    }
    std::optional<Prediction> target = mean_prediction(valid);

    // Phase 4: model update.
    if (state.behavior.kind == AttackKind::poison && state.behavior.active(round)) {
        Rng reinit_rng(derive_seed(state.seed_base, "poison-reinit",
                                   {static_cast<uint64_t>(state.id),
                                    static_cast<uint64_t>(round)}));
        state.params = poison_step(state.params, state.data.local_train,
                                   state.data.reference.features, target, state.alpha, ctx.lr,
                                   ctx.local_steps, round, state.behavior, reinit_rng);
    } else {
        state.params = combined_update(state.params, state.data.local_train,
                                       state.data.reference.features, target, state.alpha,
                                       ctx.lr, ctx.local_steps, round);
    }

    // Phase 5: announcement publication; rank all contacted peers, including
    // the ones the filter excluded from distillation.
    RankingList ranking = build_ranking(state.id, losses, round);
    Salt salt = Rng(derive_seed(state.seed_base, "salt",
                                {static_cast<uint64_t>(state.id), static_cast<uint64_t>(round)}))
                    .bytes16();

    Announcement announcement;
    const LshCode* cheat_code = nullptr;
    if (state.behavior.kind == AttackKind::lsh_cheat && state.behavior.active(round)) {
        auto it = prev_anns.find(state.behavior.target_id);
        if (it != prev_anns.end()) cheat_code = &it->second.lsh_code;
    }
    if (cheat_code) {
        announcement = lsh_cheat_announce(state.id, round, *cheat_code, ranking, salt,
                                          ctx.salted_commitments);
    } else {
        announcement = Announcement{state.id, round, encode(state.params, *ctx.basis),
                                    commit(ranking, salt, ctx.salted_commitments)};
    }
    board.publish(announcement);
    if (ctx.net.trace) ctx.net.trace->messages.push_back(announcement);

    if (state.pending_reveal) {
        Reveal reveal{state.id, round - 1, state.pending_reveal->first,
                      state.pending_reveal->second};
        board.publish(reveal);
        if (ctx.net.trace) ctx.net.trace->messages.push_back(reveal);
    }
    state.pending_reveal = {ranking, salt};

    // Round metrics from the post-update model.
    metrics.test_accuracy = accuracy(state.params, state.data.local_test);
    metrics.local_loss =
        cross_entropy(predict(state.params, state.data.local_train.features),
                      state.data.local_train.labels);
    metrics.ref_loss =
        target ? distill_loss(predict(state.params, state.data.reference.features), *target)
               : 0.0;
    return metrics;
}

}  // namespace wpfed
