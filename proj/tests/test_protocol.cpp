#include "wpfed/protocol.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "wpfed/simulation.hpp"

using namespace wpfed;

namespace {

constexpr int kClasses = 4;
constexpr int kFeatures = 6;

ClientData make_client_data(Rng& rng, int train_rows = 30, int ref_rows = 12) {
    ClientData data;
    data.local_train = oracle::random_dataset(train_rows, kFeatures, kClasses, rng);
    data.local_test = oracle::random_dataset(10, kFeatures, kClasses, rng);
    data.reference = oracle::random_dataset(ref_rows, kFeatures, kClasses, rng);
    return data;
}

ClientState make_client(int id, Rng& rng, uint64_t seed_base = 1234) {
    ClientState c;
    c.id = id;
    c.params = oracle::random_params(kClasses, kFeatures, rng, 0.1);
    c.data = make_client_data(rng);
    c.seed_base = seed_base;
    c.alpha = 0.6;
    return c;
}

struct MiniNet {
    std::map<int, ModelParams> snapshot;
    Network net;

    explicit MiniNet(const std::vector<ClientState>& clients) {
        for (const auto& c : clients) snapshot.emplace(c.id, c.params);
        net.snapshot = &snapshot;
    }
};

}  // namespace

TEST(Exchange, ResponderWithSameParamsEchoesOwnPrediction) {
    Rng rng(1);
    std::vector<ClientState> clients{make_client(0, rng), make_client(1, rng)};
    clients[1].params = clients[0].params;
    MiniNet mini(clients);

    auto responses = exchange(clients[0], {1}, mini.net);
    ASSERT_EQ(responses.size(), 1u);
    Prediction own = predict(clients[0].params, clients[0].data.reference.features);
    EXPECT_EQ(responses[0].outputs.probs, own.probs);
}

TEST(Exchange, ZeroRespondersGiveEmptyList) {
    Rng rng(2);
    std::vector<ClientState> clients{make_client(0, rng)};
    MiniNet mini(clients);
    EXPECT_TRUE(exchange(clients[0], {}, mini.net).empty());
}

TEST(Exchange, ResponsesMatchDirectPredictOracle) {
    Rng rng(3);
    std::vector<ClientState> clients{make_client(0, rng), make_client(1, rng),
                                     make_client(2, rng)};
    MiniNet mini(clients);
    auto responses = exchange(clients[0], {1, 2}, mini.net);
    ASSERT_EQ(responses.size(), 2u);
    for (const auto& r : responses) {
        Prediction direct = predict(mini.snapshot.at(r.peer_id),
                                    clients[0].data.reference.features);
        EXPECT_EQ(r.outputs.probs, direct.probs);
    }
}

TEST(Exchange, DroppedPeerIsAbsentAndRoundProceeds) {
    Rng rng(4);
    std::vector<ClientState> clients{make_client(0, rng), make_client(1, rng),
                                     make_client(2, rng)};
    MiniNet mini(clients);
    mini.net.reachable = [](int, int to) { return to != 1; };
    auto responses = exchange(clients[0], {1, 2}, mini.net);
    ASSERT_EQ(responses.size(), 1u);
    EXPECT_EQ(responses[0].peer_id, 2);
}

TEST(EvaluatePeers, PerfectAndUniformResponses) {
    Rng rng(5);
    ClientState c = make_client(0, rng);
    const auto& labels = c.data.reference.labels;
    int rows = c.data.reference.size();

    Prediction perfect{Matrix(rows, kClasses)};
    for (int i = 0; i < rows; ++i) perfect.probs.at(i, labels[i]) = 1.0;
    Prediction uniform{Matrix(rows, kClasses, 1.0 / kClasses)};

    auto losses = evaluate_peers(c, {{1, perfect}, {2, uniform}});
    EXPECT_DOUBLE_EQ(losses.at(1), 0.0);
    EXPECT_NEAR(losses.at(2), std::log(static_cast<double>(kClasses)), 1e-12);
}

TEST(EvaluatePeers, MatchesCrossEntropyOracle) {
    Rng rng(6);
    ClientState c = make_client(0, rng);
    Prediction resp = oracle::random_prediction(c.data.reference.size(), kClasses, rng);
    auto losses = evaluate_peers(c, {{3, resp}});
    EXPECT_NEAR(losses.at(3), oracle::cross_entropy_oracle(resp, c.data.reference.labels),
                1e-12);
}

TEST(LshFilter, FarPeerExcludedOfTwo) {
    Rng rng(7);
    Prediction own = oracle::random_prediction(8, kClasses, rng);
    Prediction far = oracle::random_prediction(8, kClasses, rng);
    auto result = lsh_filter(own, {{1, own}, {2, far}});
    ASSERT_EQ(result.valid.size(), 1u);
    EXPECT_EQ(result.valid[0].peer_id, 1);
    EXPECT_EQ(result.excluded, (std::vector<int>{2}));
}

TEST(LshFilter, SingleResponseAlwaysKept) {
    Rng rng(8);
    Prediction own = oracle::random_prediction(5, kClasses, rng);
    Prediction other = oracle::random_prediction(5, kClasses, rng);
    auto result = lsh_filter(own, {{4, other}});
    EXPECT_EQ(result.valid.size(), 1u);
    EXPECT_TRUE(result.excluded.empty());
}

TEST(LshFilter, KeepsTopHalfByIndependentKl) {
    Rng rng(9);
    Prediction own = oracle::random_prediction(10, kClasses, rng);
    std::vector<PeerResponse> responses;
    for (int p = 0; p < 5; ++p) {
        responses.push_back({p, oracle::random_prediction(10, kClasses, rng)});
    }
    auto result = lsh_filter(own, responses);
    EXPECT_EQ(result.valid.size(), 3u);
    EXPECT_EQ(result.excluded.size(), 2u);

    std::vector<std::pair<double, int>> by_kl;
    for (const auto& r : responses) {
        by_kl.emplace_back(oracle::kl_oracle(own.probs, r.outputs.probs), r.peer_id);
    }
    std::sort(by_kl.begin(), by_kl.end());
    std::set<int> expected_valid{by_kl[0].second, by_kl[1].second, by_kl[2].second};
    for (const auto& r : result.valid) {
        EXPECT_EQ(expected_valid.count(r.peer_id), 1u);
    }
}

TEST(LshFilter, ExcludesExactlyFloorHalf) {
    Rng rng(10);
    Prediction own = oracle::random_prediction(6, kClasses, rng);
    for (int m = 1; m <= 9; ++m) {
        std::vector<PeerResponse> responses;
        for (int p = 0; p < m; ++p) {
            responses.push_back({p, oracle::random_prediction(6, kClasses, rng)});
        }
        auto result = lsh_filter(own, responses);
        EXPECT_EQ(static_cast<int>(result.excluded.size()), m / 2);
        EXPECT_EQ(static_cast<int>(result.valid.size()), m - m / 2);
    }
}

TEST(MeanPrediction, UnweightedAverage) {
    Rng rng(11);
    Prediction a = oracle::random_prediction(4, kClasses, rng);
    Prediction b = oracle::random_prediction(4, kClasses, rng);
    auto mean = mean_prediction({{1, a}, {2, b}});
    ASSERT_TRUE(mean.has_value());
    for (size_t i = 0; i < mean->probs.v.size(); ++i) {
        EXPECT_NEAR(mean->probs.v[i], 0.5 * (a.probs.v[i] + b.probs.v[i]), 1e-15);
    }
    EXPECT_FALSE(mean_prediction({}).has_value());
}

// --- full-round behavior ----------------------------------------------------

namespace {

struct MiniSim {
    std::vector<ClientState> clients;
    Board board;
    LshBasis basis;
    RoundContext ctx_template;
    std::vector<RoundMetrics> all_metrics;

    explicit MiniSim(std::vector<ClientState> cs, int n_neighbors = 1)
        : clients(std::move(cs)),
          basis(make_basis(kClasses * kFeatures + kClasses, 32, 777)) {
        ctx_template.basis = &basis;
        ctx_template.selection.n_neighbors = n_neighbors;
        ctx_template.selection.gamma = 0.1;
        ctx_template.top_k = 1;
        ctx_template.lr = 0.1;
        ctx_template.local_steps = 3;
        for (const auto& c : clients) ctx_template.all_ids.push_back(c.id);
    }

    void run_rounds(int rounds, MessageTrace* trace = nullptr) {
        for (int t = board.current_round() + 1; t <= rounds; ++t) {
            std::map<int, ModelParams> snapshot;
            for (const auto& c : clients) snapshot.emplace(c.id, c.params);
            RoundContext ctx = ctx_template;
            ctx.net.snapshot = &snapshot;
            ctx.net.trace = trace;
            board.begin_round(t);
            for (auto& c : clients) {
                all_metrics.push_back(run_round(c, board, t, ctx));
            }
        }
    }
};

}  // namespace

TEST(RunRound, TwoSymmetricClientsConverge) {
    Rng rng(20);
    ClientData shared = make_client_data(rng, 60, 16);
    std::vector<ClientState> clients;
    for (int id = 0; id < 2; ++id) {
        ClientState c;
        c.id = id;
        c.data = shared;
        c.seed_base = 99;
        c.alpha = 0.6;
        Rng init(derive_seed(99, "init", {static_cast<uint64_t>(id)}));
        c.params = init_params(kClasses, kFeatures, init);
        clients.push_back(std::move(c));
    }
    MiniSim sim(std::move(clients), 1);
    sim.run_rounds(20);

    double acc0 = accuracy(sim.clients[0].params, shared.local_test);
    double acc1 = accuracy(sim.clients[1].params, shared.local_test);
    EXPECT_NEAR(acc0, acc1, 0.01 + 1e-12);
}

TEST(RunRound, AlphaOneMatchesIsolatedTraining) {
    Rng rng(21);
    std::vector<ClientState> clients{make_client(0, rng), make_client(1, rng),
                                     make_client(2, rng)};
    for (auto& c : clients) c.alpha = 1.0;
    std::vector<ModelParams> initial;
    for (const auto& c : clients) initial.push_back(c.params);
    std::vector<Dataset> trains;
    for (const auto& c : clients) trains.push_back(c.data.local_train);
    std::vector<Matrix> refs;
    for (const auto& c : clients) refs.push_back(c.data.reference.features);

    MiniSim sim(std::move(clients), 2);
    sim.run_rounds(10);

    for (size_t i = 0; i < sim.clients.size(); ++i) {
        ModelParams isolated = initial[i];
        for (int t = 1; t <= 10; ++t) {
            isolated = combined_update(isolated, trains[i], refs[i], std::nullopt, 1.0, 0.1, 3);
        }
        EXPECT_EQ(sim.clients[i].params, isolated);
    }
}

TEST(RunRound, ReplayProducesIdenticalBoardDumps) {
    auto build = []() {
        Rng rng(22);
        std::vector<ClientState> clients{make_client(0, rng), make_client(1, rng),
                                         make_client(2, rng), make_client(3, rng)};
        return clients;
    };
    MiniSim a(build(), 2), b(build(), 2);
    a.run_rounds(8);
    b.run_rounds(8);

    std::stringstream da, db;
    dump_board(a.board, da, true);
    dump_board(b.board, db, true);
    EXPECT_EQ(da.str(), db.str());
    EXPECT_GT(da.str().size(), 100u);
}

TEST(RunRound, HonestRevealsVerifyOneRoundLater) {
    Rng rng(23);
    std::vector<ClientState> clients{make_client(0, rng), make_client(1, rng),
                                     make_client(2, rng)};
    MiniSim sim(std::move(clients), 2);
    sim.run_rounds(6);

    for (int round = 1; round <= 5; ++round) {
        auto anns = sim.board.announcements(round);
        auto revs = sim.board.reveals(round);
        ASSERT_EQ(anns.size(), 3u);
        ASSERT_EQ(revs.size(), 3u);  // revealed during round + 1
        for (const auto& [id, rev] : revs) {
            EXPECT_TRUE(verify_reveal(anns.at(id), rev));
            EXPECT_EQ(rev.ranking.round, round);
        }
    }
    // Final round's rankings stay pending.
    EXPECT_TRUE(sim.board.reveals(6).empty());
    for (const auto& c : sim.clients) {
        ASSERT_TRUE(c.pending_reveal.has_value());
        EXPECT_EQ(c.pending_reveal->first.round, 6);
    }
}

TEST(RunRound, FilterExcludesFloorHalfEveryRound) {
    Rng rng(24);
    std::vector<ClientState> clients;
    for (int id = 0; id < 6; ++id) clients.push_back(make_client(id, rng));
    MiniSim sim(std::move(clients), 3);
    sim.run_rounds(7);

    for (const auto& m : sim.all_metrics) {
        EXPECT_EQ(m.excluded_ids.size(), m.neighbor_ids.size() / 2);
    }
}

TEST(RunRound, RankingCoversAllContactedPeers) {
    Rng rng(25);
    std::vector<ClientState> clients;
    for (int id = 0; id < 5; ++id) clients.push_back(make_client(id, rng));
    MiniSim sim(std::move(clients), 4);
    sim.run_rounds(4);

    // Each client's pending reveal ranks every contacted peer, including the
    // two its filter excluded from distillation.
    for (const auto& c : sim.clients) {
        ASSERT_TRUE(c.pending_reveal.has_value());
        EXPECT_EQ(c.pending_reveal->first.ranked_peers.size(), 4u);
    }
}

TEST(RunRound, PrivacyAuditOverWireMessages) {
    Rng rng(26);
    std::vector<ClientState> clients;
    for (int id = 0; id < 4; ++id) clients.push_back(make_client(id, rng));
    std::vector<Matrix> ref_features;
    for (const auto& c : clients) ref_features.push_back(c.data.reference.features);

    MessageTrace trace;
    MiniSim sim(std::move(clients), 2);
    sim.run_rounds(5, &trace);

    static_assert(std::variant_size_v<WireMessage> == 4,
                  "wire message set must stay closed for the privacy audit");

    ASSERT_FALSE(trace.messages.empty());
    for (const auto& msg : trace.messages) {
        std::visit(
            [&](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, RefFeaturesMsg>) {
                    // Exactly the sender's reference features; labels have no slot.
                    EXPECT_EQ(m.features, ref_features[m.from]);
                } else if constexpr (std::is_same_v<T, PredictionMsg>) {
                    // Row-stochastic outputs, not raw parameters or logits.
                    for (int i = 0; i < m.probabilities.rows; ++i) {
                        double sum = 0.0;
                        for (int k = 0; k < m.probabilities.cols; ++k) {
                            EXPECT_GE(m.probabilities.at(i, k), 0.0);
                            sum += m.probabilities.at(i, k);
                        }
                        EXPECT_NEAR(sum, 1.0, 1e-9);
                    }
                } else if constexpr (std::is_same_v<T, Announcement>) {
                    EXPECT_EQ(m.lsh_code.size(), 32);
                } else {
                    static_assert(std::is_same_v<T, Reveal>);
                    EXPECT_EQ(m.salt.size(), 16u);
                }
            },
            msg);
    }
}

TEST(RunRound, MissingOwnAnnouncementIsProtocolError) {
    Rng rng(27);
    std::vector<ClientState> clients{make_client(0, rng), make_client(1, rng)};
    MiniSim sim(std::move(clients), 1);
    std::map<int, ModelParams> snapshot;
    for (const auto& c : sim.clients) snapshot.emplace(c.id, c.params);
    RoundContext ctx = sim.ctx_template;
    ctx.net.snapshot = &snapshot;
    sim.board.begin_round(2);
    EXPECT_THROW(run_round(sim.clients[0], sim.board, 2, ctx), ProtocolError);
}
