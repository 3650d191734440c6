#pragma once

// Synthetic data generation and the non-IID shard partition: shards with
// randomly removed classes, per-client train/test splits, and pairwise
// disjoint reference sets sampled from a shared repository.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wpfed/matrix.hpp"
#include "wpfed/rng.hpp"

namespace wpfed {

struct DataConfig {
    int num_clients = 10;
    int num_classes = 10;
    int num_features = 40;
    int informative_features = 6;
    int samples_per_class = 250;
    int shards_per_client = 2;
    int removed_classes_per_shard = 5;
    double reference_fraction = 0.2;
    int reference_size_per_client = 50;
    double train_test_ratio = 0.7;
    double class_separation = 6.0;
    double confusable_pair_separation = 0.7;
    uint64_t seed = 1;

    void validate() const {
        if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
        if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
        if (num_features < 1) throw ConfigError("num_features must be >= 1");
        if (samples_per_class < 1) throw ConfigError("samples_per_class must be >= 1");
        if (shards_per_client < 1) throw ConfigError("shards_per_client must be >= 1");
        if (removed_classes_per_shard < 0 || removed_classes_per_shard >= num_classes) {
            throw ConfigError("removed_classes_per_shard must be in [0, num_classes)");
        }
        if (informative_features < 1) {
            throw ConfigError("informative_features must be >= 1");
        }
        if (reference_fraction <= 0.0 || reference_fraction >= 1.0) {
            throw ConfigError("reference_fraction must be in (0,1)");
        }
        if (reference_size_per_client < 1) {
            throw ConfigError("reference_size_per_client must be >= 1");
        }
        if (train_test_ratio <= 0.0 || train_test_ratio >= 1.0) {
            throw ConfigError("train_test_ratio must be in (0,1)");
        }
        if (class_separation < 0.0) throw ConfigError("class_separation must be >= 0");
        if (confusable_pair_separation < 0.0) {
            throw ConfigError("confusable_pair_separation must be >= 0");
        }
    }
};

/// One client's data. Index vectors refer to rows of the generating pool,
/// letting audits check train/reference disjointness.
struct ClientData {
    Dataset local_train;
    Dataset local_test;
    Dataset reference;
    std::vector<int> train_indices;
    std::vector<int> test_indices;
    std::vector<int> reference_indices;
};

/// Gaussian class clusters with unit-variance samples. Class means are drawn
/// once from the seed inside a low-dimensional informative subspace; the
/// remaining features carry pure noise, keeping the models capacity-bound.
///
/// With confusable_pair_separation > 0 the classes come in close pairs:
/// well-separated pair centers at distance class_separation from the origin,
/// pair members confusable_pair_separation apart. Hard class pairs are what
/// give the non-IID partition its bite: a client's class balance decides its
/// boundary inside each pair, so knowledge from peers with a different
/// balance genuinely conflicts. With the pair separation at 0 the means are
/// plain class_separation-scaled random directions.
inline Dataset generate_synthetic(const DataConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, "synthetic"));

    const int informative = std::min(config.informative_features, config.num_features);
    auto unit_direction = [&]() {
        std::vector<double> v(informative);
        double norm2 = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm2 += x * x;
        }
        double inv = 1.0 / std::sqrt(std::max(norm2, 1e-300));
        for (double& x : v) x *= inv;
        return v;
    };

    std::vector<std::vector<double>> means(config.num_classes,
                                           std::vector<double>(config.num_features, 0.0));
    if (config.confusable_pair_separation > 0.0) {
        for (int base = 0; base < config.num_classes; base += 2) {
            std::vector<double> center = unit_direction();
            std::vector<double> offset = unit_direction();
            for (int f = 0; f < informative; ++f) {
                double c = config.class_separation * center[f];
                double o = 0.5 * config.confusable_pair_separation * offset[f];
                means[base][f] = c + o;
                if (base + 1 < config.num_classes) means[base + 1][f] = c - o;
            }
        }
    } else {
        for (auto& m : means) {
            std::vector<double> dir = unit_direction();
            for (int f = 0; f < informative; ++f) {
                m[f] = config.class_separation * dir[f];
            }
        }
    }

    const int n = config.num_classes * config.samples_per_class;
    Dataset pool{Matrix(n, config.num_features), std::vector<int>(n)};
    int row = 0;
    for (int c = 0; c < config.num_classes; ++c) {
        for (int s = 0; s < config.samples_per_class; ++s, ++row) {
            double* x = pool.features.row(row);
            for (int f = 0; f < config.num_features; ++f) {
                x[f] = means[c][f] + rng.normal();
            }
            pool.labels[row] = c;
        }
    }
    return pool;
}

namespace detail {

inline Dataset take_rows(const Dataset& pool, const std::vector<int>& rows) {
    Dataset out{Matrix(static_cast<int>(rows.size()), pool.features.cols),
                std::vector<int>(rows.size())};
    for (size_t i = 0; i < rows.size(); ++i) {
        const double* src = pool.features.row(rows[i]);
        std::copy(src, src + pool.features.cols, out.features.row(static_cast<int>(i)));
        out.labels[i] = pool.labels[rows[i]];
    }
    return out;
}

}  // namespace detail

/// Shard-based non-IID partition. A function of (pool, config.seed) only.
inline std::vector<ClientData> partition_non_iid(const Dataset& pool, const DataConfig& config) {
    config.validate();
    pool.check_consistent(config.num_classes);
    Rng rng(derive_seed(config.seed, "partition"));

    const int n = pool.size();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);

    // (a) withhold the reference repository.
    const int repo_size = static_cast<int>(std::lround(config.reference_fraction * n));
    if (repo_size < config.num_clients * config.reference_size_per_client) {
        throw ConfigError("reference repository too small for the requested per-client size");
    }
    std::vector<int> repository(perm.begin(), perm.begin() + repo_size);
    std::vector<int> local_pool(perm.begin() + repo_size, perm.end());

    // (b) split the rest into num_clients * shards_per_client shards.
    const int num_shards = config.num_clients * config.shards_per_client;
    if (static_cast<int>(local_pool.size()) < num_shards) {
        throw ConfigError("not enough samples to build the shard plan");
    }
    std::vector<std::vector<int>> shards(num_shards);
    const int base = static_cast<int>(local_pool.size()) / num_shards;
    const int extra = static_cast<int>(local_pool.size()) % num_shards;
    int pos = 0;
    for (int s = 0; s < num_shards; ++s) {
        int len = base + (s < extra ? 1 : 0);
        shards[s].assign(local_pool.begin() + pos, local_pool.begin() + pos + len);
        pos += len;
    }

    // (c) delete all samples of randomly chosen classes from each shard.
    std::vector<int> all_classes(config.num_classes);
    std::iota(all_classes.begin(), all_classes.end(), 0);
    for (auto& shard : shards) {
        std::vector<int> removed =
            rng.sample_without_replacement(all_classes, config.removed_classes_per_shard);
        std::set<int> removed_set(removed.begin(), removed.end());
        shard.erase(std::remove_if(shard.begin(), shard.end(),
                                   [&](int idx) { return removed_set.count(pool.labels[idx]) > 0; }),
                    shard.end());
        if (shard.empty()) {
            throw ConfigError("shard empty after class removal");
        }
    }

    // (d) assign shards to clients.
    std::vector<int> shard_order(num_shards);
    std::iota(shard_order.begin(), shard_order.end(), 0);
    rng.shuffle(shard_order);

    std::vector<ClientData> clients(config.num_clients);
    for (int i = 0; i < config.num_clients; ++i) {
        std::vector<int> local;
        for (int s = 0; s < config.shards_per_client; ++s) {
            const auto& shard = shards[shard_order[i * config.shards_per_client + s]];
            local.insert(local.end(), shard.begin(), shard.end());
        }
        rng.shuffle(local);

        // (e) train/test split.
        int n_train = static_cast<int>(std::lround(config.train_test_ratio * local.size()));
        n_train = std::min(std::max(n_train, 1), static_cast<int>(local.size()) - 1);
        if (static_cast<int>(local.size()) < 2) {
            throw ConfigError("client local dataset too small to split");
        }
        clients[i].train_indices.assign(local.begin(), local.begin() + n_train);
        clients[i].test_indices.assign(local.begin() + n_train, local.end());
        clients[i].local_train = detail::take_rows(pool, clients[i].train_indices);
        clients[i].local_test = detail::take_rows(pool, clients[i].test_indices);
    }

    // (f) non-overlapping repository subsets. The repository order is already
    // a uniform shuffle, so contiguous blocks are a uniform disjoint sample.
    for (int i = 0; i < config.num_clients; ++i) {
        auto first = repository.begin() + static_cast<size_t>(i) * config.reference_size_per_client;
        clients[i].reference_indices.assign(first, first + config.reference_size_per_client);
        clients[i].reference = detail::take_rows(pool, clients[i].reference_indices);
    }
    return clients;
}

// --- partition export/import -------------------------------------------
// Line format: client id, split tag (train|test|ref), label, then the
// feature values, all comma separated. %.17g keeps doubles round-trippable.

inline void export_partition(const std::vector<ClientData>& clients, std::ostream& os) {
    char buf[40];
    auto write_split = [&](int client_id, const char* tag, const Dataset& d) {
        for (int i = 0; i < d.size(); ++i) {
            os << client_id << ',' << tag << ',' << d.labels[i];
            for (int f = 0; f < d.features.cols; ++f) {
                std::snprintf(buf, sizeof(buf), "%.17g", d.features.at(i, f));
                os << ',' << buf;
            }
            os << '\n';
        }
    };
    for (size_t c = 0; c < clients.size(); ++c) {
        int id = static_cast<int>(c);
        write_split(id, "train", clients[c].local_train);
        write_split(id, "test", clients[c].local_test);
        write_split(id, "ref", clients[c].reference);
    }
}

inline std::vector<ClientData> import_partition(std::istream& is) {
    struct RowBuf {
        std::vector<std::vector<double>> features;
        std::vector<int> labels;
    };
    std::vector<std::array<RowBuf, 3>> buffers;
    std::string line;
    size_t feature_count = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        int client = std::stoi(field);
        std::getline(ss, field, ',');
        int split;
        if (field == "train") {
            split = 0;
        } else if (field == "test") {
            split = 1;
        } else if (field == "ref") {
            split = 2;
        } else {
            throw InvalidInputError("unknown split tag '" + field + "'");
        }
        std::getline(ss, field, ',');
        int label = std::stoi(field);
        std::vector<double> feats;
        while (std::getline(ss, field, ',')) {
            feats.push_back(std::stod(field));
        }
        if (feature_count == 0) {
            feature_count = feats.size();
        } else if (feats.size() != feature_count) {
            throw InvalidInputError("inconsistent feature count in partition file");
        }
        if (client < 0) throw InvalidInputError("negative client id in partition file");
        if (buffers.size() <= static_cast<size_t>(client)) {
            buffers.resize(client + 1);
        }
        buffers[client][split].features.push_back(std::move(feats));
        buffers[client][split].labels.push_back(label);
    }

    std::vector<ClientData> clients(buffers.size());
    for (size_t c = 0; c < buffers.size(); ++c) {
        auto build = [&](const RowBuf& rb) {
            Dataset d{Matrix(static_cast<int>(rb.features.size()), static_cast<int>(feature_count)),
                      rb.labels};
            for (size_t i = 0; i < rb.features.size(); ++i) {
                std::copy(rb.features[i].begin(), rb.features[i].end(),
                          d.features.row(static_cast<int>(i)));
            }
            return d;
        };
        clients[c].local_train = build(buffers[c][0]);
        clients[c].local_test = build(buffers[c][1]);
        clients[c].reference = build(buffers[c][2]);
    }
    return clients;
}

}  // namespace wpfed
