#pragma once

// Softmax-regression classifier with exact analytic gradients. This is the
// local model every client trains; peers only ever see its probability
// outputs, never the parameters.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wpfed/matrix.hpp"
#include "wpfed/rng.hpp"

namespace wpfed {

inline constexpr double kProbFloor = 1e-12;

struct ModelParams {
    Matrix weights;             // num_classes x num_features
    std::vector<double> bias;   // num_classes

    int num_classes() const { return weights.rows; }
    int num_features() const { return weights.cols; }
    int flat_size() const { return weights.rows * weights.cols + static_cast<int>(bias.size()); }

    bool operator==(const ModelParams& o) const { return weights == o.weights && bias == o.bias; }
};

/// Row-stochastic class probabilities, one row per sample.
struct Prediction {
    Matrix probs;
};

inline ModelParams zero_params(int num_classes, int num_features) {
    return ModelParams{Matrix(num_classes, num_features), std::vector<double>(num_classes, 0.0)};
}

/// Initialization distribution shared by fresh clients and poison re-inits:
/// small Gaussian weights, zero bias. Near-zero weights give near-uniform
/// predictions.
inline ModelParams init_params(int num_classes, int num_features, Rng& rng, double stddev = 0.01) {
    ModelParams p = zero_params(num_classes, num_features);
    for (double& w : p.weights.v) {
        w = rng.normal(0.0, stddev);
    }
    return p;
}

/// Flattening order is fixed network-wide: weights row-major, then bias.
inline std::vector<double> flatten(const ModelParams& p) {
    std::vector<double> out;
    out.reserve(p.flat_size());
    out.insert(out.end(), p.weights.v.begin(), p.weights.v.end());
    out.insert(out.end(), p.bias.begin(), p.bias.end());
    return out;
}

/// Softmax of the affine map, numerically stabilized per row.
inline Prediction predict(const ModelParams& params, const Matrix& features) {
    if (features.cols != params.num_features()) {
        throw InvalidInputError("predict: feature dimension does not match model");
    }
    const int n = features.rows;
    const int c = params.num_classes();
    Prediction pred{Matrix(n, c)};
    std::vector<double> logits(c);
    for (int i = 0; i < n; ++i) {
        const double* x = features.row(i);
        double zmax = -1e300;
        for (int k = 0; k < c; ++k) {
            double z = params.bias[k];
            const double* w = params.weights.row(k);
            for (int f = 0; f < features.cols; ++f) {
                z += w[f] * x[f];
            }
            logits[k] = z;
            if (z > zmax) zmax = z;
        }
        double sum = 0.0;
        for (int k = 0; k < c; ++k) {
            logits[k] = std::exp(logits[k] - zmax);
            sum += logits[k];
        }
        for (int k = 0; k < c; ++k) {
            pred.probs.at(i, k) = logits[k] / sum;
        }
    }
    return pred;
}

/// Mean negative log probability of the true class, floored before the log.
inline double cross_entropy(const Prediction& pred, const std::vector<int>& labels) {
    const int n = pred.probs.rows;
    if (n == 0) {
        throw InvalidInputError("cross_entropy: empty dataset");
    }
    if (n != static_cast<int>(labels.size())) {
        throw InvalidInputError("cross_entropy: prediction/label count mismatch");
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        int y = labels[i];
        if (y < 0 || y >= pred.probs.cols) {
            throw InvalidInputError("cross_entropy: label out of range");
        }
        double p = pred.probs.at(i, y);
        total -= std::log(p < kProbFloor ? kProbFloor : p);
    }
    return total / n;
}

/// Squared Frobenius distance between own outputs and the neighbor-mean
/// target, divided by the sample count.
inline double distill_loss(const Prediction& own, const Prediction& neighbor_mean) {
    if (!own.probs.same_shape(neighbor_mean.probs)) {
        throw InvalidInputError("distill_loss: prediction shape mismatch");
    }
    if (own.probs.rows == 0) {
        throw InvalidInputError("distill_loss: empty predictions");
    }
    double total = 0.0;
    for (size_t i = 0; i < own.probs.v.size(); ++i) {
        double d = own.probs.v[i] - neighbor_mean.probs.v[i];
        total += d * d;
    }
    return total / own.probs.rows;
}

/// Fraction of samples whose argmax prediction matches the label.
inline double accuracy(const ModelParams& params, const Dataset& data) {
    if (data.size() == 0) {
        throw InvalidInputError("accuracy: empty dataset");
    }
    Prediction pred = predict(params, data.features);
    int correct = 0;
    for (int i = 0; i < data.size(); ++i) {
        int best = 0;
        for (int k = 1; k < pred.probs.cols; ++k) {
            if (pred.probs.at(i, k) > pred.probs.at(i, best)) best = k;
        }
        if (best == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / data.size();
}

struct Gradient {
    Matrix weights;
    std::vector<double> bias;
    double loss = 0.0;

    bool all_finite() const {
        if (!std::isfinite(loss) || !weights.all_finite()) return false;
        for (double b : bias) {
            if (!std::isfinite(b)) return false;
        }
        return true;
    }
};

/// Gradient and value of the local cross-entropy loss.
inline Gradient local_loss_grad(const ModelParams& params, const Dataset& data) {
    const int n = data.size();
    const int c = params.num_classes();
    const int f = params.num_features();
    Prediction pred = predict(params, data.features);
    Gradient g{Matrix(c, f), std::vector<double>(c, 0.0), cross_entropy(pred, data.labels)};
    for (int i = 0; i < n; ++i) {
        const double* x = data.features.row(i);
        for (int k = 0; k < c; ++k) {
            double err = pred.probs.at(i, k) - (data.labels[i] == k ? 1.0 : 0.0);
            g.bias[k] += err;
            double* gw = g.weights.row(k);
            for (int j = 0; j < f; ++j) {
                gw[j] += err * x[j];
            }
        }
    }
    double inv = 1.0 / n;
    for (double& w : g.weights.v) w *= inv;
    for (double& b : g.bias) b *= inv;
    return g;
}

/// Gradient and value of the distillation loss against a fixed target.
inline Gradient ref_loss_grad(const ModelParams& params, const Matrix& ref_features,
                              const Prediction& target) {
    const int n = ref_features.rows;
    const int c = params.num_classes();
    const int f = params.num_features();
    if (target.probs.rows != n || target.probs.cols != c) {
        throw InvalidInputError("ref_loss_grad: target shape mismatch");
    }
    Prediction pred = predict(params, ref_features);
    Gradient g{Matrix(c, f), std::vector<double>(c, 0.0), distill_loss(pred, target)};
    std::vector<double> dz(c);
    for (int i = 0; i < n; ++i) {
        const double* x = ref_features.row(i);
        // d/dz_k of sum_j (p_j - q_j)^2 with p = softmax(z):
        //   2 * p_k * ((p_k - q_k) - sum_j (p_j - q_j) * p_j)
        double dot = 0.0;
        for (int j = 0; j < c; ++j) {
            dot += (pred.probs.at(i, j) - target.probs.at(i, j)) * pred.probs.at(i, j);
        }
        for (int k = 0; k < c; ++k) {
            double p = pred.probs.at(i, k);
            dz[k] = 2.0 * p * ((p - target.probs.at(i, k)) - dot);
        }
        for (int k = 0; k < c; ++k) {
            g.bias[k] += dz[k];
            double* gw = g.weights.row(k);
            for (int j = 0; j < f; ++j) {
                gw[j] += dz[k] * x[j];
            }
        }
    }
    double inv = 1.0 / n;
    for (double& w : g.weights.v) w *= inv;
    for (double& b : g.bias) b *= inv;
    return g;
}

/// Combined objective alpha * L_loc + (1 - alpha) * L_ref at the given params.
/// Without a neighbor mean the objective is the local loss alone.
inline double combined_objective(const ModelParams& params, const Dataset& local_train,
                                 const Matrix& ref_features,
                                 const std::optional<Prediction>& neighbor_mean, double alpha) {
    double local = cross_entropy(predict(params, local_train.features), local_train.labels);
    if (!neighbor_mean.has_value()) {
        return local;
    }
    double ref = distill_loss(predict(params, ref_features), *neighbor_mean);
    return alpha * local + (1.0 - alpha) * ref;
}

/// Full-batch gradient descent on alpha * L_loc + (1 - alpha) * L_ref.
/// When no neighbor mean is available (no valid responses this round) the
/// update minimizes the local loss alone.
inline ModelParams combined_update(const ModelParams& params, const Dataset& local_train,
                                   const Matrix& ref_features,
                                   const std::optional<Prediction>& neighbor_mean, double alpha,
                                   double lr, int steps, int round_id = -1) {
    if (alpha < 0.0 || alpha > 1.0) {
        throw InvalidInputError("combined_update: alpha outside [0,1]");
    }
    if (lr < 0.0 || !std::isfinite(lr)) {
        throw InvalidInputError("combined_update: invalid learning rate");
    }
    if (steps < 1) {
        throw InvalidInputError("combined_update: steps must be >= 1");
    }
    if (neighbor_mean && (neighbor_mean->probs.rows != ref_features.rows ||
                          neighbor_mean->probs.cols != params.num_classes())) {
        throw InvalidInputError("combined_update: neighbor mean shape mismatch");
    }

    ModelParams p = params;
    const int c = p.num_classes();
    const int f = p.num_features();
    for (int step = 0; step < steps; ++step) {
        Gradient local = local_loss_grad(p, local_train);
        Gradient total = local;
        if (neighbor_mean.has_value()) {
            Gradient ref = ref_loss_grad(p, ref_features, *neighbor_mean);
            total.loss = alpha * local.loss + (1.0 - alpha) * ref.loss;
            for (int k = 0; k < c; ++k) {
                total.bias[k] = alpha * local.bias[k] + (1.0 - alpha) * ref.bias[k];
                for (int j = 0; j < f; ++j) {
                    total.weights.at(k, j) =
                        alpha * local.weights.at(k, j) + (1.0 - alpha) * ref.weights.at(k, j);
                }
            }
        }
        if (!total.all_finite()) {
            throw NumericError("combined_update: non-finite loss or gradient", round_id);
        }
        for (int k = 0; k < c; ++k) {
            p.bias[k] -= lr * total.bias[k];
            for (int j = 0; j < f; ++j) {
                p.weights.at(k, j) -= lr * total.weights.at(k, j);
            }
        }
    }
    if (!p.weights.all_finite()) {
        throw NumericError("combined_update: non-finite parameters", round_id);
    }
    return p;
}

}  // namespace wpfed
