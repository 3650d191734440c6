#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "wpfed/common.hpp"

namespace wpfed {

/// Dense row-major matrix of doubles. Small helper type; the simulation
/// works with matrices of at most a few thousand entries.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    const double* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
    double* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : v) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }

    bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && v == o.v; }
};

/// Labeled samples: one feature row per sample, labels are class ids.
struct Dataset {
    Matrix features;
    std::vector<int> labels;

    int size() const { return features.rows; }

    void check_consistent(int num_classes) const {
        if (features.rows != static_cast<int>(labels.size())) {
            throw InvalidInputError("dataset row count does not match label count");
        }
        for (int y : labels) {
            if (y < 0 || y >= num_classes) {
                throw InvalidInputError("label out of range [0, num_classes)");
            }
        }
    }
};

}  // namespace wpfed
