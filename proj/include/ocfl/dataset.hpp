#pragma once

#include <cstddef>
#include <vector>

namespace ocfl {

// Row-major dense feature matrix with integer class labels.
struct LocalDataset {
    std::size_t feature_dim = 0;
    std::vector<double> features;  // size() == n * feature_dim
    std::vector<int> labels;       // size() == n

    std::size_t size() const { return labels.size(); }

    const double* row(std::size_t i) const { return features.data() + i * feature_dim; }

    void push_row(const std::vector<double>& x, int y) {
        features.insert(features.end(), x.begin(), x.end());
        labels.push_back(y);
    }

    void push_row(const double* x, int y) {
        features.insert(features.end(), x, x + feature_dim);
        labels.push_back(y);
    }
};

}  // namespace ocfl
