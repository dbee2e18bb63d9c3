#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ocfl/partition.hpp"

namespace ocfl {

// Cross-tabulation of two partitions over the same client set.
struct ContingencyTable {
    std::vector<std::vector<long long>> counts;  // r x s
    std::vector<long long> row_marginals;        // true-cluster sizes
    std::vector<long long> col_marginals;        // predicted-cluster sizes
    long long total = 0;

    static ContingencyTable build(const Partition& c_true, const Partition& c_pred);
};

// Per-round values of a named score; reports use the arithmetic time average.
struct ScoreSeries {
    std::string name;
    std::vector<double> values;

    double time_average() const;
};

// Fraction of client pairs on which the two partitions agree.
double rand_index(const Partition& c_true, const Partition& c_pred);

// Chance-adjusted Rand index (permutation model); 1 iff identical groupings.
double adjusted_rand_index(const Partition& c_true, const Partition& c_pred);

// Mutual information adjusted for chance, arithmetic-mean normalisation,
// natural logarithms.
double adjusted_mutual_information(const Partition& c_true, const Partition& c_pred);

// 1 - H(pred|true)/H(pred); 1.0 when the prediction is a single cluster.
double completeness(const Partition& c_true, const Partition& c_pred);

// Unweighted mean of per-class F1 over the classes present in predictions or
// labels; a class with zero precision and recall contributes 0.
double macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels, int k);

// Absolute difference between a personalisation score and a generalisation
// score measured on the same model.
double learning_gap(double local_score, double orchestrator_score);

}  // namespace ocfl
