#include "ocfl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ocfl/errors.hpp"

namespace ocfl {

namespace {

long long pairs2(long long x) { return x * (x - 1) / 2; }

void check_same_clients(const Partition& a, const Partition& b) {
    if (a.assignment.size() != b.assignment.size()) {
        throw MismatchedClientsError(
            "partitions cover different client counts: " +
            std::to_string(a.assignment.size()) + " vs " +
            std::to_string(b.assignment.size()));
    }
    if (a.assignment.empty()) {
        throw MismatchedClientsError("partitions are empty");
    }
}

double entropy_from_marginals(const std::vector<long long>& marginals, long long n) {
    double h = 0.0;
    for (long long m : marginals) {
        if (m > 0) {
            const double p = static_cast<double>(m) / static_cast<double>(n);
            h -= p * std::log(p);
        }
    }
    return h;
}

}  // namespace

ContingencyTable ContingencyTable::build(const Partition& c_true, const Partition& c_pred) {
    check_same_clients(c_true, c_pred);
    Partition u = c_true;
    u.canonicalize();
    Partition v = c_pred;
    v.canonicalize();
    ContingencyTable t;
    const auto r = static_cast<std::size_t>(u.k);
    const auto s = static_cast<std::size_t>(v.k);
    t.counts.assign(r, std::vector<long long>(s, 0));
    t.row_marginals.assign(r, 0);
    t.col_marginals.assign(s, 0);
    t.total = static_cast<long long>(u.assignment.size());
    for (std::size_t i = 0; i < u.assignment.size(); ++i) {
        const auto a = static_cast<std::size_t>(u.assignment[i]);
        const auto b = static_cast<std::size_t>(v.assignment[i]);
        t.counts[a][b] += 1;
        t.row_marginals[a] += 1;
        t.col_marginals[b] += 1;
    }
    return t;
}

double ScoreSeries::time_average() const {
    if (values.empty()) return 0.0;
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc / static_cast<double>(values.size());
}

double rand_index(const Partition& c_true, const Partition& c_pred) {
    const ContingencyTable t = ContingencyTable::build(c_true, c_pred);
    const long long all = pairs2(t.total);
    if (all == 0) return 1.0;
    long long same_same = 0;
    for (const auto& row : t.counts) {
        for (long long nij : row) same_same += pairs2(nij);
    }
    long long same_true = 0;
    for (long long m : t.row_marginals) same_true += pairs2(m);
    long long same_pred = 0;
    for (long long m : t.col_marginals) same_pred += pairs2(m);
    const long long disagree = (same_true - same_same) + (same_pred - same_same);
    return static_cast<double>(all - disagree) / static_cast<double>(all);
}

double adjusted_rand_index(const Partition& c_true, const Partition& c_pred) {
    const ContingencyTable t = ContingencyTable::build(c_true, c_pred);
    const long long all = pairs2(t.total);
    if (all == 0) return 1.0;
    double index = 0.0;
    for (const auto& row : t.counts) {
        for (long long nij : row) index += static_cast<double>(pairs2(nij));
    }
    double sum_a = 0.0;
    for (long long m : t.row_marginals) sum_a += static_cast<double>(pairs2(m));
    double sum_b = 0.0;
    for (long long m : t.col_marginals) sum_b += static_cast<double>(pairs2(m));
    const double expected = sum_a * sum_b / static_cast<double>(all);
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (std::abs(denom) < 1e-15) return 1.0;  // both partitions trivial
    return (index - expected) / denom;
}

double adjusted_mutual_information(const Partition& c_true, const Partition& c_pred) {
    check_same_clients(c_true, c_pred);
    if (Partition::same_grouping(c_true, c_pred)) return 1.0;

    const ContingencyTable t = ContingencyTable::build(c_true, c_pred);
    const long long n = t.total;
    const double nd = static_cast<double>(n);

    const double hu = entropy_from_marginals(t.row_marginals, n);
    const double hv = entropy_from_marginals(t.col_marginals, n);

    double mi = 0.0;
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
            const long long nij = t.counts[i][j];
            if (nij == 0) continue;
            const double pij = static_cast<double>(nij) / nd;
            mi += pij * std::log(nd * static_cast<double>(nij) /
                                 (static_cast<double>(t.row_marginals[i]) *
                                  static_cast<double>(t.col_marginals[j])));
        }
    }

    // Expected MI under the hypergeometric permutation model, computed with
    // log-gamma terms for numerical range.
    double emi = 0.0;
    for (long long ai : t.row_marginals) {
        for (long long bj : t.col_marginals) {
            const long long lo = std::max<long long>(1, ai + bj - n);
            const long long hi = std::min(ai, bj);
            for (long long nij = lo; nij <= hi; ++nij) {
                const double term1 = static_cast<double>(nij) / nd;
                const double term2 =
                    std::log(nd * static_cast<double>(nij) /
                             (static_cast<double>(ai) * static_cast<double>(bj)));
                const double log_p =
                    std::lgamma(static_cast<double>(ai + 1)) +
                    std::lgamma(static_cast<double>(bj + 1)) +
                    std::lgamma(static_cast<double>(n - ai + 1)) +
                    std::lgamma(static_cast<double>(n - bj + 1)) -
                    std::lgamma(static_cast<double>(n + 1)) -
                    std::lgamma(static_cast<double>(nij + 1)) -
                    std::lgamma(static_cast<double>(ai - nij + 1)) -
                    std::lgamma(static_cast<double>(bj - nij + 1)) -
                    std::lgamma(static_cast<double>(n - ai - bj + nij + 1));
                emi += term1 * term2 * std::exp(log_p);
            }
        }
    }

    const double denom = 0.5 * (hu + hv) - emi;
    if (std::abs(denom) < 1e-12) return 0.0;
    return (mi - emi) / denom;
}

double completeness(const Partition& c_true, const Partition& c_pred) {
    const ContingencyTable t = ContingencyTable::build(c_true, c_pred);
    const double nd = static_cast<double>(t.total);
    const double hv = entropy_from_marginals(t.col_marginals, t.total);
    if (hv <= 0.0) return 1.0;  // one predicted cluster is vacuously complete
    double h_v_given_u = 0.0;
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
        for (std::size_t j = 0; j < t.counts[i].size(); ++j) {
            const long long nij = t.counts[i][j];
            if (nij == 0) continue;
            h_v_given_u -= (static_cast<double>(nij) / nd) *
                           std::log(static_cast<double>(nij) /
                                    static_cast<double>(t.row_marginals[i]));
        }
    }
    return 1.0 - h_v_given_u / hv;
}

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels, int k) {
    if (predictions.size() != labels.size()) {
        throw DimensionMismatchError("macro_f1: " + std::to_string(predictions.size()) +
                                     " predictions vs " + std::to_string(labels.size()) +
                                     " labels");
    }
    if (labels.empty()) {
        throw EmptyDatasetError("macro_f1: no samples");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= k || predictions[i] < 0 || predictions[i] >= k) {
            throw InvalidLabelError("macro_f1: label outside [0, " + std::to_string(k) +
                                    ") at index " + std::to_string(i));
        }
    }
    std::vector<long long> tp(static_cast<std::size_t>(k), 0);
    std::vector<long long> fp(static_cast<std::size_t>(k), 0);
    std::vector<long long> fn(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        const auto p = static_cast<std::size_t>(predictions[i]);
        if (y == p) {
            tp[y] += 1;
        } else {
            fp[p] += 1;
            fn[y] += 1;
        }
    }
    double sum = 0.0;
    int counted = 0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
        if (tp[c] + fp[c] + fn[c] == 0) continue;  // class absent on both sides
        const double prec =
            tp[c] + fp[c] > 0 ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c])
                              : 0.0;
        const double rec =
            tp[c] + fn[c] > 0 ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c])
                              : 0.0;
        if (prec + rec > 0.0) sum += 2.0 * prec * rec / (prec + rec);
        ++counted;
    }
    return counted > 0 ? sum / static_cast<double>(counted) : 0.0;
}

double learning_gap(double local_score, double orchestrator_score) {
    return std::abs(local_score - orchestrator_score);
}

}  // namespace ocfl
