#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"

#include "ocfl/errors.hpp"
#include "ocfl/metrics.hpp"
#include "ocfl/partition.hpp"
#include "ocfl/rng.hpp"

using namespace ocfl;

namespace {

Partition part(const std::vector<int>& labels) { return Partition::from_labels(labels); }

std::vector<int> random_labels(Rng& rng, std::size_t n, int kmax) {
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(kmax)));
    return labels;
}

// O(n^2) pair-agreement oracle for the Rand index.
double ri_oracle(const std::vector<int>& u, const std::vector<int>& v) {
    long long agree = 0;
    long long total = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        for (std::size_t j = i + 1; j < u.size(); ++j) {
            ++total;
            if ((u[i] == u[j]) == (v[i] == v[j])) ++agree;
        }
    }
    return static_cast<double>(agree) / static_cast<double>(total);
}

long long choose2(long long x) { return x * (x - 1) / 2; }

// Independent ARI from raw pair counts.
double ari_oracle(const std::vector<int>& u, const std::vector<int>& v) {
    std::map<int, long long> au;
    std::map<int, long long> bv;
    std::map<std::pair<int, int>, long long> joint;
    for (std::size_t i = 0; i < u.size(); ++i) {
        ++au[u[i]];
        ++bv[v[i]];
        ++joint[{u[i], v[i]}];
    }
    double index = 0.0;
    for (const auto& [key, c] : joint) index += static_cast<double>(choose2(c));
    double sum_a = 0.0;
    for (const auto& [key, c] : au) sum_a += static_cast<double>(choose2(c));
    double sum_b = 0.0;
    for (const auto& [key, c] : bv) sum_b += static_cast<double>(choose2(c));
    const double all = static_cast<double>(choose2(static_cast<long long>(u.size())));
    const double expected = sum_a * sum_b / all;
    const double maximum = 0.5 * (sum_a + sum_b);
    return (index - expected) / (maximum - expected);
}

double entropy_of(const std::vector<int>& labels) {
    std::map<int, long long> counts;
    for (int l : labels) ++counts[l];
    const double n = static_cast<double>(labels.size());
    double h = 0.0;
    for (const auto& [key, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

double mi_of(const std::vector<int>& u, const std::vector<int>& v) {
    std::map<int, long long> au;
    std::map<int, long long> bv;
    std::map<std::pair<int, int>, long long> joint;
    for (std::size_t i = 0; i < u.size(); ++i) {
        ++au[u[i]];
        ++bv[v[i]];
        ++joint[{u[i], v[i]}];
    }
    const double n = static_cast<double>(u.size());
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        const double pij = static_cast<double>(c) / n;
        const double pi = static_cast<double>(au.at(key.first)) / n;
        const double pj = static_cast<double>(bv.at(key.second)) / n;
        mi += pij * std::log(pij / (pi * pj));
    }
    return mi;
}

// Exact expected MI under the permutation model: average the MI over every
// distinct arrangement of the predicted labels (feasible for n <= 8).
double exact_expected_mi(const std::vector<int>& u, std::vector<int> v) {
    std::sort(v.begin(), v.end());
    double acc = 0.0;
    long long count = 0;
    do {
        acc += mi_of(u, v);
        ++count;
    } while (std::next_permutation(v.begin(), v.end()));
    return acc / static_cast<double>(count);
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("contingency table cross-tabulates canonical clusters") {
    const ContingencyTable t = ContingencyTable::build(part({0, 0, 1, 1}), part({0, 1, 0, 1}));
    REQUIRE(t.counts.size() == 2);
    REQUIRE(t.counts[0].size() == 2);
    CHECK(t.counts[0][0] == 1);
    CHECK(t.counts[0][1] == 1);
    CHECK(t.counts[1][0] == 1);
    CHECK(t.counts[1][1] == 1);
    CHECK(t.row_marginals == std::vector<long long>{2, 2});
    CHECK(t.col_marginals == std::vector<long long>{2, 2});
    CHECK(t.total == 4);

    CHECK_THROWS_AS((void)ContingencyTable::build(part({0, 0, 1}), part({0, 1})),
                    MismatchedClientsError);
    CHECK_THROWS_AS((void)ContingencyTable::build(part({}), part({})), MismatchedClientsError);
}

TEST_CASE("rand index of the crossed four-client pair is 2/6") {
    CHECK(rand_index(part({0, 0, 1, 1}), part({0, 1, 0, 1})) ==
          doctest::Approx(2.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("rand index matches the pair-enumeration oracle") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.uniform_int(10);
        const auto u = random_labels(rng, n, 4);
        const auto v = random_labels(rng, n, 3);
        CHECK(rand_index(part(u), part(v)) == doctest::Approx(ri_oracle(u, v)).epsilon(1e-12));
    }
}

TEST_CASE("adjusted rand index agrees with an independent pair-count oracle") {
    Rng rng(202);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng.uniform_int(9);
        const auto u = random_labels(rng, n, 3);
        const auto v = random_labels(rng, n, 4);
        const double oracle = ari_oracle(u, v);
        if (!std::isfinite(oracle)) continue;  // degenerate marginals
        CHECK(adjusted_rand_index(part(u), part(v)) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("adjusted rand index conventions") {
    CHECK(adjusted_rand_index(part({0, 1, 0, 2}), part({2, 0, 2, 1})) == 1.0);
    // Both partitions trivial: single cluster on each side.
    CHECK(adjusted_rand_index(part({0, 0, 0}), part({1, 1, 1})) == 1.0);
    // Both all-singletons.
    CHECK(adjusted_rand_index(part({0, 1, 2}), part({2, 1, 0})) == 1.0);
}

TEST_CASE("adjusted mutual information matches the exhaustive permutation oracle") {
    Rng rng(303);
    int checked = 0;
    while (checked < 12) {
        const std::size_t n = 5 + rng.uniform_int(3);  // 5..7
        const auto u = random_labels(rng, n, 3);
        const auto v = random_labels(rng, n, 3);
        if (Partition::same_grouping(part(u), part(v))) continue;
        const double emi = exact_expected_mi(u, v);
        const double denom = 0.5 * (entropy_of(u) + entropy_of(v)) - emi;
        if (std::abs(denom) < 1e-9) continue;
        const double oracle = (mi_of(u, v) - emi) / denom;
        CHECK(adjusted_mutual_information(part(u), part(v)) ==
              doctest::Approx(oracle).epsilon(1e-9));
        ++checked;
    }
}

TEST_CASE("adjusted mutual information conventions") {
    CHECK(adjusted_mutual_information(part({0, 0, 1, 1}), part({1, 1, 0, 0})) == 1.0);
    // Against a single predicted cluster the score is exactly zero.
    CHECK(adjusted_mutual_information(part({0, 0, 1, 1}), part({0, 0, 0, 0})) == 0.0);
    // Symmetry.
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        const auto u = random_labels(rng, 9, 3);
        const auto v = random_labels(rng, 9, 4);
        CHECK(adjusted_mutual_information(part(u), part(v)) ==
              doctest::Approx(adjusted_mutual_information(part(v), part(u))).epsilon(1e-12));
    }
}

TEST_CASE("chance-adjusted scores are centred near zero on random pairs") {
    Rng rng(505);
    double ari_sum = 0.0;
    double ami_sum = 0.0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        const auto u = random_labels(rng, 20, 4);
        const auto v = random_labels(rng, 20, 4);
        ari_sum += adjusted_rand_index(part(u), part(v));
        ami_sum += adjusted_mutual_information(part(u), part(v));
    }
    CHECK(std::abs(ari_sum / trials) < 0.05);
    CHECK(std::abs(ami_sum / trials) < 0.05);
}

TEST_CASE("completeness conventions and hand-computed value") {
    // A single predicted cluster is vacuously complete.
    CHECK(completeness(part({0, 1, 2, 0}), part({0, 0, 0, 0})) == 1.0);
    // Merging true clusters keeps completeness at one.
    CHECK(completeness(part({0, 0, 1, 1, 2, 2}), part({0, 0, 0, 0, 1, 1})) == 1.0);
    CHECK(completeness(part({0, 1, 0, 1}), part({1, 0, 1, 0})) == 1.0);

    // Hand case: true {0,0,1,1}, predicted {0,0,0,1}.
    // H(pred) = -(3/4 ln 3/4 + 1/4 ln 1/4); H(pred|true) = ln(2)/2.
    const double h_pred = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    const double h_cond = 0.5 * std::log(2.0);
    CHECK(completeness(part({0, 0, 1, 1}), part({0, 0, 0, 1})) ==
          doctest::Approx(1.0 - h_cond / h_pred).epsilon(1e-12));

    // Splitting a true cluster across predicted clusters loses completeness.
    CHECK(completeness(part({0, 0, 0, 0}), part({0, 0, 1, 1})) < 1.0);
}

TEST_CASE("agreement scores are invariant under relabeling") {
    Rng rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        const auto u = random_labels(rng, 12, 3);
        const auto v = random_labels(rng, 12, 3);
        auto remap = [](const std::vector<int>& labels, int shift) {
            std::vector<int> out(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) out[i] = (labels[i] + shift) % 3 + 5;
            return out;
        };
        const auto u2 = remap(u, 1);
        const auto v2 = remap(v, 2);
        CHECK(rand_index(part(u), part(v)) ==
              doctest::Approx(rand_index(part(u2), part(v2))).epsilon(1e-12));
        CHECK(adjusted_rand_index(part(u), part(v)) ==
              doctest::Approx(adjusted_rand_index(part(u2), part(v2))).epsilon(1e-12));
        CHECK(adjusted_mutual_information(part(u), part(v)) ==
              doctest::Approx(adjusted_mutual_information(part(u2), part(v2))).epsilon(1e-12));
        CHECK(completeness(part(u), part(v)) ==
              doctest::Approx(completeness(part(u2), part(v2))).epsilon(1e-12));
    }
}

TEST_CASE("adjusted scores hit one exactly iff the groupings coincide") {
    Rng rng(707);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 4 + rng.uniform_int(7);
        const auto u = random_labels(rng, n, 3);
        const auto v = random_labels(rng, n, 3);
        const double ari = adjusted_rand_index(part(u), part(v));
        const double ami = adjusted_mutual_information(part(u), part(v));
        if (Partition::same_grouping(part(u), part(v))) {
            CHECK(ari == 1.0);
            CHECK(ami == 1.0);
        } else {
            CHECK(ari < 1.0);
            CHECK(ami < 1.0 - 1e-9);
        }
    }
}

TEST_CASE("macro F1 basics") {
    CHECK(macro_f1({0, 1, 2, 1}, {0, 1, 2, 1}, 3) == 1.0);
    // Constant predictor on a balanced two-class set: F1(0)=2/3, F1(1)=0.
    CHECK(macro_f1({0, 0, 0, 0}, {0, 0, 1, 1}, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    // Hand case over three classes: (1 + 2/3 + 2/3) / 3 = 7/9.
    CHECK(macro_f1({0, 1, 1, 2}, {0, 1, 2, 2}, 3) == doctest::Approx(7.0 / 9.0).epsilon(1e-12));
    // Classes absent from both sides do not dilute the mean.
    CHECK(macro_f1({0, 0}, {0, 0}, 5) == 1.0);
}

TEST_CASE("macro F1 validates its inputs") {
    CHECK_THROWS_AS((void)macro_f1({0, 1}, {0}, 2), DimensionMismatchError);
    CHECK_THROWS_AS((void)macro_f1({}, {}, 2), EmptyDatasetError);
    CHECK_THROWS_AS((void)macro_f1({0, 2}, {0, 1}, 2), InvalidLabelError);
    CHECK_THROWS_AS((void)macro_f1({0, -1}, {0, 1}, 2), InvalidLabelError);
}

TEST_CASE("learning gap is a symmetric absolute difference") {
    CHECK(learning_gap(0.9, 0.6) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(learning_gap(0.6, 0.9) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(learning_gap(0.42, 0.42) == 0.0);
}

TEST_CASE("score series time average") {
    ScoreSeries s;
    s.name = "ari";
    s.values = {1.0, 0.5, 0.0};
    CHECK(s.time_average() == doctest::Approx(0.5).epsilon(1e-15));
    ScoreSeries empty;
    CHECK(empty.time_average() == 0.0);
}

TEST_SUITE_END();
