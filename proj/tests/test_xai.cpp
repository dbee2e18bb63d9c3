#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "ocfl/datagen.hpp"
#include "ocfl/errors.hpp"
#include "ocfl/model.hpp"
#include "ocfl/partition.hpp"
#include "ocfl/rng.hpp"
#include "ocfl/xai.hpp"

using namespace ocfl;

namespace {

// Single-layer softmax classifier whose logits are an explicit linear map,
// giving closed-form saliency |w_yi * x_i|.
MlpModel linear_model(std::size_t d, std::size_t k, const std::vector<double>& weights,
                      const std::vector<double>& biases) {
    MlpModel m;
    m.layer_dims = {d, k};
    m.activation = Activation::ReLU;
    m.weights = {weights};
    m.biases = {biases};
    return m;
}

FederatedDataset small_data(std::uint64_t seed) {
    SplitPlan plan;
    plan.regime = Regime::NonOverlapBalanced;
    plan.n_clients = 4;
    plan.cluster_fractions = {0.5, 0.5};
    plan.n_classes = 4;
    plan.feature_dim = 6;
    plan.samples_per_client = 30;
    plan.orchestrator_samples = 40;
    plan.share_rate = 0.0;
    return generate_dataset(plan, seed);
}

}  // namespace

TEST_SUITE_BEGIN("xai");

TEST_CASE("saliency of a linear model is |w_yi * x_i|") {
    const MlpModel m = linear_model(3, 2, {0.5, -1.0, 2.0, 3.0, 0.25, -0.5}, {0.1, -0.2});
    const std::vector<double> x{2.0, -4.0, 0.5};
    const SaliencyMap s0 = saliency(m, x, 0);
    CHECK(s0.scores[0] == doctest::Approx(std::abs(0.5 * 2.0)).epsilon(1e-14));
    CHECK(s0.scores[1] == doctest::Approx(std::abs(-1.0 * -4.0)).epsilon(1e-14));
    CHECK(s0.scores[2] == doctest::Approx(std::abs(2.0 * 0.5)).epsilon(1e-14));
    const SaliencyMap s1 = saliency(m, x, 1);
    CHECK(s1.scores[0] == doctest::Approx(6.0).epsilon(1e-14));
    CHECK(s1.scores[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s1.scores[2] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("saliency validates shape and label, and a zero input maps to zero") {
    const MlpModel m = linear_model(3, 2, {1, 2, 3, 4, 5, 6}, {0, 0});
    CHECK_THROWS_AS((void)saliency(m, {1.0, 2.0}, 0), DimensionMismatchError);
    CHECK_THROWS_AS((void)saliency(m, {1.0, 2.0, 3.0}, 2), InvalidLabelError);
    const SaliencyMap s = saliency(m, {0.0, 0.0, 0.0}, 1);
    CHECK(s.scores == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("single-step curves expose exact endpoints") {
    const MlpModel m = linear_model(4, 3,
                                    {1.0, -0.5, 0.3, 0.7,  //
                                     -0.2, 0.9, -1.1, 0.4,  //
                                     0.6, 0.1, 0.2, -0.8},
                                    {0.05, -0.1, 0.0});
    const std::vector<double> x{1.5, -2.0, 0.7, 3.0};
    const int y = 1;
    const SaliencyMap sal = saliency(m, x, y);
    IndeConfig cfg;
    cfg.step = 4;  // d == step: one step, two curve points
    const auto del = deletion_curve(m, x, y, sal, cfg);
    const auto ins = insertion_curve(m, x, y, sal, cfg);
    REQUIRE(del.size() == 2);
    REQUIRE(ins.size() == 2);

    const double p_full = forward_one(m, x)[1];
    const double p_base = forward_one(m, std::vector<double>(4, 0.0))[1];
    CHECK(del.front() == p_full);
    CHECK(del.back() == p_base);
    CHECK(ins.front() == p_base);
    CHECK(ins.back() == p_full);
    // Deletion starts where insertion ends, and vice versa.
    CHECK(del.front() == ins.back());
    CHECK(del.back() == ins.front());
}

TEST_CASE("curve length is ceil(d/step) + 1 and the final point is exact") {
    const MlpModel m = linear_model(5, 2, {1, -1, 2, -2, 3, 0.5, 0.5, 0.5, 0.5, 0.5},
                                    {0.0, 0.0});
    const std::vector<double> x{0.3, 1.2, -0.7, 0.9, -1.5};
    const SaliencyMap sal = saliency(m, x, 0);
    IndeConfig cfg;
    cfg.step = 2;
    const auto del = deletion_curve(m, x, 0, sal, cfg);
    const auto ins = insertion_curve(m, x, 0, sal, cfg);
    CHECK(del.size() == 4);  // ceil(5/2) + 1
    CHECK(ins.size() == 4);
    CHECK(ins.back() == forward_one(m, x)[0]);
    CHECK(del.back() == forward_one(m, std::vector<double>(5, 0.0))[0]);

    IndeConfig bad = cfg;
    bad.step = 0;
    CHECK_THROWS_AS((void)deletion_curve(m, x, 0, sal, bad), std::invalid_argument);
}

TEST_CASE("a planted dominant feature moves the first curve step") {
    // Class 1 depends only on feature 0.
    const MlpModel m = linear_model(3, 2, {0.0, 0.0, 0.0, 5.0, 0.0, 0.0}, {0.0, 0.0});
    const std::vector<double> x{2.0, 1.0, 1.0};
    const SaliencyMap sal = saliency(m, x, 1);
    IndeConfig cfg;
    cfg.step = 1;
    const auto del = deletion_curve(m, x, 1, sal, cfg);
    const auto ins = insertion_curve(m, x, 1, sal, cfg);
    CHECK(del[1] < del[0]);   // masking the planted feature drops p(y) at once
    CHECK(ins[1] > ins[0]);   // inserting it first recovers p(y) at once
    // The remaining features are irrelevant, so the tail is flat.
    CHECK(del[1] == del[2]);
    CHECK(del[2] == del[3]);
}

TEST_CASE("saliency ties break towards the lower feature index") {
    // Model reacts to feature 0 only, but the provided map ties all features.
    const MlpModel m = linear_model(3, 2, {0.0, 0.0, 0.0, 4.0, 0.0, 0.0}, {0.0, 0.0});
    const std::vector<double> x{1.0, 1.0, 1.0};
    SaliencyMap tied;
    tied.scores = {0.5, 0.5, 0.5};
    IndeConfig cfg;
    cfg.step = 1;
    const auto del = deletion_curve(m, x, 1, tied, cfg);
    CHECK(del[0] != del[1]);  // feature 0 masked on the first step
    CHECK(del[1] == del[2]);
    CHECK(del[2] == del[3]);
}

TEST_CASE("trapezoidal auc on reference curves") {
    CHECK(auc({0.7, 0.7, 0.7}) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(auc({0.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(auc({1.0, 0.5, 0.0}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(auc({0.25}) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK_THROWS_AS((void)auc({}), EmptyCurveError);

    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> curve(2 + rng.uniform_int(8));
        double lo = 1.0;
        double hi = 0.0;
        for (double& v : curve) {
            v = rng.uniform();
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double a = auc(curve);
        CHECK(a >= lo - 1e-12);
        CHECK(a <= hi + 1e-12);
    }
}

TEST_CASE("true saliency order beats the reversed order on a linear model") {
    // Class-1 logit = 3*x0 + 2*x1; features 2 and 3 are dead weight.
    const MlpModel m = linear_model(
        4, 2, {0.0, 0.0, 0.0, 0.0, 3.0, 2.0, 0.0, 0.0}, {0.0, 0.0});
    const std::vector<double> x{1.0, 1.0, 1.0, 1.0};
    const SaliencyMap sal = saliency(m, x, 1);
    SaliencyMap reversed;
    reversed.scores = sal.scores;
    std::reverse(reversed.scores.begin(), reversed.scores.end());
    IndeConfig cfg;
    cfg.step = 1;
    CHECK(auc(deletion_curve(m, x, 1, sal, cfg)) <
          auc(deletion_curve(m, x, 1, reversed, cfg)));
    CHECK(auc(insertion_curve(m, x, 1, sal, cfg)) >
          auc(insertion_curve(m, x, 1, reversed, cfg)));
}

TEST_CASE("run_inde aggregates batch-averaged curves per cluster") {
    const auto fd = small_data(21);
    const std::vector<std::size_t> dims{fd.feature_dim, 8, fd.n_classes};
    const MlpModel model = MlpModel::init(dims, Activation::ReLU, 99);
    const Partition single = Partition::from_labels({0, 0, 0, 0});

    IndeConfig cfg;
    cfg.mode = IndeMode::InDistribution;
    cfg.sample_size = 10000.0;  // clamped to the full evaluation set
    cfg.step = 1;
    const IndeResult res = run_inde({model}, single, fd, cfg, 3);
    REQUIRE(res.clusters.size() == 1);

    // Manual recomputation over the full pool: average curves, then one AUC.
    std::vector<double> del_sum;
    std::vector<double> ins_sum;
    std::size_t count = 0;
    for (const auto& client : fd.clients) {
        for (std::size_t r = 0; r < client.test.size(); ++r) {
            const double* xp = client.test.row(r);
            const std::vector<double> x(xp, xp + client.test.feature_dim);
            const int y = client.test.labels[r];
            const SaliencyMap sal = saliency(model, x, y);
            const auto del = deletion_curve(model, x, y, sal, cfg);
            const auto ins = insertion_curve(model, x, y, sal, cfg);
            if (del_sum.empty()) {
                del_sum.assign(del.size(), 0.0);
                ins_sum.assign(ins.size(), 0.0);
            }
            for (std::size_t j = 0; j < del.size(); ++j) {
                del_sum[j] += del[j];
                ins_sum[j] += ins[j];
            }
            ++count;
        }
    }
    for (double& v : del_sum) v /= static_cast<double>(count);
    for (double& v : ins_sum) v /= static_cast<double>(count);

    CHECK(res.clusters[0].sample_count == count);
    CHECK(res.clusters[0].deletion_auc == doctest::Approx(auc(del_sum)).epsilon(1e-12));
    CHECK(res.clusters[0].insertion_auc == doctest::Approx(auc(ins_sum)).epsilon(1e-12));
    CHECK(res.mean_deletion_auc == res.clusters[0].deletion_auc);
    CHECK(res.mean_insertion_auc == res.clusters[0].insertion_auc);
}

TEST_CASE("run_inde evaluation pools per mode") {
    const auto fd = small_data(22);
    const std::vector<std::size_t> dims{fd.feature_dim, 8, fd.n_classes};
    const MlpModel m0 = MlpModel::init(dims, Activation::ReLU, 1);
    const MlpModel m1 = MlpModel::init(dims, Activation::ReLU, 2);
    const Partition two = Partition::from_labels({0, 0, 1, 1});

    const std::size_t per_client_test = fd.clients[0].test.size();

    IndeConfig cfg;
    cfg.sample_size = 10000.0;
    cfg.mode = IndeMode::InDistribution;
    const IndeResult inde = run_inde({m0, m1}, two, fd, cfg, 5);
    REQUIRE(inde.clusters.size() == 2);
    CHECK(inde.clusters[0].sample_count == 2 * per_client_test);
    CHECK(inde.clusters[1].sample_count == 2 * per_client_test);
    CHECK(inde.mean_deletion_auc ==
          doctest::Approx(0.5 * (inde.clusters[0].deletion_auc +
                                 inde.clusters[1].deletion_auc)).epsilon(1e-15));

    cfg.mode = IndeMode::OutOfDistribution;
    const IndeResult ood = run_inde({m0, m1}, two, fd, cfg, 5);
    CHECK(ood.clusters[0].sample_count == 2 * per_client_test);  // the other cluster

    cfg.mode = IndeMode::Orchestrator;
    const IndeResult orch = run_inde({m0, m1}, two, fd, cfg, 5);
    CHECK(orch.clusters[0].sample_count == fd.orchestrator_test.size());
    CHECK(orch.clusters[1].sample_count == fd.orchestrator_test.size());
}

TEST_CASE("run_inde rejects bad inputs and empty pools") {
    const auto fd = small_data(23);
    const std::vector<std::size_t> dims{fd.feature_dim, 8, fd.n_classes};
    const MlpModel model = MlpModel::init(dims, Activation::ReLU, 3);
    const Partition single = Partition::from_labels({0, 0, 0, 0});

    IndeConfig cfg;
    CHECK_THROWS_AS((void)run_inde({model, model}, single, fd, cfg, 1),
                    DimensionMismatchError);

    cfg.mode = IndeMode::OutOfDistribution;  // complement of everything is empty
    CHECK_THROWS_AS((void)run_inde({model}, single, fd, cfg, 1), EmptyEvaluationSetError);

    cfg.mode = IndeMode::InDistribution;
    cfg.sample_size = 0.0;
    CHECK_THROWS_AS((void)run_inde({model}, single, fd, cfg, 1), std::invalid_argument);
}

TEST_CASE("run_inde resolves fractional sample sizes and stays deterministic") {
    const auto fd = small_data(24);
    const std::vector<std::size_t> dims{fd.feature_dim, 8, fd.n_classes};
    const MlpModel model = MlpModel::init(dims, Activation::ReLU, 4);
    const Partition single = Partition::from_labels({0, 0, 0, 0});
    const std::size_t pool = 4 * fd.clients[0].test.size();

    IndeConfig cfg;
    cfg.sample_size = 0.5;
    const IndeResult frac = run_inde({model}, single, fd, cfg, 6);
    CHECK(frac.clusters[0].sample_count ==
          static_cast<std::size_t>(std::ceil(0.5 * static_cast<double>(pool))));

    cfg.sample_size = 4.0;
    const IndeResult a = run_inde({model}, single, fd, cfg, 7);
    const IndeResult b = run_inde({model}, single, fd, cfg, 7);
    CHECK(a.clusters[0].deletion_auc == b.clusters[0].deletion_auc);
    CHECK(a.clusters[0].insertion_auc == b.clusters[0].insertion_auc);
    const IndeResult c = run_inde({model}, single, fd, cfg, 8);
    CHECK(a.clusters[0].deletion_auc != c.clusters[0].deletion_auc);
}

TEST_SUITE_END();
