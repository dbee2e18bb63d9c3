#include "ocfl/xai.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ocfl/errors.hpp"
#include "ocfl/io.hpp"
#include "ocfl/rng.hpp"

namespace ocfl {

const char* inde_mode_name(IndeMode mode) {
    switch (mode) {
        case IndeMode::InDistribution: return "in_distribution";
        case IndeMode::OutOfDistribution: return "out_of_distribution";
        case IndeMode::Orchestrator: return "orchestrator";
    }
    return "unknown";
}

SaliencyMap saliency(const MlpModel& m, const std::vector<double>& x, int y) {
    if (x.size() != m.input_dim()) {
        throw DimensionMismatchError("saliency: input has " + std::to_string(x.size()) +
                                     " features, model expects " +
                                     std::to_string(m.input_dim()));
    }
    if (y < 0 || static_cast<std::size_t>(y) >= m.class_count()) {
        throw InvalidLabelError("saliency: class " + std::to_string(y) + " outside [0, " +
                                std::to_string(m.class_count()) + ")");
    }
    const std::vector<double> grad = input_logit_gradient(m, x, y);
    SaliencyMap sal;
    sal.scores.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sal.scores[i] = std::abs(grad[i] * x[i]);
    return sal;
}

namespace {

void validate_curve_inputs(const MlpModel& m, const std::vector<double>& x, int y,
                           const SaliencyMap& sal, const IndeConfig& cfg) {
    if (x.size() != m.input_dim() || sal.scores.size() != x.size()) {
        throw DimensionMismatchError("curve: input/saliency/model dimensions disagree");
    }
    if (y < 0 || static_cast<std::size_t>(y) >= m.class_count()) {
        throw InvalidLabelError("curve: class " + std::to_string(y) + " out of range");
    }
    if (cfg.step < 1) {
        throw std::invalid_argument("curve: step must be >= 1");
    }
}

// Feature indices in descending saliency, ties to the lower index.
std::vector<std::size_t> saliency_order(const SaliencyMap& sal) {
    std::vector<std::size_t> order(sal.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sal.scores[a] != sal.scores[b]) return sal.scores[a] > sal.scores[b];
        return a < b;
    });
    return order;
}

double prob_of(const MlpModel& m, const std::vector<double>& x, int y) {
    return forward_one(m, x)[static_cast<std::size_t>(y)];
}

std::vector<double> masking_curve(const MlpModel& m, const std::vector<double>& x, int y,
                                  const SaliencyMap& sal, const IndeConfig& cfg,
                                  bool deletion) {
    validate_curve_inputs(m, x, y, sal, cfg);
    const std::size_t d = x.size();
    const std::vector<std::size_t> order = saliency_order(sal);
    const std::size_t steps =
        (d + cfg.step - 1) / cfg.step;  // ceil(d / step)

    std::vector<double> work =
        deletion ? x : std::vector<double>(d, cfg.baseline_value);
    std::vector<double> curve;
    curve.reserve(steps + 1);
    curve.push_back(prob_of(m, work, y));
    std::size_t touched = 0;
    for (std::size_t j = 0; j < steps; ++j) {
        const std::size_t upto = std::min(d, touched + cfg.step);
        for (; touched < upto; ++touched) {
            const std::size_t f = order[touched];
            work[f] = deletion ? cfg.baseline_value : x[f];
        }
        curve.push_back(prob_of(m, work, y));
    }
    return curve;
}

}  // namespace

std::vector<double> deletion_curve(const MlpModel& m, const std::vector<double>& x, int y,
                                   const SaliencyMap& sal, const IndeConfig& cfg) {
    return masking_curve(m, x, y, sal, cfg, /*deletion=*/true);
}

std::vector<double> insertion_curve(const MlpModel& m, const std::vector<double>& x, int y,
                                    const SaliencyMap& sal, const IndeConfig& cfg) {
    return masking_curve(m, x, y, sal, cfg, /*deletion=*/false);
}

double auc(const std::vector<double>& curve) {
    if (curve.empty()) throw EmptyCurveError("auc: empty curve");
    if (curve.size() == 1) return curve.front();
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        area += 0.5 * (curve[i] + curve[i + 1]);
    }
    return area / static_cast<double>(curve.size() - 1);
}

IndeResult run_inde(const std::vector<MlpModel>& models, const Partition& partition,
                    const FederatedDataset& fd, const IndeConfig& cfg, std::uint64_t seed) {
    if (models.size() != static_cast<std::size_t>(partition.k)) {
        throw DimensionMismatchError("run_inde: " + std::to_string(models.size()) +
                                     " models for " + std::to_string(partition.k) +
                                     " clusters");
    }
    if (cfg.sample_size <= 0.0) {
        throw std::invalid_argument("run_inde: sample_size must be positive");
    }
    const auto groups = partition.groups();

    IndeResult result;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        // Build the evaluation set for this cluster.
        LocalDataset eval;
        eval.feature_dim = fd.feature_dim;
        switch (cfg.mode) {
            case IndeMode::InDistribution:
                for (int id : groups[c]) {
                    const LocalDataset& t = fd.clients[static_cast<std::size_t>(id)].test;
                    for (std::size_t r = 0; r < t.size(); ++r) {
                        eval.push_row(t.row(r), t.labels[r]);
                    }
                }
                break;
            case IndeMode::OutOfDistribution: {
                std::vector<bool> inside(fd.clients.size(), false);
                for (int id : groups[c]) inside[static_cast<std::size_t>(id)] = true;
                for (std::size_t id = 0; id < fd.clients.size(); ++id) {
                    if (inside[id]) continue;
                    const LocalDataset& t = fd.clients[id].test;
                    for (std::size_t r = 0; r < t.size(); ++r) {
                        eval.push_row(t.row(r), t.labels[r]);
                    }
                }
                break;
            }
            case IndeMode::Orchestrator:
                eval = fd.orchestrator_test;
                break;
        }
        if (eval.size() == 0) {
            throw EmptyEvaluationSetError(
                "run_inde: empty evaluation set for cluster " + std::to_string(c) +
                " in mode " + inde_mode_name(cfg.mode));
        }

        // Resolve zeta: a fraction when <= 1, otherwise an absolute count.
        std::size_t want;
        if (cfg.sample_size <= 1.0) {
            want = static_cast<std::size_t>(
                std::ceil(cfg.sample_size * static_cast<double>(eval.size())));
            want = std::max<std::size_t>(want, 1);
        } else {
            want = static_cast<std::size_t>(std::llround(cfg.sample_size));
        }
        if (want > eval.size()) {
            log_warn("run_inde: sample size " + std::to_string(want) + " clamped to " +
                     std::to_string(eval.size()) + " available points (cluster " +
                     std::to_string(c) + ")");
            want = eval.size();
        }

        Rng rng(derive_seed(seed, "inde/cluster/" + std::to_string(c)));
        std::vector<std::size_t> idx(eval.size());
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        idx.resize(want);

        const MlpModel& model = models[c];
        std::vector<double> del_sum;
        std::vector<double> ins_sum;
        for (std::size_t s = 0; s < idx.size(); ++s) {
            const double* xp = eval.row(idx[s]);
            const std::vector<double> x(xp, xp + eval.feature_dim);
            const int y = eval.labels[idx[s]];
            const SaliencyMap sal = saliency(model, x, y);
            const std::vector<double> del = deletion_curve(model, x, y, sal, cfg);
            const std::vector<double> ins = insertion_curve(model, x, y, sal, cfg);
            if (del_sum.empty()) {
                del_sum.assign(del.size(), 0.0);
                ins_sum.assign(ins.size(), 0.0);
            }
            for (std::size_t j = 0; j < del.size(); ++j) {
                del_sum[j] += del[j];
                ins_sum[j] += ins[j];
            }
        }
        for (double& v : del_sum) v /= static_cast<double>(idx.size());
        for (double& v : ins_sum) v /= static_cast<double>(idx.size());

        IndeClusterResult cr;
        cr.cluster = static_cast<int>(c);
        cr.deletion_auc = auc(del_sum);
        cr.insertion_auc = auc(ins_sum);
        cr.sample_count = idx.size();
        result.clusters.push_back(cr);
    }

    double del_mean = 0.0;
    double ins_mean = 0.0;
    for (const auto& cr : result.clusters) {
        del_mean += cr.deletion_auc;
        ins_mean += cr.insertion_auc;
    }
    result.mean_deletion_auc = del_mean / static_cast<double>(result.clusters.size());
    result.mean_insertion_auc = ins_mean / static_cast<double>(result.clusters.size());
    return result;
}

}  // namespace ocfl
