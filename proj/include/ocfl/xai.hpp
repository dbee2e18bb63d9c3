#pragma once

#include <cstdint>
#include <vector>

#include "ocfl/datagen.hpp"
#include "ocfl/model.hpp"
#include "ocfl/partition.hpp"

namespace ocfl {

// Per-feature non-negative importance scores, aligned with the input order.
struct SaliencyMap {
    std::vector<double> scores;
};

enum class IndeMode { InDistribution, OutOfDistribution, Orchestrator };

const char* inde_mode_name(IndeMode mode);

struct IndeConfig {
    IndeMode mode = IndeMode::InDistribution;
    // Evaluation sample count zeta; values <= 1 are read as a fraction of the
    // available evaluation set.
    double sample_size = 64.0;
    std::size_t step = 1;  // features toggled per curve step
    double baseline_value = 0.0;
};

struct IndeClusterResult {
    int cluster = 0;
    double insertion_auc = 0.0;
    double deletion_auc = 0.0;
    std::size_t sample_count = 0;
};

struct IndeResult {
    std::vector<IndeClusterResult> clusters;
    double mean_insertion_auc = 0.0;
    double mean_deletion_auc = 0.0;
};

// Gradient-times-input magnitude per feature: |d logit_y / d x_i * x_i|.
SaliencyMap saliency(const MlpModel& m, const std::vector<double>& x, int y);

// Probability of class y as the most-salient features are progressively
// replaced by the baseline value. Length ceil(d/step) + 1, starting from the
// unmasked input. Saliency ties break towards the lower feature index.
std::vector<double> deletion_curve(const MlpModel& m, const std::vector<double>& x, int y,
                                   const SaliencyMap& sal, const IndeConfig& cfg);

// Probability of class y as original feature values are progressively
// inserted into the all-baseline vector, most salient first.
std::vector<double> insertion_curve(const MlpModel& m, const std::vector<double>& x, int y,
                                    const SaliencyMap& sal, const IndeConfig& cfg);

// Trapezoidal area under the curve over a [0, 1] fraction-of-features axis.
double auc(const std::vector<double>& curve);

// Insertion/deletion evaluation across clusters: builds the per-cluster
// evaluation set for the configured mode, samples zeta points, batch-averages
// the probability curves and reports one AUC pair per cluster plus run-level
// means. Deterministic given seed.
IndeResult run_inde(const std::vector<MlpModel>& models, const Partition& partition,
                    const FederatedDataset& fd, const IndeConfig& cfg, std::uint64_t seed);

}  // namespace ocfl
