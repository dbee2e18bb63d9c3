#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ocfl/clustering.hpp"
#include "ocfl/datagen.hpp"
#include "ocfl/model.hpp"
#include "ocfl/numkit.hpp"
#include "ocfl/partition.hpp"

namespace ocfl {

enum class Strategy { Bnc, Ocfl, Scl, Bcl };

const char* strategy_name(Strategy s);

// Split rule applied per cluster once the cooldown round is reached: split
// when mean ||delta|| < epsilon1 and max ||delta|| > epsilon2.
struct SclConfig {
    double epsilon1 = 0.35;
    double epsilon2 = 1.00;
    int cooldown_round = 1;  // first round index at which splits are checked
};

// One-shot agglomerative clustering of client end-of-round weights at a fixed
// round (1-based, so clustering_round == rounds clusters after the final
// aggregation).
struct BclConfig {
    int clustering_round = 21;
    double distance_threshold = 0.2;
};

struct FederationConfig {
    Strategy strategy = Strategy::Ocfl;
    int rounds = 15;
    std::vector<std::size_t> hidden_dims = {32};
    Activation activation = Activation::ReLU;
    OptimizerConfig optimizer;   // client-side
    double server_lr = 1.0;      // FedOpt server learning rate
    ClusteringConfig clustering;
    double temperature_p = 2.0;
    LambdaMode lambda_mode = LambdaMode::MaximalDivergence;
    std::size_t trigger_window = 1;
    SclConfig scl;
    BclConfig bcl;
};

// Partition plus the per-cluster models it indexes; before any clustering
// event there is exactly one cluster holding every client.
struct ClusterState {
    Partition clusters;
    std::vector<MlpModel> models;
    bool fired = false;
};

struct RoundRecord {
    int t = 0;  // 0-based round index
    bool has_temperature = false;
    double temperature = 0.0;
    bool fired_this_round = false;
    Partition partition;                     // snapshot at end of round
    std::vector<double> client_pf1;          // per-client local-test macro-F1
    std::vector<double> cluster_gf1;         // per-cluster orchestrator macro-F1
    std::vector<double> cluster_train_loss;  // per-cluster mean training loss
    double mean_pf1 = 0.0;
    double mean_gf1 = 0.0;
    double learning_gap = 0.0;
};

struct FederationResult {
    std::vector<RoundRecord> records;
    Partition final_partition;
    std::vector<MlpModel> final_models;  // aligned with final_partition clusters
    bool fired = false;
    int fired_round = -1;  // first clustering round, -1 if none
};

// Test seam: invoked after local training and before any use of the deltas,
// allowing scenarios to substitute constructed updates.
using DeltaHook = std::function<void(int round, std::vector<ModelDelta>&)>;

// Round-synchronous engine driving all four strategies. Deterministic given
// (dataset, config, seed).
FederationResult run_federation(const FederatedDataset& fd, const FederationConfig& cfg,
                                std::uint64_t seed, const DeltaHook& delta_hook = nullptr);

// Strategy wrappers.
FederationResult run_ocfl(const FederatedDataset& fd, FederationConfig cfg,
                          std::uint64_t seed);
FederationResult run_bnc(const FederatedDataset& fd, FederationConfig cfg,
                         std::uint64_t seed);
FederationResult run_scl(const FederatedDataset& fd, FederationConfig cfg,
                         std::uint64_t seed);
FederationResult run_bcl(const FederatedDataset& fd, FederationConfig cfg,
                         std::uint64_t seed);

}  // namespace ocfl
