#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocfl/dataset.hpp"
#include "ocfl/partition.hpp"

namespace ocfl {

// The four split regimes: cluster label subspaces either pairwise disjoint
// (non-overlap) or sharing configured classes (overlap), crossed with uniform
// (balanced) or Dirichlet-drawn (imbalanced) class priors.
enum class Regime {
    NonOverlapBalanced,
    NonOverlapImbalanced,
    OverlapBalanced,
    OverlapImbalanced,
};

bool regime_is_overlap(Regime r);
bool regime_is_balanced(Regime r);
const char* regime_name(Regime r);

// One data-generating process: the stochastic source behind one cluster's
// local datasets. Features are isotropic Gaussians around per-class means;
// the mean table is shared across DGPs so differing label subspaces are the
// only source of heterogeneity (label-distribution skew).
struct DgpSpec {
    int dgp_id = 0;
    std::vector<int> label_subspace;                 // global class ids
    std::vector<double> class_prior;                 // aligned with label_subspace
    std::vector<std::vector<double>> feature_means;  // aligned with label_subspace
    double feature_sigma = 1.0;
};

struct SplitPlan {
    Regime regime = Regime::NonOverlapBalanced;
    std::size_t n_clients = 15;
    std::vector<double> cluster_fractions = {0.20, 0.47, 0.33};
    double alpha = 1.0;               // symmetric Dirichlet concentration
    std::vector<int> overlap_classes;  // classes shared by every cluster
    std::size_t samples_per_client = 120;
    double share_rate = 0.05;  // chance a drawn sample is copied to another client
    std::size_t n_classes = 9;
    std::size_t feature_dim = 16;
    double feature_sigma = 1.0;
    double mean_separation = 3.0;  // minimum pairwise mean distance, in sigmas
    std::size_t orchestrator_samples = 900;
    double train_fraction = 0.8;
};

struct ClientData {
    LocalDataset train;
    LocalDataset test;
};

struct FederatedDataset {
    std::vector<ClientData> clients;
    Partition ground_truth;        // client -> DGP cluster
    LocalDataset orchestrator_test;  // uniform class histogram within +-1
    std::vector<DgpSpec> dgps;
    std::size_t n_classes = 0;
    std::size_t feature_dim = 0;
};

// Largest-remainder allocation of clients to clusters, with every cluster
// guaranteed at least 2 clients (topped up from the largest cluster). Throws
// DegenerateAllocationError when that floor cannot be met.
std::vector<std::size_t> allocate_clients(std::size_t n_clients,
                                          const std::vector<double>& fractions);

std::vector<DgpSpec> build_dgps(const SplitPlan& plan, std::uint64_t seed);

FederatedDataset sample_federated_dataset(const std::vector<DgpSpec>& dgps,
                                          const SplitPlan& plan, std::uint64_t seed);

// Convenience wrapper: derives the "datagen" stream from the master seed and
// runs build + sample. The whole dataset is a pure function of (plan, seed).
FederatedDataset generate_dataset(const SplitPlan& plan, std::uint64_t master_seed);

// Writes per-client CSVs plus a JSON manifest (seed, plan echo, sample
// counts, ground truth, content hashes). Returns the manifest path.
std::string export_federated_dataset(const FederatedDataset& fd, const SplitPlan& plan,
                                     std::uint64_t master_seed, const std::string& dir);

// Re-reads an exported dataset directory and verifies the manifest hashes;
// throws IoError on tampering or missing files.
void verify_exported_dataset(const std::string& dir);

}  // namespace ocfl
