#pragma once

#include <cstdint>
#include <vector>

#include "ocfl/numkit.hpp"
#include "ocfl/partition.hpp"

namespace ocfl {

enum class ClusterAlgorithm {
    KMeans,
    MeanShift,
    AffinityPropagation,
    Hdbscan,
    AgglomerativeAverage,
    SattlerBipartition,
};

enum class PreferenceMode { MedianSimilarity };

struct ClusteringConfig {
    ClusterAlgorithm algorithm = ClusterAlgorithm::Hdbscan;
    int k_hint = 0;                     // K-Means only; must be >= 2 when used
    double min_cluster_fraction = 0.2;  // HDBSCAN minimum cluster size, as a fraction of n
    double bandwidth_quantile = 0.3;    // Mean Shift neighbourhood size, as a fraction of n
    double damping = 0.5;               // Affinity Propagation message damping, in [0.5, 1)
    PreferenceMode preference_mode = PreferenceMode::MedianSimilarity;
    double distance_threshold = 0.2;    // agglomerative merge cut-off
    int max_iterations = 300;
    int convergence_patience = 15;      // AP stable-iterations window
};

// Result of a backend invocation. `converged` is a soft flag (currently only
// Affinity Propagation can report false); callers that receive a
// non-converged result are expected to keep their previous partition.
struct ClusterResult {
    Partition partition;
    bool converged = true;
    bool degenerate = false;          // bipartition of indistinguishable inputs
    std::vector<int> attached;        // points attached post hoc (HDBSCAN noise)
};

// Lloyd's algorithm over the rows of the divergence matrix (each row is an
// n-dimensional embedding of one client), k-means++ seeding, empty clusters
// reseeded to the farthest point.
Partition kmeans_on_rows(const DivergenceMatrix& gamma, int k, std::uint64_t seed,
                         int max_iterations = 300);

// Flat-kernel mean shift over the rows. The bandwidth is the mean (over
// rows) of each row's mean distance to its ceil(quantile * n) nearest
// neighbours; modes closer than bandwidth/2 are merged. A zero bandwidth
// (all rows identical) degenerates to one cluster.
Partition mean_shift_on_rows(const DivergenceMatrix& gamma, double bandwidth_quantile,
                             int max_iterations = 300);

// Responsibility/availability message passing on s = -gamma with the median
// off-diagonal similarity as the shared preference.
ClusterResult affinity_propagation(const DivergenceMatrix& gamma, double damping,
                                   std::uint64_t seed, int max_iterations = 200,
                                   int convergence_patience = 15);

// Density clustering on the precomputed distance matrix: mutual
// reachability, minimum spanning tree, condensed hierarchy, excess-of-mass
// cluster selection. Noise points are attached to the selected cluster with
// the smallest mean raw distance so the result is a full partition.
ClusterResult hdbscan(const DivergenceMatrix& gamma, int min_cluster_size);

// Average-linkage agglomerative clustering; merging stops once the cheapest
// merge distance exceeds the threshold. Tied merges pick the lexicographically
// smallest pair of cluster representatives (each cluster represented by its
// smallest client index).
Partition agglomerative_average_linkage(const DivergenceMatrix& gamma,
                                        double distance_threshold);

// Complete-linkage 2-clustering on the cosine distances between deltas: the
// two root children of the dendrogram. Indistinguishable inputs (all pairwise
// distances zero) produce the degenerate first-client-versus-rest split and
// set the degenerate flag.
ClusterResult sattler_bipartition(const std::vector<ParameterVector>& deltas);

// Dispatch on cfg.algorithm. SattlerBipartition is not reachable through this
// entry point (it consumes raw deltas, not a divergence matrix).
ClusterResult run_backend(const DivergenceMatrix& gamma, const ClusteringConfig& cfg,
                          std::uint64_t seed);

}  // namespace ocfl
