#pragma once

#include <cstddef>
#include <vector>

namespace ocfl {

// Hard assignment of clients 0..n-1 to clusters 0..k-1. Canonical form
// relabels clusters by order of first appearance, which guarantees ids are
// contiguous and no cluster is empty; every factory in this codebase returns
// canonical partitions so comparisons are stable.
struct Partition {
    std::vector<int> assignment;
    int k = 0;

    Partition() = default;

    std::size_t n_clients() const { return assignment.size(); }

    // Builds a canonical partition from arbitrary (possibly sparse) labels.
    static Partition from_labels(const std::vector<int>& labels);

    // Relabels in place to canonical form and recomputes k.
    void canonicalize();

    // Members of each cluster, in client order.
    std::vector<std::vector<int>> groups() const;

    // True when the two partitions induce the same grouping, ignoring the
    // particular cluster ids.
    static bool same_grouping(const Partition& a, const Partition& b);

    static Partition single_cluster(std::size_t n);
};

}  // namespace ocfl
