#include "ocfl/partition.hpp"

#include <unordered_map>

namespace ocfl {

Partition Partition::from_labels(const std::vector<int>& labels) {
    Partition p;
    p.assignment = labels;
    p.canonicalize();
    return p;
}

void Partition::canonicalize() {
    std::unordered_map<int, int> relabel;
    int next = 0;
    for (auto& a : assignment) {
        auto it = relabel.find(a);
        if (it == relabel.end()) {
            it = relabel.emplace(a, next++).first;
        }
        a = it->second;
    }
    k = next;
}

std::vector<std::vector<int>> Partition::groups() const {
    std::vector<std::vector<int>> g(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        g[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
    }
    return g;
}

bool Partition::same_grouping(const Partition& a, const Partition& b) {
    if (a.assignment.size() != b.assignment.size()) return false;
    Partition ca = a;
    Partition cb = b;
    ca.canonicalize();
    cb.canonicalize();
    return ca.assignment == cb.assignment;
}

Partition Partition::single_cluster(std::size_t n) {
    Partition p;
    p.assignment.assign(n, 0);
    p.k = n > 0 ? 1 : 0;
    return p;
}

}  // namespace ocfl
