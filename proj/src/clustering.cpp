#include "ocfl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "ocfl/errors.hpp"
#include "ocfl/io.hpp"
#include "ocfl/rng.hpp"

namespace ocfl {

namespace {

using Rows = std::vector<std::vector<double>>;

Rows matrix_rows(const DivergenceMatrix& gamma) {
    const std::size_t n = gamma.size();
    Rows rows(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) rows[i][j] = gamma.at(i, j);
    }
    return rows;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// K-Means on the rows of the divergence matrix
// ---------------------------------------------------------------------------

Partition kmeans_on_rows(const DivergenceMatrix& gamma, int k, std::uint64_t seed,
                         int max_iterations) {
    const std::size_t n = gamma.size();
    if (k < 2 || static_cast<std::size_t>(k) > n) {
        throw InvalidKError("kmeans_on_rows: k=" + std::to_string(k) +
                            " outside [2, " + std::to_string(n) + "]");
    }
    const Rows rows = matrix_rows(gamma);
    const std::size_t kk = static_cast<std::size_t>(k);
    Rng rng(seed);

    // k-means++ seeding.
    Rows centroids;
    centroids.push_back(rows[rng.uniform_int(n)]);
    std::vector<double> d2(n);
    while (centroids.size() < kk) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(rows[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_int(n);  // all points already covered exactly
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (target < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(rows[pick]);
    }

    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (std::size_t c = 0; c < kk; ++c) {
                const double d = sq_dist(rows[i], centroids[c]);
                if (d < best) {
                    best = d;
                    best_c = static_cast<int>(c);
                }
            }
            assign[i] = best_c;
        }

        // Recompute centroids; any emptied cluster is reseeded to the point
        // farthest from its current centroid.
        Rows next(kk, std::vector<double>(n, 0.0));
        std::vector<std::size_t> counts(kk, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            counts[c] += 1;
            for (std::size_t f = 0; f < n; ++f) next[c][f] += rows[i][f];
        }
        for (std::size_t c = 0; c < kk; ++c) {
            if (counts[c] == 0) {
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d =
                        sq_dist(rows[i], centroids[static_cast<std::size_t>(assign[i])]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                next[c] = rows[far];
                assign[far] = static_cast<int>(c);
            } else {
                for (std::size_t f = 0; f < n; ++f) {
                    next[c][f] /= static_cast<double>(counts[c]);
                }
            }
        }

        double movement = 0.0;
        for (std::size_t c = 0; c < kk; ++c) movement += sq_dist(centroids[c], next[c]);
        centroids = std::move(next);
        if (std::sqrt(movement) < 1e-9) break;
    }

    return Partition::from_labels(assign);
}

// ---------------------------------------------------------------------------
// Mean shift on the rows
// ---------------------------------------------------------------------------

Partition mean_shift_on_rows(const DivergenceMatrix& gamma, double bandwidth_quantile,
                             int max_iterations) {
    const std::size_t n = gamma.size();
    if (n < 2) return Partition::single_cluster(n);
    const Rows rows = matrix_rows(gamma);

    // Bandwidth: average over rows of the mean distance to each row's
    // ceil(quantile * n) nearest neighbours.
    const std::size_t m = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(bandwidth_quantile * static_cast<double>(n))), 1,
        n - 1);
    double bandwidth = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.push_back(std::sqrt(sq_dist(rows[i], rows[j])));
        }
        std::sort(d.begin(), d.end());
        double mean = 0.0;
        for (std::size_t s = 0; s < m; ++s) mean += d[s];
        bandwidth += mean / static_cast<double>(m);
    }
    bandwidth /= static_cast<double>(n);
    if (bandwidth <= 0.0) {
        // All rows identical: no density structure to find.
        return Partition::single_cluster(n);
    }

    // Shift every point to its flat-kernel mode.
    Rows modes(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> y = rows[i];
        for (int iter = 0; iter < max_iterations; ++iter) {
            std::vector<double> next(n, 0.0);
            std::size_t inside = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (std::sqrt(sq_dist(y, rows[j])) <= bandwidth) {
                    ++inside;
                    for (std::size_t f = 0; f < n; ++f) next[f] += rows[j][f];
                }
            }
            for (std::size_t f = 0; f < n; ++f) next[f] /= static_cast<double>(inside);
            const double shift = std::sqrt(sq_dist(y, next));
            y = std::move(next);
            if (shift < 1e-7) break;
        }
        modes[i] = std::move(y);
    }

    // Deduplicate modes, denser first, merging modes closer than bandwidth/2.
    std::vector<std::size_t> intensity(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (std::sqrt(sq_dist(modes[i], rows[j])) <= bandwidth) ++intensity[i];
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (intensity[a] != intensity[b]) return intensity[a] > intensity[b];
        return a < b;
    });
    Rows unique_modes;
    for (std::size_t i : order) {
        bool merged = false;
        for (const auto& um : unique_modes) {
            if (std::sqrt(sq_dist(modes[i], um)) < bandwidth / 2.0) {
                merged = true;
                break;
            }
        }
        if (!merged) unique_modes.push_back(modes[i]);
    }

    std::vector<int> assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < unique_modes.size(); ++c) {
            const double d = sq_dist(rows[i], unique_modes[c]);
            if (d < best) {
                best = d;
                assign[i] = static_cast<int>(c);
            }
        }
    }
    return Partition::from_labels(assign);
}

// ---------------------------------------------------------------------------
// Affinity propagation on s = -gamma
// ---------------------------------------------------------------------------

ClusterResult affinity_propagation(const DivergenceMatrix& gamma, double damping,
                                   std::uint64_t seed, int max_iterations,
                                   int convergence_patience) {
    const std::size_t n = gamma.size();
    ClusterResult out;
    if (n < 2) {
        out.partition = Partition::single_cluster(n);
        return out;
    }
    if (damping < 0.5 || damping >= 1.0) {
        throw std::invalid_argument("affinity_propagation: damping must be in [0.5, 1)");
    }

    std::vector<double> s(n * n, 0.0);
    std::vector<double> off_diag;
    off_diag.reserve(n * (n - 1));
    double smin = std::numeric_limits<double>::infinity();
    double smax = -smin;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double sim = -gamma.at(i, j);
            s[i * n + j] = sim;
            off_diag.push_back(sim);
            smin = std::min(smin, sim);
            smax = std::max(smax, sim);
        }
    }
    std::sort(off_diag.begin(), off_diag.end());
    const std::size_t half = off_diag.size() / 2;
    const double preference = off_diag.size() % 2 == 1
                                  ? off_diag[half]
                                  : 0.5 * (off_diag[half - 1] + off_diag[half]);
    for (std::size_t i = 0; i < n; ++i) s[i * n + i] = preference;

    // Tiny seeded jitter breaks the exact symmetries of degenerate inputs
    // (e.g. groups of identical rows) without influencing real structure.
    Rng rng(seed);
    const double range = std::max(smax - smin, 1e-6);
    for (std::size_t i = 0; i < n * n; ++i) s[i] += 1e-9 * range * rng.normal();

    std::vector<double> r(n * n, 0.0);
    std::vector<double> a(n * n, 0.0);
    std::vector<char> indicator(n, 0);
    std::vector<char> prev_indicator(n, 2);
    int stable = 0;
    bool converged = false;

    for (int iter = 0; iter < max_iterations; ++iter) {
        // Responsibilities.
        for (std::size_t i = 0; i < n; ++i) {
            double top = -std::numeric_limits<double>::infinity();
            double second = top;
            std::size_t top_k = 0;
            for (std::size_t k = 0; k < n; ++k) {
                const double v = a[i * n + k] + s[i * n + k];
                if (v > top) {
                    second = top;
                    top = v;
                    top_k = k;
                } else if (v > second) {
                    second = v;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                const double cap = k == top_k ? second : top;
                const double rv = s[i * n + k] - cap;
                r[i * n + k] = damping * r[i * n + k] + (1.0 - damping) * rv;
            }
        }
        // Availabilities.
        for (std::size_t k = 0; k < n; ++k) {
            double pos_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i != k) pos_sum += std::max(0.0, r[i * n + k]);
            }
            for (std::size_t i = 0; i < n; ++i) {
                double av;
                if (i == k) {
                    av = pos_sum;
                } else {
                    av = std::min(0.0, r[k * n + k] + pos_sum - std::max(0.0, r[i * n + k]));
                }
                a[i * n + k] = damping * a[i * n + k] + (1.0 - damping) * av;
            }
        }

        // Convergence tracks the exemplar decisions diag(a + r) > 0: they must
        // stay unchanged for a full patience window and name at least one
        // exemplar.  Raw argmax labellings pass through long stable transients
        // with no exemplar at all, so they are not a usable signal.
        int exemplar_count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            indicator[i] = a[i * n + i] + r[i * n + i] > 0.0 ? 1 : 0;
            exemplar_count += indicator[i];
        }
        if (indicator == prev_indicator) {
            if (++stable >= convergence_patience && exemplar_count > 0) {
                converged = true;
                break;
            }
        } else {
            stable = 0;
            prev_indicator = indicator;
        }
    }

    // Exemplars are the points that elected themselves; everyone else joins
    // the most similar exemplar.
    std::vector<std::size_t> exemplars;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i * n + i] + r[i * n + i] > 0.0) exemplars.push_back(i);
    }
    std::vector<int> assign(n, 0);
    if (exemplars.empty()) {
        out.partition = Partition::single_cluster(n);
        out.converged = false;
        log_warn("affinity_propagation: no exemplars identified; returning one cluster");
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < exemplars.size(); ++e) {
            const std::size_t k = exemplars[e];
            const double v = i == k ? std::numeric_limits<double>::infinity() : s[i * n + k];
            if (v > best) {
                best = v;
                assign[i] = static_cast<int>(e);
            }
        }
    }
    out.partition = Partition::from_labels(assign);
    out.converged = converged;
    if (!converged) {
        log_warn("affinity_propagation: did not converge within " +
                 std::to_string(max_iterations) + " iterations");
    }
    return out;
}

// ---------------------------------------------------------------------------
// HDBSCAN on the precomputed distance matrix
// ---------------------------------------------------------------------------

namespace {

constexpr double kLambdaEps = 1e-12;  // distance floor so lambda = 1/d stays finite

struct DendroNode {
    int left = -1;    // node id (leaves are 0..n-1)
    int right = -1;
    double distance = 0.0;
    int size = 1;
};

struct CondensedNode {
    int parent = -1;
    double lambda_birth = 0.0;
    double stability = 0.0;
    std::vector<int> children;                        // condensed node ids
    std::vector<std::pair<int, double>> point_exits;  // (point, lambda at exit)
};

void collect_leaves(const std::vector<DendroNode>& nodes, int node, int n_leaves,
                    std::vector<int>& out) {
    if (node < n_leaves) {
        out.push_back(node);
        return;
    }
    collect_leaves(nodes, nodes[static_cast<std::size_t>(node)].left, n_leaves, out);
    collect_leaves(nodes, nodes[static_cast<std::size_t>(node)].right, n_leaves, out);
}

}  // namespace

ClusterResult hdbscan(const DivergenceMatrix& gamma, int min_cluster_size) {
    const std::size_t n = gamma.size();
    if (min_cluster_size < 2) {
        throw InvalidMinClusterSizeError("hdbscan: min_cluster_size must be >= 2, got " +
                                         std::to_string(min_cluster_size));
    }
    ClusterResult out;
    if (n < 2 || static_cast<std::size_t>(min_cluster_size) > n) {
        out.partition = Partition::single_cluster(n);
        return out;
    }
    const auto mcs = static_cast<std::size_t>(min_cluster_size);

    // Core distances with min_samples = min_cluster_size.  As in the usual
    // k-nearest-neighbour convention a point is its own 0-th neighbour, so the
    // min_samples-th neighbour is the (mcs - 1)-th other point; a group of
    // exactly mcs members therefore keeps its internal core distances.
    std::vector<double> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.push_back(gamma.at(i, j));
        }
        std::sort(d.begin(), d.end());
        core[i] = d[std::min(mcs - 2, d.size() - 1)];
    }

    auto mreach = [&](std::size_t i, std::size_t j) {
        return std::max({core[i], core[j], gamma.at(i, j)});
    };

    // Prim's MST over the mutual-reachability graph.
    std::vector<bool> in_tree(n, false);
    std::vector<double> best_w(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> best_from(n, 0);
    struct Edge {
        std::size_t a, b;
        double w;
    };
    std::vector<Edge> edges;
    in_tree[0] = true;
    for (std::size_t j = 1; j < n; ++j) {
        best_w[j] = mreach(0, j);
        best_from[j] = 0;
    }
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t pick = n;
        double pick_w = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (!in_tree[j] && best_w[j] < pick_w) {
                pick_w = best_w[j];
                pick = j;
            }
        }
        in_tree[pick] = true;
        edges.push_back({best_from[pick], pick, pick_w});
        for (std::size_t j = 0; j < n; ++j) {
            if (!in_tree[j]) {
                const double w = mreach(pick, j);
                if (w < best_w[j]) {
                    best_w[j] = w;
                    best_from[j] = pick;
                }
            }
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        if (x.w != y.w) return x.w < y.w;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });

    // Single-linkage dendrogram via union-find over the sorted MST edges.
    std::vector<DendroNode> nodes(n);  // leaves first; merges appended
    std::vector<int> owner(n);         // component -> dendro node id
    std::vector<int> uf(n);
    std::iota(uf.begin(), uf.end(), 0);
    std::iota(owner.begin(), owner.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (uf[static_cast<std::size_t>(x)] != x) {
            uf[static_cast<std::size_t>(x)] =
                uf[static_cast<std::size_t>(uf[static_cast<std::size_t>(x)])];
            x = uf[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (const auto& e : edges) {
        const int ra = find(static_cast<int>(e.a));
        const int rb = find(static_cast<int>(e.b));
        DendroNode merge;
        merge.left = owner[static_cast<std::size_t>(ra)];
        merge.right = owner[static_cast<std::size_t>(rb)];
        merge.distance = e.w;
        merge.size = nodes[static_cast<std::size_t>(merge.left)].size +
                     nodes[static_cast<std::size_t>(merge.right)].size;
        nodes.push_back(merge);
        uf[static_cast<std::size_t>(rb)] = ra;
        owner[static_cast<std::size_t>(ra)] = static_cast<int>(nodes.size()) - 1;
    }
    const int root = static_cast<int>(nodes.size()) - 1;

    // Condense the hierarchy: descend from the root, splitting only when both
    // sides reach min_cluster_size; smaller sides fall out as noise at the
    // split's lambda.
    std::vector<CondensedNode> cnodes;
    cnodes.push_back(CondensedNode{});  // root condensed cluster, lambda_birth 0

    struct Frame {
        int dendro;
        int condensed;
    };
    std::vector<Frame> stack{{root, 0}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        int cur = f.dendro;
        CondensedNode& cnode = cnodes[static_cast<std::size_t>(f.condensed)];

        for (;;) {
            if (cur < static_cast<int>(n)) {
                // Single point left inside this condensed cluster; it exits
                // never (record at +infinity-equivalent: its own core lambda).
                // By construction this only happens when the cluster has
                // shrunk below mcs, which is handled below, so treat as exit
                // at the lambda of its core distance for completeness.
                const double lam = 1.0 / std::max(core[static_cast<std::size_t>(cur)],
                                                  kLambdaEps);
                cnode.point_exits.emplace_back(cur, lam);
                cnode.stability += lam - cnode.lambda_birth;
                break;
            }
            const DendroNode& dn = nodes[static_cast<std::size_t>(cur)];
            const double lam = 1.0 / std::max(dn.distance, kLambdaEps);
            const int ls = nodes[static_cast<std::size_t>(dn.left)].size;
            const int rs = nodes[static_cast<std::size_t>(dn.right)].size;
            const bool left_big = ls >= static_cast<int>(mcs);
            const bool right_big = rs >= static_cast<int>(mcs);

            if (left_big && right_big) {
                // True split: the cluster dies here; both children are born.
                cnode.stability +=
                    static_cast<double>(ls + rs) * (lam - cnode.lambda_birth);
                for (const int child_dendro : {dn.left, dn.right}) {
                    CondensedNode child;
                    child.parent = f.condensed;
                    child.lambda_birth = lam;
                    cnodes.push_back(child);
                    const int child_id = static_cast<int>(cnodes.size()) - 1;
                    cnodes[static_cast<std::size_t>(f.condensed)].children.push_back(child_id);
                    stack.push_back({child_dendro, child_id});
                }
                break;
            }
            if (!left_big && !right_big) {
                // Cluster dissolves: every remaining point exits at this lambda.
                std::vector<int> pts;
                collect_leaves(nodes, cur, static_cast<int>(n), pts);
                CondensedNode& cn = cnodes[static_cast<std::size_t>(f.condensed)];
                for (int p : pts) {
                    cn.point_exits.emplace_back(p, lam);
                    cn.stability += lam - cn.lambda_birth;
                }
                break;
            }
            // One side is too small: its points exit; descend the other side.
            const int small = left_big ? dn.right : dn.left;
            const int big = left_big ? dn.left : dn.right;
            std::vector<int> pts;
            collect_leaves(nodes, small, static_cast<int>(n), pts);
            CondensedNode& cn = cnodes[static_cast<std::size_t>(f.condensed)];
            for (int p : pts) {
                cn.point_exits.emplace_back(p, lam);
                cn.stability += lam - cn.lambda_birth;
            }
            cur = big;
        }
    }

    // Excess-of-mass selection, root excluded (a single all-points cluster is
    // only the fallback when no structure exists).
    const std::size_t cn_count = cnodes.size();
    std::vector<double> score(cn_count, 0.0);
    std::vector<bool> selected(cn_count, false);
    for (std::size_t c = cn_count; c-- > 0;) {
        const CondensedNode& node = cnodes[c];
        if (node.children.empty()) {
            score[c] = node.stability;
            selected[c] = c != 0;
        } else {
            double child_sum = 0.0;
            for (int ch : node.children) child_sum += score[static_cast<std::size_t>(ch)];
            if (c != 0 && node.stability >= child_sum) {
                score[c] = node.stability;
                selected[c] = true;
                // Deselect the whole subtree below.
                std::vector<int> sub = node.children;
                while (!sub.empty()) {
                    const int x = sub.back();
                    sub.pop_back();
                    selected[static_cast<std::size_t>(x)] = false;
                    for (int ch : cnodes[static_cast<std::size_t>(x)].children) {
                        sub.push_back(ch);
                    }
                }
            } else {
                score[c] = child_sum;
            }
        }
    }

    // Gather members: a selected cluster owns every point that exited it or
    // any of its descendants.
    std::vector<std::vector<int>> clusters;
    for (std::size_t c = 0; c < cn_count; ++c) {
        if (!selected[c]) continue;
        std::vector<int> members;
        std::vector<int> sub{static_cast<int>(c)};
        while (!sub.empty()) {
            const int x = sub.back();
            sub.pop_back();
            for (const auto& [p, lam] : cnodes[static_cast<std::size_t>(x)].point_exits) {
                (void)lam;
                members.push_back(p);
            }
            for (int ch : cnodes[static_cast<std::size_t>(x)].children) sub.push_back(ch);
        }
        std::sort(members.begin(), members.end());
        clusters.push_back(std::move(members));
    }

    if (clusters.empty()) {
        out.partition = Partition::single_cluster(n);
        return out;
    }
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });

    std::vector<int> assign(n, -1);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (int p : clusters[c]) assign[static_cast<std::size_t>(p)] = static_cast<int>(c);
    }

    // Attach noise points to the cluster with the smallest mean raw distance.
    for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != -1) continue;
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            double mean = 0.0;
            for (int p : clusters[c]) mean += gamma.at(i, static_cast<std::size_t>(p));
            mean /= static_cast<double>(clusters[c].size());
            if (mean < best) {
                best = mean;
                best_c = static_cast<int>(c);
            }
        }
        assign[i] = best_c;
        out.attached.push_back(static_cast<int>(i));
    }

    out.partition = Partition::from_labels(assign);
    return out;
}

// ---------------------------------------------------------------------------
// Agglomerative clustering (average linkage, threshold cut)
// ---------------------------------------------------------------------------

namespace {

struct AggloState {
    std::vector<std::vector<int>> members;   // active clusters' member lists
    std::vector<int> rep;                    // smallest member index per cluster
    std::vector<std::vector<double>> dist;   // symmetric cluster-distance matrix
    std::vector<bool> active;

    explicit AggloState(const DivergenceMatrix& gamma) {
        const std::size_t n = gamma.size();
        members.resize(n);
        rep.resize(n);
        active.assign(n, true);
        dist.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            members[i] = {static_cast<int>(i)};
            rep[i] = static_cast<int>(i);
            for (std::size_t j = 0; j < n; ++j) dist[i][j] = gamma.at(i, j);
        }
    }

    std::size_t active_count() const {
        std::size_t c = 0;
        for (bool a : active) c += a ? 1 : 0;
        return c;
    }

    // Cheapest merge pair; prefer_low_pair picks the lexicographically
    // smallest (rep_a, rep_b) among ties, otherwise the largest.
    bool cheapest(bool prefer_low_pair, std::size_t& out_a, std::size_t& out_b,
                  double& out_d) const {
        bool found = false;
        double best = 0.0;
        std::pair<int, int> best_pair{0, 0};
        for (std::size_t a = 0; a < members.size(); ++a) {
            if (!active[a]) continue;
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                if (!active[b]) continue;
                std::pair<int, int> pr{std::min(rep[a], rep[b]), std::max(rep[a], rep[b])};
                bool take = false;
                if (!found || dist[a][b] < best) {
                    take = true;
                } else if (dist[a][b] == best) {
                    take = prefer_low_pair ? pr < best_pair : pr > best_pair;
                }
                if (take) {
                    found = true;
                    best = dist[a][b];
                    best_pair = pr;
                    out_a = a;
                    out_b = b;
                }
            }
        }
        out_d = best;
        return found;
    }

    // Merge b into a, updating distances by the supplied linkage rule.
    template <typename Linkage>
    void merge(std::size_t a, std::size_t b, Linkage linkage) {
        for (std::size_t c = 0; c < members.size(); ++c) {
            if (!active[c] || c == a || c == b) continue;
            const double d = linkage(a, b, c);
            dist[a][c] = d;
            dist[c][a] = d;
        }
        members[a].insert(members[a].end(), members[b].begin(), members[b].end());
        rep[a] = std::min(rep[a], rep[b]);
        active[b] = false;
    }

    Partition to_partition() const {
        std::vector<int> assign(members.size(), 0);
        int next = 0;
        for (std::size_t c = 0; c < members.size(); ++c) {
            if (!active[c]) continue;
            for (int p : members[c]) assign[static_cast<std::size_t>(p)] = next;
            ++next;
        }
        return Partition::from_labels(assign);
    }
};

}  // namespace

Partition agglomerative_average_linkage(const DivergenceMatrix& gamma,
                                        double distance_threshold) {
    if (distance_threshold <= 0.0) {
        throw std::invalid_argument("agglomerative_average_linkage: threshold must be > 0");
    }
    AggloState st(gamma);
    while (st.active_count() > 1) {
        std::size_t a = 0;
        std::size_t b = 0;
        double d = 0.0;
        if (!st.cheapest(/*prefer_low_pair=*/true, a, b, d)) break;
        if (d > distance_threshold) break;
        const double wa = static_cast<double>(st.members[a].size());
        const double wb = static_cast<double>(st.members[b].size());
        st.merge(a, b, [&](std::size_t x, std::size_t y, std::size_t c) {
            return (wa * st.dist[x][c] + wb * st.dist[y][c]) / (wa + wb);
        });
    }
    return st.to_partition();
}

// ---------------------------------------------------------------------------
// Complete-linkage bipartition on delta cosine distances
// ---------------------------------------------------------------------------

ClusterResult sattler_bipartition(const std::vector<ParameterVector>& deltas) {
    const std::size_t n = deltas.size();
    if (n < 2) {
        throw DimensionMismatchError("sattler_bipartition: need at least 2 clients");
    }
    const DivergenceMatrix gamma = divergence_matrix(deltas);

    double max_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) max_d = std::max(max_d, gamma.at(i, j));
    }

    AggloState st(gamma);
    while (st.active_count() > 2) {
        std::size_t a = 0;
        std::size_t b = 0;
        double d = 0.0;
        st.cheapest(/*prefer_low_pair=*/false, a, b, d);
        st.merge(a, b, [&](std::size_t x, std::size_t y, std::size_t c) {
            return std::max(st.dist[x][c], st.dist[y][c]);
        });
    }

    ClusterResult out;
    out.partition = st.to_partition();
    out.degenerate = max_d < 1e-15;  // all deltas point the same way
    return out;
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

ClusterResult run_backend(const DivergenceMatrix& gamma, const ClusteringConfig& cfg,
                          std::uint64_t seed) {
    ClusterResult out;
    switch (cfg.algorithm) {
        case ClusterAlgorithm::KMeans:
            out.partition = kmeans_on_rows(gamma, cfg.k_hint, seed, cfg.max_iterations);
            return out;
        case ClusterAlgorithm::MeanShift:
            out.partition =
                mean_shift_on_rows(gamma, cfg.bandwidth_quantile, cfg.max_iterations);
            return out;
        case ClusterAlgorithm::AffinityPropagation:
            return affinity_propagation(gamma, cfg.damping, seed, cfg.max_iterations,
                                        cfg.convergence_patience);
        case ClusterAlgorithm::Hdbscan: {
            const int mcs = std::max(
                2, static_cast<int>(std::ceil(cfg.min_cluster_fraction *
                                              static_cast<double>(gamma.size()))));
            return hdbscan(gamma, mcs);
        }
        case ClusterAlgorithm::AgglomerativeAverage:
            out.partition = agglomerative_average_linkage(gamma, cfg.distance_threshold);
            return out;
        default:
            throw std::invalid_argument(
                "run_backend: SattlerBipartition consumes raw deltas, not a divergence matrix");
    }
}

}  // namespace ocfl
