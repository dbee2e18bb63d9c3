#include "ocfl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "ocfl/errors.hpp"
#include "ocfl/io.hpp"
#include "ocfl/rng.hpp"

namespace ocfl {

bool regime_is_overlap(Regime r) {
    return r == Regime::OverlapBalanced || r == Regime::OverlapImbalanced;
}

bool regime_is_balanced(Regime r) {
    return r == Regime::NonOverlapBalanced || r == Regime::OverlapBalanced;
}

std::vector<std::size_t> allocate_clients(std::size_t n_clients,
                                          const std::vector<double>& fractions) {
    const std::size_t k = fractions.size();
    if (k == 0) throw DegenerateAllocationError("allocate_clients: no clusters");
    if (n_clients < 2 * k) {
        throw DegenerateAllocationError("allocate_clients: " + std::to_string(n_clients) +
                                        " clients cannot give every one of " +
                                        std::to_string(k) + " clusters at least 2");
    }

    // Largest-remainder rounding of fraction * n_clients.
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> remainders(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double quota = fractions[c] * static_cast<double>(n_clients);
        counts[c] = static_cast<std::size_t>(std::floor(quota));
        remainders[c] = {quota - std::floor(quota), c};
        assigned += counts[c];
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;  // deterministic tie-break by cluster index
    });
    for (std::size_t i = 0; assigned < n_clients; ++i, ++assigned) {
        counts[remainders[i % k].second] += 1;
    }

    // Enforce the >=2 floor by stealing from the largest cluster.
    for (;;) {
        auto small = std::min_element(counts.begin(), counts.end());
        if (*small >= 2) break;
        auto big = std::max_element(counts.begin(), counts.end());
        if (*big <= 2) {
            throw DegenerateAllocationError("allocate_clients: cannot satisfy the 2-client floor");
        }
        *big -= 1;
        *small += 1;
    }
    return counts;
}

std::vector<DgpSpec> build_dgps(const SplitPlan& plan, std::uint64_t seed) {
    const std::size_t k = plan.cluster_fractions.size();
    if (k == 0) throw DegenerateAllocationError("build_dgps: no clusters");

    std::vector<int> shared;
    if (regime_is_overlap(plan.regime)) {
        shared = plan.overlap_classes.empty() ? std::vector<int>{0} : plan.overlap_classes;
        for (int c : shared) {
            if (c < 0 || static_cast<std::size_t>(c) >= plan.n_classes) {
                throw InsufficientClassesError("build_dgps: overlap class " + std::to_string(c) +
                                               " outside the global class range");
            }
        }
    }

    // Classes not shared are dealt to clusters in contiguous blocks, sized as
    // evenly as possible.
    std::vector<int> remaining;
    for (std::size_t y = 0; y < plan.n_classes; ++y) {
        const int yi = static_cast<int>(y);
        if (std::find(shared.begin(), shared.end(), yi) == shared.end()) {
            remaining.push_back(yi);
        }
    }
    if (remaining.size() < k) {
        throw InsufficientClassesError(
            "build_dgps: need at least one exclusive class per cluster; have " +
            std::to_string(remaining.size()) + " spare classes for " + std::to_string(k) +
            " clusters");
    }

    Rng rng(seed);

    // One global per-class mean table shared by every DGP, rescaled so the
    // closest pair of class means sits mean_separation sigmas apart.
    std::vector<std::vector<double>> mean_table(plan.n_classes,
                                                std::vector<double>(plan.feature_dim));
    for (auto& mu : mean_table) {
        for (auto& v : mu) v = rng.normal();
    }
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mean_table.size(); ++a) {
        for (std::size_t b = a + 1; b < mean_table.size(); ++b) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < plan.feature_dim; ++i) {
                const double diff = mean_table[a][i] - mean_table[b][i];
                d2 += diff * diff;
            }
            min_dist = std::min(min_dist, std::sqrt(d2));
        }
    }
    if (plan.n_classes > 1 && min_dist > 0.0) {
        const double scale = plan.mean_separation * plan.feature_sigma / min_dist;
        for (auto& mu : mean_table) {
            for (auto& v : mu) v *= scale;
        }
    }

    const std::size_t base = remaining.size() / k;
    const std::size_t extra = remaining.size() % k;
    std::vector<DgpSpec> dgps;
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < k; ++c) {
        DgpSpec dgp;
        dgp.dgp_id = static_cast<int>(c);
        dgp.feature_sigma = plan.feature_sigma;
        dgp.label_subspace = shared;
        const std::size_t take = base + (c < extra ? 1 : 0);
        for (std::size_t i = 0; i < take; ++i) dgp.label_subspace.push_back(remaining[cursor++]);
        std::sort(dgp.label_subspace.begin(), dgp.label_subspace.end());

        for (int y : dgp.label_subspace) {
            dgp.feature_means.push_back(mean_table[static_cast<std::size_t>(y)]);
        }

        if (regime_is_balanced(plan.regime)) {
            dgp.class_prior.assign(dgp.label_subspace.size(),
                                   1.0 / static_cast<double>(dgp.label_subspace.size()));
        } else {
            dgp.class_prior = rng.dirichlet(
                std::vector<double>(dgp.label_subspace.size(), plan.alpha));
        }
        dgps.push_back(std::move(dgp));
    }
    return dgps;
}

FederatedDataset sample_federated_dataset(const std::vector<DgpSpec>& dgps,
                                          const SplitPlan& plan, std::uint64_t seed) {
    const std::size_t k = dgps.size();
    const std::vector<std::size_t> counts = allocate_clients(plan.n_clients,
                                                             plan.cluster_fractions);
    if (counts.size() != k) {
        throw DegenerateAllocationError("sample_federated_dataset: cluster count mismatch");
    }

    FederatedDataset fd;
    fd.dgps = dgps;
    fd.n_classes = plan.n_classes;
    fd.feature_dim = plan.feature_dim;
    fd.clients.resize(plan.n_clients);
    fd.ground_truth.assignment.resize(plan.n_clients);

    std::vector<int> cluster_of(plan.n_clients);
    {
        std::size_t client = 0;
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t i = 0; i < counts[c]; ++i, ++client) {
                cluster_of[client] = static_cast<int>(c);
            }
        }
    }
    fd.ground_truth.assignment = cluster_of;
    fd.ground_truth.canonicalize();

    Rng rng(seed);

    // Draw every client's pool; a share_rate coin flip copies a freshly drawn
    // sample into one other uniformly chosen client (same or different
    // cluster), modelling lightly shared data points.
    std::vector<LocalDataset> pools(plan.n_clients);
    for (auto& p : pools) p.feature_dim = plan.feature_dim;
    std::vector<double> x(plan.feature_dim);
    for (std::size_t i = 0; i < plan.n_clients; ++i) {
        const DgpSpec& dgp = dgps[static_cast<std::size_t>(cluster_of[i])];
        for (std::size_t s = 0; s < plan.samples_per_client; ++s) {
            const std::size_t yi = rng.categorical(dgp.class_prior);
            const int y = dgp.label_subspace[yi];
            for (std::size_t f = 0; f < plan.feature_dim; ++f) {
                x[f] = dgp.feature_means[yi][f] + plan.feature_sigma * rng.normal();
            }
            pools[i].push_row(x, y);
            if (plan.share_rate > 0.0 && rng.uniform() < plan.share_rate) {
                std::size_t other = rng.uniform_int(plan.n_clients - 1);
                if (other >= i) ++other;
                pools[other].push_row(x, y);
            }
        }
    }

    // Seeded shuffle then an 80/20 (train_fraction) split per client.
    for (std::size_t i = 0; i < plan.n_clients; ++i) {
        LocalDataset& pool = pools[i];
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const std::size_t n = pool.size();
        std::size_t n_train = static_cast<std::size_t>(
            std::floor(plan.train_fraction * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n > 1 ? n - 1 : 1);
        ClientData& cd = fd.clients[i];
        cd.train.feature_dim = plan.feature_dim;
        cd.test.feature_dim = plan.feature_dim;
        for (std::size_t j = 0; j < n; ++j) {
            LocalDataset& dst = j < n_train ? cd.train : cd.test;
            dst.push_row(pool.row(order[j]), pool.labels[order[j]]);
        }
    }

    // Orchestrator evaluation set: per-class counts within +-1 of uniform,
    // drawn from the same class-conditional Gaussians.
    fd.orchestrator_test.feature_dim = plan.feature_dim;
    const std::size_t base = plan.orchestrator_samples / plan.n_classes;
    const std::size_t extra = plan.orchestrator_samples % plan.n_classes;
    std::vector<std::vector<double>> mean_of_class(plan.n_classes);
    for (const auto& dgp : dgps) {
        for (std::size_t j = 0; j < dgp.label_subspace.size(); ++j) {
            mean_of_class[static_cast<std::size_t>(dgp.label_subspace[j])] = dgp.feature_means[j];
        }
    }
    for (std::size_t y = 0; y < plan.n_classes; ++y) {
        if (mean_of_class[y].empty()) {
            // A global class no DGP uses: anchor it at the origin so the
            // orchestrator set still covers the full label range.
            mean_of_class[y].assign(plan.feature_dim, 0.0);
        }
        const std::size_t cnt = base + (y < extra ? 1 : 0);
        for (std::size_t s = 0; s < cnt; ++s) {
            for (std::size_t f = 0; f < plan.feature_dim; ++f) {
                x[f] = mean_of_class[y][f] + plan.feature_sigma * rng.normal();
            }
            fd.orchestrator_test.push_row(x, static_cast<int>(y));
        }
    }
    {
        std::vector<std::size_t> order(fd.orchestrator_test.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        LocalDataset shuffled;
        shuffled.feature_dim = plan.feature_dim;
        for (std::size_t j : order) {
            shuffled.push_row(fd.orchestrator_test.row(j), fd.orchestrator_test.labels[j]);
        }
        fd.orchestrator_test = std::move(shuffled);
    }

    return fd;
}

FederatedDataset generate_dataset(const SplitPlan& plan, std::uint64_t master_seed) {
    const std::uint64_t stream = derive_seed(master_seed, "datagen");
    const std::vector<DgpSpec> dgps = build_dgps(plan, derive_seed(stream, "dgps"));
    return sample_federated_dataset(dgps, plan, derive_seed(stream, "samples"));
}

namespace {

std::string dataset_to_csv(const LocalDataset& d) {
    CsvTable t;
    for (std::size_t f = 0; f < d.feature_dim; ++f) t.header.push_back("f" + std::to_string(f));
    t.header.push_back("label");
    for (std::size_t r = 0; r < d.size(); ++r) {
        std::vector<std::string> row;
        row.reserve(d.feature_dim + 1);
        const double* x = d.row(r);
        for (std::size_t f = 0; f < d.feature_dim; ++f) row.push_back(fmt_double_exact(x[f]));
        row.push_back(std::to_string(d.labels[r]));
        t.rows.push_back(std::move(row));
    }
    return t.serialize();
}

}  // namespace

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::NonOverlapBalanced: return "non_overlap_balanced";
        case Regime::NonOverlapImbalanced: return "non_overlap_imbalanced";
        case Regime::OverlapBalanced: return "overlap_balanced";
        default: return "overlap_imbalanced";
    }
}

std::string export_federated_dataset(const FederatedDataset& fd, const SplitPlan& plan,
                                     std::uint64_t master_seed, const std::string& dir) {
    ensure_dir(dir);
    nlohmann::ordered_json manifest;
    manifest["seed"] = master_seed;
    manifest["plan"] = {
        {"regime", regime_name(plan.regime)},
        {"n_clients", plan.n_clients},
        {"cluster_fractions", plan.cluster_fractions},
        {"alpha", plan.alpha},
        {"overlap_classes", plan.overlap_classes},
        {"samples_per_client", plan.samples_per_client},
        {"share_rate", plan.share_rate},
        {"n_classes", plan.n_classes},
        {"feature_dim", plan.feature_dim},
        {"feature_sigma", plan.feature_sigma},
        {"mean_separation", plan.mean_separation},
        {"orchestrator_samples", plan.orchestrator_samples},
        {"train_fraction", plan.train_fraction},
    };
    manifest["ground_truth"] = fd.ground_truth.assignment;

    nlohmann::ordered_json clients = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < fd.clients.size(); ++i) {
        const std::string train_file = "client_" + std::to_string(i) + "_train.csv";
        const std::string test_file = "client_" + std::to_string(i) + "_test.csv";
        const std::string train_csv = dataset_to_csv(fd.clients[i].train);
        const std::string test_csv = dataset_to_csv(fd.clients[i].test);
        write_file(dir + "/" + train_file, train_csv);
        write_file(dir + "/" + test_file, test_csv);
        clients.push_back({
            {"id", i},
            {"cluster", fd.ground_truth.assignment[i]},
            {"train_file", train_file},
            {"train_rows", fd.clients[i].train.size()},
            {"train_hash", fnv1a64_hex(train_csv)},
            {"test_file", test_file},
            {"test_rows", fd.clients[i].test.size()},
            {"test_hash", fnv1a64_hex(test_csv)},
        });
    }
    manifest["clients"] = clients;

    const std::string orch_csv = dataset_to_csv(fd.orchestrator_test);
    write_file(dir + "/orchestrator_test.csv", orch_csv);
    manifest["orchestrator"] = {
        {"file", "orchestrator_test.csv"},
        {"rows", fd.orchestrator_test.size()},
        {"hash", fnv1a64_hex(orch_csv)},
    };

    const std::string manifest_path = dir + "/manifest.json";
    write_file(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

void verify_exported_dataset(const std::string& dir) {
    const auto manifest = nlohmann::json::parse(read_file(dir + "/manifest.json"));
    auto check = [&dir](const std::string& file, const std::string& expected) {
        const std::string actual = fnv1a64_hex(read_file(dir + "/" + file));
        if (actual != expected) {
            throw IoError("hash mismatch for " + file + ": manifest says " + expected +
                          ", file hashes to " + actual);
        }
    };
    for (const auto& client : manifest.at("clients")) {
        check(client.at("train_file").get<std::string>(),
              client.at("train_hash").get<std::string>());
        check(client.at("test_file").get<std::string>(),
              client.at("test_hash").get<std::string>());
    }
    check(manifest.at("orchestrator").at("file").get<std::string>(),
          manifest.at("orchestrator").at("hash").get<std::string>());
}

}  // namespace ocfl
