#include "ocfl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ocfl/errors.hpp"
#include "ocfl/io.hpp"
#include "ocfl/metrics.hpp"
#include "ocfl/rng.hpp"

namespace ocfl {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Bnc: return "bnc";
        case Strategy::Ocfl: return "ocfl";
        case Strategy::Scl: return "scl";
        case Strategy::Bcl: return "bcl";
    }
    return "unknown";
}

namespace {

// Cluster bookkeeping: member lists (always sorted, clusters ordered by their
// smallest member) aligned with per-cluster models.
struct Cohorts {
    std::vector<std::vector<int>> members;
    std::vector<MlpModel> models;

    Partition snapshot(std::size_t n) const {
        std::vector<int> assign(n, 0);
        for (std::size_t c = 0; c < members.size(); ++c) {
            for (int id : members[c]) assign[static_cast<std::size_t>(id)] = static_cast<int>(c);
        }
        return Partition::from_labels(assign);
    }

    void normalise_order() {
        std::vector<std::size_t> order(members.size());
        for (std::size_t c = 0; c < members.size(); ++c) {
            std::sort(members[c].begin(), members[c].end());
            order[c] = c;
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return members[a].front() < members[b].front();
        });
        std::vector<std::vector<int>> m2;
        std::vector<MlpModel> mod2;
        m2.reserve(members.size());
        mod2.reserve(members.size());
        for (std::size_t c : order) {
            m2.push_back(std::move(members[c]));
            mod2.push_back(std::move(models[c]));
        }
        members = std::move(m2);
        models = std::move(mod2);
    }
};

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

void validate_config(const FederatedDataset& fd, const FederationConfig& cfg) {
    if (fd.clients.empty()) throw EmptyDatasetError("run_federation: no clients");
    if (cfg.rounds < 1) throw std::invalid_argument("run_federation: rounds must be >= 1");
    if (cfg.strategy == Strategy::Scl && cfg.scl.cooldown_round < 1) {
        throw std::invalid_argument("run_federation: scl cooldown must be >= 1");
    }
    if (cfg.strategy == Strategy::Bcl) {
        if (cfg.bcl.clustering_round < 1 || cfg.bcl.clustering_round > cfg.rounds) {
            throw std::invalid_argument(
                "run_federation: bcl clustering_round must be in [1, rounds]");
        }
    }
}

}  // namespace

FederationResult run_federation(const FederatedDataset& fd, const FederationConfig& cfg,
                                std::uint64_t seed, const DeltaHook& delta_hook) {
    validate_config(fd, cfg);
    const std::size_t n = fd.clients.size();
    const auto k_classes = static_cast<int>(fd.n_classes);

    std::vector<std::size_t> layer_dims;
    layer_dims.push_back(fd.feature_dim);
    for (std::size_t h : cfg.hidden_dims) layer_dims.push_back(h);
    layer_dims.push_back(fd.n_classes);

    Cohorts cohorts;
    cohorts.members.emplace_back();
    for (std::size_t i = 0; i < n; ++i) cohorts.members[0].push_back(static_cast<int>(i));
    cohorts.models.push_back(
        MlpModel::init(layer_dims, cfg.activation, derive_seed(seed, "model-init")));

    TemperatureState temp_state;
    temp_state.p = cfg.temperature_p;
    temp_state.lambda_mode = cfg.lambda_mode;
    temp_state.window = cfg.trigger_window;

    OptimizerConfig server_opt;
    server_opt.kind = OptimizerKind::SGD;
    server_opt.learning_rate = cfg.server_lr;

    const std::uint64_t clustering_seed = derive_seed(seed, "clustering");

    FederationResult result;
    bool fired = false;

    for (int t = 0; t < cfg.rounds; ++t) {
        // --- Local training: every client trains from its cluster's model.
        std::vector<ModelDelta> deltas(n);
        std::vector<int> cluster_of(n, 0);
        for (std::size_t c = 0; c < cohorts.members.size(); ++c) {
            for (int id : cohorts.members[c]) {
                cluster_of[static_cast<std::size_t>(id)] = static_cast<int>(c);
                const std::uint64_t client_seed = derive_seed(
                    seed, "client/" + std::to_string(id) + "/round/" + std::to_string(t));
                deltas[static_cast<std::size_t>(id)] =
                    client_local_train(cohorts.models[c], fd.clients[static_cast<std::size_t>(id)].train,
                                       cfg.optimizer, client_seed, id);
            }
        }
        if (delta_hook) delta_hook(t, deltas);

        bool fired_this_round = false;
        bool has_temperature = false;
        double temperature_value = 0.0;

        // --- OCFL trigger: monitor divergence while the flag is down.
        if (cfg.strategy == Strategy::Ocfl && !fired) {
            std::vector<ParameterVector> vecs;
            std::vector<int> ids;
            std::vector<int> excluded;
            for (std::size_t i = 0; i < n; ++i) {
                if (l2_norm(deltas[i].delta) > 0.0) {
                    vecs.push_back(deltas[i].delta);
                    ids.push_back(static_cast<int>(i));
                } else {
                    excluded.push_back(static_cast<int>(i));
                }
            }
            if (!excluded.empty()) {
                log_warn("round " + std::to_string(t) + ": " +
                         std::to_string(excluded.size()) +
                         " zero-norm delta(s) excluded from the divergence matrix");
            }
            if (vecs.size() >= 2) {
                const DivergenceMatrix gamma = divergence_matrix(vecs);
                const bool fire = update_and_test_trigger(temp_state, gamma);
                has_temperature = true;
                temperature_value = temp_state.t_curr;
                if (fire) {
                    const ClusterResult res = run_backend(gamma, cfg.clustering, clustering_seed);
                    if (!res.converged) {
                        log_warn("round " + std::to_string(t) +
                                 ": clustering did not converge; keeping prior partition");
                        temp_state.fired = false;  // resume monitoring
                    } else {
                        const auto groups = res.partition.groups();
                        Cohorts next;
                        for (const auto& g : groups) {
                            std::vector<int> client_ids;
                            for (int local : g) {
                                client_ids.push_back(ids[static_cast<std::size_t>(local)]);
                            }
                            next.members.push_back(std::move(client_ids));
                            next.models.push_back(cohorts.models[0]);
                        }
                        // Zero-delta clients join the cluster whose mean delta
                        // is nearest (Euclidean) to their own.
                        for (int id : excluded) {
                            double best = std::numeric_limits<double>::infinity();
                            std::size_t best_c = 0;
                            for (std::size_t c = 0; c < next.members.size(); ++c) {
                                ParameterVector mean(deltas[static_cast<std::size_t>(id)].delta.size(),
                                                     0.0);
                                std::size_t cnt = 0;
                                for (int m : next.members[c]) {
                                    const auto& d = deltas[static_cast<std::size_t>(m)].delta;
                                    if (l2_norm(d) == 0.0) continue;
                                    for (std::size_t f = 0; f < mean.size(); ++f) mean[f] += d[f];
                                    ++cnt;
                                }
                                double dist = 0.0;
                                for (std::size_t f = 0; f < mean.size(); ++f) {
                                    const double diff =
                                        deltas[static_cast<std::size_t>(id)].delta[f] -
                                        mean[f] / static_cast<double>(std::max<std::size_t>(cnt, 1));
                                    dist += diff * diff;
                                }
                                if (dist < best) {
                                    best = dist;
                                    best_c = c;
                                }
                            }
                            next.members[best_c].push_back(id);
                        }
                        next.normalise_order();
                        cohorts = std::move(next);
                        fired = true;
                        fired_this_round = true;
                        result.fired_round = t;
                        log_info("round " + std::to_string(t) + ": trigger fired, k=" +
                                 std::to_string(cohorts.members.size()));
                    }
                }
            } else {
                log_warn("round " + std::to_string(t) +
                         ": fewer than 2 usable deltas; temperature skipped");
            }
        }

        // --- SCL: per-cluster split rule once the cooldown round is reached.
        if (cfg.strategy == Strategy::Scl && t >= cfg.scl.cooldown_round) {
            Cohorts next;
            bool any_split = false;
            for (std::size_t c = 0; c < cohorts.members.size(); ++c) {
                const auto& mem = cohorts.members[c];
                std::vector<double> norms;
                std::vector<ParameterVector> vecs;
                for (int id : mem) {
                    norms.push_back(l2_norm(deltas[static_cast<std::size_t>(id)].delta));
                    vecs.push_back(deltas[static_cast<std::size_t>(id)].delta);
                }
                const double mean_norm = mean_of(norms);
                const double max_norm = *std::max_element(norms.begin(), norms.end());
                bool split = mem.size() >= 2 && mean_norm < cfg.scl.epsilon1 &&
                             max_norm > cfg.scl.epsilon2;
                if (split) {
                    bool any_zero = false;
                    for (double nn : norms) any_zero = any_zero || nn == 0.0;
                    if (any_zero) {
                        log_warn("round " + std::to_string(t) +
                                 ": scl split skipped on a cluster with zero-norm deltas");
                        split = false;
                    }
                }
                if (split) {
                    const ClusterResult bi = sattler_bipartition(vecs);
                    if (bi.degenerate) {
                        log_warn("round " + std::to_string(t) +
                                 ": scl bipartition is degenerate (aligned deltas)");
                    }
                    for (const auto& g : bi.partition.groups()) {
                        std::vector<int> client_ids;
                        for (int local : g) client_ids.push_back(mem[static_cast<std::size_t>(local)]);
                        next.members.push_back(std::move(client_ids));
                        next.models.push_back(cohorts.models[c]);
                    }
                    any_split = true;
                } else {
                    next.members.push_back(mem);
                    next.models.push_back(cohorts.models[c]);
                }
            }
            if (any_split) {
                next.normalise_order();
                cohorts = std::move(next);
                fired = true;
                fired_this_round = true;
                if (result.fired_round < 0) result.fired_round = t;
                log_info("round " + std::to_string(t) + ": scl split, k=" +
                         std::to_string(cohorts.members.size()));
            }
        }

        // End-of-round client weights, needed by BCL before aggregation
        // overwrites the cluster bases.
        std::vector<ParameterVector> end_weights;
        const bool bcl_round = cfg.strategy == Strategy::Bcl && !fired &&
                               t + 1 == cfg.bcl.clustering_round;
        if (bcl_round) {
            end_weights.resize(n);
            for (std::size_t c = 0; c < cohorts.members.size(); ++c) {
                const ParameterVector base = flatten(cohorts.models[c]);
                for (int id : cohorts.members[c]) {
                    ParameterVector w = base;
                    const auto& d = deltas[static_cast<std::size_t>(id)].delta;
                    for (std::size_t f = 0; f < w.size(); ++f) w[f] += d[f];
                    end_weights[static_cast<std::size_t>(id)] = std::move(w);
                }
            }
        }

        // --- Per-cluster FedOpt aggregation.
        for (std::size_t c = 0; c < cohorts.members.size(); ++c) {
            std::vector<ModelDelta> cluster_deltas;
            for (int id : cohorts.members[c]) {
                cluster_deltas.push_back(deltas[static_cast<std::size_t>(id)]);
            }
            const ParameterVector next_params =
                fedopt_aggregate(flatten(cohorts.models[c]), cluster_deltas, server_opt);
            unflatten(cohorts.models[c], next_params);
        }

        // --- BCL one-shot clustering of end-of-round weights (after the
        // aggregation so clustering_round == rounds affects nothing).
        if (bcl_round) {
            const DivergenceMatrix gamma = divergence_matrix(end_weights);
            const Partition p = agglomerative_average_linkage(gamma, cfg.bcl.distance_threshold);
            Cohorts next;
            for (const auto& g : p.groups()) {
                next.members.push_back(g);
                next.models.push_back(cohorts.models[0]);
            }
            next.normalise_order();
            cohorts = std::move(next);
            fired = true;
            fired_this_round = true;
            result.fired_round = t;
            log_info("round " + std::to_string(t) + ": bcl clustering, k=" +
                     std::to_string(cohorts.members.size()));
        }

        // --- Bookkeeping.
        RoundRecord rec;
        rec.t = t;
        rec.has_temperature = has_temperature;
        rec.temperature = temperature_value;
        rec.fired_this_round = fired_this_round;
        rec.partition = cohorts.snapshot(n);
        rec.client_pf1.resize(n, 0.0);
        rec.cluster_gf1.resize(cohorts.members.size(), 0.0);
        rec.cluster_train_loss.resize(cohorts.members.size(), 0.0);
        for (std::size_t c = 0; c < cohorts.members.size(); ++c) {
            double loss_acc = 0.0;
            for (int id : cohorts.members[c]) {
                const auto& client = fd.clients[static_cast<std::size_t>(id)];
                const std::vector<int> preds = predict(cohorts.models[c], client.test);
                rec.client_pf1[static_cast<std::size_t>(id)] =
                    macro_f1(preds, client.test.labels, k_classes);
                loss_acc += loss_and_gradient(cohorts.models[c], client.train).loss;
            }
            rec.cluster_train_loss[c] =
                loss_acc / static_cast<double>(cohorts.members[c].size());
            const std::vector<int> preds = predict(cohorts.models[c], fd.orchestrator_test);
            rec.cluster_gf1[c] = macro_f1(preds, fd.orchestrator_test.labels, k_classes);
        }
        rec.mean_pf1 = mean_of(rec.client_pf1);
        rec.mean_gf1 = mean_of(rec.cluster_gf1);
        rec.learning_gap = learning_gap(rec.mean_pf1, rec.mean_gf1);
        result.records.push_back(std::move(rec));
    }

    result.final_partition = cohorts.snapshot(n);
    result.final_models = std::move(cohorts.models);
    result.fired = fired;
    return result;
}

FederationResult run_ocfl(const FederatedDataset& fd, FederationConfig cfg,
                          std::uint64_t seed) {
    cfg.strategy = Strategy::Ocfl;
    return run_federation(fd, cfg, seed);
}

FederationResult run_bnc(const FederatedDataset& fd, FederationConfig cfg,
                         std::uint64_t seed) {
    cfg.strategy = Strategy::Bnc;
    return run_federation(fd, cfg, seed);
}

FederationResult run_scl(const FederatedDataset& fd, FederationConfig cfg,
                         std::uint64_t seed) {
    cfg.strategy = Strategy::Scl;
    return run_federation(fd, cfg, seed);
}

FederationResult run_bcl(const FederatedDataset& fd, FederationConfig cfg,
                         std::uint64_t seed) {
    cfg.strategy = Strategy::Bcl;
    return run_federation(fd, cfg, seed);
}

}  // namespace ocfl
