#include "ocfl/config.hpp"

#include <initializer_list>
#include <string>

#include "json.hpp"

#include "ocfl/errors.hpp"
#include "ocfl/io.hpp"

namespace ocfl {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigParseError(msg); }

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail("section '" + section + "' must be an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                ok = true;
                break;
            }
        }
        if (!ok) fail("unknown key '" + item.key() + "' in section '" + section + "'");
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out, const std::string& section) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        fail("bad value for '" + section + "." + key + "': " + e.what());
    }
}

Regime regime_from_string(const std::string& s) {
    if (s == "non_overlap_balanced") return Regime::NonOverlapBalanced;
    if (s == "non_overlap_imbalanced") return Regime::NonOverlapImbalanced;
    if (s == "overlap_balanced") return Regime::OverlapBalanced;
    if (s == "overlap_imbalanced") return Regime::OverlapImbalanced;
    fail("unknown regime '" + s + "'");
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    fail("unknown activation '" + s + "'");
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::SGD;
    if (s == "adam") return OptimizerKind::Adam;
    fail("unknown optimizer kind '" + s + "'");
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "bnc") return Strategy::Bnc;
    if (s == "ocfl") return Strategy::Ocfl;
    if (s == "scl") return Strategy::Scl;
    if (s == "bcl") return Strategy::Bcl;
    fail("unknown strategy '" + s + "'");
}

ClusterAlgorithm algorithm_from_string(const std::string& s) {
    if (s == "kmeans") return ClusterAlgorithm::KMeans;
    if (s == "mean_shift") return ClusterAlgorithm::MeanShift;
    if (s == "affinity_propagation") return ClusterAlgorithm::AffinityPropagation;
    if (s == "hdbscan") return ClusterAlgorithm::Hdbscan;
    if (s == "agglomerative_average") return ClusterAlgorithm::AgglomerativeAverage;
    fail("unknown clustering algorithm '" + s + "'");
}

LambdaMode lambda_mode_from_string(const std::string& s) {
    if (s == "maximal_divergence") return LambdaMode::MaximalDivergence;
    if (s == "normalising") return LambdaMode::Normalising;
    fail("unknown lambda mode '" + s + "'");
}

IndeMode inde_mode_from_string(const std::string& s) {
    if (s == "in_distribution") return IndeMode::InDistribution;
    if (s == "out_of_distribution") return IndeMode::OutOfDistribution;
    if (s == "orchestrator") return IndeMode::Orchestrator;
    fail("unknown inde mode '" + s + "'");
}

void parse_dataset(const json& obj, SplitPlan& plan) {
    check_keys(obj, "dataset",
               {"regime", "n_clients", "cluster_fractions", "alpha", "overlap_classes",
                "samples_per_client", "share_rate", "n_classes", "feature_dim",
                "feature_sigma", "mean_separation", "orchestrator_samples",
                "train_fraction"});
    if (obj.contains("regime")) {
        plan.regime = regime_from_string(obj.at("regime").get<std::string>());
    }
    read_field(obj, "n_clients", plan.n_clients, "dataset");
    read_field(obj, "cluster_fractions", plan.cluster_fractions, "dataset");
    read_field(obj, "alpha", plan.alpha, "dataset");
    read_field(obj, "overlap_classes", plan.overlap_classes, "dataset");
    read_field(obj, "samples_per_client", plan.samples_per_client, "dataset");
    read_field(obj, "share_rate", plan.share_rate, "dataset");
    read_field(obj, "n_classes", plan.n_classes, "dataset");
    read_field(obj, "feature_dim", plan.feature_dim, "dataset");
    read_field(obj, "feature_sigma", plan.feature_sigma, "dataset");
    read_field(obj, "mean_separation", plan.mean_separation, "dataset");
    read_field(obj, "orchestrator_samples", plan.orchestrator_samples, "dataset");
    read_field(obj, "train_fraction", plan.train_fraction, "dataset");
}

void parse_model(const json& obj, FederationConfig& fed) {
    check_keys(obj, "model", {"hidden_dims", "activation"});
    read_field(obj, "hidden_dims", fed.hidden_dims, "model");
    if (obj.contains("activation")) {
        fed.activation = activation_from_string(obj.at("activation").get<std::string>());
    }
}

void parse_optimizer(const json& obj, OptimizerConfig& opt) {
    check_keys(obj, "optimizer",
               {"kind", "learning_rate", "weight_decay", "beta1", "beta2", "eps",
                "batch_size", "local_epochs"});
    if (obj.contains("kind")) {
        opt.kind = optimizer_kind_from_string(obj.at("kind").get<std::string>());
    }
    read_field(obj, "learning_rate", opt.learning_rate, "optimizer");
    read_field(obj, "weight_decay", opt.weight_decay, "optimizer");
    read_field(obj, "beta1", opt.beta1, "optimizer");
    read_field(obj, "beta2", opt.beta2, "optimizer");
    read_field(obj, "eps", opt.eps, "optimizer");
    read_field(obj, "batch_size", opt.batch_size, "optimizer");
    read_field(obj, "local_epochs", opt.local_epochs, "optimizer");
}

void parse_clustering(const json& obj, ClusteringConfig& cl) {
    check_keys(obj, "clustering",
               {"algorithm", "k_hint", "min_cluster_fraction", "bandwidth_quantile",
                "damping", "distance_threshold", "max_iterations", "convergence_patience"});
    if (obj.contains("algorithm")) {
        cl.algorithm = algorithm_from_string(obj.at("algorithm").get<std::string>());
    }
    read_field(obj, "k_hint", cl.k_hint, "clustering");
    read_field(obj, "min_cluster_fraction", cl.min_cluster_fraction, "clustering");
    read_field(obj, "bandwidth_quantile", cl.bandwidth_quantile, "clustering");
    read_field(obj, "damping", cl.damping, "clustering");
    read_field(obj, "distance_threshold", cl.distance_threshold, "clustering");
    read_field(obj, "max_iterations", cl.max_iterations, "clustering");
    read_field(obj, "convergence_patience", cl.convergence_patience, "clustering");
}

void parse_trigger(const json& obj, FederationConfig& fed) {
    check_keys(obj, "trigger", {"p", "lambda_mode", "window"});
    read_field(obj, "p", fed.temperature_p, "trigger");
    if (obj.contains("lambda_mode")) {
        fed.lambda_mode = lambda_mode_from_string(obj.at("lambda_mode").get<std::string>());
    }
    read_field(obj, "window", fed.trigger_window, "trigger");
}

void parse_scl(const json& obj, SclConfig& scl) {
    check_keys(obj, "scl", {"epsilon1", "epsilon2", "cooldown_round"});
    read_field(obj, "epsilon1", scl.epsilon1, "scl");
    read_field(obj, "epsilon2", scl.epsilon2, "scl");
    read_field(obj, "cooldown_round", scl.cooldown_round, "scl");
}

void parse_bcl(const json& obj, BclConfig& bcl) {
    check_keys(obj, "bcl", {"clustering_round", "distance_threshold"});
    read_field(obj, "clustering_round", bcl.clustering_round, "bcl");
    read_field(obj, "distance_threshold", bcl.distance_threshold, "bcl");
}

void parse_inde(const json& obj, IndeConfig& inde) {
    check_keys(obj, "inde", {"mode", "sample_size", "step", "baseline_value"});
    if (obj.contains("mode")) {
        inde.mode = inde_mode_from_string(obj.at("mode").get<std::string>());
    }
    read_field(obj, "sample_size", inde.sample_size, "inde");
    read_field(obj, "step", inde.step, "inde");
    read_field(obj, "baseline_value", inde.baseline_value, "inde");
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) fail("'seeds' must be non-empty");
    if (cfg.output_dir.empty()) fail("'output_dir' must be non-empty");
    if (cfg.federation.rounds < 1) fail("'rounds' must be >= 1");
    if (cfg.plan.n_clients < 1) fail("'dataset.n_clients' must be >= 1");
    if (cfg.plan.train_fraction <= 0.0 || cfg.plan.train_fraction >= 1.0) {
        fail("'dataset.train_fraction' must lie in (0, 1)");
    }
    if (cfg.federation.strategy == Strategy::Scl &&
        !(cfg.federation.scl.epsilon1 < cfg.federation.scl.epsilon2)) {
        fail("'scl.epsilon1' must be < 'scl.epsilon2'");
    }
    if (cfg.federation.strategy == Strategy::Scl && cfg.federation.scl.cooldown_round < 1) {
        fail("'scl.cooldown_round' must be >= 1");
    }
    if (cfg.federation.strategy == Strategy::Bcl &&
        (cfg.federation.bcl.clustering_round < 1 ||
         cfg.federation.bcl.clustering_round > cfg.federation.rounds)) {
        fail("'bcl.clustering_round' must be in [1, rounds]");
    }
    if (cfg.has_inde && cfg.inde.sample_size <= 0.0) {
        fail("'inde.sample_size' must be positive");
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    check_keys(root, "<root>",
               {"seeds", "output_dir", "rounds", "strategy", "dataset", "model",
                "optimizer", "server", "clustering", "trigger", "scl", "bcl", "inde"});

    ExperimentConfig cfg;
    read_field(root, "seeds", cfg.seeds, "<root>");
    read_field(root, "output_dir", cfg.output_dir, "<root>");
    read_field(root, "rounds", cfg.federation.rounds, "<root>");
    if (root.contains("strategy")) {
        cfg.federation.strategy =
            strategy_from_string(root.at("strategy").get<std::string>());
    }
    if (root.contains("dataset")) parse_dataset(root.at("dataset"), cfg.plan);
    if (root.contains("model")) parse_model(root.at("model"), cfg.federation);
    if (root.contains("optimizer")) parse_optimizer(root.at("optimizer"), cfg.federation.optimizer);
    if (root.contains("server")) {
        check_keys(root.at("server"), "server", {"learning_rate"});
        read_field(root.at("server"), "learning_rate", cfg.federation.server_lr, "server");
    }
    if (root.contains("clustering")) parse_clustering(root.at("clustering"), cfg.federation.clustering);
    if (root.contains("trigger")) parse_trigger(root.at("trigger"), cfg.federation);
    if (root.contains("scl")) parse_scl(root.at("scl"), cfg.federation.scl);
    if (root.contains("bcl")) parse_bcl(root.at("bcl"), cfg.federation.bcl);
    if (root.contains("inde")) {
        cfg.has_inde = true;
        parse_inde(root.at("inde"), cfg.inde);
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config_text(read_file(path));
}

std::string config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["seeds"] = cfg.seeds;
    j["output_dir"] = cfg.output_dir;
    j["rounds"] = cfg.federation.rounds;
    j["strategy"] = strategy_name(cfg.federation.strategy);
    j["dataset"] = {
        {"regime", regime_name(cfg.plan.regime)},
        {"n_clients", cfg.plan.n_clients},
        {"cluster_fractions", cfg.plan.cluster_fractions},
        {"alpha", cfg.plan.alpha},
        {"overlap_classes", cfg.plan.overlap_classes},
        {"samples_per_client", cfg.plan.samples_per_client},
        {"share_rate", cfg.plan.share_rate},
        {"n_classes", cfg.plan.n_classes},
        {"feature_dim", cfg.plan.feature_dim},
        {"feature_sigma", cfg.plan.feature_sigma},
        {"mean_separation", cfg.plan.mean_separation},
        {"orchestrator_samples", cfg.plan.orchestrator_samples},
        {"train_fraction", cfg.plan.train_fraction},
    };
    j["model"] = {
        {"hidden_dims", cfg.federation.hidden_dims},
        {"activation", activation_name(cfg.federation.activation)},
    };
    const OptimizerConfig& opt = cfg.federation.optimizer;
    j["optimizer"] = {
        {"kind", optimizer_kind_name(opt.kind)},
        {"learning_rate", opt.learning_rate},
        {"weight_decay", opt.weight_decay},
        {"beta1", opt.beta1},
        {"beta2", opt.beta2},
        {"eps", opt.eps},
        {"batch_size", opt.batch_size},
        {"local_epochs", opt.local_epochs},
    };
    j["server"] = {{"learning_rate", cfg.federation.server_lr}};
    const ClusteringConfig& cl = cfg.federation.clustering;
    j["clustering"] = {
        {"algorithm", cluster_algorithm_name(cl.algorithm)},
        {"k_hint", cl.k_hint},
        {"min_cluster_fraction", cl.min_cluster_fraction},
        {"bandwidth_quantile", cl.bandwidth_quantile},
        {"damping", cl.damping},
        {"distance_threshold", cl.distance_threshold},
        {"max_iterations", cl.max_iterations},
        {"convergence_patience", cl.convergence_patience},
    };
    j["trigger"] = {
        {"p", cfg.federation.temperature_p},
        {"lambda_mode", lambda_mode_name(cfg.federation.lambda_mode)},
        {"window", cfg.federation.trigger_window},
    };
    j["scl"] = {
        {"epsilon1", cfg.federation.scl.epsilon1},
        {"epsilon2", cfg.federation.scl.epsilon2},
        {"cooldown_round", cfg.federation.scl.cooldown_round},
    };
    j["bcl"] = {
        {"clustering_round", cfg.federation.bcl.clustering_round},
        {"distance_threshold", cfg.federation.bcl.distance_threshold},
    };
    if (cfg.has_inde) {
        j["inde"] = {
            {"mode", inde_mode_name(cfg.inde.mode)},
            {"sample_size", cfg.inde.sample_size},
            {"step", cfg.inde.step},
            {"baseline_value", cfg.inde.baseline_value},
        };
    }
    return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
    return fnv1a64_hex(config_to_json(cfg));
}

const char* activation_name(Activation a) {
    return a == Activation::ReLU ? "relu" : "tanh";
}

const char* optimizer_kind_name(OptimizerKind k) {
    return k == OptimizerKind::SGD ? "sgd" : "adam";
}

const char* cluster_algorithm_name(ClusterAlgorithm a) {
    switch (a) {
        case ClusterAlgorithm::KMeans: return "kmeans";
        case ClusterAlgorithm::MeanShift: return "mean_shift";
        case ClusterAlgorithm::AffinityPropagation: return "affinity_propagation";
        case ClusterAlgorithm::Hdbscan: return "hdbscan";
        case ClusterAlgorithm::AgglomerativeAverage: return "agglomerative_average";
        case ClusterAlgorithm::SattlerBipartition: return "sattler_bipartition";
    }
    return "unknown";
}

const char* lambda_mode_name(LambdaMode m) {
    return m == LambdaMode::MaximalDivergence ? "maximal_divergence" : "normalising";
}

}  // namespace ocfl
