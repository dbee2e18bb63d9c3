#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocfl/datagen.hpp"
#include "ocfl/federation.hpp"
#include "ocfl/xai.hpp"

namespace ocfl {

// Everything one experiment needs: dataset plan, federation settings, seeds,
// and optional explanation settings. Parsed from a single JSON file; unknown
// keys are rejected by name so typos cannot silently fall back to defaults.
struct ExperimentConfig {
    std::vector<std::uint64_t> seeds = {1};
    std::string output_dir = "out";
    SplitPlan plan;
    FederationConfig federation;
    bool has_inde = false;
    IndeConfig inde;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical serialisation: fixed key order, every field explicit. Identical
// configs always produce identical bytes, so the hash is stable.
std::string config_to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// Enum <-> string helpers shared by config parsing and the CLI.
const char* activation_name(Activation a);
const char* optimizer_kind_name(OptimizerKind k);
const char* cluster_algorithm_name(ClusterAlgorithm a);
const char* lambda_mode_name(LambdaMode m);

}  // namespace ocfl
