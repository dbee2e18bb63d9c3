#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ocfl/config.hpp"

namespace ocfl {

// Outcome of one seed of one run, as recorded in the run manifest.
struct SeedSummary {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    int fired_round = -1;
    int final_k = 1;
    double final_ari = 0.0;
    double final_ami = 0.0;
    double final_com = 0.0;
    double time_avg_ari = 0.0;
    double time_avg_ami = 0.0;
    double time_avg_com = 0.0;
    double final_mean_pf1 = 0.0;
    double final_mean_gf1 = 0.0;
    double final_lg = 0.0;
};

// Runs one seed end to end and persists rounds.csv, temperature.csv,
// partition.json and checkpoint.json under <run_dir>/seed_<seed>/.
SeedSummary run_single_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                            const std::string& run_dir);

// Exports the synthetic dataset for every seed in the config and prints the
// ground-truth cluster sizes. Returns the output directory.
std::string cmd_generate(const std::string& config_path, const std::string& out_dir);

// Full experiment: every seed, optionally across worker threads. Writes the
// canonical config echo and a manifest. Returns a process exit code (nonzero
// iff any seed aborted).
int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds_override,
            int parallel_seeds, const std::string& out_override);

// Insertion/deletion evaluation over all three modes for every completed seed
// of a run directory; writes seed_<s>/inde.json.
int cmd_xai(const std::string& run_dir);

// Cross-run summary table: one row per (run, seed) plus mean/std aggregate
// rows per run, written to out_path.
int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path);

}  // namespace ocfl
