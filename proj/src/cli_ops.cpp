#include "ocfl/cli_ops.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "ocfl/errors.hpp"
#include "ocfl/federation.hpp"
#include "ocfl/io.hpp"
#include "ocfl/metrics.hpp"
#include "ocfl/rng.hpp"
#include "ocfl/xai.hpp"

namespace ocfl {

namespace {

using nlohmann::ordered_json;

ordered_json partition_json(const Partition& p) {
    return ordered_json{{"k", p.k}, {"assignment", p.assignment}};
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

Activation activation_from_name_local(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    throw ConfigParseError("unknown activation '" + s + "' in checkpoint");
}

double column_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double column_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = column_mean(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

SeedSummary run_single_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                            const std::string& run_dir) {
    SeedSummary summary;
    summary.seed = seed;

    const std::string seed_dir = run_dir + "/" + seed_dir_name(seed);
    ensure_dir(seed_dir);

    const FederatedDataset fd = generate_dataset(cfg.plan, seed);
    const FederationResult res = run_federation(fd, cfg.federation, seed);

    // rounds.csv: one row per round with the agreement and F1 digests.
    CsvTable rounds;
    rounds.header = {"t",   "temperature", "fired",    "k",        "ari",
                     "ami", "com",         "mean_pf1", "mean_gf1", "lg"};
    CsvTable temps;
    temps.header = {"t", "temperature"};
    std::vector<double> ari_series;
    std::vector<double> ami_series;
    std::vector<double> com_series;
    for (const RoundRecord& rec : res.records) {
        const double ari = adjusted_rand_index(fd.ground_truth, rec.partition);
        const double ami = adjusted_mutual_information(fd.ground_truth, rec.partition);
        const double com = completeness(fd.ground_truth, rec.partition);
        ari_series.push_back(ari);
        ami_series.push_back(ami);
        com_series.push_back(com);
        rounds.rows.push_back({
            std::to_string(rec.t),
            rec.has_temperature ? fmt_double_exact(rec.temperature) : std::string(),
            rec.fired_this_round ? "true" : "false",
            std::to_string(rec.partition.k),
            fmt_double_exact(ari),
            fmt_double_exact(ami),
            fmt_double_exact(com),
            fmt_double_exact(rec.mean_pf1),
            fmt_double_exact(rec.mean_gf1),
            fmt_double_exact(rec.learning_gap),
        });
        if (rec.has_temperature) {
            temps.rows.push_back({std::to_string(rec.t), fmt_double_exact(rec.temperature)});
        }
    }
    write_file(seed_dir + "/rounds.csv", rounds.serialize());
    write_file(seed_dir + "/temperature.csv", temps.serialize());

    // partition.json: per-round snapshots plus the final grouping.
    ordered_json pj;
    pj["seed"] = seed;
    pj["fired_round"] = res.fired_round;
    pj["ground_truth"] = partition_json(fd.ground_truth);
    pj["final"] = partition_json(res.final_partition);
    pj["rounds"] = ordered_json::array();
    for (const RoundRecord& rec : res.records) {
        ordered_json row;
        row["t"] = rec.t;
        row["fired"] = rec.fired_this_round;
        row["k"] = rec.partition.k;
        row["assignment"] = rec.partition.assignment;
        pj["rounds"].push_back(std::move(row));
    }
    write_file(seed_dir + "/partition.json", pj.dump(2) + "\n");

    // checkpoint.json: final per-cluster models for later explanation runs.
    ordered_json ck;
    ck["seed"] = seed;
    ck["layer_dims"] = res.final_models.front().layer_dims;
    ck["activation"] = res.final_models.front().activation == Activation::ReLU ? "relu" : "tanh";
    ck["partition"] = partition_json(res.final_partition);
    ck["clusters"] = ordered_json::array();
    for (std::size_t c = 0; c < res.final_models.size(); ++c) {
        ordered_json entry;
        entry["cluster"] = c;
        entry["params"] = flatten(res.final_models[c]);
        ck["clusters"].push_back(std::move(entry));
    }
    write_file(seed_dir + "/checkpoint.json", ck.dump(2) + "\n");

    const RoundRecord& last = res.records.back();
    summary.ok = true;
    summary.fired_round = res.fired_round;
    summary.final_k = res.final_partition.k;
    summary.final_ari = ari_series.back();
    summary.final_ami = ami_series.back();
    summary.final_com = com_series.back();
    summary.time_avg_ari = column_mean(ari_series);
    summary.time_avg_ami = column_mean(ami_series);
    summary.time_avg_com = column_mean(com_series);
    summary.final_mean_pf1 = last.mean_pf1;
    summary.final_mean_gf1 = last.mean_gf1;
    summary.final_lg = last.learning_gap;
    return summary;
}

std::string cmd_generate(const std::string& config_path, const std::string& out_dir) {
    const ExperimentConfig cfg = load_config(config_path);
    const std::string target = out_dir.empty() ? cfg.output_dir : out_dir;
    ensure_dir(target);
    for (std::uint64_t seed : cfg.seeds) {
        const FederatedDataset fd = generate_dataset(cfg.plan, seed);
        const std::string dir = target + "/" + seed_dir_name(seed);
        export_federated_dataset(fd, cfg.plan, seed, dir);
        std::vector<std::size_t> sizes(static_cast<std::size_t>(fd.ground_truth.k), 0);
        for (int c : fd.ground_truth.assignment) sizes[static_cast<std::size_t>(c)] += 1;
        std::string line = "seed " + std::to_string(seed) + ": cluster sizes =";
        for (std::size_t s : sizes) line += " " + std::to_string(s);
        log_info(line);
        std::printf("%s\n", line.c_str());
    }
    return target;
}

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds_override,
            int parallel_seeds, const std::string& out_override) {
    ExperimentConfig cfg = load_config(config_path);
    if (!seeds_override.empty()) cfg.seeds = seeds_override;
    if (!out_override.empty()) cfg.output_dir = out_override;

    const std::string run_dir = cfg.output_dir;
    ensure_dir(run_dir);
    write_file(run_dir + "/config.json", config_to_json(cfg));

    const auto start = std::chrono::steady_clock::now();
    std::vector<SeedSummary> summaries(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) return;
            const std::uint64_t seed = cfg.seeds[i];
            try {
                summaries[i] = run_single_seed(cfg, seed, run_dir);
                log_info("seed " + std::to_string(seed) + ": done (fired_round=" +
                         std::to_string(summaries[i].fired_round) + ", final_ari=" +
                         fmt_double(summaries[i].final_ari) + ")");
            } catch (const std::exception& e) {
                summaries[i].seed = seed;
                summaries[i].ok = false;
                summaries[i].error = e.what();
                log_error("seed " + std::to_string(seed) + ": " + e.what());
            }
        }
    };
    const int workers = std::max(1, std::min<int>(parallel_seeds,
                                                  static_cast<int>(cfg.seeds.size())));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    ordered_json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["strategy"] = strategy_name(cfg.federation.strategy);
    manifest["algorithm"] = cluster_algorithm_name(cfg.federation.clustering.algorithm);
    manifest["rounds"] = cfg.federation.rounds;
    manifest["wall_clock_seconds"] = wall;
    manifest["seeds"] = ordered_json::array();
    bool all_ok = true;
    for (const SeedSummary& s : summaries) {
        ordered_json entry;
        entry["seed"] = s.seed;
        entry["status"] = s.ok ? "ok" : "error";
        if (!s.ok) {
            entry["error"] = s.error;
            all_ok = false;
            manifest["seeds"].push_back(std::move(entry));
            continue;
        }
        entry["fired_round"] = s.fired_round;
        entry["final_k"] = s.final_k;
        entry["final_ari"] = s.final_ari;
        entry["final_ami"] = s.final_ami;
        entry["final_com"] = s.final_com;
        entry["time_avg_ari"] = s.time_avg_ari;
        entry["time_avg_ami"] = s.time_avg_ami;
        entry["time_avg_com"] = s.time_avg_com;
        entry["final_mean_pf1"] = s.final_mean_pf1;
        entry["final_mean_gf1"] = s.final_mean_gf1;
        entry["final_lg"] = s.final_lg;
        ordered_json files;
        const std::string sd = run_dir + "/" + seed_dir_name(s.seed);
        for (const char* name :
             {"rounds.csv", "temperature.csv", "partition.json", "checkpoint.json"}) {
            files[name] = fnv1a64_hex(read_file(sd + "/" + name));
        }
        entry["files"] = std::move(files);
        manifest["seeds"].push_back(std::move(entry));
    }
    write_file(run_dir + "/manifest.json", manifest.dump(2) + "\n");
    std::printf("%s\n", run_dir.c_str());
    return all_ok ? 0 : 1;
}

int cmd_xai(const std::string& run_dir) {
    if (!file_exists(run_dir + "/config.json")) {
        throw MissingRunError("cmd_xai: no config.json under " + run_dir);
    }
    const ExperimentConfig cfg = parse_config_text(read_file(run_dir + "/config.json"));
    const IndeConfig base = cfg.has_inde ? cfg.inde : IndeConfig{};

    bool any = false;
    for (std::uint64_t seed : cfg.seeds) {
        const std::string seed_dir = run_dir + "/" + seed_dir_name(seed);
        const std::string ck_path = seed_dir + "/checkpoint.json";
        if (!file_exists(ck_path)) {
            throw MissingCheckpointError("cmd_xai: missing " + ck_path);
        }
        any = true;

        ordered_json ck;
        try {
            ck = ordered_json::parse(read_file(ck_path));
        } catch (const nlohmann::json::exception& e) {
            throw MissingCheckpointError("cmd_xai: unreadable checkpoint " + ck_path + ": " +
                                         e.what());
        }
        Partition part;
        part.k = ck.at("partition").at("k").get<int>();
        part.assignment = ck.at("partition").at("assignment").get<std::vector<int>>();
        const auto layer_dims = ck.at("layer_dims").get<std::vector<std::size_t>>();
        const Activation act =
            activation_from_name_local(ck.at("activation").get<std::string>());
        std::vector<MlpModel> models;
        for (const auto& entry : ck.at("clusters")) {
            MlpModel m = MlpModel::init(layer_dims, act, 0);
            unflatten(m, entry.at("params").get<ParameterVector>());
            models.push_back(std::move(m));
        }

        const FederatedDataset fd = generate_dataset(cfg.plan, seed);
        const std::uint64_t xai_seed = derive_seed(seed, "xai");

        ordered_json out;
        out["seed"] = seed;
        out["sample_size"] = base.sample_size;
        out["step"] = base.step;
        out["baseline_value"] = base.baseline_value;
        out["modes"] = ordered_json::object();
        for (const IndeMode mode : {IndeMode::InDistribution, IndeMode::OutOfDistribution,
                                    IndeMode::Orchestrator}) {
            IndeConfig mode_cfg = base;
            mode_cfg.mode = mode;
            ordered_json block;
            try {
                const IndeResult r = run_inde(models, part, fd, mode_cfg, xai_seed);
                block["clusters"] = ordered_json::array();
                for (const IndeClusterResult& cr : r.clusters) {
                    block["clusters"].push_back({{"cluster", cr.cluster},
                                                 {"insertion_auc", cr.insertion_auc},
                                                 {"deletion_auc", cr.deletion_auc},
                                                 {"samples", cr.sample_count}});
                }
                block["mean_insertion_auc"] = r.mean_insertion_auc;
                block["mean_deletion_auc"] = r.mean_deletion_auc;
            } catch (const EmptyEvaluationSetError& e) {
                block["error"] = e.what();
                log_warn(std::string("cmd_xai: ") + e.what());
            }
            out["modes"][inde_mode_name(mode)] = std::move(block);
        }
        write_file(seed_dir + "/inde.json", out.dump(2) + "\n");
        log_info("seed " + std::to_string(seed) + ": inde.json written");
    }
    if (!any) throw MissingCheckpointError("cmd_xai: no seed checkpoints under " + run_dir);
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_path) {
    if (run_dirs.empty()) {
        throw std::invalid_argument("cmd_report: at least one run directory is required");
    }
    CsvTable out;
    out.header = {"run",       "seed",         "strategy",     "algorithm",
                  "fired_round", "time_avg_ari", "time_avg_ami", "time_avg_com",
                  "final_ari", "final_ami",    "final_com",    "final_k",
                  "final_mean_pf1", "final_mean_gf1", "final_lg"};

    for (const std::string& run_dir : run_dirs) {
        if (!file_exists(run_dir + "/config.json")) {
            throw MissingRunError("cmd_report: no config.json under " + run_dir);
        }
        const ExperimentConfig cfg = parse_config_text(read_file(run_dir + "/config.json"));
        const std::string strategy = strategy_name(cfg.federation.strategy);
        const std::string algorithm =
            cluster_algorithm_name(cfg.federation.clustering.algorithm);

        std::vector<std::pair<std::uint64_t, std::string>> seed_dirs;
        for (std::uint64_t seed : cfg.seeds) {
            const std::string sd = run_dir + "/" + seed_dir_name(seed);
            if (file_exists(sd + "/rounds.csv")) seed_dirs.emplace_back(seed, sd);
        }
        if (seed_dirs.empty()) {
            throw MissingRunError("cmd_report: no completed seeds under " + run_dir);
        }

        // Everything below is recomputed from rounds.csv alone.
        std::vector<std::vector<double>> agg(10);
        for (const auto& [seed, sd] : seed_dirs) {
            const CsvTable rounds = parse_csv(read_file(sd + "/rounds.csv"));
            auto col = [&](const std::string& name) {
                for (std::size_t i = 0; i < rounds.header.size(); ++i) {
                    if (rounds.header[i] == name) return i;
                }
                throw MissingRunError("cmd_report: column '" + name + "' missing in " + sd);
            };
            const std::size_t c_fired = col("fired");
            const std::size_t c_k = col("k");
            const std::size_t c_ari = col("ari");
            const std::size_t c_ami = col("ami");
            const std::size_t c_com = col("com");
            const std::size_t c_pf1 = col("mean_pf1");
            const std::size_t c_gf1 = col("mean_gf1");
            const std::size_t c_lg = col("lg");

            double fired_round = -1.0;
            std::vector<double> ari, ami, com;
            for (std::size_t r = 0; r < rounds.rows.size(); ++r) {
                const auto& row = rounds.rows[r];
                if (fired_round < 0 && row[c_fired] == "true") {
                    fired_round = static_cast<double>(r);
                }
                ari.push_back(std::stod(row[c_ari]));
                ami.push_back(std::stod(row[c_ami]));
                com.push_back(std::stod(row[c_com]));
            }
            const auto& last = rounds.rows.back();
            const double vals[10] = {fired_round,
                                     column_mean(ari),
                                     column_mean(ami),
                                     column_mean(com),
                                     std::stod(last[c_ari]),
                                     std::stod(last[c_ami]),
                                     std::stod(last[c_com]),
                                     std::stod(last[c_pf1]),
                                     std::stod(last[c_gf1]),
                                     std::stod(last[c_lg])};
            for (std::size_t i = 0; i < 10; ++i) agg[i].push_back(vals[i]);
            out.rows.push_back({run_dir, std::to_string(seed), strategy, algorithm,
                                std::to_string(static_cast<int>(fired_round)),
                                fmt_double_exact(vals[1]), fmt_double_exact(vals[2]),
                                fmt_double_exact(vals[3]), fmt_double_exact(vals[4]),
                                fmt_double_exact(vals[5]), fmt_double_exact(vals[6]),
                                last[c_k], fmt_double_exact(vals[7]),
                                fmt_double_exact(vals[8]), fmt_double_exact(vals[9])});
        }

        // Aggregate rows: mean and population std across seeds of this run.
        for (const char* stat : {"mean", "std"}) {
            const bool is_mean = std::string(stat) == "mean";
            auto f = [&](std::size_t i) {
                return fmt_double_exact(is_mean ? column_mean(agg[i]) : column_std(agg[i]));
            };
            out.rows.push_back({run_dir, stat, strategy, algorithm, f(0), f(1), f(2), f(3),
                                f(4), f(5), f(6), "", f(7), f(8), f(9)});
        }
    }

    write_file(out_path, out.serialize());
    std::printf("%s\n", out_path.c_str());
    return 0;
}

}  // namespace ocfl
