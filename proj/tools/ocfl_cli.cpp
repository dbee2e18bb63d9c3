#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ocfl/cli_ops.hpp"
#include "ocfl/io.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        const std::size_t comma = csv.find(',', pos);
        const std::string tok =
            csv.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ocfl: a desk-scale one-shot clustered federated learning laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string run_dir;
    std::string seeds_csv;
    std::string report_out = "summary.csv";
    int parallel = 1;
    std::vector<std::string> report_dirs;

    CLI::App* gen = app.add_subcommand("generate", "Export the synthetic federated dataset");
    gen->add_option("--config", config_path, "Experiment config file")->required();
    gen->add_option("--out", out_dir, "Output directory (default: config output_dir)");

    CLI::App* run = app.add_subcommand("run", "Run the configured experiment");
    run->add_option("--config", config_path, "Experiment config file")->required();
    run->add_option("--out", out_dir, "Run directory override");
    run->add_option("--seeds", seeds_csv, "Comma-separated seed override");
    run->add_option("--parallel-seeds", parallel, "Worker threads fanned across seeds")
        ->check(CLI::PositiveNumber);

    CLI::App* xai = app.add_subcommand("xai", "Insertion/deletion evaluation of a run");
    xai->add_option("run_dir", run_dir, "Completed run directory")->required();

    CLI::App* rep = app.add_subcommand("report", "Summarise one or more runs into a CSV");
    rep->add_option("--out", report_out, "Summary CSV path (default: summary.csv)");
    rep->add_option("run_dirs", report_dirs, "Completed run directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            ocfl::cmd_generate(config_path, out_dir);
            return 0;
        }
        if (run->parsed()) {
            return ocfl::cmd_run(config_path, parse_seed_list(seeds_csv), parallel, out_dir);
        }
        if (xai->parsed()) {
            return ocfl::cmd_xai(run_dir);
        }
        if (rep->parsed()) {
            return ocfl::cmd_report(report_dirs, report_out);
        }
    } catch (const std::exception& e) {
        ocfl::log_error(e.what());
        return 1;
    }
    return 0;
}
