#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "fdialab/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

fdialab::ExperimentConfig resolve_config(const std::string& config_path, std::uint64_t seed,
                                         bool seed_set) {
    fdialab::ExperimentConfig config;
    if (!config_path.empty()) config = fdialab::load_config(config_path);
    if (seed_set) config.seed = seed;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fdialab: grid measurement synthesis, FDIA injection, and "
                 "graph-filter detector training/evaluation"};
    app.require_subcommand(1);

    std::string config_path, case_path, out_dir, dataset_dir, model_dir, run_dir, report_file;
    std::uint64_t seed = 0;
    bool force = false, spectrum = false, print_config = false, grid_search = false;

    auto add_common = [&](CLI::App* cmd, bool with_config) {
        cmd->add_flag("--force", force, "overwrite an existing output directory");
        if (with_config) {
            cmd->add_option("--config", config_path, "experiment config json");
            cmd->add_option("--seed", seed, "override the config seed");
            cmd->add_flag("--print-config", print_config,
                          "print the resolved config and exit without running");
        }
    };

    CLI::App* cmd_case = app.add_subcommand("case", "parse and validate a grid case");
    cmd_case->add_option("path", case_path, "MATPOWER-style case file")->required();
    cmd_case->add_option("--out", out_dir, "output directory")->required();
    cmd_case->add_flag("--spectrum", spectrum, "also emit the eigenvalue csv");
    add_common(cmd_case, false);

    CLI::App* cmd_dataset = app.add_subcommand("dataset", "generate a labeled dataset");
    cmd_dataset->add_option("--out", out_dir, "output directory")->required();
    add_common(cmd_dataset, true);

    std::string resume_dir;
    CLI::App* cmd_train = app.add_subcommand("train", "train a detector on a dataset");
    cmd_train->add_option("--dataset", dataset_dir, "dataset directory")->required();
    cmd_train->add_option("--out", out_dir, "output directory")->required();
    cmd_train->add_option("--resume", resume_dir, "continue a previous training run directory");
    add_common(cmd_train, true);

    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a trained detector");
    cmd_eval->add_option("--model", model_dir, "training output directory")->required();
    cmd_eval->add_option("--dataset", dataset_dir, "dataset directory")->required();
    cmd_eval->add_option("--case", case_path, "case file (default: model's resolved config)");
    cmd_eval->add_option("--out", out_dir, "output directory")->required();
    cmd_eval->add_flag("--grid-search", grid_search,
                       "retrain across the declared hyperparameter grid and emit a leaderboard");
    add_common(cmd_eval, false);

    CLI::App* cmd_fr = app.add_subcommand(
        "freq-response", "fit graph filters to an ideal response and emit response curves");
    cmd_fr->add_option("--out", out_dir, "output directory")->required();
    add_common(cmd_fr, true);

    CLI::App* cmd_sweep =
        app.add_subcommand("order-sweep", "train CHEB detectors across filter orders");
    cmd_sweep->add_option("--dataset", dataset_dir, "dataset directory")->required();
    cmd_sweep->add_option("--out", out_dir, "output directory")->required();
    add_common(cmd_sweep, true);

    CLI::App* cmd_report = app.add_subcommand("report", "summarize a run directory");
    cmd_report->add_option("--run", run_dir, "run directory")->required();
    cmd_report->add_option("--out", report_file, "report file (default: <run>/report.md)");

    CLI11_PARSE(app, argc, argv);

    try {
        const bool seed_set = seed != 0;
        if (cmd_case->parsed()) {
            fdialab::cmd_case(case_path, out_dir, spectrum, force);
        } else if (cmd_dataset->parsed()) {
            const auto config = resolve_config(config_path, seed, seed_set);
            if (print_config) {
                std::printf("%s\n", fdialab::config_to_json(config).c_str());
                return kExitOk;
            }
            fdialab::cmd_dataset(config, out_dir, force);
        } else if (cmd_train->parsed()) {
            const auto config = resolve_config(config_path, seed, seed_set);
            if (print_config) {
                std::printf("%s\n", fdialab::config_to_json(config).c_str());
                return kExitOk;
            }
            fdialab::cmd_train(config, dataset_dir, out_dir, force, resume_dir);
        } else if (cmd_eval->parsed()) {
            fdialab::cmd_eval(model_dir, dataset_dir, case_path, out_dir, grid_search, force);
        } else if (cmd_fr->parsed()) {
            const auto config = resolve_config(config_path, seed, seed_set);
            if (print_config) {
                std::printf("%s\n", fdialab::config_to_json(config).c_str());
                return kExitOk;
            }
            fdialab::cmd_freq_response(config, out_dir, force);
        } else if (cmd_sweep->parsed()) {
            const auto config = resolve_config(config_path, seed, seed_set);
            if (print_config) {
                std::printf("%s\n", fdialab::config_to_json(config).c_str());
                return kExitOk;
            }
            fdialab::cmd_order_sweep(config, dataset_dir, out_dir, force);
        } else if (cmd_report->parsed()) {
            if (report_file.empty()) report_file = run_dir + "/report.md";
            fdialab::cmd_report(run_dir, report_file);
        }
    } catch (const fdialab::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const fdialab::ParseError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const fdialab::ModelError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const fdialab::TopologyError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const fdialab::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitOk;
}
