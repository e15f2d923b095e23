#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "drcap/experiment.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::string out_dir;
    std::string policies;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
};

void add_common_flags(CLI::App* cmd, CliOverrides& ov) {
    cmd->add_option("--config", ov.config_path, "experiment config file (key = value lines)");
    cmd->add_option("--seed", ov.seed, "override the experiment seed")
        ->each([&ov](const std::string&) { ov.seed_set = true; });
    cmd->add_option("--out", ov.out_dir, "output directory");
    cmd->add_option("--policies", ov.policies, "comma list: opt,seq,pred,lin,lin-plus");
    cmd->add_option("--workers", ov.workers, "sweep-point worker threads");
}

drcap::ExperimentConfig load_config(const CliOverrides& ov) {
    drcap::ExperimentConfig cfg;
    if (!ov.config_path.empty()) cfg = drcap::parse_config(ov.config_path);
    if (ov.seed_set) cfg.seed = ov.seed;
    if (!ov.out_dir.empty()) cfg.out_dir = ov.out_dir;
    if (ov.workers > 0) cfg.workers = ov.workers;
    if (!ov.policies.empty()) {
        cfg.policies.clear();
        std::string item;
        std::stringstream ss(ov.policies);
        while (std::getline(ss, item, ','))
            if (!item.empty()) cfg.policies.push_back(item);
        if (cfg.policies.empty()) throw drcap::ConfigError("--policies: empty list");
    }
    std::filesystem::create_directories(cfg.out_dir);
    return cfg;
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

int cmd_gen(const CliOverrides& ov) {
    const drcap::ExperimentConfig cfg = load_config(ov);
    const drcap::PreparedData data = drcap::prepare_data(cfg);

    std::vector<drcap::Trace> traces = data.base_traces;
    traces.push_back(data.renewable);
    drcap::save_traces_csv(join_path(cfg.out_dir, "traces.csv"), traces);

    const drcap::PointSets ps = drcap::build_point_sets(
        cfg, data, cfg.capacity_price_usd_per_kw_mo.front(), cfg.wind_capacity_kw.front(),
        cfg.cost_rsd.front());
    drcap::save_scenario_set_csv(join_path(cfg.out_dir, "scenarios_train.csv"), ps.train);
    drcap::save_scenario_set_csv(join_path(cfg.out_dir, "scenarios_test.csv"), ps.test);
    std::cout << "wrote traces.csv, scenarios_train.csv, scenarios_test.csv to " << cfg.out_dir
              << "\n";
    return 0;
}

int cmd_run(const CliOverrides& ov) {
    const drcap::ExperimentConfig cfg = load_config(ov);
    if (cfg.capacity_price_usd_per_kw_mo.size() != 1 || cfg.wind_capacity_kw.size() != 1 ||
        cfg.cost_rsd.size() != 1)
        throw drcap::ConfigError("run takes scalar sweep values; use the sweep subcommand for grids");
    const auto rows = drcap::run_experiment(cfg);
    const std::string path = join_path(cfg.out_dir, "results.csv");
    drcap::emit_results(rows, path);
    std::cout << "wrote " << rows.size() << " rows to " << path << "\n";
    return 0;
}

int cmd_sweep(const CliOverrides& ov) {
    drcap::ExperimentConfig cfg = load_config(ov);
    // A sweep with no explicit price list uses the default log-spaced grid.
    if (!cfg.capacity_price_specified)
        cfg.capacity_price_usd_per_kw_mo = {0.01, 0.1, 1.0, 10.0, 50.0};
    const auto rows = drcap::run_experiment(cfg);
    const std::string path = join_path(cfg.out_dir, "results.csv");
    drcap::emit_results(rows, path);
    std::cout << "wrote " << rows.size() << " rows to " << path << "\n";
    return 0;
}

int cmd_compare(const std::vector<std::string>& inputs, const std::string& out_dir) {
    std::vector<drcap::MetricRow> all;
    for (const auto& path : inputs) {
        const auto rows = drcap::load_results_csv(path);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    std::filesystem::create_directories(out_dir);
    const std::string path = join_path(out_dir, "compare.csv");
    drcap::emit_results(all, path);
    std::cout << "wrote " << all.size() << " rows to " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-storage capacity planning and demand-response policy simulator"};
    app.require_subcommand(1);

    CliOverrides ov_gen, ov_run, ov_sweep;
    CLI::App* gen = app.add_subcommand("gen", "build and export scenario sets");
    add_common_flags(gen, ov_gen);
    CLI::App* run = app.add_subcommand("run", "single experiment point");
    add_common_flags(run, ov_run);
    CLI::App* sweep = app.add_subcommand("sweep", "parameter-grid experiment");
    add_common_flags(sweep, ov_sweep);

    std::vector<std::string> compare_inputs;
    std::string compare_out = ".";
    CLI::App* compare = app.add_subcommand("compare", "join per-policy result tables");
    compare->add_option("inputs", compare_inputs, "results CSV files")->required();
    compare->add_option("--out", compare_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return cmd_gen(ov_gen);
        if (run->parsed()) return cmd_run(ov_run);
        if (sweep->parsed()) return cmd_sweep(ov_sweep);
        if (compare->parsed()) return cmd_compare(compare_inputs, compare_out);
    } catch (const drcap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const drcap::ConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return 4;
    } catch (const drcap::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
