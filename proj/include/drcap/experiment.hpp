#ifndef DRCAP_EXPERIMENT_HPP
#define DRCAP_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "drcap/flex.hpp"
#include "drcap/lin.hpp"
#include "drcap/planner.hpp"
#include "drcap/pred.hpp"
#include "drcap/scenario.hpp"

namespace drcap {

// Error taxonomy the CLI maps to exit codes: config 2, data 3,
// non-convergence 4.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LinMode { Centralized, Distributed };

// Flat key=value experiment description. Scalar keys accept comma lists
// where a sweep makes sense (capacity price, wind capacity, cost rsd).
struct ExperimentConfig {
    // Data source: either a trace CSV (customer sources plus one renewable
    // source) or the built-in synthetic generator.
    std::string traces_csv;                  // empty -> synthetic
    std::string renewable_source_id = "wind";
    int base_homes = 3;                      // synthetic base profiles
    int days = 12;
    int customers = 300;
    double slot_seconds = 300.0;
    double train_fraction = 0.5;
    Predictor predictor = Predictor::PeriodicMean;

    std::vector<double> capacity_price_usd_per_kw_mo = {5.0};
    bool capacity_price_specified = false;  // true when set by a config file
    std::vector<double> wind_capacity_kw = {100.0};
    std::vector<double> cost_rsd = {0.15};
    double a_coeff_lo_usd_per_kw2 = 4.0 / 144.0;
    double a_coeff_hi_usd_per_kw2 = 7.0 / 144.0;
    double A_usd_per_kw2 = 0.1 / 144.0;

    std::vector<std::string> policies = {"opt", "seq", "pred", "lin"};
    std::vector<double> rho_grid = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7,
                                    0.8, 0.85, 0.9, 0.95, 0.98, 1.0};
    double audit_tolerance = 1.25;
    LinMode lin_mode = LinMode::Centralized;

    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int workers = 1;
};

// Parses the flat config file; throws std::runtime_error with path and line
// number on malformed or unknown keys.
ExperimentConfig parse_config(const std::string& path);

struct MetricRow {
    std::string policy;
    double c_usd_per_kw_mo = 0.0;
    double wind_kw = 0.0;
    double rsd = 0.0;
    double rho = 1.0;
    double social_cost_usd_yr = 0.0;
    double kappa_kw = 0.0;
    double dr_norm = 0.0;
    double leftover_norm = 0.0;
    double exceedance_rate = 0.0;
};

// Seeded synthetic generators: homes are a base level plus a daily sinusoid
// plus AR(1) noise, clipped at zero; wind is the same shape normalized to
// peak 1 so a capacity in kW scales it.
std::vector<Trace> generate_synthetic_homes(int count, int days, double slot_seconds,
                                            std::uint64_t seed);
Trace generate_synthetic_wind(int days, double slot_seconds, std::uint64_t seed);

// Everything downstream of the raw traces that does not depend on the sweep
// coordinates: bootstrapped customers, predictor fits (training window
// only), and the split prediction-error matrices.
struct PreparedData {
    std::vector<Trace> base_traces;  // customer bases as generated/loaded
    Trace renewable;                 // normalized to peak 1
    Eigen::MatrixXd customer_errors_train, customer_errors_test;    // T_split x N
    Eigen::VectorXd renewable_errors_train, renewable_errors_test;  // normalized
    int slots_per_day = 288;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

// Train/test scenario sets plus the per-slot cost model at one grid point.
struct PointSets {
    ScenarioSet train, test;
    LseCost cost;
};

PointSets build_point_sets(const ExperimentConfig& cfg, const PreparedData& data,
                           double c_mo, double wind_kw, double rsd);

// $/kW-mo amortized to one slot: a month is 30 days of slots.
double capacity_price_per_slot(double c_usd_per_kw_mo, double slot_seconds);

// $/slot to $/Julian-year.
double annualize(double cost_per_slot, double slot_seconds);

// One sweep point: assemble train/test sets at (c, wind, rsd), fit every
// requested policy on train, evaluate on test. lin-plus emits one row per
// rho in the grid; all other policies report rho = 1.
std::vector<MetricRow> run_point(const ExperimentConfig& cfg, const PreparedData& data,
                                 double c_mo, double wind_kw, double rsd);

// Full grid over (c, wind, rsd), optionally across worker threads; row
// order is by grid position regardless of completion order.
std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg);

// Fixed header, 9 significant digits, rows sorted by (policy, coordinates).
void emit_results(const std::vector<MetricRow>& rows, const std::string& path);

std::vector<MetricRow> load_results_csv(const std::string& path);

}  // namespace drcap

#endif
