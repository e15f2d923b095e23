#ifndef DRCAP_SCENARIO_HPP
#define DRCAP_SCENARIO_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace drcap {

// Uniformly sampled kW series for one source (a customer load or a
// renewable generator).
struct Trace {
    std::string source_id;
    double resolution_s = 300.0;
    std::int64_t start_epoch_s = 0;
    Eigen::VectorXd kw;

    int slots() const { return static_cast<int>(kw.size()); }
};

// Trace CSV: header `timestamp,source_id,kw`, UTC ISO-8601 timestamps, one
// row per slot per source. Gaps or irregular spacing are rejected with the
// offending row number.
std::vector<Trace> load_traces_csv(const std::string& path);
void save_traces_csv(const std::string& path, const std::vector<Trace>& traces);

enum class Predictor { PeriodicMean, GlobalMean };

struct ErrorSeries {
    Eigen::VectorXd errors;     // actual - predicted, kW
    Eigen::VectorXd predicted;  // kW
    double lo = 0.0, hi = 0.0;  // empirical support of the errors
};

// Per-slot-of-day mean profile (the day-ahead style predictor).
Eigen::VectorXd fit_periodic_profile(const Trace& trace, int slots_per_day);

ErrorSeries prediction_errors_with_profile(const Trace& trace, const Eigen::VectorXd& profile);

// Fits the chosen predictor on the trace itself and returns its errors.
// Traces shorter than one predictor period are rejected.
ErrorSeries build_prediction_errors(const Trace& trace, Predictor predictor,
                                    int slots_per_day = 288);

// Day-block bootstrap: each synthetic customer resamples whole blocks of
// the base trace with replacement, preserving intra-day autocorrelation.
// Deterministic under a fixed seed.
std::vector<Trace> bootstrap_customers(const std::vector<Trace>& base_traces,
                                       int count_per_base, std::uint64_t seed,
                                       int block_slots = 288);

// Stochastic customer cost coefficients. Latent means a_tilde are drawn
// from a normal centered on the range midpoint, truncated to [lo,hi]; each
// per-slot realization is normal(a_tilde_i, rsd*a_tilde_i) truncated to the
// same range. Training and test realizations come from disjoint streams.
struct CostDraws {
    Eigen::VectorXd a_tilde;  // latent per-customer means
    Eigen::MatrixXd train;    // set_size x n
    Eigen::MatrixXd test;     // set_size x n
    Eigen::VectorXd a_hat;    // training means, the LSE's estimate
};

CostDraws sample_cost_coeffs(int n, double lo, double hi, double rsd, int set_size,
                             std::uint64_t seed);

// One timeslot realization.
struct Scenario {
    Eigen::VectorXd delta;  // per-customer demand prediction errors, kW
    double delta_r = 0.0;   // renewable prediction error, kW
    Eigen::VectorXd a;      // realized cost coefficients
    double D = 0.0;         // sum(delta) - delta_r
};

struct ScenarioSet {
    Eigen::MatrixXd delta;    // T x N
    Eigen::VectorXd delta_r;  // T
    Eigen::MatrixXd a;        // T x N realized cost coefficients
    Eigen::VectorXd D;        // T, D(t) = sum_i delta(t,i) - delta_r(t)

    // First/second moments and support of (delta_1..delta_N, delta_r).
    Eigen::VectorXd mean;            // N+1
    Eigen::MatrixXd second_moment;   // (N+1) x (N+1), E[psi psi^T]
    Eigen::VectorXd lo, hi;          // N+1

    Eigen::VectorXd a_hat;    // estimated coefficients (training means)
    Eigen::VectorXd a_tilde;  // latent means

    int customers() const { return static_cast<int>(delta.cols()); }
    int slots() const { return static_cast<int>(delta.rows()); }
    Scenario scenario(int t) const;
};

// Scales the (normalized) renewable errors by wind_capacity and assembles
// the set with its moments and bounds.
ScenarioSet assemble_scenarios(const Eigen::MatrixXd& customer_errors,
                               const Eigen::VectorXd& renewable_errors,
                               const Eigen::MatrixXd& cost_coeffs,
                               const Eigen::VectorXd& a_hat,
                               const Eigen::VectorXd& a_tilde,
                               double wind_capacity);

// Export CSV: `slot,customer_id,delta_kw,a_coeff` rows plus a `_system` row
// per slot carrying delta_r and D.
void save_scenario_set_csv(const std::string& path, const ScenarioSet& set);

// Deterministic stream splitting for seed derivation.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace drcap

#endif
