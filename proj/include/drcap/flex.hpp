#ifndef DRCAP_FLEX_HPP
#define DRCAP_FLEX_HPP

#include <string>
#include <vector>

#include "drcap/lin.hpp"

namespace drcap {

// How a customer picks the slots it walks away from. Clairvoyant sorts the
// whole realized test horizon (the evaluation framing); OnlineQuantile
// violates whenever the realized coefficient exceeds the customer's
// training (1-rho)-quantile, which a real customer could actually do.
enum class ViolationMode { Clairvoyant, OnlineQuantile };

struct FlexParams {
    double rho = 1.0;               // commitment fraction in [0,1]
    double audit_tolerance = 1.25;  // bound on |E[D | i violates]| / |E[D]|
    ViolationMode mode = ViolationMode::Clairvoyant;
};

// The floor((1-rho)*T) slots with the highest realized a_i(t); ties go to
// the earlier slot. Returned sorted ascending. Independent of D.
std::vector<int> select_violations(const Eigen::VectorXd& a_series, double rho);

struct AuditReport {
    double mean_D = 0.0;
    Eigen::VectorXd conditional_mean_D;  // E[D | i violates], NaN if i never violates
    Eigen::VectorXd ratio;               // conditional mean / overall mean
    std::vector<int> flagged;            // customers exceeding the tolerance
};

struct FlexSim {
    PolicySim sim;
    AuditReport audit;
    double violation_rate = 0.0;  // violated (customer, slot) pairs / (N*T)
};

// LIN with opt-outs: on a violated slot customer i contributes x_i = 0 at
// zero cost; everywhere else the contract applies unchanged. The audit
// compares each violator's conditional mean mismatch against the overall
// mean. For OnlineQuantile mode, `train` supplies the threshold
// distribution and must be non-null.
FlexSim simulate_lin_plus(const LinearContract& contract, const FlexParams& params,
                          const ScenarioSet& test, const LseCost& cost,
                          const ScenarioSet* train = nullptr);

struct RhoPoint {
    double rho = 0.0;
    double social_cost = 0.0;    // per-slot, capacity included
    double leftover_norm = 0.0;
    double violation_rate = 0.0;
    int audit_flags = 0;
};

struct RhoSweep {
    std::vector<RhoPoint> points;
    double rho_star = 1.0;  // cost-minimizing rho on the grid
};

RhoSweep sweep_rho(const LinearContract& contract, const ScenarioSet& test,
                   const LseCost& cost, const std::vector<double>& rho_grid,
                   double audit_tolerance = 1.25);

// CSV `rho,social_cost,leftover_norm,violation_rate,audit_flags`.
void save_rho_sweep_csv(const std::string& path, const RhoSweep& sweep);

}  // namespace drcap

#endif
