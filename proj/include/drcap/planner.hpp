#ifndef DRCAP_PLANNER_HPP
#define DRCAP_PLANNER_HPP

#include <string>
#include <vector>

#include "drcap/dispatch.hpp"
#include "drcap/scenario.hpp"

namespace drcap {

struct CapacityPlan {
    double kappa = 0.0;          // kW
    double expected_cost = 0.0;  // $/slot, capacity included
    std::string policy_tag;
};

struct OptSolution {
    CapacityPlan plan;
    std::vector<DispatchResult> dispatches;  // one per scenario, at plan.kappa
};

// Offline optimum: picks kappa* so that the capacity price balances the
// expected capacity-constraint dual, c = E[theta_lo + theta_hi], by scalar
// bisection on [0, kappa_seq] (kappa* = 0 when c already dominates). Inner
// dispatches observe the realized cost coefficients of each scenario.
OptSolution solve_opt(const ScenarioSet& scenarios, const LseCost& cost);

// Mean capacity-constraint dual over the set at a given kappa; exposed for
// convexity and optimality diagnostics.
double mean_capacity_dual(const ScenarioSet& scenarios, double A, double kappa);

// Expected real-time cost E[R(kappa)] over the set (capacity term excluded).
double mean_realtime_cost(const ScenarioSet& scenarios, double A, double kappa);

// Worst-case capacity: kappa covering the empirical support of |D|.
double worst_case_kappa(const ScenarioSet& scenarios);

// Sequential baseline: worst-case kappa first, then the data-driven price
// rule (see pred.hpp) evaluated on the same set for the expected cost.
CapacityPlan solve_seq(const ScenarioSet& scenarios, const LseCost& cost);

}  // namespace drcap

#endif
