#ifndef DRCAP_PRED_HPP
#define DRCAP_PRED_HPP

#include <Eigen/Dense>

#include "drcap/planner.hpp"
#include "drcap/sim.hpp"

namespace drcap {

// Real-time price rule p(D; kappa) for the prediction-based policy.
// For the quadratic model the LSE's stage problem has the closed form
// p* = 2AD / (1 + 2AS) with S = sum_i 1/(2 a_hat_i); when the estimated
// leftover D - pS would leave [-kappa, kappa], p is clamped to the
// boundary value (D -/+ kappa)/S.
struct PriceRule {
    double kappa = 0.0;
    double A = 0.0;
    double S = 0.0;

    double price(double D) const;
    double estimated_leftover(double D) const { return D - price(D) * S; }
    // Optimal estimated stage cost H(kappa; D).
    double stage_cost(double D) const;
};

// Customer best response under the estimated quadratic cost: x_i = p/(2 a_i).
Eigen::VectorXd estimated_response(const Eigen::VectorXd& a_hat, double p);

PriceRule price_rule(const Eigen::VectorXd& a_hat, double A, double kappa);

struct PredSolution {
    CapacityPlan plan;
    PriceRule rule;
};

// Exhaustive search for kappa over a uniform grid on [0, kappa_seq],
// minimizing c*kappa + E[H(kappa; D)] on the training set.
PredSolution solve_pred(const ScenarioSet& train, const LseCost& cost, int grid_points = 200);

// Replays the rule against realized costs: customers respond with
// x_i = p/(2 a_i(t)), so the realized leftover may exceed kappa; the
// exceedance is recorded, never clamped.
PolicySim simulate_pred(const PriceRule& rule, const ScenarioSet& test);

}  // namespace drcap

#endif
