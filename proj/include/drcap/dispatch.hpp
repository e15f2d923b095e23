#ifndef DRCAP_DISPATCH_HPP
#define DRCAP_DISPATCH_HPP

#include <Eigen/Dense>
#include <functional>

namespace drcap {

// Quadratic customer disutility C_i(x) = a * x^2, a > 0.
struct CustomerCost {
    double a;
};

// LSE cost model: quadratic imbalance penalty A*delta^2 plus linear
// capacity cost c_slot*kappa (already amortized to one timeslot).
struct LseCost {
    double A = 0.0;
    double c_slot = 0.0;
};

// Optimal single-slot dispatch together with the capacity-constraint duals.
struct DispatchResult {
    Eigen::VectorXd x;       // per-customer response, kW (positive = reduction)
    double delta = 0.0;      // leftover mismatch D - sum(x), kW
    double theta_lo = 0.0;   // dual of delta >= -kappa
    double theta_hi = 0.0;   // dual of delta <= kappa
    double customer_cost = 0.0;
    double lse_cost = 0.0;
};

// Closed-form minimizer of sum a_i x_i^2 + A (D - sum x_i)^2.
// x_i = A / ((1 + sum_j A/a_j) a_i) * D, leftover D / (1 + sum_j A/a_j).
DispatchResult dispatch_unconstrained(const Eigen::VectorXd& a, double A, double D);

// Same objective subject to -kappa <= D - sum x_i <= kappa. When the
// unconstrained leftover exceeds the box, the leftover is clamped to the
// binding face, x is split proportionally to 1/a_i, and the binding dual
// carries the stationarity residual C_i'(x_i) - C_g'(delta).
DispatchResult dispatch_capped(const Eigen::VectorXd& a, double A, double D, double kappa);

// Subgradient of the optimal real-time cost R(kappa) w.r.t. kappa:
// -(theta_lo + theta_hi). Always <= 0.
double kappa_subgradient(const DispatchResult& r);

// sum a_i x_i^2 + A delta^2 for a given dispatch.
double realized_social_cost(const DispatchResult& r, const Eigen::VectorXd& a, double A);

// Extension seam for non-quadratic convex costs: dispatch driven by a
// one-dimensional marginal-cost interface. marginal(i, x) must be the
// derivative of customer i's cost, increasing in x with marginal(i,0)=0;
// lse_marginal likewise for the leftover penalty. Solved by bisection on
// the shared marginal price. The quadratic instantiation reproduces
// dispatch_capped and is what everything else in the library uses.
using MarginalFn = std::function<double(int customer, double x)>;
using ScalarMarginalFn = std::function<double(double delta)>;

DispatchResult dispatch_generic(int n, const MarginalFn& marginal,
                                const ScalarMarginalFn& lse_marginal,
                                double D, double kappa,
                                double tol = 1e-12, int max_iter = 200);

}  // namespace drcap

#endif
