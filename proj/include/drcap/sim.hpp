#ifndef DRCAP_SIM_HPP
#define DRCAP_SIM_HPP

#include <Eigen/Dense>

namespace drcap {

// Per-slot outcome of replaying a policy against a scenario set.
struct PolicySim {
    double kappa = 0.0;
    Eigen::VectorXd cost;      // realized social cost per slot, capacity excluded
    Eigen::VectorXd leftover;  // leftover mismatch per slot, kW
    Eigen::VectorXd dr_total;  // total demand response per slot, kW

    // Mean per-slot social cost including the amortized capacity term.
    double mean_total_cost(double c_slot) const {
        return cost.mean() + c_slot * kappa;
    }
    // Mean DR normalized by the mean absolute mismatch.
    double dr_norm(const Eigen::VectorXd& D) const {
        const double base = D.array().abs().mean();
        return base > 0.0 ? dr_total.array().abs().mean() / base : 0.0;
    }
    // Mean capacity exceedance max(|leftover|-kappa, 0), normalized as above.
    double leftover_norm(const Eigen::VectorXd& D) const {
        const double base = D.array().abs().mean();
        const double exc = (leftover.array().abs() - kappa).max(0.0).mean();
        return base > 0.0 ? exc / base : 0.0;
    }
    // Fraction of slots whose leftover magnitude exceeds kappa.
    double exceedance_rate(double tol = 1e-9) const {
        return (leftover.array().abs() > kappa + tol).cast<double>().mean();
    }
};

}  // namespace drcap

#endif
