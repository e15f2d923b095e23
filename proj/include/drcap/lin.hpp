#ifndef DRCAP_LIN_HPP
#define DRCAP_LIN_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "drcap/planner.hpp"
#include "drcap/sim.hpp"

namespace drcap {

// Linear DR contract x_i = alpha_i*D + beta_i*delta_i + gamma_i, with the
// jointly procured capacity kappa.
struct LinearContract {
    Eigen::VectorXd alpha;  // dimensionless
    Eigen::VectorXd beta;   // dimensionless
    Eigen::VectorXd gamma;  // kW
    double kappa = 0.0;     // kW
};

struct DualPrices {
    Eigen::VectorXd pi;      // $ per unit alpha
    Eigen::VectorXd lambda;  // $ per unit beta
    Eigen::VectorXd mu;      // $ per unit gamma
};

struct AgentProposal {
    Eigen::VectorXd u, v, w;  // customers' proposed (alpha, beta, gamma)
};

// Second-moment data the contract optimization runs on. psi is the random
// vector (delta_1..delta_N, delta_r) and phi = (psi, 1); Mphi = E[phi phi^T].
// Contract parameters are stacked as x = [alpha; beta; gamma] (3N vector).
struct LinMoments {
    int N = 0;
    Eigen::MatrixXd Mphi;          // (N+2) x (N+2)
    Eigen::VectorXd lo, hi;        // N+1 support box of psi
    Eigen::VectorXd a_hat;         // N
    double A = 0.0;
    double ED2 = 0.0;              // E[D^2]
    Eigen::MatrixXd H_A;           // 3N x 3N, LSE quadratic block
    Eigen::VectorXd h_A;           // 3N, LSE linear block (sign: -h_A in q)
    Eigen::MatrixXd Hfull;         // H_A + customer blocks 2*a_hat_i*B_i
    std::vector<Eigen::Matrix3d> B;  // Gram of (D, delta_i, 1) per customer
};

LinMoments build_lin_moments(const ScenarioSet& train, double A);

// Worst-case leftover over the training support box: Delta is linear in
// (delta, delta_r), so its extremes are exact by coordinate-wise sign
// selection. Returns (max Delta, min Delta).
std::pair<double, double> worst_case_leftover(const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& lo,
                                              const Eigen::VectorXd& hi);

// A subgradient of the chosen face (+1 -> max Delta, -1 -> min Delta).
Eigen::VectorXd worst_case_gradient(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi, int face);

// min_x 1/2 x'Hx + q'x + c*max(gmax(x), -gmin(x), 0). kappa has been
// eliminated analytically: at the optimum it equals the worst-case |Delta|.
// Writing each coordinate's worst case as max(z*lo, z*hi) = z*(lo+hi)/2 +
// |z|*(hi-lo)/2 collapses the capacity term to a weighted L1 norm of affine
// functions of x, so the problem is a generalized-lasso QP. It is solved by
// ADMM (soft-thresholding carries the kinks exactly) plus an active-set
// polish on the recovered zero pattern; the polish makes the solution exact
// whenever the pattern is right, and is only accepted when it lowers the
// true objective. Factorizations and ADMM state are cached across calls,
// which negotiation leans on heavily.
class CapacityQpSolver {
  public:
    CapacityQpSolver(Eigen::MatrixXd H, Eigen::VectorXd lo, Eigen::VectorXd hi,
                     double c);

    struct Result {
        Eigen::VectorXd x;
        double kappa = 0.0;
        int iterations = 0;
        bool converged = true;
    };
    Result solve(const Eigen::VectorXd& q);

  private:
    Eigen::MatrixXd H_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd lo_, hi_;
    double c_;
    int n_ = 0;  // 3N
    int K_ = 0;  // N+2 penalized affine terms

    Eigen::MatrixXd F_;      // K x n, y = F x + f
    Eigen::VectorXd f_, w_;  // offsets and L1 weights

    // ADMM state, kept warm between calls.
    double rho_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_admm_;  // H + rho F'F
    Eigen::VectorXd y_, u_;
    bool warm_ = false;

    void refactor(double rho);
    double objective(const Eigen::VectorXd& q, const Eigen::VectorXd& x) const;
    bool polish(const Eigen::VectorXd& q, const Eigen::VectorXd& y,
                Eigen::VectorXd& x) const;
};

struct LinSolution {
    LinearContract contract;
    CapacityPlan plan;
};

// Centralized solve of the moment-based contract problem:
// min c*kappa + sum_i a_hat_i E[x_i^2] + A E[(D - sum x_i)^2] s.t. the
// worst-case leftover lies in [-kappa, kappa].
LinSolution solve_lin_centralized(const LinMoments& m, const LseCost& cost);
inline LinSolution solve_lin_centralized(const ScenarioSet& train, const LseCost& cost) {
    return solve_lin_centralized(build_lin_moments(train, cost.A), cost);
}

// LSE side of the negotiation: buys (alpha, beta, gamma) at the posted
// prices against its own mismatch penalty. tau > 0 adds a proximal term
// tau*||x - anchor||^2 that keeps the subproblem strongly convex (the bare
// LSE Hessian is rank-deficient for N >= 2); the proximal term vanishes at
// consensus, so the negotiation fixed point is unchanged.
CapacityQpSolver::Result lse_subproblem(const LinMoments& m, const LseCost& cost,
                                        const DualPrices& prices, double tau = 0.0,
                                        const Eigen::VectorXd* anchor = nullptr);

// Customer i's best response: min a_hat_i E[(uD + v delta_i + w)^2]
// - pi*u - lambda*v - mu*w, a 3x3 stationarity solve. Degenerate
// coordinates (zero diagonal in the Gram, e.g. delta_i identically 0) are
// pinned to 0 and the rest solved with a 1e-12*trace ridge.
Eigen::Vector3d customer_subproblem(const Eigen::Matrix3d& B, double a_hat,
                                    double pi, double lambda, double mu);

struct NegotiationOptions {
    double zeta = 0.0;      // <= 0: scale-aware default 0.025 * 2*mean(a_hat)*E[D^2]
    double eps = 0.0;       // <= 0: 1e-4 * (1 + ||G_1||)
    double tau = 0.0;       // <= 0: 2*A*E[D^2]
    int max_iter = 5000;
};

struct NegotiationStep {
    int k = 0;
    double residual = 0.0;  // ||(alpha,beta,gamma) - (u,v,w)||_2
    double eta = 0.0;       // stepsize, eta*residual == zeta/k
};

struct NegotiationResult {
    LinearContract contract;  // customers' final agreed (u, v, w)
    DualPrices prices;
    AgentProposal proposal;
    Eigen::VectorXd payments;  // pi_i*u_i + lambda_i*v_i + mu_i*w_i
    std::vector<NegotiationStep> log;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    double zeta = 0.0, eps = 0.0, tau = 0.0;
};

// Synchronous-round dual decomposition: LSE proposes, prices move along the
// residual subgradient with stepsize (zeta/k)/||G||, customers respond. On
// max_iter exhaustion returns the best-residual round seen.
NegotiationResult negotiate(const LinMoments& m, const LseCost& cost,
                            const NegotiationOptions& opts = {});
inline NegotiationResult negotiate(const ScenarioSet& train, const LseCost& cost,
                                   const NegotiationOptions& opts = {}) {
    return negotiate(build_lin_moments(train, cost.A), cost, opts);
}

// Replays the contract: x from realized (D, delta), customer cost from
// realized a_i(t) (the contract binds regardless), exceedances recorded.
PolicySim simulate_lin(const LinearContract& contract, const ScenarioSet& test,
                       const LseCost& cost);

// `customer_id,alpha,beta,gamma,pi,lambda,mu,payment` rows, preceded by a
// run-summary row with kappa, zeta, eps, iterations, converged.
void save_contract_csv(const std::string& path, const NegotiationResult& r);

}  // namespace drcap

#endif
