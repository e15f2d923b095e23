#include "drcap/lin.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace drcap {

namespace {

// Stacks (pi, lambda, mu) into the 3N parameter ordering.
Eigen::VectorXd stack_prices(const DualPrices& p) {
    const int N = static_cast<int>(p.pi.size());
    Eigen::VectorXd out(3 * N);
    out << p.pi, p.lambda, p.mu;
    return out;
}

}  // namespace

LinMoments build_lin_moments(const ScenarioSet& train, double A) {
    const int N = train.customers();
    if (N == 0 || train.slots() == 0)
        throw std::invalid_argument("build_lin_moments: empty scenario set");
    if (A <= 0.0) throw std::invalid_argument("build_lin_moments: A must be positive");

    LinMoments m;
    m.N = N;
    m.A = A;
    m.a_hat = train.a_hat;
    m.lo = train.lo;
    m.hi = train.hi;

    // phi = (psi, 1): borrow E[psi psi^T] and E[psi] from the scenario set.
    m.Mphi.resize(N + 2, N + 2);
    m.Mphi.topLeftCorner(N + 1, N + 1) = train.second_moment;
    m.Mphi.topRightCorner(N + 1, 1) = train.mean;
    m.Mphi.bottomLeftCorner(1, N + 1) = train.mean.transpose();
    m.Mphi(N + 1, N + 1) = 1.0;

    // D = sum_i delta_i - delta_r as a loading on phi.
    Eigen::VectorXd dload = Eigen::VectorXd::Zero(N + 2);
    dload.head(N).setOnes();
    dload(N) = -1.0;
    m.ED2 = dload.dot(m.Mphi * dload);

    // Row loadings of x = [alpha; beta; gamma] on phi.
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(3 * N, N + 2);
    for (int i = 0; i < N; ++i) {
        L.row(i) = dload.transpose();
        L(N + i, i) = 1.0;
        L(2 * N + i, N + 1) = 1.0;
    }
    const Eigen::MatrixXd LM = L * m.Mphi;
    m.H_A = 2.0 * A * (LM * L.transpose());
    m.h_A = 2.0 * A * (LM * dload);

    m.B.resize(N);
    m.Hfull = m.H_A;
    for (int i = 0; i < N; ++i) {
        const int idx[3] = {i, N + i, 2 * N + i};
        Eigen::Matrix3d B;
        std::vector<Eigen::VectorXd> vecs = {dload, Eigen::VectorXd::Unit(N + 2, i),
                                             Eigen::VectorXd::Unit(N + 2, N + 1)};
        for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) B(r, s) = vecs[r].dot(m.Mphi * vecs[s]);
        m.B[i] = B;
        for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s)
                m.Hfull(idx[r], idx[s]) += 2.0 * m.a_hat(i) * B(r, s);
    }
    return m;
}

std::pair<double, double> worst_case_leftover(const Eigen::VectorXd& x,
                                              const Eigen::VectorXd& lo,
                                              const Eigen::VectorXd& hi) {
    const int N = static_cast<int>(x.size()) / 3;
    const double s = x.head(N).sum();
    const double gsum = x.tail(N).sum();
    double gmax = -gsum, gmin = -gsum;
    for (int j = 0; j <= N; ++j) {
        const double coef = j < N ? (1.0 - s) - x(N + j) : -(1.0 - s);
        gmax += std::max(coef * lo(j), coef * hi(j));
        gmin += std::min(coef * lo(j), coef * hi(j));
    }
    return {gmax, gmin};
}

Eigen::VectorXd worst_case_gradient(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi, int face) {
    const int N = static_cast<int>(x.size()) / 3;
    const double s = x.head(N).sum();
    Eigen::VectorXd b(N + 1);
    for (int j = 0; j <= N; ++j) {
        const double coef = j < N ? (1.0 - s) - x(N + j) : -(1.0 - s);
        const bool take_hi = (face > 0) == (coef > 0.0);
        b(j) = take_hi ? hi(j) : lo(j);
    }
    Eigen::VectorXd g(3 * N);
    g.head(N).setConstant(-(b.head(N).sum() - b(N)));
    g.segment(N, N) = -b.head(N);
    g.tail(N).setConstant(-1.0);
    return g;
}

CapacityQpSolver::CapacityQpSolver(Eigen::MatrixXd H, Eigen::VectorXd lo,
                                   Eigen::VectorXd hi, double c)
    : H_(std::move(H)), lo_(std::move(lo)), hi_(std::move(hi)), c_(c),
      n_(static_cast<int>(H_.rows())) {
    // Degenerate coordinates (e.g. a customer with delta_i identically zero
    // on the training window) make H singular; a tiny ridge pins them to
    // zero without moving the non-degenerate optimum.
    const double scale = H_.diagonal().mean();
    bool ok = false;
    for (double ridge : {0.0, 1e-12, 1e-10, 1e-8}) {
        if (ridge > 0.0) H_.diagonal().array() += ridge * scale;
        llt_.compute(H_);
        if (llt_.info() == Eigen::Success) {
            ok = true;
            break;
        }
    }
    if (!ok) throw std::invalid_argument("CapacityQpSolver: H is not positive definite");

    // Penalized affine terms y = F x + f: one z_j per box coordinate with
    // weight r_j = (hi_j - lo_j)/2, and the midpoint aggregate
    // m'z - sum(gamma) with weight 1.
    const int N = n_ / 3;
    K_ = N + 2;
    F_ = Eigen::MatrixXd::Zero(K_, n_);
    f_.resize(K_);
    w_.resize(K_);
    Eigen::VectorXd mid(N + 1);
    for (int j = 0; j <= N; ++j) {
        mid(j) = 0.5 * (hi_(j) + lo_(j));
        w_(j) = 0.5 * (hi_(j) - lo_(j));
    }
    for (int j = 0; j < N; ++j) {
        // z_j = 1 - sum(alpha) - beta_j
        F_.row(j).head(N).setConstant(-1.0);
        F_(j, N + j) = -1.0;
        f_(j) = 1.0;
    }
    // z_r = sum(alpha) - 1
    F_.row(N).head(N).setConstant(1.0);
    f_(N) = -1.0;
    // m'z - sum(gamma)
    F_.row(N + 1) = mid.transpose() * F_.topRows(N + 1);
    F_.row(N + 1).tail(N).array() -= 1.0;
    f_(N + 1) = mid.dot(f_.head(N + 1));
    w_(N + 1) = 1.0;
}

void CapacityQpSolver::refactor(double rho) {
    llt_admm_.compute(H_ + rho * (F_.transpose() * F_));
    rho_ = rho;
}

double CapacityQpSolver::objective(const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& x) const {
    const auto [gmx, gmn] = worst_case_leftover(x, lo_, hi_);
    return 0.5 * x.dot(H_ * x) + q.dot(x) + c_ * std::max({gmx, -gmn, 0.0});
}

bool CapacityQpSolver::polish(const Eigen::VectorXd& q, const Eigen::VectorXd& y,
                              Eigen::VectorXd& x) const {
    // Equality-constrained QP on the zero pattern of y: zeros pinned hard,
    // nonzeros contribute their fixed-sign linear term c*w*sign*F_k.
    std::vector<int> zeros;
    Eigen::VectorXd qp = q;
    for (int k = 0; k < K_; ++k) {
        if (y(k) == 0.0)
            zeros.push_back(k);
        else
            qp += c_ * w_(k) * (y(k) > 0.0 ? 1.0 : -1.0) * F_.row(k).transpose();
    }
    const Eigen::VectorXd xu = llt_.solve(-qp);
    if (zeros.empty()) {
        x = xu;
    } else {
        const int nz = static_cast<int>(zeros.size());
        Eigen::MatrixXd Az(nz, n_);
        Eigen::VectorXd bz(nz);
        for (int r = 0; r < nz; ++r) {
            Az.row(r) = F_.row(zeros[r]);
            bz(r) = -f_(zeros[r]);
        }
        const Eigen::MatrixXd HiAt = llt_.solve(Eigen::MatrixXd(Az.transpose()));
        const Eigen::VectorXd lam =
            (Az * HiAt).ldlt().solve(bz - Az * xu);
        x = xu + HiAt * lam;
    }
    // The pattern is only trusted if the polished point keeps the signs it
    // was built from.
    for (int k = 0; k < K_; ++k) {
        if (y(k) == 0.0) continue;
        const double v = F_.row(k).dot(x) + f_(k);
        if (v * y(k) < 0.0 && std::abs(v) > 1e-10 * (1.0 + std::abs(f_(k)))) return false;
    }
    return true;
}

CapacityQpSolver::Result CapacityQpSolver::solve(const Eigen::VectorXd& q) {
    Result res;
    res.x = llt_.solve(-q);
    if (c_ <= 0.0) {
        const auto [gmx, gmn] = worst_case_leftover(res.x, lo_, hi_);
        res.kappa = std::max({gmx, -gmn, 0.0});
        return res;
    }

    if (!warm_) {
        y_ = F_ * res.x + f_;
        u_ = Eigen::VectorXd::Zero(K_);
        warm_ = true;
    }
    if (rho_ <= 0.0) refactor(c_);

    constexpr int kMaxIter = 20000;
    const double sqrtK = std::sqrt(static_cast<double>(K_));
    Eigen::VectorXd x = res.x;
    res.converged = false;
    for (int it = 1; it <= kMaxIter; ++it) {
        x = llt_admm_.solve(-q + rho_ * (F_.transpose() * (y_ - u_ - f_)));
        const Eigen::VectorXd Fxf = F_ * x + f_;
        const Eigen::VectorXd v = Fxf + u_;
        const Eigen::VectorXd thresh = (c_ / rho_) * w_;
        Eigen::VectorXd y_new(K_);
        for (int k = 0; k < K_; ++k) {
            const double mag = std::abs(v(k)) - thresh(k);
            y_new(k) = mag > 0.0 ? (v(k) > 0.0 ? mag : -mag) : 0.0;
        }
        const double r_primal = (Fxf - y_new).norm();
        const double r_dual = rho_ * (F_.transpose() * (y_new - y_)).norm();
        u_ += Fxf - y_new;
        y_ = y_new;
        res.iterations = it;

        const double eps_p = 1e-12 * sqrtK + 1e-9 * std::max(Fxf.norm(), y_.norm());
        const double eps_d =
            1e-12 * std::sqrt(static_cast<double>(n_)) +
            1e-9 * (rho_ * (F_.transpose() * u_).norm());
        if (r_primal <= eps_p && r_dual <= eps_d) {
            res.converged = true;
            break;
        }
        if (it % 25 == 0) {
            if (r_primal > 10.0 * r_dual && rho_ < 1e8 * c_) {
                u_ *= 0.5;
                refactor(rho_ * 2.0);
            } else if (r_dual > 10.0 * r_primal && rho_ > 1e-8 * c_) {
                u_ *= 2.0;
                refactor(rho_ * 0.5);
            }
        }
    }

    res.x = x;
    Eigen::VectorXd xp;
    if (polish(q, y_, xp) && objective(q, xp) <= objective(q, x)) res.x = xp;
    const auto [gmx, gmn] = worst_case_leftover(res.x, lo_, hi_);
    res.kappa = std::max({gmx, -gmn, 0.0});
    return res;
}

LinSolution solve_lin_centralized(const LinMoments& m, const LseCost& cost) {
    CapacityQpSolver solver(m.Hfull, m.lo, m.hi, cost.c_slot);
    const auto res = solver.solve(-m.h_A);

    LinSolution sol;
    const int N = m.N;
    sol.contract.alpha = res.x.head(N);
    sol.contract.beta = res.x.segment(N, N);
    sol.contract.gamma = res.x.tail(N);
    sol.contract.kappa = res.kappa;
    sol.plan.kappa = res.kappa;
    sol.plan.policy_tag = "LIN";
    sol.plan.expected_cost = cost.c_slot * res.kappa + 0.5 * res.x.dot(m.Hfull * res.x) -
                             m.h_A.dot(res.x) + m.A * m.ED2;
    return sol;
}

CapacityQpSolver::Result lse_subproblem(const LinMoments& m, const LseCost& cost,
                                        const DualPrices& prices, double tau,
                                        const Eigen::VectorXd* anchor) {
    Eigen::MatrixXd H = m.H_A;
    Eigen::VectorXd q = stack_prices(prices) - m.h_A;
    if (tau > 0.0) {
        H.diagonal().array() += tau;
        if (anchor) q -= tau * *anchor;
    }
    CapacityQpSolver solver(std::move(H), m.lo, m.hi, cost.c_slot);
    return solver.solve(q);
}

Eigen::Vector3d customer_subproblem(const Eigen::Matrix3d& B, double a_hat,
                                    double pi, double lambda, double mu) {
    const Eigen::Matrix3d M = 2.0 * a_hat * B;
    const Eigen::Vector3d rhs(pi, lambda, mu);
    const double tr = M.trace();

    // Pin coordinates whose own second moment vanishes (e.g. delta_i == 0).
    std::vector<int> act;
    for (int d = 0; d < 3; ++d)
        if (M(d, d) > 1e-14 * std::max(tr, 1e-300)) act.push_back(d);

    Eigen::Vector3d out = Eigen::Vector3d::Zero();
    const int na = static_cast<int>(act.size());
    if (na == 0) return out;
    Eigen::MatrixXd Mr(na, na);
    Eigen::VectorXd rr(na);
    for (int r = 0; r < na; ++r) {
        rr(r) = rhs(act[r]);
        for (int s = 0; s < na; ++s) Mr(r, s) = M(act[r], act[s]);
    }
    Mr.diagonal().array() += 1e-12 * tr;
    const Eigen::VectorXd sol = Mr.ldlt().solve(rr);
    for (int r = 0; r < na; ++r) out(act[r]) = sol(r);
    return out;
}

NegotiationResult negotiate(const LinMoments& m, const LseCost& cost,
                            const NegotiationOptions& opts) {
    const int N = m.N;
    const int n = 3 * N;

    NegotiationResult res;
    res.tau = opts.tau > 0.0 ? opts.tau : 2.0 * m.A * m.ED2;
    res.zeta = opts.zeta > 0.0 ? opts.zeta : 0.025 * 2.0 * m.a_hat.mean() * m.ED2;
    res.eps = opts.eps;

    Eigen::MatrixXd Hp = m.H_A;
    Hp.diagonal().array() += res.tau;
    CapacityQpSolver lse(std::move(Hp), m.lo, m.hi, cost.c_slot);

    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd best_u = u, best_p = p;
    double best_res = std::numeric_limits<double>::infinity();
    res.log.reserve(opts.max_iter);

    for (int k = 1; k <= opts.max_iter; ++k) {
        const auto lse_res = lse.solve(p - m.h_A - res.tau * u);
        const Eigen::VectorXd G = lse_res.x - u;
        const double nG = G.norm();
        if (k == 1 && res.eps <= 0.0) res.eps = 1e-4 * (1.0 + nG);
        const double eta = nG > 0.0 ? (res.zeta / k) / nG : 0.0;
        res.log.push_back({k, nG, eta});
        if (nG < best_res) {
            best_res = nG;
            best_u = u;
            best_p = p;
        }
        res.iterations = k;
        if (nG <= res.eps) {
            res.converged = true;
            res.residual = nG;
            break;
        }
        p += eta * G;
        for (int i = 0; i < N; ++i) {
            const Eigen::Vector3d uvw =
                customer_subproblem(m.B[i], m.a_hat(i), p(i), p(N + i), p(2 * N + i));
            u(i) = uvw(0);
            u(N + i) = uvw(1);
            u(2 * N + i) = uvw(2);
        }
    }
    if (!res.converged) {
        u = best_u;
        p = best_p;
        res.residual = best_res;
    }

    res.contract.alpha = u.head(N);
    res.contract.beta = u.segment(N, N);
    res.contract.gamma = u.tail(N);
    const auto [gmx, gmn] = worst_case_leftover(u, m.lo, m.hi);
    res.contract.kappa = std::max({gmx, -gmn, 0.0});
    res.prices.pi = p.head(N);
    res.prices.lambda = p.segment(N, N);
    res.prices.mu = p.tail(N);
    res.proposal.u = res.contract.alpha;
    res.proposal.v = res.contract.beta;
    res.proposal.w = res.contract.gamma;
    res.payments = (res.prices.pi.array() * res.contract.alpha.array() +
                    res.prices.lambda.array() * res.contract.beta.array() +
                    res.prices.mu.array() * res.contract.gamma.array())
                       .matrix();
    return res;
}

PolicySim simulate_lin(const LinearContract& contract, const ScenarioSet& test,
                       const LseCost& cost) {
    const int T = test.slots();
    const int N = test.customers();
    if (T == 0) throw std::invalid_argument("simulate_lin: empty scenario set");
    if (static_cast<int>(contract.alpha.size()) != N)
        throw std::invalid_argument("simulate_lin: contract/scenario dimension mismatch");

    PolicySim sim;
    sim.kappa = contract.kappa;
    sim.cost.resize(T);
    sim.leftover.resize(T);
    sim.dr_total.resize(T);
    // Scalar accumulation order matches the opt-out simulator so that the
    // full-commitment variant reproduces these results bit for bit.
    for (int t = 0; t < T; ++t) {
        const double D = test.D(t);
        double dr = 0.0, ccost = 0.0;
        for (int i = 0; i < N; ++i) {
            const double x = contract.alpha(i) * D + contract.beta(i) * test.delta(t, i) +
                             contract.gamma(i);
            dr += x;
            ccost += test.a(t, i) * x * x;
        }
        const double leftover = D - dr;
        sim.cost(t) = ccost + cost.A * leftover * leftover;
        sim.leftover(t) = leftover;
        sim.dr_total(t) = dr;
    }
    return sim;
}

void save_contract_csv(const std::string& path, const NegotiationResult& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_contract_csv: cannot open " + path);
    char buf[512];
    std::snprintf(buf, sizeof(buf), "kappa,zeta,eps,iterations,converged\n%.9g,%.9g,%.9g,%d,%d\n",
                  r.contract.kappa, r.zeta, r.eps, r.iterations, r.converged ? 1 : 0);
    out << buf;
    out << "customer_id,alpha,beta,gamma,pi,lambda,mu,payment\n";
    for (int i = 0; i < static_cast<int>(r.contract.alpha.size()); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", i,
                      r.contract.alpha(i), r.contract.beta(i), r.contract.gamma(i),
                      r.prices.pi(i), r.prices.lambda(i), r.prices.mu(i), r.payments(i));
        out << buf;
    }
    if (!out) throw std::runtime_error("save_contract_csv: write failed for " + path);
}

}  // namespace drcap
