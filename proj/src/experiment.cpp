#include "drcap/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace drcap {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::int64_t kEpochStart = 1672531200;  // 2023-01-01T00:00:00Z

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& v, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw ConfigError(ctx + ": bad number '" + v + "'");
    }
}

std::vector<double> parse_double_list(const std::string& v, const std::string& ctx) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(parse_double(item, ctx));
    if (out.empty()) throw ConfigError(ctx + ": empty list");
    return out;
}

// AR(1) noise series with innovation sd sigma and persistence phi.
Eigen::VectorXd ar1_noise(std::mt19937_64& rng, int T, double phi, double sigma) {
    std::normal_distribution<double> gauss(0.0, sigma);
    Eigen::VectorXd e(T);
    double prev = 0.0;
    for (int t = 0; t < T; ++t) {
        prev = phi * prev + gauss(rng);
        e[t] = prev;
    }
    return e;
}

}  // namespace

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);

    ExperimentConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string ctx = path + ":" + std::to_string(lineno);

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(ctx + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) throw ConfigError(ctx + ": expected key = value");

        if (key == "traces_csv") {
            cfg.traces_csv = val;
        } else if (key == "renewable_source_id") {
            cfg.renewable_source_id = val;
        } else if (key == "base_homes") {
            cfg.base_homes = static_cast<int>(parse_double(val, ctx));
        } else if (key == "days") {
            cfg.days = static_cast<int>(parse_double(val, ctx));
        } else if (key == "customers") {
            cfg.customers = static_cast<int>(parse_double(val, ctx));
        } else if (key == "slot_seconds") {
            cfg.slot_seconds = parse_double(val, ctx);
        } else if (key == "train_fraction") {
            cfg.train_fraction = parse_double(val, ctx);
        } else if (key == "predictor") {
            if (val == "periodic")
                cfg.predictor = Predictor::PeriodicMean;
            else if (val == "global")
                cfg.predictor = Predictor::GlobalMean;
            else
                throw ConfigError(ctx + ": predictor must be periodic or global");
        } else if (key == "capacity_price_usd_per_kw_mo") {
            cfg.capacity_price_usd_per_kw_mo = parse_double_list(val, ctx);
            cfg.capacity_price_specified = true;
        } else if (key == "wind_capacity_kw") {
            cfg.wind_capacity_kw = parse_double_list(val, ctx);
        } else if (key == "cost_rsd") {
            cfg.cost_rsd = parse_double_list(val, ctx);
        } else if (key == "a_coeff_lo_usd_per_kw2") {
            cfg.a_coeff_lo_usd_per_kw2 = parse_double(val, ctx);
        } else if (key == "a_coeff_hi_usd_per_kw2") {
            cfg.a_coeff_hi_usd_per_kw2 = parse_double(val, ctx);
        } else if (key == "A_usd_per_kw2") {
            cfg.A_usd_per_kw2 = parse_double(val, ctx);
        } else if (key == "policies") {
            cfg.policies = split_list(val);
            if (cfg.policies.empty()) throw ConfigError(ctx + ": empty policy list");
        } else if (key == "rho_grid") {
            cfg.rho_grid = parse_double_list(val, ctx);
        } else if (key == "audit_tolerance") {
            cfg.audit_tolerance = parse_double(val, ctx);
        } else if (key == "lin_mode") {
            if (val == "centralized")
                cfg.lin_mode = LinMode::Centralized;
            else if (val == "distributed")
                cfg.lin_mode = LinMode::Distributed;
            else
                throw ConfigError(ctx + ": lin_mode must be centralized or distributed");
        } else if (key == "seed") {
            try {
                cfg.seed = std::stoull(val);
            } catch (const std::exception&) {
                throw ConfigError(ctx + ": bad seed '" + val + "'");
            }
        } else if (key == "out_dir") {
            cfg.out_dir = val;
        } else if (key == "workers") {
            cfg.workers = static_cast<int>(parse_double(val, ctx));
        } else {
            throw ConfigError(ctx + ": unknown key '" + key + "'");
        }
    }

    if (cfg.base_homes < 1) throw ConfigError(path + ": base_homes must be >= 1");
    if (cfg.days < 2) throw ConfigError(path + ": need at least 2 days of data");
    if (cfg.customers < 1) throw ConfigError(path + ": customers must be >= 1");
    if (cfg.slot_seconds <= 0.0) throw ConfigError(path + ": slot_seconds must be > 0");
    if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0)
        throw ConfigError(path + ": train_fraction must lie in (0,1)");
    if (cfg.a_coeff_lo_usd_per_kw2 <= 0.0 ||
        cfg.a_coeff_hi_usd_per_kw2 <= cfg.a_coeff_lo_usd_per_kw2)
        throw ConfigError(path + ": need 0 < a_coeff_lo < a_coeff_hi");
    if (cfg.A_usd_per_kw2 <= 0.0) throw ConfigError(path + ": A must be > 0");
    for (double r : cfg.cost_rsd)
        if (r < 0.0) throw ConfigError(path + ": cost_rsd must be >= 0");
    for (double rho : cfg.rho_grid)
        if (rho < 0.0 || rho > 1.0) throw ConfigError(path + ": rho_grid entries must lie in [0,1]");
    if (cfg.workers < 1) throw ConfigError(path + ": workers must be >= 1");
    return cfg;
}

std::vector<Trace> generate_synthetic_homes(int count, int days, double slot_seconds,
                                            std::uint64_t seed) {
    const int spd = static_cast<int>(std::lround(86400.0 / slot_seconds));
    const int T = days * spd;
    std::vector<Trace> out;
    out.reserve(count);
    for (int b = 0; b < count; ++b) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double base = 0.8 + 1.2 * uni(rng);
        const double amp = 0.3 + 0.7 * uni(rng);
        const double phase = 2.0 * kPi * uni(rng);
        const double amp2 = amp * (0.1 + 0.2 * uni(rng));
        const double phase2 = 2.0 * kPi * uni(rng);
        const double sigma = 0.02 + 0.04 * uni(rng);
        const Eigen::VectorXd noise = ar1_noise(rng, T, 0.85, sigma);

        Trace tr;
        tr.source_id = "home" + std::to_string(b);
        tr.resolution_s = slot_seconds;
        tr.start_epoch_s = kEpochStart;
        tr.kw.resize(T);
        for (int t = 0; t < T; ++t) {
            const double tod = 2.0 * kPi * (t % spd) / spd;
            tr.kw[t] = std::max(0.0, base + amp * std::sin(tod + phase) +
                                         amp2 * std::sin(2.0 * tod + phase2) + noise[t]);
        }
        out.push_back(std::move(tr));
    }
    return out;
}

Trace generate_synthetic_wind(int days, double slot_seconds, std::uint64_t seed) {
    const int spd = static_cast<int>(std::lround(86400.0 / slot_seconds));
    const int T = days * spd;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double phase = 2.0 * kPi * uni(rng);
    const Eigen::VectorXd noise = ar1_noise(rng, T, 0.85, 0.08);

    Trace tr;
    tr.source_id = "wind";
    tr.resolution_s = slot_seconds;
    tr.start_epoch_s = kEpochStart;
    tr.kw.resize(T);
    for (int t = 0; t < T; ++t) {
        const double tod = 2.0 * kPi * (t % spd) / spd;
        tr.kw[t] = std::clamp(0.5 + 0.25 * std::sin(tod + phase) + noise[t], 0.0, 1.0);
    }
    const double peak = tr.kw.maxCoeff();
    if (peak > 0.0) tr.kw /= peak;
    return tr;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData data;
    data.slots_per_day = static_cast<int>(std::lround(86400.0 / cfg.slot_seconds));
    if (data.slots_per_day < 1) throw ConfigError("slot_seconds longer than a day");

    if (cfg.traces_csv.empty()) {
        data.base_traces = generate_synthetic_homes(cfg.base_homes, cfg.days, cfg.slot_seconds,
                                                    derive_seed(cfg.seed, 0x686f6d65ULL));
        data.renewable =
            generate_synthetic_wind(cfg.days, cfg.slot_seconds, derive_seed(cfg.seed, 0x77696e64ULL));
    } else {
        std::vector<Trace> traces;
        try {
            traces = load_traces_csv(cfg.traces_csv);
        } catch (const std::exception& e) {
            throw DataError(e.what());
        }
        bool found = false;
        for (auto& tr : traces) {
            if (tr.source_id == cfg.renewable_source_id) {
                data.renewable = std::move(tr);
                found = true;
            } else {
                data.base_traces.push_back(std::move(tr));
            }
        }
        if (!found)
            throw DataError(cfg.traces_csv + ": no source '" + cfg.renewable_source_id + "'");
        if (data.base_traces.empty()) throw DataError(cfg.traces_csv + ": no customer sources");
        const double peak = data.renewable.kw.maxCoeff();
        if (peak > 0.0) data.renewable.kw /= peak;
    }

    const int bases = static_cast<int>(data.base_traces.size());
    if (cfg.customers % bases != 0)
        throw ConfigError("customers (" + std::to_string(cfg.customers) +
                          ") must be a multiple of the base trace count (" + std::to_string(bases) +
                          ")");
    std::vector<Trace> customers =
        bootstrap_customers(data.base_traces, cfg.customers / bases,
                            derive_seed(cfg.seed, 0x626f6f74ULL), data.slots_per_day);

    int T = data.renewable.slots();
    for (const auto& tr : customers) T = std::min(T, tr.slots());
    const int T_train = static_cast<int>(std::floor(T * cfg.train_fraction));
    const int T_test = T - T_train;
    if (T_train < data.slots_per_day || T_test < 1)
        throw DataError("training window shorter than one predictor period");

    const int N = static_cast<int>(customers.size());
    data.customer_errors_train.resize(T_train, N);
    data.customer_errors_test.resize(T_test, N);
    auto fit_and_split = [&](const Trace& tr, Eigen::Ref<Eigen::VectorXd> train_col,
                             Eigen::Ref<Eigen::VectorXd> test_col) {
        Trace head = tr;
        head.kw = tr.kw.head(T_train);
        Eigen::VectorXd profile;
        if (cfg.predictor == Predictor::PeriodicMean) {
            profile = fit_periodic_profile(head, data.slots_per_day);
        } else {
            profile.resize(1);
            profile[0] = head.kw.mean();
        }
        Trace full = tr;
        full.kw = tr.kw.head(T);
        const ErrorSeries es = prediction_errors_with_profile(full, profile);
        train_col = es.errors.head(T_train);
        test_col = es.errors.tail(T_test);
    };
    for (int i = 0; i < N; ++i)
        fit_and_split(customers[i], data.customer_errors_train.col(i),
                      data.customer_errors_test.col(i));
    data.renewable_errors_train.resize(T_train);
    data.renewable_errors_test.resize(T_test);
    fit_and_split(data.renewable, data.renewable_errors_train, data.renewable_errors_test);
    return data;
}

double capacity_price_per_slot(double c_usd_per_kw_mo, double slot_seconds) {
    return c_usd_per_kw_mo / (30.0 * 86400.0 / slot_seconds);
}

double annualize(double cost_per_slot, double slot_seconds) {
    return cost_per_slot * (31557600.0 / slot_seconds);
}

PointSets build_point_sets(const ExperimentConfig& cfg, const PreparedData& data,
                           double c_mo, double wind_kw, double rsd) {
    const int T_train = static_cast<int>(data.customer_errors_train.rows());
    const int T_test = static_cast<int>(data.customer_errors_test.rows());
    const int N = static_cast<int>(data.customer_errors_train.cols());

    const CostDraws cd = sample_cost_coeffs(N, cfg.a_coeff_lo_usd_per_kw2,
                                            cfg.a_coeff_hi_usd_per_kw2, rsd,
                                            std::max(T_train, T_test),
                                            derive_seed(cfg.seed, 0x636f7374ULL));

    PointSets ps;
    ps.train = assemble_scenarios(data.customer_errors_train, data.renewable_errors_train,
                                  cd.train.topRows(T_train), cd.a_hat, cd.a_tilde, wind_kw);
    ps.test = assemble_scenarios(data.customer_errors_test, data.renewable_errors_test,
                                 cd.test.topRows(T_test), cd.a_hat, cd.a_tilde, wind_kw);
    ps.cost.A = cfg.A_usd_per_kw2;
    ps.cost.c_slot = capacity_price_per_slot(c_mo, cfg.slot_seconds);
    return ps;
}

namespace {

MetricRow make_row(const ExperimentConfig& cfg, const std::string& policy, double c_mo,
                   double wind_kw, double rsd, double rho, const PolicySim& sim,
                   const Eigen::VectorXd& D, double c_slot) {
    MetricRow row;
    row.policy = policy;
    row.c_usd_per_kw_mo = c_mo;
    row.wind_kw = wind_kw;
    row.rsd = rsd;
    row.rho = rho;
    row.social_cost_usd_yr = annualize(sim.mean_total_cost(c_slot), cfg.slot_seconds);
    row.kappa_kw = sim.kappa;
    row.dr_norm = sim.dr_norm(D);
    row.leftover_norm = sim.leftover_norm(D);
    row.exceedance_rate = sim.exceedance_rate();
    return row;
}

}  // namespace

std::vector<MetricRow> run_point(const ExperimentConfig& cfg, const PreparedData& data,
                                 double c_mo, double wind_kw, double rsd) {
    const PointSets ps = build_point_sets(cfg, data, c_mo, wind_kw, rsd);
    const double c_slot = ps.cost.c_slot;

    // LIN is fitted at most once even when both lin and lin-plus run.
    bool lin_fitted = false;
    LinearContract lin_contract;
    auto fit_lin = [&]() {
        if (lin_fitted) return;
        if (cfg.lin_mode == LinMode::Centralized) {
            lin_contract = solve_lin_centralized(ps.train, ps.cost).contract;
        } else {
            const NegotiationResult nr = negotiate(ps.train, ps.cost);
            if (!nr.converged)
                throw ConvergenceError("distributed contract negotiation did not converge "
                                       "(residual " +
                                       std::to_string(nr.residual) + ")");
            lin_contract = nr.contract;
        }
        lin_fitted = true;
    };

    std::vector<MetricRow> rows;
    for (const std::string& policy : cfg.policies) {
        if (policy == "opt") {
            const OptSolution sol = solve_opt(ps.test, ps.cost);
            PolicySim sim;
            sim.kappa = sol.plan.kappa;
            const int T = ps.test.slots();
            sim.cost.resize(T);
            sim.leftover.resize(T);
            sim.dr_total.resize(T);
            for (int t = 0; t < T; ++t) {
                const DispatchResult& r = sol.dispatches[t];
                sim.cost[t] = realized_social_cost(r, ps.test.scenario(t).a, ps.cost.A);
                sim.leftover[t] = r.delta;
                sim.dr_total[t] = r.x.sum();
            }
            rows.push_back(make_row(cfg, policy, c_mo, wind_kw, rsd, 1.0, sim, ps.test.D, c_slot));
        } else if (policy == "seq") {
            const double kappa =
                std::max(worst_case_kappa(ps.train), worst_case_kappa(ps.test));
            const PriceRule rule = price_rule(ps.train.a_hat, ps.cost.A, kappa);
            const PolicySim sim = simulate_pred(rule, ps.test);
            rows.push_back(make_row(cfg, policy, c_mo, wind_kw, rsd, 1.0, sim, ps.test.D, c_slot));
        } else if (policy == "pred") {
            const PredSolution sol = solve_pred(ps.train, ps.cost);
            const PolicySim sim = simulate_pred(sol.rule, ps.test);
            rows.push_back(make_row(cfg, policy, c_mo, wind_kw, rsd, 1.0, sim, ps.test.D, c_slot));
        } else if (policy == "lin") {
            fit_lin();
            const PolicySim sim = simulate_lin(lin_contract, ps.test, ps.cost);
            rows.push_back(make_row(cfg, policy, c_mo, wind_kw, rsd, 1.0, sim, ps.test.D, c_slot));
        } else if (policy == "lin-plus") {
            fit_lin();
            for (double rho : cfg.rho_grid) {
                FlexParams params;
                params.rho = rho;
                params.audit_tolerance = cfg.audit_tolerance;
                const FlexSim fs = simulate_lin_plus(lin_contract, params, ps.test, ps.cost);
                rows.push_back(
                    make_row(cfg, policy, c_mo, wind_kw, rsd, rho, fs.sim, ps.test.D, c_slot));
            }
        } else {
            throw ConfigError("unknown policy '" + policy + "'");
        }
    }
    return rows;
}

std::vector<MetricRow> run_experiment(const ExperimentConfig& cfg) {
    const PreparedData data = prepare_data(cfg);

    struct Point {
        double c, wind, rsd;
    };
    std::vector<Point> grid;
    for (double c : cfg.capacity_price_usd_per_kw_mo)
        for (double w : cfg.wind_capacity_kw)
            for (double r : cfg.cost_rsd) grid.push_back({c, w, r});

    std::vector<std::vector<MetricRow>> per_point(grid.size());
    const int workers = std::min<int>(cfg.workers, static_cast<int>(grid.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            per_point[i] = run_point(cfg, data, grid[i].c, grid[i].wind, grid[i].rsd);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                try {
                    for (std::size_t i = next.fetch_add(1); i < grid.size();
                         i = next.fetch_add(1))
                        per_point[i] = run_point(cfg, data, grid[i].c, grid[i].wind, grid[i].rsd);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    std::vector<MetricRow> rows;
    for (auto& pr : per_point)
        for (auto& row : pr) rows.push_back(std::move(row));
    return rows;
}

void emit_results(const std::vector<MetricRow>& rows, const std::string& path) {
    std::vector<MetricRow> sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const MetricRow& a, const MetricRow& b) {
        return std::tie(a.policy, a.c_usd_per_kw_mo, a.wind_kw, a.rsd, a.rho) <
               std::tie(b.policy, b.c_usd_per_kw_mo, b.wind_kw, b.rsd, b.rho);
    });

    std::ofstream out(path);
    if (!out) throw DataError("cannot write results: " + path);
    out << "policy,c_usd_per_kw_mo,wind_kw,rsd,rho,social_cost_usd_yr,kappa_kw,dr_norm,"
           "leftover_norm,exceedance_rate\n";
    char buf[512];
    for (const auto& r : sorted) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      r.policy.c_str(), r.c_usd_per_kw_mo, r.wind_kw, r.rsd, r.rho,
                      r.social_cost_usd_yr, r.kappa_kw, r.dr_norm, r.leftover_norm,
                      r.exceedance_rate);
        out << buf;
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<MetricRow> load_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open results: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        trim(line) !=
            "policy,c_usd_per_kw_mo,wind_kw,rsd,rho,social_cost_usd_yr,kappa_kw,dr_norm,"
            "leftover_norm,exceedance_rate")
        throw DataError(path + ": bad results header");

    std::vector<MetricRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        const auto fields = split_list(line);
        if (fields.size() != 10)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 10 fields");
        MetricRow r;
        r.policy = fields[0];
        const std::string ctx = path + ":" + std::to_string(lineno);
        double* dst[9] = {&r.c_usd_per_kw_mo, &r.wind_kw,       &r.rsd,
                          &r.rho,             &r.social_cost_usd_yr, &r.kappa_kw,
                          &r.dr_norm,         &r.leftover_norm, &r.exceedance_rate};
        for (int i = 0; i < 9; ++i) {
            try {
                *dst[i] = std::stod(fields[i + 1]);
            } catch (const std::exception&) {
                throw DataError(ctx + ": bad number '" + fields[i + 1] + "'");
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace drcap
