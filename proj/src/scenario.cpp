#include "drcap/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace drcap {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::int64_t kSecsPerDay = 86400;

// days since 1970-01-01 (Howard Hinnant's civil-days algorithm)
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

std::int64_t parse_iso8601_utc(const std::string& s, int row) {
    int y, mo, d, h, mi, sec;
    char tz;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &sec, &tz) != 7 ||
        tz != 'Z') {
        throw std::runtime_error("trace csv row " + std::to_string(row) +
                                 ": bad ISO-8601 UTC timestamp '" + s + "'");
    }
    return days_from_civil(y, mo, d) * kSecsPerDay + h * 3600 + mi * 60 + sec;
}

std::string format_iso8601_utc(std::int64_t t) {
    std::int64_t days = t / kSecsPerDay;
    std::int64_t rem = t - days * kSecsPerDay;
    if (rem < 0) { rem += kSecsPerDay; --days; }
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return buf;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ stream);
}

std::vector<Trace> load_traces_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace csv: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace csv: " + path);
    if (line.rfind("timestamp,source_id,kw", 0) != 0)
        throw std::runtime_error("trace csv " + path + ": expected header timestamp,source_id,kw");

    std::map<std::string, std::vector<std::pair<std::int64_t, double>>> rows;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string ts, id, kw;
        if (!std::getline(ss, ts, ',') || !std::getline(ss, id, ',') || !std::getline(ss, kw))
            throw std::runtime_error("trace csv row " + std::to_string(row) + ": malformed line");
        double v;
        try {
            v = std::stod(kw);
        } catch (const std::exception&) {
            throw std::runtime_error("trace csv row " + std::to_string(row) + ": bad kw value '" + kw + "'");
        }
        if (!std::isfinite(v) || v < 0.0)
            throw std::runtime_error("trace csv row " + std::to_string(row) +
                                     ": kw must be finite and >= 0");
        rows[id].emplace_back(parse_iso8601_utc(ts, row), v);
    }

    std::vector<Trace> out;
    for (auto& [id, samples] : rows) {
        std::sort(samples.begin(), samples.end());
        if (samples.size() < 2)
            throw std::runtime_error("trace csv " + path + ": source '" + id +
                                     "' needs at least 2 samples");
        Trace tr;
        tr.source_id = id;
        tr.start_epoch_s = samples.front().first;
        tr.resolution_s = static_cast<double>(samples[1].first - samples[0].first);
        if (!(tr.resolution_s > 0))
            throw std::runtime_error("trace csv " + path + ": duplicate timestamps in '" + id + "'");
        tr.kw.resize(static_cast<Eigen::Index>(samples.size()));
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const std::int64_t expect = tr.start_epoch_s + static_cast<std::int64_t>(k * tr.resolution_s);
            if (samples[k].first != expect)
                throw std::runtime_error("trace csv " + path + ": source '" + id +
                                         "' has a gap or irregular spacing at sample " +
                                         std::to_string(k));
            tr.kw[static_cast<Eigen::Index>(k)] = samples[k].second;
        }
        out.push_back(std::move(tr));
    }
    return out;
}

void save_traces_csv(const std::string& path, const std::vector<Trace>& traces) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace csv: " + path);
    out << "timestamp,source_id,kw\n";
    char buf[64];
    for (const auto& tr : traces) {
        for (int k = 0; k < tr.slots(); ++k) {
            const std::int64_t t = tr.start_epoch_s + static_cast<std::int64_t>(k * tr.resolution_s);
            std::snprintf(buf, sizeof buf, "%.9g", tr.kw[k]);
            out << format_iso8601_utc(t) << ',' << tr.source_id << ',' << buf << '\n';
        }
    }
}

Eigen::VectorXd fit_periodic_profile(const Trace& trace, int slots_per_day) {
    if (trace.slots() < slots_per_day)
        throw std::runtime_error("periodic predictor needs at least one full day of samples");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(slots_per_day);
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(slots_per_day);
    for (int t = 0; t < trace.slots(); ++t) {
        sum[t % slots_per_day] += trace.kw[t];
        cnt[t % slots_per_day] += 1.0;
    }
    return sum.array() / cnt.array();
}

ErrorSeries prediction_errors_with_profile(const Trace& trace, const Eigen::VectorXd& profile) {
    const int period = static_cast<int>(profile.size());
    ErrorSeries es;
    es.predicted.resize(trace.slots());
    for (int t = 0; t < trace.slots(); ++t) es.predicted[t] = profile[t % period];
    es.errors = trace.kw - es.predicted;
    es.lo = es.errors.minCoeff();
    es.hi = es.errors.maxCoeff();
    return es;
}

ErrorSeries build_prediction_errors(const Trace& trace, Predictor predictor, int slots_per_day) {
    if (trace.slots() == 0) throw std::runtime_error("empty trace");
    if (predictor == Predictor::GlobalMean) {
        Eigen::VectorXd profile(1);
        profile[0] = trace.kw.mean();
        return prediction_errors_with_profile(trace, profile);
    }
    return prediction_errors_with_profile(trace, fit_periodic_profile(trace, slots_per_day));
}

std::vector<Trace> bootstrap_customers(const std::vector<Trace>& base_traces,
                                       int count_per_base, std::uint64_t seed,
                                       int block_slots) {
    if (base_traces.empty()) throw std::invalid_argument("bootstrap: empty base trace set");
    if (count_per_base < 1) throw std::invalid_argument("bootstrap: count_per_base must be >= 1");
    if (block_slots < 1) throw std::invalid_argument("bootstrap: block_slots must be >= 1");

    std::vector<Trace> out;
    out.reserve(base_traces.size() * static_cast<std::size_t>(count_per_base));
    for (std::size_t b = 0; b < base_traces.size(); ++b) {
        const Trace& base = base_traces[b];
        const int T = base.slots();
        const int nblocks = T / block_slots;  // whole blocks only
        if (nblocks < 1)
            throw std::invalid_argument("bootstrap: trace '" + base.source_id +
                                        "' shorter than one block");
        for (int c = 0; c < count_per_base; ++c) {
            std::mt19937_64 rng(derive_seed(seed, (b << 20) + static_cast<std::uint64_t>(c)));
            std::uniform_int_distribution<int> pick(0, nblocks - 1);
            Trace tr;
            tr.source_id = base.source_id + "#" + std::to_string(c);
            tr.resolution_s = base.resolution_s;
            tr.start_epoch_s = base.start_epoch_s;
            tr.kw.resize(T);
            int t = 0;
            while (t < T) {
                const int blk = pick(rng);
                const int len = std::min(block_slots, T - t);
                tr.kw.segment(t, len) = base.kw.segment(blk * block_slots, len);
                t += len;
            }
            out.push_back(std::move(tr));
        }
    }
    return out;
}

namespace {

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
    if (sd <= 0.0) return std::clamp(mean, lo, hi);
    std::normal_distribution<double> n(mean, sd);
    for (int k = 0; k < 1000; ++k) {
        const double v = n(rng);
        if (v >= lo && v <= hi) return v;
    }
    throw std::runtime_error("truncated normal: rejection cap exceeded (bounds too tight)");
}

}  // namespace

CostDraws sample_cost_coeffs(int n, double lo, double hi, double rsd, int set_size,
                             std::uint64_t seed) {
    if (!(lo > 0.0)) throw std::invalid_argument("cost coeffs: lower bound must be > 0");
    if (!(hi > lo)) throw std::invalid_argument("cost coeffs: need hi > lo");
    if (rsd < 0.0) throw std::invalid_argument("cost coeffs: rsd must be >= 0");
    if (n < 1 || set_size < 1) throw std::invalid_argument("cost coeffs: n and set_size must be >= 1");

    CostDraws cd;
    cd.a_tilde.resize(n);
    std::mt19937_64 mean_rng(derive_seed(seed, 0x6d65616eULL));
    const double mid = 0.5 * (lo + hi);
    const double spread = 0.25 * (hi - lo);  // bounded-normal width for the latent means
    for (int i = 0; i < n; ++i) cd.a_tilde[i] = truncated_normal(mean_rng, mid, spread, lo, hi);

    auto fill = [&](Eigen::MatrixXd& m, std::uint64_t stream) {
        m.resize(set_size, n);
        for (int i = 0; i < n; ++i) {
            std::mt19937_64 rng(derive_seed(seed, stream + static_cast<std::uint64_t>(i)));
            for (int t = 0; t < set_size; ++t)
                m(t, i) = truncated_normal(rng, cd.a_tilde[i], rsd * cd.a_tilde[i], lo, hi);
        }
    };
    fill(cd.train, 0x1000000ULL);
    fill(cd.test, 0x2000000ULL);
    cd.a_hat = cd.train.colwise().mean();
    return cd;
}

Scenario ScenarioSet::scenario(int t) const {
    Scenario s;
    s.delta = delta.row(t);
    s.delta_r = delta_r[t];
    s.a = a.row(t);
    s.D = D[t];
    return s;
}

ScenarioSet assemble_scenarios(const Eigen::MatrixXd& customer_errors,
                               const Eigen::VectorXd& renewable_errors,
                               const Eigen::MatrixXd& cost_coeffs,
                               const Eigen::VectorXd& a_hat,
                               const Eigen::VectorXd& a_tilde,
                               double wind_capacity) {
    const Eigen::Index T = customer_errors.rows();
    const Eigen::Index N = customer_errors.cols();
    if (renewable_errors.size() != T || cost_coeffs.rows() != T || cost_coeffs.cols() != N ||
        a_hat.size() != N)
        throw std::invalid_argument("assemble_scenarios: misaligned slot counts or customer counts");

    ScenarioSet s;
    s.delta = customer_errors;
    s.delta_r = renewable_errors * wind_capacity;
    s.a = cost_coeffs;
    s.D = s.delta.rowwise().sum() - s.delta_r;
    s.a_hat = a_hat;
    s.a_tilde = a_tilde;

    Eigen::MatrixXd psi(T, N + 1);
    psi.leftCols(N) = s.delta;
    psi.col(N) = s.delta_r;
    s.mean = psi.colwise().mean();
    s.second_moment = psi.transpose() * psi / static_cast<double>(T);
    s.lo = psi.colwise().minCoeff();
    s.hi = psi.colwise().maxCoeff();
    return s;
}

void save_scenario_set_csv(const std::string& path, const ScenarioSet& set) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario csv: " + path);
    out << "slot,customer_id,delta_kw,a_coeff\n";
    char b1[64], b2[64];
    for (int t = 0; t < set.slots(); ++t) {
        for (int i = 0; i < set.customers(); ++i) {
            std::snprintf(b1, sizeof b1, "%.9g", set.delta(t, i));
            std::snprintf(b2, sizeof b2, "%.9g", set.a(t, i));
            out << t << ',' << i << ',' << b1 << ',' << b2 << '\n';
        }
        std::snprintf(b1, sizeof b1, "%.9g", set.delta_r[t]);
        std::snprintf(b2, sizeof b2, "%.9g", set.D[t]);
        out << t << ",_system," << b1 << ',' << b2 << '\n';
    }
}

}  // namespace drcap
