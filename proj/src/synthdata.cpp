#include "remtime/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "remtime/csv.hpp"
#include "remtime/errors.hpp"
#include "remtime/random.hpp"

namespace remtime::synth {

void Regression1dSpec::validate() const {
    if (n < 1) throw ParameterError("synthdata", "n must be >= 1");
    if (!(sigma >= 0.0)) throw ParameterError("synthdata", "sigma must be >= 0");
    if (!(x_min < x_max)) throw ParameterError("synthdata", "x range is empty");
}

double regression_mean(double x) { return std::sin(x); }

double regression_sigma(const Regression1dSpec& spec, double x) {
    if (spec.noise == NoiseProfile::homoscedastic) return spec.sigma;
    return 0.1 + 0.2 * (1.0 + std::sin(x));
}

Regression1dData gen_regression1d(const Regression1dSpec& spec) {
    spec.validate();
    Rng rng = make_rng(spec.seed);
    std::uniform_real_distribution<double> ux(spec.x_min, spec.x_max);
    std::normal_distribution<double> noise(0.0, 1.0);
    Regression1dData d;
    d.x.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = ux(rng);
        const double s = regression_sigma(spec, x);
        const double z = noise(rng);
        d.x.push_back(x);
        d.sigma.push_back(s);
        d.y.push_back(s == 0.0 ? regression_mean(x) : regression_mean(x) + s * z);
    }
    return d;
}

std::vector<double> grid(std::size_t n, double lo, double hi) {
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = 0.5 * (lo + hi);
        return g;
    }
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return g;
}

nn::Batch regression_batch(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("synthdata", "x/y length mismatch");
    nn::Batch b;
    b.size = x.size();
    b.seq_len = 1;
    b.n_cat = 0;
    b.n_num = 1;
    b.numeric = x;
    b.targets = y;
    return b;
}

void EventLogSpec::validate() const {
    if (n_cases < 1) throw ParameterError("synthdata", "n_cases must be >= 1");
    if (!(duration_cv >= 0.0)) throw ParameterError("synthdata", "duration_cv must be >= 0");
    if (!(routing_noise >= 0.0 && routing_noise <= 1.0)) throw ParameterError("synthdata", "routing_noise must be in [0, 1]");
    if (!(mean_interarrival_hours > 0.0)) throw ParameterError("synthdata", "mean_interarrival_hours must be > 0");
    if (!(drift_factor > 0.0)) throw ParameterError("synthdata", "drift_factor must be > 0");
}

namespace {

const std::array<const char*, 8> kActivities{"register", "check_docs", "assess", "review",
                                             "approve",  "escalate",   "notify", "archive"};

struct CaseType {
    const char* channel;
    double share;
    double cv_multiplier;
    std::vector<std::size_t> path;  // activity indices, all distinct
    std::vector<double> hours;      // mean time spent after each path position
};

const std::vector<CaseType>& case_types() {
    static const std::vector<CaseType> types{
        {"web", 0.5, 0.25, {0, 1, 4, 6}, {2, 8, 4, 3}},
        {"branch", 0.3, 1.0, {0, 2, 3, 4, 7}, {6, 24, 12, 6, 4}},
        {"phone", 0.2, 1.75, {0, 1, 2, 5, 3, 4, 6}, {1, 10, 20, 30, 12, 8, 5}},
    };
    return types;
}

// Transition matrix over path positions; the missing mass of each row is the
// probability of ending the case there.
std::vector<std::vector<double>> transitions(const CaseType& t, double eps) {
    const std::size_t m = t.path.size();
    std::vector<std::vector<double>> p(m, std::vector<double>(m, eps / static_cast<double>(m)));
    for (std::size_t j = 0; j + 1 < m; ++j) p[j][j + 1] += 1.0 - eps;
    return p;
}

// Solves (I - P) x = b by Gaussian elimination with partial pivoting.
std::vector<double> solve_absorbing(const std::vector<std::vector<double>>& p, std::vector<double> b) {
    const std::size_t m = p.size();
    std::vector<std::vector<double>> a(m, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - p[i][j];
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < m; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < m; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < m; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(m);
    for (std::size_t i = m; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < m; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

struct TypeTruth {
    std::vector<double> mean_hours;
    std::vector<double> sd_hours;
};

TypeTruth type_truth(const CaseType& t, double eps, double cv) {
    const auto p = transitions(t, eps);
    const std::size_t m = p.size();
    std::vector<double> b1(m);
    for (std::size_t j = 0; j < m; ++j) b1[j] = std::accumulate(p[j].begin(), p[j].end(), 0.0) * t.hours[j];
    const auto e = solve_absorbing(p, b1);
    std::vector<double> b2(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double mu = t.hours[j];
        for (std::size_t k = 0; k < m; ++k) b2[j] += p[j][k] * (mu * mu * (1.0 + cv * cv) + 2.0 * mu * e[k]);
    }
    const auto s = solve_absorbing(p, b2);
    TypeTruth tt{e, std::vector<double>(m)};
    for (std::size_t j = 0; j < m; ++j) tt.sd_hours[j] = std::sqrt(std::max(0.0, s[j] - e[j] * e[j]));
    return tt;
}

struct GenEvent {
    std::size_t case_index;
    std::size_t event_index;
    EpochSeconds ts;
    std::string activity;
    std::string channel;
    double amount;
    double expected_days;
    double sd_days;
};

}  // namespace

SyntheticLog gen_eventlog(const EventLogSpec& spec) {
    spec.validate();
    const auto& types = case_types();
    std::vector<TypeTruth> truths;
    for (const auto& t : types) truths.push_back(type_truth(t, spec.routing_noise, spec.duration_cv * t.cv_multiplier));

    Rng rng = make_rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> arrival(1.0 / (spec.mean_interarrival_hours * 3600.0));
    std::lognormal_distribution<double> amount_dist(std::log(500.0), 0.8);

    const EpochSeconds origin = parse_timestamp("2020-01-01T00:00:00Z");
    double clock = 0.0;
    std::vector<GenEvent> events;
    std::vector<EpochSeconds> case_end(spec.n_cases);
    for (std::size_t c = 0; c < spec.n_cases; ++c) {
        clock += arrival(rng);
        const double u = unif(rng);
        std::size_t ti = 0;
        for (double acc = types[0].share; ti + 1 < types.size() && u >= acc; acc += types[++ti].share) {}
        const CaseType& type = types[ti];
        const double cv = spec.duration_cv * type.cv_multiplier;
        const double factor = spec.drift && c >= spec.n_cases / 2 ? spec.drift_factor : 1.0;
        const auto p = transitions(type, spec.routing_noise);
        const double amount = std::round(amount_dist(rng) * 100.0) / 100.0;

        EpochSeconds t = origin + static_cast<EpochSeconds>(std::llround(clock));
        std::size_t pos = 0;
        for (std::size_t k = 0;; ++k) {
            events.push_back(GenEvent{c, k, t, kActivities[type.path[pos]], type.channel, amount,
                                      factor * truths[ti].mean_hours[pos] / 24.0,
                                      factor * truths[ti].sd_hours[pos] / 24.0});
            // choose the next position or the end
            double r = unif(rng);
            std::size_t next = p.size();
            for (std::size_t j = 0; j < p.size(); ++j) {
                if (r < p[pos][j]) {
                    next = j;
                    break;
                }
                r -= p[pos][j];
            }
            if (next == p.size()) break;
            const double mu = type.hours[pos] * 3600.0 * factor;
            double d = mu;
            if (cv > 0.0) {
                const double shape = 1.0 / (cv * cv);
                std::gamma_distribution<double> g(shape, mu / shape);
                d = g(rng);
            }
            t += static_cast<EpochSeconds>(std::llround(d));
            pos = next;
        }
        case_end[c] = t;
    }

    std::stable_sort(events.begin(), events.end(), [](const GenEvent& a, const GenEvent& b) {
        if (a.ts != b.ts) return a.ts < b.ts;
        if (a.case_index != b.case_index) return a.case_index < b.case_index;
        return a.event_index < b.event_index;
    });

    SyntheticLog out;
    out.schema.categorical = {"channel"};
    out.schema.numeric = {"amount"};
    std::ostringstream os;
    csv::write_row(os, {"case_id", "activity", "timestamp", "channel", "amount"});
    for (const auto& e : events) {
        char id[32];
        std::snprintf(id, sizeof id, "case-%06zu", e.case_index + 1);
        csv::write_row(os, {id, e.activity, format_timestamp(e.ts) + "Z", e.channel, csv::format_double(e.amount)});
        out.truth.push_back(EventTruth{id, e.event_index, e.expected_days, e.sd_days,
                                       static_cast<double>(case_end[e.case_index] - e.ts) / kSecondsPerDay});
    }
    out.csv = os.str();
    return out;
}

void write_truth_csv(const std::vector<EventTruth>& truth, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("synthdata", "cannot write " + path.string());
    csv::write_row(os, {"case_id", "event_index", "expected_remaining_days", "remaining_sd_days",
                        "actual_remaining_days"});
    for (const auto& t : truth) {
        csv::write_row(os, {t.case_id, std::to_string(t.event_index), csv::format_double(t.expected_remaining_days),
                            csv::format_double(t.remaining_sd_days), csv::format_double(t.actual_remaining_days)});
    }
}

}  // namespace remtime::synth
