#include "remtime/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "remtime/csv.hpp"
#include "remtime/errors.hpp"
#include "remtime/stats.hpp"

namespace remtime::calibration {

std::vector<double> default_levels() { return {0.50, 0.75, 0.90, 0.95, 0.99}; }

std::vector<Observation> observations(std::span<const double> targets,
                                      std::span<const inference::UncertaintyEstimate> estimates) {
    if (targets.size() != estimates.size()) throw ContractError("calibration", "targets and estimates differ in length");
    std::vector<Observation> out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) out[i] = {targets[i], estimates[i].mean, estimates[i].total_std};
    return out;
}

namespace {

void check_levels(std::span<const double> levels) {
    if (levels.empty()) throw ContractError("calibration", "no confidence levels");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0 && levels[i] < 1.0)) throw ContractError("calibration", "confidence level outside (0, 1)");
        if (i > 0 && !(levels[i] > levels[i - 1])) throw ContractError("calibration", "confidence levels must increase");
    }
}

}  // namespace

double CriticalValueTable::z_at(double level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (levels[i] == level) return z[i];
    throw ContractError("calibration", "level not in table");
}

CriticalValueTable fit_critical_values(std::span<const Observation> window, std::span<const double> levels,
                                       std::size_t as_of) {
    if (window.empty()) throw ContractError("calibration", "empty calibration window");
    check_levels(levels);
    std::vector<double> r(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) {
        const auto& o = window[i];
        if (!(o.total_std > 0.0) || !std::isfinite(o.total_std)) {
            throw ContractError("calibration", "total_std must be positive and finite");
        }
        r[i] = std::abs(o.target - o.mean) / o.total_std;
    }
    std::sort(r.begin(), r.end());
    CriticalValueTable t;
    t.levels.assign(levels.begin(), levels.end());
    t.window = window.size();
    t.as_of = as_of;
    for (double q : levels) t.z.push_back(stats::quantile(r, q));
    return t;
}

IntervalPrediction build_interval(double mean, double total_std, const CriticalValueTable& table) {
    if (table.levels.empty()) throw ContractError("calibration", "table has no levels");
    IntervalPrediction p;
    p.mean = mean;
    for (double z : table.z) {
        Interval iv{mean - z * total_std, mean + z * total_std, false};
        if (iv.lower < 0.0) {
            iv.lower = 0.0;
            iv.clamped = true;
            p.clamped = true;
        }
        p.intervals.push_back(iv);
    }
    return p;
}

std::vector<IntervalPrediction> build_intervals(std::span<const inference::UncertaintyEstimate> estimates,
                                                const CriticalValueTable& table) {
    std::vector<IntervalPrediction> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) out.push_back(build_interval(e.mean, e.total_std, table));
    return out;
}

std::vector<double> coverage(std::span<const Observation> window, const CriticalValueTable& table) {
    if (window.empty()) throw ContractError("calibration", "empty evaluation window");
    std::vector<double> hits(table.levels.size(), 0.0);
    for (const auto& o : window) {
        const auto p = build_interval(o.mean, o.total_std, table);
        for (std::size_t k = 0; k < hits.size(); ++k)
            if (o.target >= p.intervals[k].lower && o.target <= p.intervals[k].upper) hits[k] += 1.0;
    }
    for (double& h : hits) h /= static_cast<double>(window.size());
    return hits;
}

std::vector<RollingPoint> rolling_calibrate(std::span<const Observation> stream, const RollingOptions& options) {
    if (options.window == 0 || options.stride == 0) throw ContractError("calibration", "window and stride must be >= 1");
    const std::size_t start = options.start == 0 ? options.window : options.start;
    if (start < options.window) throw ContractError("calibration", "start leaves less than one window of history");
    const std::size_t n = stream.size();
    if (n < start + options.stride) {
        throw ContractError("calibration", "stream of " + std::to_string(n) + " is shorter than window + stride (" +
                                               std::to_string(start + options.stride) + ")");
    }
    std::vector<RollingPoint> series;
    for (std::size_t q = start; q < n; q += options.stride) {
        RollingPoint pt;
        pt.table = fit_critical_values(stream.subspan(q - options.window, options.window), options.levels, q);
        const std::size_t end = std::min(n, q + options.window);
        pt.coverage = coverage(stream.subspan(q, end - q), pt.table);
        pt.evaluated = end - q;
        series.push_back(std::move(pt));
    }
    return series;
}

void write_calibration(std::ostream& os, std::span<const RollingPoint> series) {
    os << "as_of,level,z,coverage\n";
    for (const auto& p : series) {
        for (std::size_t k = 0; k < p.table.levels.size(); ++k) {
            csv::write_row(os, {std::to_string(p.table.as_of), csv::format_double(p.table.levels[k]),
                                csv::format_double(p.table.z[k]), csv::format_double(p.coverage[k])});
        }
    }
}

}  // namespace remtime::calibration
