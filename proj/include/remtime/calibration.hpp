#pragma once

#include <ostream>
#include <span>
#include <vector>

#include "remtime/inference.hpp"

namespace remtime::calibration {

std::vector<double> default_levels();  // 0.50, 0.75, 0.90, 0.95, 0.99

/// A realized target with its prediction.
struct Observation {
    double target = 0.0;
    double mean = 0.0;
    double total_std = 0.0;
};

std::vector<Observation> observations(std::span<const double> targets,
                                      std::span<const inference::UncertaintyEstimate> estimates);

struct CriticalValueTable {
    std::vector<double> levels;  // strictly increasing, in (0, 1)
    std::vector<double> z;       // one per level
    std::size_t window = 0;      // observations the table was fitted on
    std::size_t as_of = 0;       // stream index of the first observation after the window

    double z_at(double level) const;
};

/// z*(level) is the level-quantile (linear interpolation) of |y - mean| / total_std.
CriticalValueTable fit_critical_values(std::span<const Observation> window, std::span<const double> levels,
                                       std::size_t as_of = 0);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    bool clamped = false;  // lower bound raised to 0
};

struct IntervalPrediction {
    double mean = 0.0;
    std::vector<Interval> intervals;  // one per table level
    bool clamped = false;
};

IntervalPrediction build_interval(double mean, double total_std, const CriticalValueTable& table);
std::vector<IntervalPrediction> build_intervals(std::span<const inference::UncertaintyEstimate> estimates,
                                                const CriticalValueTable& table);

/// Share of observations whose target lies inside the interval, per level.
std::vector<double> coverage(std::span<const Observation> window, const CriticalValueTable& table);

struct RollingOptions {
    std::size_t window = 5000;
    std::size_t stride = 1000;
    std::vector<double> levels = default_levels();
    /// First recalibration position; 0 means `window`. Observations before it
    /// serve only as fitting history (e.g. the tail of the training split).
    std::size_t start = 0;
};

struct RollingPoint {
    CriticalValueTable table;
    std::vector<double> coverage;  // on the following `window` observations (fewer at the end)
    std::size_t evaluated = 0;
};

/// Tables at positions start, start + stride, ... (< n), each fitted on the
/// preceding `window` observations.
std::vector<RollingPoint> rolling_calibrate(std::span<const Observation> stream, const RollingOptions& options);

/// CSV: as_of, level, z, coverage.
void write_calibration(std::ostream& os, std::span<const RollingPoint> series);

}  // namespace remtime::calibration
