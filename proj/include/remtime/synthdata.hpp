#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "remtime/eventlog.hpp"
#include "remtime/layers.hpp"

namespace remtime::synth {

enum class NoiseProfile { homoscedastic, heteroscedastic };

struct Regression1dSpec {
    std::size_t n = 1000;
    NoiseProfile noise = NoiseProfile::heteroscedastic;
    double sigma = 0.1;  // homoscedastic noise level; 0 gives noiseless targets
    double x_min = -3.141592653589793;
    double x_max = 3.141592653589793;
    std::uint64_t seed = 0;

    void validate() const;
};

/// f(x) = sin x.
double regression_mean(double x);
/// Noise standard deviation at x: sigma, or 0.1 + 0.2 (1 + sin x).
double regression_sigma(const Regression1dSpec& spec, double x);

struct Regression1dData {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma;  // true noise stddev at each x
};

Regression1dData gen_regression1d(const Regression1dSpec& spec);

/// n evenly spaced points on [lo, hi].
std::vector<double> grid(std::size_t n, double lo, double hi);

/// One-step windows with x as the only numeric feature.
nn::Batch regression_batch(const std::vector<double>& x, const std::vector<double>& y);

struct EventLogSpec {
    std::size_t n_cases = 500;
    /// Average coefficient of variation of activity durations; 0 is deterministic.
    double duration_cv = 0.5;
    /// Probability of leaving a case type's nominal path at each step.
    double routing_noise = 0.1;
    double mean_interarrival_hours = 4.0;
    bool drift = false;
    double drift_factor = 2.0;  // duration multiplier for the later half of the cases
    std::uint64_t seed = 0;

    void validate() const;
};

/// Ground truth for one generated event.
struct EventTruth {
    std::string case_id;
    std::size_t event_index = 0;        // 0-based within the case
    double expected_remaining_days = 0.0;
    double remaining_sd_days = 0.0;
    double actual_remaining_days = 0.0;
};

struct SyntheticLog {
    std::string csv;
    eventlog::SchemaSpec schema;
    std::vector<EventTruth> truth;  // one per CSV row, in row order
};

/// Cases follow one of three typed Markov chains over shared activities; the
/// type is exposed as the `channel` column and `amount` is an unrelated
/// numeric attribute.
SyntheticLog gen_eventlog(const EventLogSpec& spec);

void write_truth_csv(const std::vector<EventTruth>& truth, const std::filesystem::path& path);

}  // namespace remtime::synth
