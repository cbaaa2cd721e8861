#pragma once

#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "remtime/eventlog.hpp"

namespace remtime::baseline {

enum class Abstraction { sequence, set, multiset };
enum class Statistic { mean, median };

std::string to_string(Abstraction a);
Abstraction parse_abstraction(const std::string& s);
Statistic parse_statistic(const std::string& s);

struct StateStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double value(Statistic s) const { return s == Statistic::mean ? mean : median; }
};

struct AnnotatedTransitionSystem {
    Abstraction abstraction = Abstraction::sequence;
    std::size_t horizon = 2;  // last-k events; 0 means the whole prefix
    Statistic statistic = Statistic::mean;
    /// levels[h] maps states over the last h events (h = horizon, ..., 1).
    /// With horizon 0 only levels[0] exists, keyed on the whole prefix.
    std::map<std::size_t, std::unordered_map<std::string, StateStats>> levels;
    StateStats global;
    double min_remaining = 0.0;
    double max_remaining = 0.0;

    /// Number of states at the configured horizon.
    std::size_t state_count() const;
};

/// Abstract state of the last `horizon` activities (all when 0).
std::string state_key(std::span<const std::string> activities, Abstraction abstraction, std::size_t horizon);

AnnotatedTransitionSystem build_ats(const std::vector<eventlog::Case>& train, Abstraction abstraction,
                                    std::size_t horizon, Statistic statistic = Statistic::mean);

/// State value of the prefix, backing off to shorter horizons and then to the
/// global statistic.
double predict_ats(const AnnotatedTransitionSystem& ats, std::span<const std::string> activities);

/// One prediction per prefix of each case, with the records (ids, lengths,
/// targets, timestamps; no encoded windows) they belong to.
struct CasePredictions {
    std::vector<eventlog::PrefixRecord> prefixes;
    std::vector<double> predictions;
};

CasePredictions predict_cases(const AnnotatedTransitionSystem& ats, const std::vector<eventlog::Case>& cases);

}  // namespace remtime::baseline
