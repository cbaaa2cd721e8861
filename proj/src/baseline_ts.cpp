#include "remtime/baseline_ts.hpp"

#include <algorithm>

#include "remtime/errors.hpp"

namespace remtime::baseline {

std::string to_string(Abstraction a) {
    switch (a) {
        case Abstraction::sequence: return "sequence";
        case Abstraction::set: return "set";
        case Abstraction::multiset: return "multiset";
    }
    return "sequence";
}

Abstraction parse_abstraction(const std::string& s) {
    if (s == "sequence") return Abstraction::sequence;
    if (s == "set") return Abstraction::set;
    if (s == "multiset") return Abstraction::multiset;
    throw ParameterError("baseline_ts", "unknown abstraction '" + s + "'");
}

Statistic parse_statistic(const std::string& s) {
    if (s == "mean") return Statistic::mean;
    if (s == "median") return Statistic::median;
    throw ParameterError("baseline_ts", "unknown statistic '" + s + "'");
}

std::size_t AnnotatedTransitionSystem::state_count() const {
    auto it = levels.find(horizon);
    return it == levels.end() ? 0 : it->second.size();
}

std::string state_key(std::span<const std::string> activities, Abstraction abstraction, std::size_t horizon) {
    const std::size_t n = horizon == 0 ? activities.size() : std::min(horizon, activities.size());
    std::vector<std::string> items(activities.end() - static_cast<std::ptrdiff_t>(n), activities.end());
    if (abstraction != Abstraction::sequence) std::sort(items.begin(), items.end());
    if (abstraction == Abstraction::set) items.erase(std::unique(items.begin(), items.end()), items.end());
    std::string key;
    for (const auto& a : items) {
        key += a;
        key += '\x1f';
    }
    return key;
}

namespace {

StateStats summarize(std::vector<double> v) {
    StateStats s;
    s.count = v.size();
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    s.median = v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    return s;
}

std::vector<std::size_t> horizons(std::size_t horizon) {
    std::vector<std::size_t> h;
    if (horizon == 0) {
        h.push_back(0);
    } else {
        for (std::size_t k = horizon; k >= 1; --k) h.push_back(k);
    }
    return h;
}

}  // namespace

AnnotatedTransitionSystem build_ats(const std::vector<eventlog::Case>& train, Abstraction abstraction,
                                    std::size_t horizon, Statistic statistic) {
    if (train.empty()) throw ContractError("baseline_ts", "no training cases");
    AnnotatedTransitionSystem ats;
    ats.abstraction = abstraction;
    ats.horizon = horizon;
    ats.statistic = statistic;

    const auto hs = horizons(horizon);
    std::map<std::size_t, std::unordered_map<std::string, std::vector<double>>> acc;
    std::vector<double> all;
    for (const auto& c : train) {
        std::vector<std::string> acts;
        for (const auto& e : c.events) {
            acts.push_back(e.activity);
            const double remaining = static_cast<double>(c.end() - e.timestamp) / kSecondsPerDay;
            all.push_back(remaining);
            for (std::size_t h : hs) acc[h][state_key(acts, abstraction, h)].push_back(remaining);
        }
    }
    for (auto& [h, states] : acc)
        for (auto& [key, values] : states) ats.levels[h][key] = summarize(std::move(values));
    ats.min_remaining = *std::min_element(all.begin(), all.end());
    ats.max_remaining = *std::max_element(all.begin(), all.end());
    ats.global = summarize(std::move(all));
    return ats;
}

double predict_ats(const AnnotatedTransitionSystem& ats, std::span<const std::string> activities) {
    if (!activities.empty()) {
        for (std::size_t h : horizons(ats.horizon)) {
            auto level = ats.levels.find(h);
            if (level == ats.levels.end()) continue;
            auto it = level->second.find(state_key(activities, ats.abstraction, h));
            if (it != level->second.end()) return it->second.value(ats.statistic);
        }
    }
    return ats.global.value(ats.statistic);
}

CasePredictions predict_cases(const AnnotatedTransitionSystem& ats, const std::vector<eventlog::Case>& cases) {
    CasePredictions out;
    for (const auto& c : cases) {
        std::vector<std::string> acts;
        for (std::size_t k = 0; k < c.events.size(); ++k) {
            acts.push_back(c.events[k].activity);
            eventlog::PrefixRecord r;
            r.case_id = c.case_id;
            r.prefix_length = k + 1;
            r.target = static_cast<double>(c.end() - c.events[k].timestamp) / kSecondsPerDay;
            r.case_start = c.start();
            r.event_timestamp = c.events[k].timestamp;
            out.prefixes.push_back(std::move(r));
            out.predictions.push_back(predict_ats(ats, acts));
        }
    }
    return out;
}

}  // namespace remtime::baseline
