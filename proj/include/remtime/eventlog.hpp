#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "remtime/timeutil.hpp"

namespace remtime::eventlog {

struct Event {
    std::string case_id;
    std::string activity;
    EpochSeconds timestamp = 0;
    std::vector<std::pair<std::string, std::string>> extra_categorical;
    std::vector<std::pair<std::string, double>> extra_numeric;  // NaN when the cell was empty
};

struct Case {
    std::string case_id;
    std::vector<Event> events;  // non-decreasing timestamps

    EpochSeconds start() const { return events.front().timestamp; }
    EpochSeconds end() const { return events.back().timestamp; }
};

/// Toggles for features derived from the timestamps.
struct SyntheticFeatures {
    bool event_number = true;
    bool elapsed_since_previous = true;
    bool elapsed_since_start = true;
    bool day_of_week = true;
    bool hour_of_day = true;
};

struct SchemaSpec {
    std::string case_id_column = "case_id";
    std::string activity_column = "activity";
    std::string timestamp_column = "timestamp";
    std::string timestamp_format = std::string(kIsoFormat);
    std::vector<std::string> categorical;  // extra categorical columns
    std::vector<std::string> numeric;      // extra numeric columns
    std::size_t sequence_length = 16;
    SyntheticFeatures synthetic;
    char delimiter = ',';

    /// Throws ContractError on sequence_length 0 or duplicate feature names.
    void validate() const;

    /// Categorical slots in window order: the activity, then extra columns.
    std::vector<std::string> categorical_slots() const;
    /// Numeric slots in window order: extra columns, then enabled synthetic features.
    std::vector<std::string> numeric_slots() const;
};

std::vector<Case> parse_log(const std::filesystem::path& path, const SchemaSpec& schema);
std::vector<Case> parse_log_text(std::string_view text, const SchemaSpec& schema);

struct Split {
    std::vector<Case> train;
    std::vector<Case> test;
    std::vector<std::string> deleted;  // training candidates overlapping the test period
};

/// Chronological hold-out of the last-starting cases; training cases that end
/// at or after the first test start are dropped.
Split temporal_split(const std::vector<Case>& cases, double test_fraction);

/// Chronologically last `fraction` of cases (by start) become validation.
std::pair<std::vector<Case>, std::vector<Case>> validation_split(const std::vector<Case>& train,
                                                                 double fraction = 0.2);

inline constexpr std::int32_t kPaddingIndex = 0;
inline constexpr std::int32_t kUnknownIndex = 1;

struct Vocabulary {
    std::string feature;
    std::vector<std::string> labels;  // labels[i] has index i; 0 and 1 are reserved
    std::unordered_map<std::string, std::int32_t> index;

    Vocabulary() = default;
    explicit Vocabulary(std::string name);

    std::int32_t add(const std::string& label);
    std::int32_t encode(const std::string& label) const;
    const std::string& decode(std::int32_t idx) const;
    std::size_t size() const { return labels.size(); }
};

struct NumericScaler {
    std::string feature;
    double mean = 0.0;
    double stddev = 1.0;
    bool scaled = false;  // false: constant or empty on training data, passed through

    double apply(double raw) const;
};

struct PrefixRecord {
    std::string case_id;
    std::size_t prefix_length = 0;
    std::vector<std::int32_t> categorical;  // sequence_length x categorical slots, row-major
    std::vector<double> numeric;            // sequence_length x numeric slots, row-major
    double target = 0.0;                    // remaining time in days
    EpochSeconds case_start = 0;
    EpochSeconds event_timestamp = 0;
};

struct EncodedLog {
    SchemaSpec schema;
    std::vector<Vocabulary> vocabularies;
    std::vector<NumericScaler> scalers;
    std::vector<PrefixRecord> prefixes;

    std::size_t categorical_slots() const { return vocabularies.size(); }
    std::size_t numeric_slots() const { return scalers.size(); }
    std::vector<std::size_t> vocabulary_sizes() const;

    /// Copy carrying the fitted encoding but no prefixes.
    EncodedLog encoding_only() const;

    /// Versioned JSON manifest of schema, vocabularies and scalers.
    std::string to_json() const;
    static EncodedLog from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static EncodedLog load(const std::filesystem::path& path);
};

/// Raw per-event numeric values in numeric_slots() order.
std::vector<std::vector<double>> raw_numeric_features(const Case& c, const SchemaSpec& schema);

/// One PrefixRecord per (case, k). With fit_vocab the vocabularies and scalers
/// are fitted on `cases`; otherwise `existing` supplies them.
EncodedLog make_prefixes(const std::vector<Case>& cases, const SchemaSpec& schema, bool fit_vocab,
                         const EncodedLog* existing = nullptr);

}  // namespace remtime::eventlog
