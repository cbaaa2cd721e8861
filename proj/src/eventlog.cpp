#include "remtime/eventlog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "remtime/csv.hpp"
#include "remtime/errors.hpp"

namespace remtime::eventlog {

using nlohmann::json;

namespace {

constexpr int kEncodingVersion = 1;

double parse_number(const std::string& s, std::size_t line, const std::string& column) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw RowError("eventlog", line, "column '" + column + "': not a number: '" + s + "'");
    }
}

json schema_to_json(const SchemaSpec& s) {
    return json{{"case_id_column", s.case_id_column},
                {"activity_column", s.activity_column},
                {"timestamp_column", s.timestamp_column},
                {"timestamp_format", s.timestamp_format},
                {"categorical", s.categorical},
                {"numeric", s.numeric},
                {"sequence_length", s.sequence_length},
                {"delimiter", std::string(1, s.delimiter)},
                {"synthetic",
                 {{"event_number", s.synthetic.event_number},
                  {"elapsed_since_previous", s.synthetic.elapsed_since_previous},
                  {"elapsed_since_start", s.synthetic.elapsed_since_start},
                  {"day_of_week", s.synthetic.day_of_week},
                  {"hour_of_day", s.synthetic.hour_of_day}}}};
}

SchemaSpec schema_from_json(const json& j) {
    SchemaSpec s;
    s.case_id_column = j.at("case_id_column").get<std::string>();
    s.activity_column = j.at("activity_column").get<std::string>();
    s.timestamp_column = j.at("timestamp_column").get<std::string>();
    s.timestamp_format = j.at("timestamp_format").get<std::string>();
    s.categorical = j.at("categorical").get<std::vector<std::string>>();
    s.numeric = j.at("numeric").get<std::vector<std::string>>();
    s.sequence_length = j.at("sequence_length").get<std::size_t>();
    s.delimiter = j.at("delimiter").get<std::string>().at(0);
    const json& syn = j.at("synthetic");
    s.synthetic.event_number = syn.at("event_number").get<bool>();
    s.synthetic.elapsed_since_previous = syn.at("elapsed_since_previous").get<bool>();
    s.synthetic.elapsed_since_start = syn.at("elapsed_since_start").get<bool>();
    s.synthetic.day_of_week = syn.at("day_of_week").get<bool>();
    s.synthetic.hour_of_day = syn.at("hour_of_day").get<bool>();
    return s;
}

std::vector<std::size_t> order_by_start(const std::vector<Case>& cases) {
    std::vector<std::size_t> order(cases.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cases[a].start() < cases[b].start(); });
    return order;
}

std::size_t share_count(double fraction, std::size_t n) {
    // Guard against 0.15 * 20 = 3.0000000000000004 rounding up.
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

}  // namespace

void SchemaSpec::validate() const {
    if (sequence_length < 1) throw ContractError("eventlog", "sequence_length must be >= 1");
    std::set<std::string> seen;
    for (const auto& name : categorical_slots()) {
        if (!seen.insert(name).second) throw ContractError("eventlog", "duplicate feature name '" + name + "'");
    }
    for (const auto& name : numeric_slots()) {
        if (!seen.insert(name).second) throw ContractError("eventlog", "duplicate feature name '" + name + "'");
    }
}

std::vector<std::string> SchemaSpec::categorical_slots() const {
    std::vector<std::string> out{activity_column};
    out.insert(out.end(), categorical.begin(), categorical.end());
    return out;
}

std::vector<std::string> SchemaSpec::numeric_slots() const {
    std::vector<std::string> out = numeric;
    if (synthetic.event_number) out.emplace_back("event_number");
    if (synthetic.elapsed_since_previous) out.emplace_back("elapsed_since_previous");
    if (synthetic.elapsed_since_start) out.emplace_back("elapsed_since_start");
    if (synthetic.day_of_week) out.emplace_back("day_of_week");
    if (synthetic.hour_of_day) out.emplace_back("hour_of_day");
    return out;
}

std::vector<Case> parse_log_text(std::string_view text, const SchemaSpec& schema) {
    schema.validate();
    const csv::Table table = csv::parse(text, schema.delimiter);
    if (table.header.empty() || table.rows.empty()) throw EmptyLogError("eventlog", "event log has no rows");

    auto require = [&](const std::string& name) {
        const std::size_t col = table.column(name);
        if (col == std::string_view::npos) {
            throw SchemaError("eventlog", name, "missing column '" + name + "'");
        }
        return col;
    };
    const std::size_t case_col = require(schema.case_id_column);
    const std::size_t act_col = require(schema.activity_column);
    const std::size_t ts_col = require(schema.timestamp_column);
    std::vector<std::size_t> cat_cols, num_cols;
    for (const auto& c : schema.categorical) cat_cols.push_back(require(c));
    for (const auto& c : schema.numeric) num_cols.push_back(require(c));

    std::vector<Case> cases;
    std::unordered_map<std::string, std::size_t> case_index;
    for (const auto& row : table.rows) {
        if (row.fields.size() != table.header.size()) {
            throw RowError("eventlog", row.line,
                           "expected " + std::to_string(table.header.size()) + " fields, got " +
                               std::to_string(row.fields.size()));
        }
        Event ev;
        ev.case_id = row.fields[case_col];
        ev.activity = row.fields[act_col];
        if (ev.activity.empty()) throw RowError("eventlog", row.line, "empty activity");
        try {
            ev.timestamp = parse_timestamp(row.fields[ts_col], schema.timestamp_format);
        } catch (const std::invalid_argument& e) {
            throw RowError("eventlog", row.line, e.what());
        }
        for (std::size_t i = 0; i < cat_cols.size(); ++i) {
            ev.extra_categorical.emplace_back(schema.categorical[i], row.fields[cat_cols[i]]);
        }
        for (std::size_t i = 0; i < num_cols.size(); ++i) {
            ev.extra_numeric.emplace_back(schema.numeric[i],
                                          parse_number(row.fields[num_cols[i]], row.line, schema.numeric[i]));
        }
        auto [it, inserted] = case_index.emplace(ev.case_id, cases.size());
        if (inserted) cases.push_back(Case{ev.case_id, {}});
        cases[it->second].events.push_back(std::move(ev));
    }
    for (auto& c : cases) {
        std::stable_sort(c.events.begin(), c.events.end(),
                         [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    }
    return cases;
}

std::vector<Case> parse_log(const std::filesystem::path& path, const SchemaSpec& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("eventlog", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_log_text(ss.str(), schema);
}

Split temporal_split(const std::vector<Case>& cases, double test_fraction) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ContractError("eventlog", "test_fraction must lie in (0, 1)");
    }
    if (cases.size() < 2) throw ContractError("eventlog", "temporal split needs at least two cases");

    const auto order = order_by_start(cases);
    const std::size_t n = cases.size();
    const std::size_t n_test = std::max<std::size_t>(1, share_count(test_fraction, n));
    if (n_test >= n) throw SplitError("eventlog", "split leaves no training cases");

    Split split;
    for (std::size_t r = n - n_test; r < n; ++r) split.test.push_back(cases[order[r]]);
    const EpochSeconds first_test_start = split.test.front().start();
    for (std::size_t r = 0; r < n - n_test; ++r) {
        const Case& c = cases[order[r]];
        if (c.end() >= first_test_start) {
            split.deleted.push_back(c.case_id);
        } else {
            split.train.push_back(c);
        }
    }
    if (split.train.empty()) {
        throw SplitError("eventlog", "every training case overlaps the test period; no training cases left");
    }
    return split;
}

std::pair<std::vector<Case>, std::vector<Case>> validation_split(const std::vector<Case>& train, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ContractError("eventlog", "validation fraction must lie in (0, 1)");
    }
    const auto order = order_by_start(train);
    const std::size_t n = train.size();
    const std::size_t n_val = std::max<std::size_t>(1, share_count(fraction, n));
    if (n_val >= n) throw SplitError("eventlog", "validation split leaves no training cases");
    std::pair<std::vector<Case>, std::vector<Case>> out;
    for (std::size_t r = 0; r < n; ++r) (r < n - n_val ? out.first : out.second).push_back(train[order[r]]);
    return out;
}

Vocabulary::Vocabulary(std::string name) : feature(std::move(name)), labels{"<pad>", "<unk>"} {}

std::int32_t Vocabulary::add(const std::string& label) {
    auto [it, inserted] = index.emplace(label, static_cast<std::int32_t>(labels.size()));
    if (inserted) labels.push_back(label);
    return it->second;
}

std::int32_t Vocabulary::encode(const std::string& label) const {
    const auto it = index.find(label);
    return it == index.end() ? kUnknownIndex : it->second;
}

const std::string& Vocabulary::decode(std::int32_t idx) const {
    if (idx < 0 || static_cast<std::size_t>(idx) >= labels.size()) {
        throw EncodingError("eventlog", "index " + std::to_string(idx) + " outside vocabulary '" + feature + "'");
    }
    return labels[static_cast<std::size_t>(idx)];
}

double NumericScaler::apply(double raw) const {
    if (std::isnan(raw)) return 0.0;
    if (!scaled) return raw;
    return (raw - mean) / stddev;
}

std::vector<std::size_t> EncodedLog::vocabulary_sizes() const {
    std::vector<std::size_t> out;
    for (const auto& v : vocabularies) out.push_back(v.size());
    return out;
}

EncodedLog EncodedLog::encoding_only() const {
    EncodedLog e;
    e.schema = schema;
    e.vocabularies = vocabularies;
    e.scalers = scalers;
    return e;
}

std::string EncodedLog::to_json() const {
    json vocabs = json::array();
    for (const auto& v : vocabularies) {
        vocabs.push_back({{"feature", v.feature},
                          {"labels", std::vector<std::string>(v.labels.begin() + 2, v.labels.end())}});
    }
    json scal = json::array();
    for (const auto& s : scalers) {
        scal.push_back({{"feature", s.feature}, {"mean", s.mean}, {"stddev", s.stddev}, {"scaled", s.scaled}});
    }
    json j{{"format", "remtime-encoding"},
           {"version", kEncodingVersion},
           {"schema", schema_to_json(schema)},
           {"vocabularies", vocabs},
           {"scalers", scal}};
    return j.dump(2);
}

EncodedLog EncodedLog::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError("eventlog", std::string("malformed encoding manifest: ") + e.what());
    }
    if (j.value("format", "") != "remtime-encoding") throw IoError("eventlog", "not an encoding manifest");
    if (j.value("version", 0) != kEncodingVersion) {
        throw IoError("eventlog", "unsupported encoding manifest version " + j.value("version", json(0)).dump());
    }
    EncodedLog e;
    e.schema = schema_from_json(j.at("schema"));
    for (const auto& v : j.at("vocabularies")) {
        Vocabulary voc(v.at("feature").get<std::string>());
        for (const auto& label : v.at("labels")) voc.add(label.get<std::string>());
        e.vocabularies.push_back(std::move(voc));
    }
    for (const auto& s : j.at("scalers")) {
        e.scalers.push_back(NumericScaler{s.at("feature").get<std::string>(), s.at("mean").get<double>(),
                                          s.at("stddev").get<double>(), s.at("scaled").get<bool>()});
    }
    return e;
}

void EncodedLog::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("eventlog", "cannot write " + path.string());
    out << to_json() << '\n';
}

EncodedLog EncodedLog::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("eventlog", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::vector<std::vector<double>> raw_numeric_features(const Case& c, const SchemaSpec& schema) {
    std::vector<std::vector<double>> rows;
    rows.reserve(c.events.size());
    for (std::size_t k = 0; k < c.events.size(); ++k) {
        const Event& ev = c.events[k];
        std::vector<double> row;
        for (const auto& [name, value] : ev.extra_numeric) row.push_back(value);
        if (schema.synthetic.event_number) row.push_back(static_cast<double>(k + 1));
        if (schema.synthetic.elapsed_since_previous) {
            const EpochSeconds prev = k == 0 ? ev.timestamp : c.events[k - 1].timestamp;
            row.push_back(static_cast<double>(ev.timestamp - prev) / kSecondsPerDay);
        }
        if (schema.synthetic.elapsed_since_start) {
            row.push_back(static_cast<double>(ev.timestamp - c.start()) / kSecondsPerDay);
        }
        if (schema.synthetic.day_of_week) row.push_back(day_of_week(ev.timestamp));
        if (schema.synthetic.hour_of_day) row.push_back(hour_of_day(ev.timestamp));
        rows.push_back(std::move(row));
    }
    return rows;
}

EncodedLog make_prefixes(const std::vector<Case>& cases, const SchemaSpec& schema, bool fit_vocab,
                         const EncodedLog* existing) {
    schema.validate();
    EncodedLog out;
    out.schema = schema;
    const auto cat_names = schema.categorical_slots();
    const auto num_names = schema.numeric_slots();

    std::vector<std::vector<std::vector<double>>> raw;
    raw.reserve(cases.size());
    for (const auto& c : cases) raw.push_back(raw_numeric_features(c, schema));

    if (fit_vocab) {
        for (const auto& name : cat_names) out.vocabularies.emplace_back(name);
        for (const auto& c : cases) {
            for (const auto& ev : c.events) {
                out.vocabularies[0].add(ev.activity);
                for (std::size_t j = 0; j < ev.extra_categorical.size(); ++j) {
                    out.vocabularies[j + 1].add(ev.extra_categorical[j].second);
                }
            }
        }
        for (std::size_t f = 0; f < num_names.size(); ++f) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& rows : raw)
                for (const auto& row : rows)
                    if (!std::isnan(row[f])) {
                        sum += row[f];
                        ++n;
                    }
            NumericScaler s{num_names[f], 0.0, 1.0, false};
            if (n > 0) {
                const double mu = sum / static_cast<double>(n);
                double ss = 0.0;
                for (const auto& rows : raw)
                    for (const auto& row : rows)
                        if (!std::isnan(row[f])) ss += (row[f] - mu) * (row[f] - mu);
                const double sd = std::sqrt(ss / static_cast<double>(n));
                if (sd > 0.0 && std::isfinite(sd)) s = NumericScaler{num_names[f], mu, sd, true};
            }
            out.scalers.push_back(s);
        }
    } else {
        if (existing == nullptr) throw ContractError("eventlog", "make_prefixes without fit_vocab needs an encoding");
        if (existing->vocabularies.size() != cat_names.size() || existing->scalers.size() != num_names.size()) {
            throw ContractError("eventlog", "existing encoding does not match the schema's feature slots");
        }
        out.vocabularies = existing->vocabularies;
        out.scalers = existing->scalers;
    }

    const std::size_t len = schema.sequence_length;
    const std::size_t n_cat = cat_names.size(), n_num = num_names.size();
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const Case& c = cases[ci];
        const std::size_t n = c.events.size();
        // Encode each event once; windows copy rows.
        std::vector<std::int32_t> cat_rows(n * n_cat);
        std::vector<double> num_rows(n * n_num);
        for (std::size_t k = 0; k < n; ++k) {
            const Event& ev = c.events[k];
            cat_rows[k * n_cat] = out.vocabularies[0].encode(ev.activity);
            for (std::size_t j = 0; j < ev.extra_categorical.size(); ++j) {
                cat_rows[k * n_cat + j + 1] = out.vocabularies[j + 1].encode(ev.extra_categorical[j].second);
            }
            for (std::size_t f = 0; f < n_num; ++f) num_rows[k * n_num + f] = out.scalers[f].apply(raw[ci][k][f]);
        }
        for (std::size_t k = 1; k <= n; ++k) {
            PrefixRecord rec;
            rec.case_id = c.case_id;
            rec.prefix_length = k;
            rec.categorical.assign(len * n_cat, kPaddingIndex);
            rec.numeric.assign(len * n_num, 0.0);
            const std::size_t used = std::min(k, len);
            const std::size_t first_event = k - used;
            const std::size_t first_row = len - used;
            for (std::size_t r = 0; r < used; ++r) {
                const std::size_t e = first_event + r;
                std::copy_n(&cat_rows[e * n_cat], n_cat, &rec.categorical[(first_row + r) * n_cat]);
                if (n_num > 0) std::copy_n(&num_rows[e * n_num], n_num, &rec.numeric[(first_row + r) * n_num]);
            }
            rec.target = static_cast<double>(c.end() - c.events[k - 1].timestamp) / kSecondsPerDay;
            rec.case_start = c.start();
            rec.event_timestamp = c.events[k - 1].timestamp;
            out.prefixes.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace remtime::eventlog
