#include "remtime/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "remtime/errors.hpp"

namespace remtime::config {

const std::vector<KeySpec>& registry() {
    using T = KeyType;
    static const std::vector<KeySpec> keys{
        {"seed", T::integer, "42", "master seed"},

        {"schema.case_id", T::text, "case_id", "case identifier column"},
        {"schema.activity", T::text, "activity", "activity column"},
        {"schema.timestamp", T::text, "timestamp", "timestamp column"},
        {"schema.timestamp_format", T::text, "ISO8601", "ISO8601 or a strftime pattern (UTC)"},
        {"schema.categorical", T::texts, "", "extra categorical columns"},
        {"schema.numeric", T::texts, "", "extra numeric columns"},
        {"schema.sequence_length", T::integer, "16", "prefix window length"},
        {"schema.delimiter", T::text, ",", "CSV delimiter (one character)"},
        {"schema.synthetic.event_number", T::boolean, "true", ""},
        {"schema.synthetic.elapsed_since_previous", T::boolean, "true", ""},
        {"schema.synthetic.elapsed_since_start", T::boolean, "true", ""},
        {"schema.synthetic.day_of_week", T::boolean, "true", ""},
        {"schema.synthetic.hour_of_day", T::boolean, "true", ""},

        {"split.test_fraction", T::real, "0.15", "share of last-starting cases held out"},
        {"split.validation_fraction", T::real, "0.2", "share of training cases used for validation"},

        {"model.arch", T::text, "cnn", "cnn | lstm | mlp"},
        {"model.embedding_dim", T::integer, "8", "embedding width per categorical feature"},
        {"model.conv_channels", T::integers, "auto", "channels per conv block"},
        {"model.kernel_size", T::integer, "3", ""},
        {"model.dense_units", T::integers, "auto", "dense layer widths"},
        {"model.lstm_hidden", T::integer, "64", ""},
        {"model.dropout", T::text, "concrete", "none | fixed | concrete"},
        {"model.dropout_p", T::real, "0.05", "fixed dropout probability"},
        {"model.concrete_init_p", T::real, "0.1", "initial concrete dropout probability"},
        {"model.temperature", T::real, "0.1", "concrete relaxation temperature"},
        {"model.length_scale", T::real, "0.01", "prior length-scale"},
        {"model.heteroscedastic", T::boolean, "true", "predict a log-variance"},

        {"train.batch_size", T::integer, "256", ""},
        {"train.max_epochs", T::integer, "100", ""},
        {"train.learning_rate", T::real, "0.001", ""},
        {"train.patience", T::integer, "10", "epochs without validation improvement"},
        {"train.early_stopping", T::boolean, "true", ""},
        {"train.standardize_target", T::boolean, "true", "fit the output affine map to the targets"},

        {"inference.mc_samples", T::integer, "50", "stochastic passes; 0 gives point predictions"},
        {"inference.threads", T::integer, "1", ""},
        {"inference.split", T::text, "test", "train | validation | test"},
        {"inference.keep_draws", T::boolean, "false", "also write the raw MC draws"},

        {"calibration.window", T::integer, "5000", ""},
        {"calibration.stride", T::integer, "1000", ""},
        {"calibration.levels", T::reals, "0.5,0.75,0.9,0.95,0.99", ""},

        {"evaluation.shares", T::reals, "1,0.75,0.5,0.25,0.1,0.05", ""},
        {"evaluation.prefix_cap", T::integer, "10", ""},
        {"evaluation.day_edges", T::reals, "0,5,10,20,50", "lower edges of the remaining-days bins"},
        {"evaluation.base", T::text, "", "variant every MAE is divided by"},
        {"evaluation.svg", T::boolean, "true", "also write SVG plots"},

        {"baseline.abstraction", T::text, "sequence", "sequence | set | multiset"},
        {"baseline.horizon", T::integer, "2", "last-k events; 0 is the whole prefix"},
        {"baseline.statistic", T::text, "mean", "mean | median"},

        {"synth.kind", T::text, "eventlog", "eventlog | regression1d"},
        {"synth.n", T::integer, "500", "cases or samples"},
        {"synth.duration_cv", T::real, "0.5", ""},
        {"synth.routing_noise", T::real, "0.1", ""},
        {"synth.interarrival_hours", T::real, "4", ""},
        {"synth.drift", T::boolean, "false", ""},
        {"synth.drift_factor", T::real, "2", ""},
        {"synth.noise", T::text, "heteroscedastic", "homoscedastic | heteroscedastic"},
        {"synth.sigma", T::real, "0.1", "homoscedastic noise level"},

        {"paths.runs_root", T::text, "runs", ""},
        {"paths.run_dir", T::text, "", "explicit run directory"},
        {"paths.log", T::text, "", "event log CSV"},
        {"paths.prepared", T::text, "", "prepare run directory"},
        {"paths.checkpoint", T::text, "", "model checkpoint"},
        {"paths.predictions", T::texts, "", "prediction CSVs, optionally name=path"},
        {"paths.history", T::text, "", "training-split predictions for the first calibration table"},
    };
    return keys;
}

namespace {

const KeySpec* find_key(const std::string& key) {
    for (const auto& k : registry())
        if (k.key == key) return &k;
    return nullptr;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    if (trim(v).empty()) return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

bool parse_int(const std::string& s, std::int64_t& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e && !s.empty();
}

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    try {
        std::size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

bool parse_bool(const std::string& s, bool& out) {
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (l == "true" || l == "yes" || l == "1" || l == "on") return out = true, true;
    if (l == "false" || l == "no" || l == "0" || l == "off") return out = false, true;
    return false;
}

bool valid_value(KeyType t, const std::string& v) {
    std::int64_t i;
    double d;
    bool b;
    switch (t) {
        case KeyType::text: return true;
        case KeyType::integer: return parse_int(v, i);
        case KeyType::real: return parse_real(v, d);
        case KeyType::boolean: return parse_bool(v, b);
        case KeyType::texts: return true;
        case KeyType::reals:
            for (const auto& x : split_list(v))
                if (!parse_real(x, d)) return false;
            return true;
        case KeyType::integers:
            if (trim(v) == "auto") return true;
            for (const auto& x : split_list(v))
                if (!parse_int(x, i) || i < 0) return false;
            return true;
    }
    return false;
}

void flatten(const YAML::Node& node, const std::string& prefix, RunConfig& cfg) {
    if (node.IsMap()) {
        for (const auto& kv : node) {
            const std::string k = kv.first.as<std::string>();
            flatten(kv.second, prefix.empty() ? k : prefix + "." + k, cfg);
        }
        return;
    }
    if (prefix.empty()) throw ConfigError("config", "config file must be a mapping");
    if (node.IsSequence()) {
        std::string joined;
        for (std::size_t i = 0; i < node.size(); ++i) {
            if (!node[i].IsScalar()) throw ConfigError("config", "list under '" + prefix + "' must hold scalars");
            if (i) joined += ',';
            joined += node[i].as<std::string>();
        }
        cfg.set(prefix, joined);
    } else if (node.IsNull()) {
        cfg.set(prefix, "");
    } else {
        cfg.set(prefix, node.as<std::string>());
    }
}

}  // namespace

RunConfig::RunConfig() {
    for (const auto& k : registry()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("config", "unknown config key '" + key + "'");
    const std::string v = trim(value);
    if (!valid_value(spec->type, v)) throw ConfigError("config", "invalid value '" + v + "' for key '" + key + "'");
    values_[key] = v;
}

void RunConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("config", "expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::merge_yaml(std::string_view text) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError("config", std::string("unreadable config: ") + e.what());
    }
    if (root.IsNull()) return;
    flatten(root, "", *this);
}

void RunConfig::merge_yaml_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    merge_yaml(ss.str());
}

const std::string& RunConfig::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config", "unknown config key '" + key + "'");
    return it->second;
}

std::int64_t RunConfig::integer(const std::string& key) const {
    std::int64_t v = 0;
    if (!parse_int(raw(key), v)) throw ConfigError("config", "key '" + key + "' is not an integer");
    return v;
}

std::size_t RunConfig::count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError("config", "key '" + key + "' must be >= 0");
    return static_cast<std::size_t>(v);
}

double RunConfig::real(const std::string& key) const {
    double v = 0;
    if (!parse_real(raw(key), v)) throw ConfigError("config", "key '" + key + "' is not a number");
    return v;
}

bool RunConfig::boolean(const std::string& key) const {
    bool v = false;
    if (!parse_bool(raw(key), v)) throw ConfigError("config", "key '" + key + "' is not a boolean");
    return v;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : split_list(raw(key))) {
        double d = 0;
        if (!parse_real(s, d)) throw ConfigError("config", "key '" + key + "' holds a non-number");
        out.push_back(d);
    }
    return out;
}

std::vector<std::size_t> RunConfig::integers(const std::string& key) const {
    std::vector<std::size_t> out;
    if (trim(raw(key)) == "auto") return out;
    for (const auto& s : split_list(raw(key))) {
        std::int64_t i = 0;
        if (!parse_int(s, i) || i < 0) throw ConfigError("config", "key '" + key + "' holds a non-count");
        out.push_back(static_cast<std::size_t>(i));
    }
    return out;
}

std::vector<std::string> RunConfig::texts(const std::string& key) const { return split_list(raw(key)); }

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("config", "sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

}  // namespace remtime::config
