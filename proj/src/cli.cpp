#include "remtime/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "remtime/baseline_ts.hpp"
#include "remtime/calibration.hpp"
#include "remtime/config.hpp"
#include "remtime/csv.hpp"
#include "remtime/errors.hpp"
#include "remtime/evaluation.hpp"
#include "remtime/inference.hpp"
#include "remtime/synthdata.hpp"
#include "remtime/training.hpp"

namespace remtime::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kCommands{"prepare", "train", "predict", "calibrate", "evaluate", "baseline", "synth"};

const char* kUsage =
    "usage: remtime <command> [options]\n"
    "commands:\n"
    "  synth      generate a synthetic event log (or 1-D regression data)\n"
    "  prepare    parse a log, split it chronologically and fit the encoding\n"
    "  train      train a model on a prepared log\n"
    "  predict    point or MC-dropout predictions for one split\n"
    "  calibrate  rolling critical values and coverage for a prediction CSV\n"
    "  evaluate   MAE comparison, retention curves and heatmaps\n"
    "  baseline   transition-system baseline predictions\n"
    "run `remtime <command> --help` for options\n";

class Run {
public:
    Run(std::string command, config::RunConfig cfg) : command_(std::move(command)), cfg_(std::move(cfg)) {
        const std::string hash = config::sha256_hex(cfg_.canonical());
        config_hash_ = hash;
        const std::string explicit_dir = cfg_.text("paths.run_dir");
        if (!explicit_dir.empty()) {
            dir_ = explicit_dir;
        } else {
            const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            std::tm tm{};
            gmtime_r(&now, &tm);
            char stamp[32];
            std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
            const fs::path base = fs::path(cfg_.text("paths.runs_root")) / (command_ + "-" + stamp + "-" + hash.substr(0, 12));
            dir_ = base;
            for (int k = 2; fs::exists(dir_); ++k) dir_ = base.string() + "-" + std::to_string(k);
        }
        fs::create_directories(dir_);
    }

    const fs::path& dir() const { return dir_; }
    const config::RunConfig& cfg() const { return cfg_; }

    fs::path artifact(const std::string& name) {
        if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
        return dir_ / name;
    }

    void input(const fs::path& path) {
        inputs_.push_back(json{{"path", fs::absolute(path).lexically_normal().string()},
                               {"sha256", config::sha256_file(path)}});
    }

    void write_manifest() {
        json cfg_json = json::object();
        for (const auto& [k, v] : cfg_.values()) cfg_json[k] = v;
        json arts = json::array();
        for (const auto& name : artifacts_) {
            const fs::path p = dir_ / name;
            arts.push_back(json{{"path", name}, {"sha256", config::sha256_file(p)}, {"bytes", fs::file_size(p)}});
        }
        json m{{"format", "remtime-run"},
               {"version", 1},
               {"command", command_},
               {"config_hash", config_hash_},
               {"seed", cfg_.integer("seed")},
               {"config", cfg_json},
               {"inputs", inputs_},
               {"artifacts", arts}};
        std::ofstream os(dir_ / "manifest.json", std::ios::binary);
        os << m.dump(2) << "\n";
    }

private:
    std::string command_;
    config::RunConfig cfg_;
    std::string config_hash_;
    fs::path dir_;
    std::vector<std::string> artifacts_;
    json inputs_ = json::array();
};

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw IoError("cli", "cannot write " + p.string());
    return os;
}

// Lets a temporary stream be passed where an lvalue is expected; it lives to
// the end of the full expression.
std::ostream& lvalue(std::ostream&& os) { return os; }

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cli", "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& required(const config::RunConfig& cfg, const std::string& key, const char* flag) {
    const std::string& v = cfg.raw(key);
    if (v.empty()) throw ConfigError("cli", std::string("missing ") + flag + " (config key '" + key + "')");
    return v;
}

eventlog::SchemaSpec schema_from(const config::RunConfig& cfg) {
    eventlog::SchemaSpec s;
    s.case_id_column = cfg.text("schema.case_id");
    s.activity_column = cfg.text("schema.activity");
    s.timestamp_column = cfg.text("schema.timestamp");
    s.timestamp_format = cfg.text("schema.timestamp_format");
    s.categorical = cfg.texts("schema.categorical");
    s.numeric = cfg.texts("schema.numeric");
    s.sequence_length = cfg.count("schema.sequence_length");
    const std::string delim = cfg.text("schema.delimiter");
    if (delim.size() != 1) throw ConfigError("cli", "schema.delimiter must be one character");
    s.delimiter = delim[0];
    s.synthetic.event_number = cfg.boolean("schema.synthetic.event_number");
    s.synthetic.elapsed_since_previous = cfg.boolean("schema.synthetic.elapsed_since_previous");
    s.synthetic.elapsed_since_start = cfg.boolean("schema.synthetic.elapsed_since_start");
    s.synthetic.day_of_week = cfg.boolean("schema.synthetic.day_of_week");
    s.synthetic.hour_of_day = cfg.boolean("schema.synthetic.hour_of_day");
    try {
        s.validate();
    } catch (const Error& e) {
        throw ConfigError("cli", e.what());
    }
    return s;
}

nn::ModelSpec model_base(const config::RunConfig& cfg) {
    nn::ModelSpec s = nn::default_spec(nn::parse_architecture(cfg.text("model.arch")));
    const auto conv = cfg.integers("model.conv_channels");
    if (cfg.text("model.conv_channels") != "auto") s.conv_channels = conv;
    if (cfg.text("model.dense_units") != "auto") s.dense_units = cfg.integers("model.dense_units");
    s.kernel_size = cfg.count("model.kernel_size");
    s.lstm_hidden = cfg.count("model.lstm_hidden");
    s.dropout = nn::parse_dropout_mode(cfg.text("model.dropout"));
    s.dropout_p = cfg.real("model.dropout_p");
    s.concrete_init_p = cfg.real("model.concrete_init_p");
    s.temperature = cfg.real("model.temperature");
    s.length_scale = cfg.real("model.length_scale");
    s.heteroscedastic = cfg.boolean("model.heteroscedastic");
    return s;
}

std::vector<std::string> ids_of(const std::vector<eventlog::Case>& cases) {
    std::vector<std::string> out;
    for (const auto& c : cases) out.push_back(c.case_id);
    return out;
}

struct Prepared {
    eventlog::EncodedLog encoding;
    std::vector<eventlog::Case> train;
    std::vector<eventlog::Case> validation;
    std::vector<eventlog::Case> test;
};

Prepared load_prepared(Run& run) {
    const fs::path dir = required(run.cfg(), "paths.prepared", "--prepared");
    Prepared p;
    p.encoding = eventlog::EncodedLog::load(dir / "encoding.json");
    run.input(dir / "encoding.json");
    run.input(dir / "split.json");
    const json split = json::parse(read_text(dir / "split.json"));
    const fs::path log = split.at("log").get<std::string>();
    if (config::sha256_file(log) != split.at("log_sha256").get<std::string>()) {
        throw ContractError("cli", "event log " + log.string() + " changed since it was prepared");
    }
    run.input(log);
    const auto cases = eventlog::parse_log(log, p.encoding.schema);
    std::unordered_map<std::string, const eventlog::Case*> by_id;
    for (const auto& c : cases) by_id[c.case_id] = &c;
    auto pick = [&](const char* part) {
        std::vector<eventlog::Case> out;
        for (const auto& id : split.at(part)) {
            auto it = by_id.find(id.get<std::string>());
            if (it == by_id.end()) throw ContractError("cli", "case " + id.get<std::string>() + " missing from the log");
            out.push_back(*it->second);
        }
        return out;
    };
    p.train = pick("train");
    p.validation = pick("validation");
    p.test = pick("test");
    return p;
}

const std::vector<eventlog::Case>& split_cases(const Prepared& p, const std::string& name) {
    if (name == "train") return p.train;
    if (name == "validation") return p.validation;
    if (name == "test") return p.test;
    throw ConfigError("cli", "inference.split must be train, validation or test (got '" + name + "')");
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
    return out;
}

// ---- commands ----

void cmd_synth(Run& run, std::ostream& out) {
    const auto& cfg = run.cfg();
    const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    const std::string kind = cfg.text("synth.kind");
    if (kind == "eventlog") {
        synth::EventLogSpec spec;
        spec.n_cases = cfg.count("synth.n");
        spec.duration_cv = cfg.real("synth.duration_cv");
        spec.routing_noise = cfg.real("synth.routing_noise");
        spec.mean_interarrival_hours = cfg.real("synth.interarrival_hours");
        spec.drift = cfg.boolean("synth.drift");
        spec.drift_factor = cfg.real("synth.drift_factor");
        spec.seed = seed;
        const auto log = synth::gen_eventlog(spec);
        open_out(run.artifact("log.csv")) << log.csv;
        synth::write_truth_csv(log.truth, run.artifact("truth.csv"));
        out << "wrote " << log.truth.size() << " events of " << spec.n_cases << " cases to " << (run.dir() / "log.csv").string()
            << "\nschema: categorical=channel numeric=amount\n";
    } else if (kind == "regression1d") {
        synth::Regression1dSpec spec;
        spec.n = cfg.count("synth.n");
        const std::string noise = cfg.text("synth.noise");
        if (noise == "homoscedastic") spec.noise = synth::NoiseProfile::homoscedastic;
        else if (noise != "heteroscedastic") throw ConfigError("cli", "synth.noise must be homoscedastic or heteroscedastic");
        spec.sigma = cfg.real("synth.sigma");
        spec.seed = seed;
        const auto d = synth::gen_regression1d(spec);
        auto os = open_out(run.artifact("regression.csv"));
        os << "x,y,sigma\n";
        for (std::size_t i = 0; i < d.x.size(); ++i)
            csv::write_row(os, {csv::format_double(d.x[i]), csv::format_double(d.y[i]), csv::format_double(d.sigma[i])});
        out << "wrote " << d.x.size() << " samples to " << (run.dir() / "regression.csv").string() << "\n";
    } else {
        throw ConfigError("cli", "synth.kind must be eventlog or regression1d");
    }
}

void cmd_prepare(Run& run, std::ostream& out) {
    const auto& cfg = run.cfg();
    const fs::path log = required(cfg, "paths.log", "--log");
    const auto schema = schema_from(cfg);
    run.input(log);
    const auto cases = eventlog::parse_log(log, schema);
    const auto split = eventlog::temporal_split(cases, cfg.real("split.test_fraction"));
    const auto [train, validation] = eventlog::validation_split(split.train, cfg.real("split.validation_fraction"));
    const auto enc = eventlog::make_prefixes(train, schema, true);
    enc.encoding_only().save(run.artifact("encoding.json"));

    json s{{"log", fs::absolute(log).lexically_normal().string()},
           {"log_sha256", config::sha256_file(log)},
           {"test_fraction", cfg.real("split.test_fraction")},
           {"validation_fraction", cfg.real("split.validation_fraction")},
           {"train", ids_of(train)},
           {"validation", ids_of(validation)},
           {"test", ids_of(split.test)},
           {"deleted", split.deleted}};
    open_out(run.artifact("split.json")) << s.dump(2) << "\n";
    out << "cases: " << cases.size() << " train: " << train.size() << " validation: " << validation.size()
        << " test: " << split.test.size() << " deleted: " << split.deleted.size() << "\n"
        << "training prefixes: " << enc.prefixes.size() << "\n";
}

void cmd_train(Run& run, std::ostream& out) {
    const auto& cfg = run.cfg();
    const Prepared p = load_prepared(run);
    const auto train_log = eventlog::make_prefixes(p.train, p.encoding.schema, false, &p.encoding);
    const auto val_log = eventlog::make_prefixes(p.validation, p.encoding.schema, false, &p.encoding);
    if (train_log.prefixes.empty() || val_log.prefixes.empty()) {
        throw ContractError("cli", "training and validation splits must both be non-empty");
    }
    const auto spec = nn::spec_for(p.encoding, model_base(cfg), cfg.count("model.embedding_dim"));
    const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    nn::Model model(spec, seed);

    training::TrainConfig tc;
    tc.batch_size = cfg.count("train.batch_size");
    tc.max_epochs = cfg.count("train.max_epochs");
    tc.learning_rate = cfg.real("train.learning_rate");
    tc.patience = cfg.count("train.patience");
    tc.early_stopping = cfg.boolean("train.early_stopping");
    tc.standardize_target = cfg.boolean("train.standardize_target");
    tc.seed = seed;
    tc.checkpoint_path = run.artifact("checkpoint.json");

    const auto report = training::train(model, nn::make_batch(train_log), nn::make_batch(val_log), tc);
    model.save(tc.checkpoint_path);
    training::write_training_log(report, lvalue(open_out(run.artifact("training_log.csv"))));

    json epochs = json::array();
    for (const auto& e : report.epochs) epochs.push_back(json{{"epoch", e.epoch}, {"seconds", e.seconds}});
    json r{{"best_epoch", report.best_epoch},
           {"best_validation_mae", report.best_validation_mae},
           {"epochs_run", report.epochs.size()},
           {"final_dropout_probabilities", report.final_dropout_probabilities},
           {"timings", epochs}};
    open_out(run.artifact("train_report.json")) << r.dump(2) << "\n";
    out << "epochs: " << report.epochs.size() << " best epoch: " << report.best_epoch
        << " validation MAE: " << report.best_validation_mae << " days\n";
}

void cmd_predict(Run& run, std::ostream& out) {
    const auto& cfg = run.cfg();
    const Prepared p = load_prepared(run);
    const fs::path ckpt = required(cfg, "paths.checkpoint", "--checkpoint");
    run.input(ckpt);
    const nn::Model model = nn::Model::load(ckpt);
    const auto log = eventlog::make_prefixes(split_cases(p, cfg.text("inference.split")), p.encoding.schema, false,
                                             &p.encoding);
    if (log.prefixes.empty()) throw ContractError("cli", "no prefixes to predict");
    const auto batch = nn::make_batch(log);
    const std::size_t T = cfg.count("inference.mc_samples");
    auto os = open_out(run.artifact("predictions.csv"));
    if (T == 0 || model.spec().dropout == nn::DropoutMode::none) {
        const auto point = inference::predict_point(model, batch);
        inference::write_predictions(os, log.prefixes, point, {});
        out << "point predictions for " << point.size() << " prefixes\n";
        return;
    }
    inference::McOptions mc;
    mc.T = T;
    mc.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
    mc.threads = std::max<std::size_t>(1, cfg.count("inference.threads"));
    mc.keep_draws = cfg.boolean("inference.keep_draws");
    mc.allow_single_pass = T == 1;
    const auto res = inference::mc_predict(model, batch, mc);
    inference::write_predictions(os, log.prefixes, {}, res.estimates);
    if (mc.keep_draws) {
        auto ds = open_out(run.artifact("draws.csv"));
        ds << "pass,row,mean,log_variance\n";
        for (std::size_t t = 0; t < res.draws.T; ++t)
            for (std::size_t i = 0; i < res.draws.rows; ++i) {
                const std::size_t k = t * res.draws.rows + i;
                csv::write_row(ds, {std::to_string(t), std::to_string(i), csv::format_double(res.draws.means[k]),
                                    res.draws.log_variances.empty() ? "" : csv::format_double(res.draws.log_variances[k])});
            }
    }
    out << "MC predictions (T=" << T << ") for " << res.estimates.size() << " prefixes\n";
}

std::vector<calibration::Observation> observations_of(const std::vector<inference::PredictionRow>& rows,
                                                      const fs::path& from) {
    std::vector<calibration::Observation> obs;
    for (const auto& r : rows) {
        if (!r.has_uncertainty || std::isnan(r.target)) {
            throw ContractError("cli", from.string() + " lacks targets or uncertainty columns");
        }
        obs.push_back({r.target, r.mean, r.estimate.total_std});
    }
    return obs;
}

void cmd_calibrate(Run& run, std::ostream& out) {
    const auto& cfg = run.cfg();
    const auto files = cfg.texts("paths.predictions");
    if (files.size() != 1) throw ConfigError("cli", "calibrate takes exactly one --predictions file");
    const fs::path pred = files[0];
    run.input(pred);
    auto stream = observations_of(inference::read_predictions(pred), pred);

    calibration::RollingOptions opt;
    opt.window = cfg.count("calibration.window");
    opt.stride = cfg.count("calibration.stride");
    opt.levels = cfg.reals("calibration.levels");
    std::size_t offset = 0;
    if (const fs::path hist = cfg.text("paths.history"); !hist.empty()) {
        run.input(hist);
        auto h = observations_of(inference::read_predictions(hist), hist);
        if (h.size() > opt.window) h.erase(h.begin(), h.end() - static_cast<std::ptrdiff_t>(opt.window));
        offset = h.size();
        stream.insert(stream.begin(), h.begin(), h.end());
    }
    opt.start = opt.window;
    auto series = calibration::rolling_calibrate(stream, opt);
    for (auto& pt : series) pt.table.as_of -= offset;
    calibration::write_calibration(lvalue(open_out(run.artifact("calibration.csv"))), series);

    std::vector<double> mean_cov(opt.levels.size(), 0.0);
    for (const auto& pt : series)
        for (std::size_t k = 0; k < mean_cov.size(); ++k) mean_cov[k] += pt.coverage[k] / static_cast<double>(series.size());
    out << series.size() << " recalibrations\n";
    for (std::size_t k = 0; k < mean_cov.size(); ++k)
        out << "level " << opt.levels[k] << ": mean coverage " << mean_cov[k] << "\n";
}

void cmd_evaluate(Run& run, std::ostream& out) {
    const auto& cfg = run.cfg();
    const auto files = cfg.texts("paths.predictions");
    if (files.empty()) throw ConfigError("cli", "evaluate needs at least one --predictions file");
    std::vector<evaluation::VariantRun> runs;
    std::map<std::string, int> seen;
    for (const auto& spec : files) {
        const auto eq = spec.find('=');
        const std::string name = eq == std::string::npos ? fs::path(spec).parent_path().filename().string() : spec.substr(0, eq);
        const fs::path path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        run.input(path);
        evaluation::VariantRun v{name.empty() ? path.stem().string() : name, inference::read_predictions(path)};

        const int k = ++seen[v.name];
        const std::string label = sanitize(v.name) + (k > 1 ? "-" + std::to_string(k) : "");
        const bool with_unc = !v.rows.empty() && v.rows.front().has_uncertainty;
        if (with_unc) {
            std::vector<double> y, m, var, sd;
            std::vector<std::size_t> len;
            for (const auto& r : v.rows) {
                y.push_back(r.target);
                m.push_back(r.mean);
                var.push_back(r.has_uncertainty ? r.estimate.total_var : std::nan(""));
                sd.push_back(r.estimate.total_std);
                len.push_back(r.prefix_length);
            }
            const auto shares = cfg.reals("evaluation.shares");
            const auto curve = evaluation::retention_curve(y, m, var, shares);
            evaluation::write_retention(lvalue(open_out(run.artifact("retention_" + label + ".csv"))), curve);
            const auto edges = cfg.reals("evaluation.day_edges");
            const auto heat = evaluation::uncertainty_heatmap(len, y, sd, cfg.count("evaluation.prefix_cap"), edges);
            evaluation::write_heatmap(lvalue(open_out(run.artifact("heatmap_" + label + ".csv"))), heat);
            if (cfg.boolean("evaluation.svg")) {
                evaluation::write_retention_svg(lvalue(open_out(run.artifact("retention_" + label + ".svg"))), curve);
                evaluation::write_heatmap_svg(lvalue(open_out(run.artifact("heatmap_" + label + ".svg"))), heat);
            }
        }
        runs.push_back(std::move(v));
    }
    const std::string base = cfg.text("evaluation.base");
    const auto table = evaluation::compare_models(runs, base.empty() ? std::nullopt : std::optional<std::string>(base));
    evaluation::write_comparison(lvalue(open_out(run.artifact("comparison.csv"))), table);
    for (const auto& r : table) {
        out << r.name << ": MAE " << r.mae << " days over " << r.runs << " run(s)";
        if (!std::isnan(r.normalized)) out << " (" << r.normalized << " of " << base << ")";
        out << "\n";
    }
}

void cmd_baseline(Run& run, std::ostream& out) {
    const auto& cfg = run.cfg();
    const Prepared p = load_prepared(run);
    std::vector<eventlog::Case> history = p.train;
    history.insert(history.end(), p.validation.begin(), p.validation.end());
    const auto ats = baseline::build_ats(history, baseline::parse_abstraction(cfg.text("baseline.abstraction")),
                                         cfg.count("baseline.horizon"),
                                         baseline::parse_statistic(cfg.text("baseline.statistic")));
    const auto preds = baseline::predict_cases(ats, split_cases(p, cfg.text("inference.split")));
    inference::write_predictions(lvalue(open_out(run.artifact("predictions.csv"))), preds.prefixes, preds.predictions, {});
    out << "transition system with " << ats.state_count() << " states; " << preds.predictions.size()
        << " predictions\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.empty() || args[0] == "--help" || args[0] == "-h") {
        (args.empty() ? err : out) << kUsage;
        return args.empty() ? 2 : 0;
    }
    const std::string command = args[0];
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
        err << "unknown command '" << command << "'\n" << kUsage;
        return 2;
    }

    CLI::App app("remtime " + command, "remtime");
    std::string config_file, log, prepared, checkpoint, run_dir, runs_root, split, history;
    std::vector<std::string> sets, predictions;
    std::optional<std::size_t> mc_samples, threads;
    std::optional<std::int64_t> seed;
    app.add_option("--config", config_file, "YAML config file");
    app.add_option("--set", sets, "override a config key (key=value)");
    app.add_option("--log", log, "event log CSV");
    app.add_option("--prepared", prepared, "prepare run directory");
    app.add_option("--checkpoint", checkpoint, "model checkpoint");
    app.add_option("--predictions", predictions, "prediction CSV (evaluate: [name=]path, repeatable)");
    app.add_option("--history", history, "training-split predictions for the first calibration table");
    app.add_option("--mc-samples", mc_samples, "stochastic forward passes");
    app.add_option("--threads", threads, "inference threads");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--runs-root", runs_root, "parent of generated run directories");
    app.add_option("--run-dir", run_dir, "explicit run directory");
    app.add_option("--split", split, "train | validation | test");

    std::vector<std::string> rest(args.begin() + 1, args.end());
    std::reverse(rest.begin(), rest.end());
    try {
        app.parse(rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << kUsage;
        return 2;
    }

    try {
        config::RunConfig cfg;
        if (!config_file.empty()) cfg.merge_yaml_file(config_file);
        for (const auto& s : sets) cfg.set_assignment(s);
        if (!log.empty()) cfg.set("paths.log", log);
        if (!prepared.empty()) cfg.set("paths.prepared", prepared);
        if (!checkpoint.empty()) cfg.set("paths.checkpoint", checkpoint);
        if (!history.empty()) cfg.set("paths.history", history);
        if (!predictions.empty()) {
            std::string joined;
            for (const auto& p : predictions) {
                if (p.find(',') != std::string::npos) throw ConfigError("cli", "prediction paths may not contain commas");
                joined += (joined.empty() ? "" : ",") + p;
            }
            cfg.set("paths.predictions", joined);
        }
        if (mc_samples) cfg.set("inference.mc_samples", std::to_string(*mc_samples));
        if (threads) cfg.set("inference.threads", std::to_string(*threads));
        if (seed) cfg.set("seed", std::to_string(*seed));
        if (!runs_root.empty()) cfg.set("paths.runs_root", runs_root);
        if (!run_dir.empty()) cfg.set("paths.run_dir", run_dir);
        if (!split.empty()) cfg.set("inference.split", split);
        Run r(command, cfg);
        if (command == "synth") cmd_synth(r, out);
        else if (command == "prepare") cmd_prepare(r, out);
        else if (command == "train") cmd_train(r, out);
        else if (command == "predict") cmd_predict(r, out);
        else if (command == "calibrate") cmd_calibrate(r, out);
        else if (command == "evaluate") cmd_evaluate(r, out);
        else cmd_baseline(r, out);
        r.write_manifest();
        out << "run directory: " << r.dir().string() << "\n";
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace remtime::cli
