#include "remtime/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "remtime/csv.hpp"
#include "remtime/errors.hpp"
#include "remtime/stats.hpp"
#include "remtime/training.hpp"

namespace remtime::inference {

namespace {

constexpr std::size_t kChunkRows = 2048;

// Runs one forward pass per chunk. With an rng seed every chunk restarts the
// same stream, so all rows see the same weight masks.
void forward_rows(const nn::Model& model, const nn::Batch& batch, const std::uint64_t* mask_seed,
                  double* means, double* log_vars) {
    for (std::size_t begin = 0; begin < batch.size; begin += kChunkRows) {
        const std::size_t end = std::min(batch.size, begin + kChunkRows);
        const nn::Batch chunk = begin == 0 && end == batch.size ? batch : nn::slice_batch(batch, begin, end);
        ad::Graph g;
        Rng rng(mask_seed ? *mask_seed : 0);
        const nn::ForwardContext ctx{mask_seed != nullptr, mask_seed ? &rng : nullptr};
        const nn::HeadOutput out = model.forward(g, chunk, ctx);
        const auto& mu = out.mean.values();
        std::copy(mu.begin(), mu.end(), means + begin);
        if (log_vars && out.log_variance.valid()) {
            const auto& s = out.log_variance.values();
            std::copy(s.begin(), s.end(), log_vars + begin);
        }
    }
}

}  // namespace

std::vector<double> predict_point(const nn::Model& model, const nn::Batch& batch) {
    std::vector<double> out(batch.size);
    if (batch.size == 0) return out;
    forward_rows(model, batch, nullptr, out.data(), nullptr);
    return out;
}

McResult mc_predict(const nn::Model& model, const nn::Batch& batch, const McOptions& options) {
    if (options.T < 1 || (options.T < 2 && !options.allow_single_pass)) {
        throw ContractError("inference", "mc_predict needs T >= 2 (got " + std::to_string(options.T) + ")");
    }
    if (model.spec().dropout == nn::DropoutMode::none) {
        throw ContractError("inference", "mc_predict needs a model with dropout");
    }
    const std::size_t n = batch.size;
    const bool hetero = model.spec().heteroscedastic;
    McDraws draws;
    draws.T = options.T;
    draws.rows = n;
    draws.means.assign(options.T * n, 0.0);
    if (hetero) draws.log_variances.assign(options.T * n, 0.0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t t = next++; t < options.T; t = next++) {
            try {
                const std::uint64_t seed = substream_seed(options.seed, t);
                forward_rows(model, batch, &seed, draws.means.data() + t * n,
                             hetero ? draws.log_variances.data() + t * n : nullptr);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = options.T;
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(options.threads, 1, options.T);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    McResult result;
    result.estimates = estimates_from_draws(draws);
    if (options.keep_draws) result.draws = std::move(draws);
    return result;
}

std::vector<UncertaintyEstimate> estimates_from_draws(const McDraws& draws) {
    const std::size_t T = draws.T;
    const std::size_t n = draws.rows;
    if (T < 1 || draws.means.size() != T * n) throw ContractError("inference", "draw buffer does not match T x rows");
    const bool hetero = !draws.log_variances.empty();
    if (hetero && draws.log_variances.size() != T * n) throw ContractError("inference", "log-variance draws do not match T x rows");

    std::vector<UncertaintyEstimate> out(n);
    std::vector<double> d(T), v(T);
    const double inv_t = 1.0 / static_cast<double>(T);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) d[t] = draws.means[t * n + i];
        std::sort(d.begin(), d.end());
        double shift = 0.0;
        for (std::size_t t = 0; t < T; ++t) shift += d[t] - d[0];
        const double m = d[0] + shift * inv_t;
        double ss = 0.0;
        for (std::size_t t = 0; t < T; ++t) ss += (d[t] - m) * (d[t] - m);

        UncertaintyEstimate& e = out[i];
        e.T = T;
        e.single_pass = T == 1;
        e.mean = m;
        e.epistemic_var = T == 1 ? 0.0 : ss * inv_t;
        if (hetero) {
            for (std::size_t t = 0; t < T; ++t) v[t] = std::exp(draws.log_variances[t * n + i]);
            std::sort(v.begin(), v.end());
            double s = 0.0;
            for (double x : v) s += x;
            e.aleatoric_var = s * inv_t;
        }
        e.total_var = e.epistemic_var + e.aleatoric_var;
        e.total_std = std::sqrt(e.total_var);
    }
    return out;
}

ShrinkageReport epistemic_shrinks_with_data(const synth::Regression1dSpec& generator,
                                            std::span<const std::size_t> sizes, const ShrinkageOptions& options) {
    if (sizes.empty()) throw ContractError("inference", "shrinkage sweep needs at least one size");
    for (std::size_t i = 1; i < sizes.size(); ++i) {
        if (sizes[i] <= sizes[i - 1]) throw ContractError("inference", "shrinkage sizes must be strictly increasing");
    }
    ShrinkageReport report;
    report.sizes.assign(sizes.begin(), sizes.end());

    const auto xs = synth::grid(options.grid_points, generator.x_min, generator.x_max);
    std::vector<double> true_f(xs.size());
    double noise = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        true_f[i] = synth::regression_mean(xs[i]);
        const double s = synth::regression_sigma(generator, xs[i]);
        noise += s * s;
    }
    report.true_noise_var = noise / static_cast<double>(xs.size());
    const nn::Batch grid_batch = synth::regression_batch(xs, true_f);

    synth::Regression1dSpec val_spec = generator;
    val_spec.n = 200;
    val_spec.seed = substream_seed(generator.seed, 0x76616c);
    const auto val = synth::gen_regression1d(val_spec);
    const nn::Batch val_batch = synth::regression_batch(val.x, val.y);

    nn::ModelSpec spec = nn::default_spec(nn::Architecture::mlp);
    spec.numeric_features = 1;
    spec.sequence_length = 1;
    spec.dropout = nn::DropoutMode::concrete;
    spec.heteroscedastic = true;
    spec.length_scale = options.length_scale;

    for (std::size_t n : sizes) {
        synth::Regression1dSpec gen = generator;
        gen.n = n;
        const auto data = synth::gen_regression1d(gen);
        const nn::Batch train_batch = synth::regression_batch(data.x, data.y);

        nn::Model model(spec, options.seed);
        training::TrainConfig cfg;
        cfg.seed = options.seed;
        cfg.batch_size = std::min(options.batch_size, n);
        const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
        cfg.max_epochs = std::max<std::size_t>(1, (options.steps + per_epoch - 1) / per_epoch);
        cfg.learning_rate = options.learning_rate;
        cfg.early_stopping = false;
        training::train(model, train_batch, val_batch, cfg);

        McOptions mc;
        mc.T = options.T;
        mc.seed = options.seed;
        mc.threads = options.threads;
        const auto est = mc_predict(model, grid_batch, mc).estimates;
        double epi = 0.0, alea = 0.0;
        for (const auto& e : est) {
            epi += e.epistemic_var;
            alea += e.aleatoric_var;
        }
        report.mean_epistemic_var.push_back(epi / static_cast<double>(est.size()));
        report.mean_aleatoric_var.push_back(alea / static_cast<double>(est.size()));
    }

    if (sizes.size() >= 3) {
        std::vector<double> sz(sizes.begin(), sizes.end());
        report.asserted = true;
        report.spearman = stats::spearman(sz, report.mean_epistemic_var);
        report.passed = report.spearman <= -0.8;
    }
    return report;
}

void write_predictions(std::ostream& os, std::span<const eventlog::PrefixRecord> prefixes,
                       std::span<const double> point, std::span<const UncertaintyEstimate> estimates) {
    const bool with_unc = !estimates.empty();
    if (with_unc ? estimates.size() != prefixes.size() : point.size() != prefixes.size()) {
        throw ContractError("inference", "predictions do not match the prefixes");
    }
    std::vector<std::size_t> order(prefixes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return prefixes[a].event_timestamp < prefixes[b].event_timestamp;
    });
    os << "case_id,prefix_length,target,mean,epistemic_var,aleatoric_var,total_std\n";
    for (std::size_t i : order) {
        const auto& p = prefixes[i];
        std::vector<std::string> row{p.case_id, std::to_string(p.prefix_length),
                                     std::isnan(p.target) ? "" : csv::format_double(p.target)};
        if (with_unc) {
            const auto& e = estimates[i];
            row.push_back(csv::format_double(e.mean));
            row.push_back(csv::format_double(e.epistemic_var));
            row.push_back(csv::format_double(e.aleatoric_var));
            row.push_back(csv::format_double(e.total_std));
        } else {
            row.insert(row.end(), {csv::format_double(point[i]), "", "", ""});
        }
        csv::write_row(os, row);
    }
}

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path) {
    const csv::Table table = csv::read_file(path);
    const char* names[] = {"case_id", "prefix_length", "target", "mean", "epistemic_var", "aleatoric_var", "total_std"};
    std::size_t col[7];
    for (int k = 0; k < 7; ++k) {
        col[k] = table.column(names[k]);
        if (col[k] == std::string::npos) throw SchemaError("inference", names[k], "missing column in " + path.string());
    }
    auto num = [&](const csv::Row& r, std::size_t c) {
        const std::string& f = r.fields.at(c);
        if (f.empty()) return std::numeric_limits<double>::quiet_NaN();
        try {
            return std::stod(f);
        } catch (const std::exception&) {
            throw RowError("inference", r.line, "not a number: '" + f + "'");
        }
    };
    std::vector<PredictionRow> out;
    for (const auto& r : table.rows) {
        if (r.fields.size() != table.header.size()) throw RowError("inference", r.line, "wrong number of fields");
        PredictionRow p;
        p.case_id = r.fields[col[0]];
        p.prefix_length = static_cast<std::size_t>(num(r, col[1]));
        p.target = num(r, col[2]);
        p.mean = num(r, col[3]);
        p.has_uncertainty = !r.fields[col[4]].empty();
        if (p.has_uncertainty) {
            p.estimate.mean = p.mean;
            p.estimate.epistemic_var = num(r, col[4]);
            p.estimate.aleatoric_var = num(r, col[5]);
            p.estimate.total_std = num(r, col[6]);
            p.estimate.total_var = p.estimate.epistemic_var + p.estimate.aleatoric_var;
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace remtime::inference
