#include "remtime/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "remtime/csv.hpp"
#include "remtime/errors.hpp"
#include "remtime/inference.hpp"

namespace remtime::training {

bool same_outcome(const TrainReport& a, const TrainReport& b) {
    if (a.best_epoch != b.best_epoch || a.best_validation_mae != b.best_validation_mae ||
        a.final_dropout_probabilities != b.final_dropout_probabilities || a.epochs.size() != b.epochs.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        const auto& x = a.epochs[i];
        const auto& y = b.epochs[i];
        if (x.epoch != y.epoch || x.train.data_term != y.train.data_term ||
            x.train.weight_reg_term != y.train.weight_reg_term ||
            x.train.dropout_entropy_term != y.train.dropout_entropy_term || x.train.total != y.train.total ||
            x.train_mae != y.train_mae || x.validation_mae != y.validation_mae ||
            x.dropout_probabilities != y.dropout_probabilities) {
            return false;
        }
    }
    return true;
}

void adam_step(std::span<ad::Tensor* const> params, AdamState& state, double learning_rate) {
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), {});
        state.v.assign(params.size(), {});
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        ad::Tensor& p = *params[k];
        if (p.grad.empty()) continue;
        if (p.grad.size() != p.values.size()) throw ContractError("training", "gradient/parameter shape mismatch");
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (m.size() != p.values.size()) {
            m.assign(p.values.size(), 0.0);
            v.assign(p.values.size(), 0.0);
        }
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const double g = p.grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p.values[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

void zero_grad(std::span<ad::Tensor* const> params) {
    for (ad::Tensor* p : params) p->zero_grad();
}

bool EarlyStopping::update(double metric) {
    const bool improved = seen_ == 0 || metric < best_;
    if (improved) {
        best_ = metric;
        best_epoch_ = seen_;
        since_best_ = 0;
    } else {
        ++since_best_;
    }
    ++seen_;
    return improved;
}

TrainReport train(nn::Model& model, const nn::Batch& train_set, const nn::Batch& validation_set,
                  const TrainConfig& cfg) {
    if (train_set.size == 0 || validation_set.size == 0) {
        throw ContractError("training", "training and validation sets must be non-empty");
    }
    if (cfg.batch_size == 0) throw ContractError("training", "batch size must be >= 1");

    if (cfg.standardize_target) {
        const auto& y = train_set.targets;
        const double mu = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
        double ss = 0.0;
        for (double v : y) ss += (v - mu) * (v - mu);
        const double sd = std::sqrt(ss / static_cast<double>(y.size()));
        model.output_scale = nn::OutputScale{mu, sd > 0.0 ? sd : 1.0};
    }

    const auto params = model.parameters();
    const auto sites = model.dropout_sites();
    const bool stochastic = model.spec().dropout != nn::DropoutMode::none;
    const double n_train = cfg.regularizer_n > 0.0 ? cfg.regularizer_n : static_cast<double>(train_set.size);

    AdamState adam;
    EarlyStopping stopper(cfg.patience);
    TrainReport report;
    std::vector<std::vector<double>> best_values;

    std::vector<std::size_t> order(train_set.size);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = make_rng(cfg.seed, 2 * epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        EpochRecord rec;
        rec.epoch = epoch;
        double abs_err = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const nn::Batch batch =
                nn::gather_batch(train_set, std::span<const std::size_t>(order).subspan(begin, end - begin));
            Rng mask_rng = make_rng(substream_seed(cfg.seed, 2 * epoch + 1), n_batches);
            ad::Graph g;
            const nn::ForwardContext ctx{stochastic, &mask_rng};
            const nn::HeadOutput out = model.forward(g, batch, ctx);
            ad::Var target = g.constant(ad::Shape{batch.size}, batch.targets);
            const auto obj = losses::training_objective(g, out, target, sites, n_train, model.spec().length_scale);
            const auto b = obj.breakdown();
            if (!std::isfinite(b.total)) throw DivergedError(epoch, n_batches, "non-finite loss");
            zero_grad(params);
            g.backward(obj.total, params);
            adam_step(params, adam, cfg.learning_rate);

            rec.train.data_term += b.data_term;
            rec.train.weight_reg_term += b.weight_reg_term;
            rec.train.dropout_entropy_term += b.dropout_entropy_term;
            rec.train.total += b.total;
            const auto& mu = out.mean.values();
            for (std::size_t i = 0; i < batch.size; ++i) abs_err += std::abs(mu[i] - batch.targets[i]);
            ++n_batches;
        }
        const double nb = static_cast<double>(n_batches);
        rec.train.data_term /= nb;
        rec.train.weight_reg_term /= nb;
        rec.train.dropout_entropy_term /= nb;
        rec.train.total /= nb;
        rec.train_mae = abs_err / static_cast<double>(train_set.size);

        const auto val_pred = inference::predict_point(model, validation_set);
        rec.validation_mae = losses::mae(val_pred, validation_set.targets);
        if (!std::isfinite(rec.validation_mae)) throw DivergedError(epoch, n_batches, "non-finite validation MAE");
        rec.dropout_probabilities = model.dropout_probabilities();
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(rec);

        if (stopper.update(rec.validation_mae)) {
            best_values.clear();
            for (ad::Tensor* p : params) best_values.push_back(p->values);
            if (!cfg.checkpoint_path.empty()) model.save(cfg.checkpoint_path);
        }
        if (cfg.early_stopping && stopper.should_stop()) break;
    }

    for (std::size_t k = 0; k < params.size(); ++k) params[k]->values = best_values[k];
    zero_grad(params);
    report.best_epoch = stopper.best_epoch();
    report.best_validation_mae = stopper.best();
    report.final_dropout_probabilities = model.dropout_probabilities();
    return report;
}

void write_training_log(const TrainReport& report, std::ostream& os) {
    os << "epoch,split,data_term,weight_reg_term,dropout_entropy_term,total,mae\n";
    for (const auto& e : report.epochs) {
        csv::write_row(os, {std::to_string(e.epoch), "train", csv::format_double(e.train.data_term),
                            csv::format_double(e.train.weight_reg_term),
                            csv::format_double(e.train.dropout_entropy_term), csv::format_double(e.train.total),
                            csv::format_double(e.train_mae)});
        csv::write_row(os, {std::to_string(e.epoch), "validation", "", "", "", "", csv::format_double(e.validation_mae)});
    }
}

}  // namespace remtime::training
