#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include "remtime/losses.hpp"
#include "remtime/model.hpp"

namespace remtime::training {

struct TrainConfig {
    std::size_t batch_size = 256;
    std::size_t max_epochs = 100;
    double learning_rate = 1e-3;
    std::size_t patience = 10;
    bool early_stopping = true;
    std::uint64_t seed = 42;
    /// Written whenever validation MAE improves; empty disables it.
    std::filesystem::path checkpoint_path;
    /// Fit the output affine map to the training targets before the first epoch.
    bool standardize_target = true;
    /// Override for N in the regularizer; 0 means the training-set size.
    double regularizer_n = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    losses::LossBreakdown train;  // averaged over the epoch's batches
    double train_mae = 0.0;       // of the stochastic training passes
    double validation_mae = 0.0;  // point predictions, dropout off
    double seconds = 0.0;
    std::vector<double> dropout_probabilities;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_validation_mae = 0.0;
    std::vector<double> final_dropout_probabilities;
};

/// Equality of everything except wall-clock timings.
bool same_outcome(const TrainReport& a, const TrainReport& b);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

/// One bias-corrected adaptive-moment update of every parameter that has a gradient.
void adam_step(std::span<ad::Tensor* const> params, AdamState& state, double learning_rate);

void zero_grad(std::span<ad::Tensor* const> params);

/// Patience counter on a metric where lower is better.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    /// Records an epoch's metric; true if it is a new best.
    bool update(double metric);
    /// True once `patience` epochs (at least one) have passed without improvement.
    bool should_stop() const { return seen_ > 0 && since_best_ >= std::max<std::size_t>(patience_, 1); }
    std::size_t best_epoch() const { return best_epoch_; }
    double best() const { return best_; }
    std::size_t epochs_seen() const { return seen_; }

private:
    std::size_t patience_;
    std::size_t seen_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_ = 0.0;
};

/// Mini-batch training of the full variational objective with early stopping on
/// validation MAE. On return the model holds the best validation epoch's weights.
TrainReport train(nn::Model& model, const nn::Batch& train_set, const nn::Batch& validation_set,
                  const TrainConfig& cfg);

/// CSV: epoch, split, data_term, weight_reg_term, dropout_entropy_term, total, mae.
void write_training_log(const TrainReport& report, std::ostream& os);

}  // namespace remtime::training
