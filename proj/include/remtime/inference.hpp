#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include "remtime/eventlog.hpp"
#include "remtime/model.hpp"
#include "remtime/synthdata.hpp"

namespace remtime::inference {

struct UncertaintyEstimate {
    double mean = 0.0;  // fractional days
    double epistemic_var = 0.0;
    double aleatoric_var = 0.0;
    double total_var = 0.0;
    double total_std = 0.0;
    std::size_t T = 0;
    bool single_pass = false;  // T == 1: epistemic_var is not estimated
};

/// Mean output with dropout off.
std::vector<double> predict_point(const nn::Model& model, const nn::Batch& batch);

struct McOptions {
    std::size_t T = 50;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool keep_draws = false;
    bool allow_single_pass = false;
};

/// Raw MC output, pass-major: draw t of row i is at [t * rows + i].
struct McDraws {
    std::size_t T = 0;
    std::size_t rows = 0;
    std::vector<double> means;
    std::vector<double> log_variances;  // empty for a homoscedastic head
};

struct McResult {
    std::vector<UncertaintyEstimate> estimates;
    McDraws draws;  // filled when keep_draws
};

/// T stochastic passes, each with its own weight masks, reduced per row.
McResult mc_predict(const nn::Model& model, const nn::Batch& batch, const McOptions& options);

/// Reduction used by mc_predict. It sorts each row's draws first, so the
/// result does not depend on the order of the passes.
std::vector<UncertaintyEstimate> estimates_from_draws(const McDraws& draws);

struct ShrinkageOptions {
    std::uint64_t seed = 0;
    std::size_t grid_points = 200;
    std::size_t T = 50;
    std::size_t threads = 1;
    std::size_t steps = 5000;      // gradient steps per model, whatever the size
    std::size_t batch_size = 64;
    double learning_rate = 3e-3;
    double length_scale = 1e-2;
};

struct ShrinkageReport {
    std::vector<std::size_t> sizes;
    std::vector<double> mean_epistemic_var;
    std::vector<double> mean_aleatoric_var;
    double true_noise_var = 0.0;  // average sigma(x)^2 over the grid
    bool asserted = false;        // at least three sizes
    double spearman = 0.0;        // between size and mean epistemic_var
    bool passed = true;           // spearman <= -0.8 when asserted
};

/// Trains one concrete-dropout heteroscedastic network per size on the
/// generator and measures mean epistemic variance on a fixed grid.
ShrinkageReport epistemic_shrinks_with_data(const synth::Regression1dSpec& generator,
                                            std::span<const std::size_t> sizes, const ShrinkageOptions& options);

/// case_id, prefix_length, target, mean, epistemic_var, aleatoric_var, total_std.
/// Rows follow the prefixes' event timestamps; ties keep input order.
/// Without estimates the uncertainty columns are left empty.
void write_predictions(std::ostream& os, std::span<const eventlog::PrefixRecord> prefixes,
                       std::span<const double> point, std::span<const UncertaintyEstimate> estimates);

struct PredictionRow {
    std::string case_id;
    std::size_t prefix_length = 0;
    double target = 0.0;
    double mean = 0.0;
    bool has_uncertainty = false;
    UncertaintyEstimate estimate;
};

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path);

}  // namespace remtime::inference
