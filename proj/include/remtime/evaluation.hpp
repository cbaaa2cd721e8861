#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "remtime/inference.hpp"

namespace remtime::evaluation {

std::vector<double> default_shares();  // 1.0, 0.75, 0.50, 0.25, 0.10, 0.05

struct RetentionCurve {
    std::vector<double> shares;  // descending
    std::vector<std::size_t> counts;
    std::vector<double> mae;
};

/// MAE of the ceil(share * N) predictions with the lowest total_var, for each
/// share. Ties keep input order.
RetentionCurve retention_curve(std::span<const double> targets, std::span<const double> means,
                               std::span<const double> total_var, std::span<const double> shares);
RetentionCurve retention_curve(std::span<const double> targets, std::span<const double> means,
                               std::span<const double> total_var);

struct HeatmapCell {
    std::size_t count = 0;
    double mean_total_std = 0.0;  // 0 for empty cells
};

struct UncertaintyHeatmap {
    std::size_t prefix_cap = 10;
    std::vector<double> day_edges;           // lower edges; the last bin is open
    std::vector<std::vector<HeatmapCell>> cells;  // [prefix_length - 1][day bin]

    std::size_t total() const;
};

std::vector<double> default_day_edges();  // 0, 5, 10, 20, 50

/// Prefix lengths above the cap fall into the cap row; negative targets into the first day bin.
UncertaintyHeatmap uncertainty_heatmap(std::span<const std::size_t> prefix_lengths, std::span<const double> targets,
                                       std::span<const double> total_std, std::size_t prefix_cap = 10,
                                       std::span<const double> day_edges = {});

struct VariantRun {
    std::string name;
    std::vector<inference::PredictionRow> rows;
};

struct ComparisonRow {
    std::string name;
    std::size_t runs = 0;
    double mae = 0.0;  // averaged over runs
    double normalized = std::numeric_limits<double>::quiet_NaN();
};

/// MAE per variant; runs sharing a name are averaged. With `base`, every MAE
/// is also divided by that variant's.
std::vector<ComparisonRow> compare_models(std::span<const VariantRun> runs, const std::optional<std::string>& base);

void write_retention(std::ostream& os, const RetentionCurve& curve);
void write_heatmap(std::ostream& os, const UncertaintyHeatmap& map);
void write_comparison(std::ostream& os, std::span<const ComparisonRow> rows);

void write_retention_svg(std::ostream& os, const RetentionCurve& curve);
void write_heatmap_svg(std::ostream& os, const UncertaintyHeatmap& map);

}  // namespace remtime::evaluation
