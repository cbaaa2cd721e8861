#include "remtime/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "remtime/csv.hpp"
#include "remtime/errors.hpp"

namespace remtime::evaluation {

std::vector<double> default_shares() { return {1.0, 0.75, 0.50, 0.25, 0.10, 0.05}; }
std::vector<double> default_day_edges() { return {0.0, 5.0, 10.0, 20.0, 50.0}; }

RetentionCurve retention_curve(std::span<const double> targets, std::span<const double> means,
                               std::span<const double> total_var, std::span<const double> shares) {
    const std::size_t n = targets.size();
    if (means.size() != n || total_var.size() != n) throw ContractError("evaluation", "retention inputs differ in length");
    if (n < 20) throw ContractError("evaluation", "retention curve needs at least 20 predictions");
    for (double v : total_var)
        if (!std::isfinite(v)) throw ContractError("evaluation", "missing uncertainty for a prediction");
    for (std::size_t i = 0; i < shares.size(); ++i) {
        if (!(shares[i] > 0.0 && shares[i] <= 1.0)) throw ContractError("evaluation", "share outside (0, 1]");
        if (i > 0 && !(shares[i] < shares[i - 1])) throw ContractError("evaluation", "shares must be descending");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return total_var[a] < total_var[b]; });

    RetentionCurve c;
    c.shares.assign(shares.begin(), shares.end());
    for (double s : shares) {
        // the small offset keeps products like 0.1 * 20 from rounding up
        const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(s * static_cast<double>(n) - 1e-9)));
        double err = 0.0;
        for (std::size_t j = 0; j < k; ++j) err += std::abs(means[order[j]] - targets[order[j]]);
        c.counts.push_back(k);
        c.mae.push_back(err / static_cast<double>(k));
    }
    return c;
}

RetentionCurve retention_curve(std::span<const double> targets, std::span<const double> means,
                               std::span<const double> total_var) {
    const auto s = default_shares();
    return retention_curve(targets, means, total_var, s);
}

std::size_t UncertaintyHeatmap::total() const {
    std::size_t t = 0;
    for (const auto& row : cells)
        for (const auto& c : row) t += c.count;
    return t;
}

UncertaintyHeatmap uncertainty_heatmap(std::span<const std::size_t> prefix_lengths, std::span<const double> targets,
                                       std::span<const double> total_std, std::size_t prefix_cap,
                                       std::span<const double> day_edges) {
    const std::size_t n = prefix_lengths.size();
    if (targets.size() != n || total_std.size() != n) throw ContractError("evaluation", "heatmap inputs differ in length");
    if (prefix_cap == 0) throw ContractError("evaluation", "prefix cap must be >= 1");
    UncertaintyHeatmap h;
    h.prefix_cap = prefix_cap;
    h.day_edges = day_edges.empty() ? default_day_edges() : std::vector<double>(day_edges.begin(), day_edges.end());
    for (std::size_t i = 1; i < h.day_edges.size(); ++i)
        if (!(h.day_edges[i] > h.day_edges[i - 1])) throw ContractError("evaluation", "day bin edges must increase");
    h.cells.assign(prefix_cap, std::vector<HeatmapCell>(h.day_edges.size()));
    for (std::size_t i = 0; i < n; ++i) {
        if (prefix_lengths[i] == 0) throw ContractError("evaluation", "prefix length 0");
        if (!std::isfinite(targets[i])) throw ContractError("evaluation", "heatmap needs known targets");
        const std::size_t row = std::min(prefix_lengths[i], prefix_cap) - 1;
        const auto it = std::upper_bound(h.day_edges.begin(), h.day_edges.end(), targets[i]);
        const std::size_t col = it == h.day_edges.begin() ? 0 : static_cast<std::size_t>(it - h.day_edges.begin()) - 1;
        auto& cell = h.cells[row][col];
        ++cell.count;
        cell.mean_total_std += total_std[i];
    }
    for (auto& row : h.cells)
        for (auto& c : row)
            if (c.count > 0) c.mean_total_std /= static_cast<double>(c.count);
    return h;
}

namespace {

bool same_test_set(const std::vector<inference::PredictionRow>& a, const std::vector<inference::PredictionRow>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].case_id != b[i].case_id || a[i].prefix_length != b[i].prefix_length) return false;
        if (a[i].target != b[i].target && !(std::isnan(a[i].target) && std::isnan(b[i].target))) return false;
    }
    return true;
}

}  // namespace

std::vector<ComparisonRow> compare_models(std::span<const VariantRun> runs, const std::optional<std::string>& base) {
    if (runs.empty()) throw ContractError("evaluation", "nothing to compare");
    std::vector<ComparisonRow> rows;
    std::map<std::string, std::size_t> at;
    for (const auto& r : runs) {
        if (!same_test_set(r.rows, runs.front().rows)) {
            throw ContractError("evaluation", "variant '" + r.name + "' was evaluated on a different test set");
        }
        if (r.rows.empty()) throw ContractError("evaluation", "variant '" + r.name + "' has no predictions");
        double err = 0.0;
        for (const auto& p : r.rows) err += std::abs(p.mean - p.target);
        const double mae = err / static_cast<double>(r.rows.size());
        auto [it, fresh] = at.emplace(r.name, rows.size());
        if (fresh) rows.push_back(ComparisonRow{r.name, 0, 0.0});
        auto& row = rows[it->second];
        row.mae += mae;
        ++row.runs;
    }
    for (auto& r : rows) r.mae /= static_cast<double>(r.runs);
    if (base) {
        auto it = at.find(*base);
        if (it == at.end()) throw ContractError("evaluation", "base variant '" + *base + "' not among the runs");
        const double denom = rows[it->second].mae;
        for (auto& r : rows) r.normalized = r.mae / denom;
    }
    return rows;
}

void write_retention(std::ostream& os, const RetentionCurve& curve) {
    os << "share,count,mae\n";
    for (std::size_t i = 0; i < curve.shares.size(); ++i) {
        csv::write_row(os, {csv::format_double(curve.shares[i]), std::to_string(curve.counts[i]),
                            csv::format_double(curve.mae[i])});
    }
}

void write_heatmap(std::ostream& os, const UncertaintyHeatmap& map) {
    os << "prefix_length,days_from,days_to,count,mean_total_std\n";
    for (std::size_t r = 0; r < map.cells.size(); ++r) {
        for (std::size_t c = 0; c < map.day_edges.size(); ++c) {
            const std::string upper = c + 1 < map.day_edges.size() ? csv::format_double(map.day_edges[c + 1]) : "";
            csv::write_row(os, {std::to_string(r + 1), csv::format_double(map.day_edges[c]), upper,
                                std::to_string(map.cells[r][c].count),
                                csv::format_double(map.cells[r][c].mean_total_std)});
        }
    }
}

void write_comparison(std::ostream& os, std::span<const ComparisonRow> rows) {
    os << "variant,runs,mae,normalized\n";
    for (const auto& r : rows) {
        csv::write_row(os, {r.name, std::to_string(r.runs), csv::format_double(r.mae),
                            std::isnan(r.normalized) ? "" : csv::format_double(r.normalized)});
    }
}

void write_retention_svg(std::ostream& os, const RetentionCurve& curve) {
    const double w = 480, h = 320, pad = 40;
    const double top = curve.mae.empty() ? 1.0 : *std::max_element(curve.mae.begin(), curve.mae.end());
    const double y_max = top > 0.0 ? top * 1.1 : 1.0;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
       << "\" stroke=\"black\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.shares.size(); ++i) {
        const double x = pad + (1.0 - curve.shares[i]) * (w - 2 * pad);
        const double y = h - pad - curve.mae[i] / y_max * (h - 2 * pad);
        os << x << ',' << y << ' ';
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < curve.shares.size(); ++i) {
        const double x = pad + (1.0 - curve.shares[i]) * (w - 2 * pad);
        os << "<text x=\"" << x << "\" y=\"" << h - pad / 3 << "\" font-size=\"10\" text-anchor=\"middle\">"
           << curve.shares[i] * 100 << "%</text>\n";
    }
    os << "<text x=\"" << pad << "\" y=\"" << pad / 2 << "\" font-size=\"12\">MAE (max " << top << ")</text>\n";
    os << "</svg>\n";
}

void write_heatmap_svg(std::ostream& os, const UncertaintyHeatmap& map) {
    const double cell = 36, pad = 50;
    const std::size_t cols = map.day_edges.size();
    const std::size_t rows = map.cells.size();
    double top = 0.0;
    for (const auto& r : map.cells)
        for (const auto& c : r) top = std::max(top, c.mean_total_std);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << pad * 2 + cell * cols << "\" height=\""
       << pad * 2 + cell * rows << "\">\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto& v = map.cells[r][c];
            const int shade = top > 0.0 ? static_cast<int>(255.0 * (1.0 - v.mean_total_std / top)) : 255;
            os << "<rect x=\"" << pad + cell * c << "\" y=\"" << pad + cell * r << "\" width=\"" << cell
               << "\" height=\"" << cell << "\" fill=\"rgb(255," << shade << ',' << shade << ")\"><title>" << v.count
               << "</title></rect>\n";
        }
        os << "<text x=\"" << pad - 6 << "\" y=\"" << pad + cell * (r + 0.6) << "\" font-size=\"10\" text-anchor=\"end\">"
           << r + 1 << (r + 1 == rows ? "+" : "") << "</text>\n";
    }
    for (std::size_t c = 0; c < cols; ++c) {
        os << "<text x=\"" << pad + cell * (c + 0.5) << "\" y=\"" << pad - 6
           << "\" font-size=\"10\" text-anchor=\"middle\">" << map.day_edges[c] << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace remtime::evaluation
