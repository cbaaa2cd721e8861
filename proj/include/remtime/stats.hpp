#pragma once

#include <span>
#include <vector>

namespace remtime::stats {

double mean(std::span<const double> v);

/// 1-based ranks; ties get the average of the ranks they span.
std::vector<double> ranks(std::span<const double> v);

double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);

/// Linear-interpolation quantile (type 7) of unsorted data, q in [0, 1].
double quantile(std::vector<double> v, double q);

}  // namespace remtime::stats
