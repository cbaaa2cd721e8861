#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "remtime/calibration.hpp"
#include "remtime/errors.hpp"

using namespace remtime;
using namespace remtime::calibration;

namespace {

std::vector<Observation> gaussian_stream(std::size_t n, double scale_error, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> sd(0.5, 3.0);
    std::vector<Observation> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = sd(rng);
        const double mean = 20.0;
        out.push_back({mean + scale_error * s * nd(rng), mean, s});
    }
    return out;
}

}  // namespace

TEST_CASE("critical values are interpolated quantiles of standardized residuals") {
    std::vector<Observation> w;
    for (int i = 1; i <= 100; ++i) w.push_back({10.0 + (i % 2 ? 1 : -1) * 2.0 * i, 10.0, 2.0});
    const std::vector<double> levels{0.5, 0.9, 0.99};
    auto t = fit_critical_values(w, levels, 7);
    CHECK(t.z_at(0.5) == doctest::Approx(50.5));
    CHECK(t.z_at(0.9) == doctest::Approx(90.1));
    CHECK(t.z_at(0.99) == doctest::Approx(99.01));
    CHECK(t.window == 100);
    CHECK(t.as_of == 7);
    CHECK_THROWS_AS(t.z_at(0.7), ContractError);
}

TEST_CASE("gaussian residuals recover normal quantiles and nominal coverage") {
    auto w = gaussian_stream(200000, 1.0, 1);
    auto t = fit_critical_values(w, default_levels());
    CHECK(t.z_at(0.5) == doctest::Approx(0.6745).epsilon(0.01));
    CHECK(t.z_at(0.9) == doctest::Approx(1.6449).epsilon(0.01));
    CHECK(t.z_at(0.95) == doctest::Approx(1.9600).epsilon(0.01));
    CHECK(t.z_at(0.99) == doctest::Approx(2.5758).epsilon(0.015));
    auto cov = coverage(w, t);
    for (std::size_t k = 0; k < cov.size(); ++k) {
        CHECK(cov[k] >= t.levels[k]);
        CHECK(cov[k] < t.levels[k] + 1e-3);
    }
    // miscalibrated std is absorbed into z
    auto wide = fit_critical_values(gaussian_stream(200000, 2.0, 1), default_levels());
    CHECK(wide.z_at(0.95) == doctest::Approx(2.0 * t.z_at(0.95)).epsilon(1e-9));
}

TEST_CASE("intervals are symmetric and clamped at zero") {
    CriticalValueTable t{{0.5, 0.9}, {1.0, 2.0}, 10, 0};
    auto p = build_interval(3.0, 1.0, t);
    CHECK(p.intervals[0].lower == 2.0);
    CHECK(p.intervals[0].upper == 4.0);
    CHECK(p.intervals[1].lower == 1.0);
    CHECK_FALSE(p.clamped);
    auto q = build_interval(1.0, 1.0, t);
    CHECK(q.intervals[1].lower == 0.0);
    CHECK(q.intervals[1].upper == 3.0);
    CHECK(q.intervals[1].clamped);
    CHECK_FALSE(q.intervals[0].clamped);
    CHECK(q.clamped);
    // nested: wider levels contain narrower ones
    CHECK(q.intervals[1].lower <= q.intervals[0].lower);
    CHECK(q.intervals[1].upper >= q.intervals[0].upper);
}

TEST_CASE("calibration contract") {
    std::vector<Observation> none;
    CHECK_THROWS_AS(fit_critical_values(none, default_levels()), ContractError);
    std::vector<Observation> zero_std{{1.0, 1.0, 0.0}};
    CHECK_THROWS_AS(fit_critical_values(zero_std, default_levels()), ContractError);
    std::vector<Observation> ok{{1.0, 1.0, 1.0}};
    const std::vector<double> unsorted{0.9, 0.5};
    const std::vector<double> out_of_range{0.5, 1.0};
    CHECK_THROWS_AS(fit_critical_values(ok, unsorted), ContractError);
    CHECK_THROWS_AS(fit_critical_values(ok, out_of_range), ContractError);
}

TEST_CASE("rolling recalibration positions and windows") {
    auto s = gaussian_stream(1050, 1.0, 2);
    RollingOptions o;
    o.window = 400;
    o.stride = 200;
    auto series = rolling_calibrate(s, o);
    REQUIRE(series.size() == 4);  // 400, 600, 800, 1000
    CHECK(series[0].table.as_of == 400);
    CHECK(series[3].table.as_of == 1000);
    CHECK(series[0].evaluated == 400);
    CHECK(series[3].evaluated == 50);
    for (const auto& p : series) CHECK(p.table.window == 400);
    // a table equals a direct fit on the preceding window
    auto direct = fit_critical_values(std::span<const Observation>(s).subspan(200, 400), o.levels, 600);
    CHECK(series[1].table.z == direct.z);
    CHECK(series[1].coverage == coverage(std::span<const Observation>(s).subspan(600, 400), direct));

    o.start = 100;
    CHECK_THROWS_AS(rolling_calibrate(s, o), ContractError);
    o.start = 500;
    CHECK(rolling_calibrate(s, o)[0].table.as_of == 500);

    o.start = 0;
    o.window = 1000;
    CHECK_THROWS_AS(rolling_calibrate(s, o), ContractError);

    std::ostringstream os;
    write_calibration(os, series);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "as_of,level,z,coverage");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == series.size() * o.levels.size());
}

TEST_CASE("observations pair targets with estimates") {
    std::vector<double> y{1.0, 2.0};
    std::vector<inference::UncertaintyEstimate> e(2);
    e[0].mean = 1.5;
    e[0].total_std = 0.5;
    e[1].mean = 2.5;
    e[1].total_std = 1.0;
    auto obs = observations(y, e);
    CHECK(obs[1].target == 2.0);
    CHECK(obs[1].mean == 2.5);
    CHECK(obs[1].total_std == 1.0);
    std::vector<double> short_y{1.0};
    CHECK_THROWS_AS(observations(short_y, e), ContractError);
}
