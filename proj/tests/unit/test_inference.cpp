#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "remtime/errors.hpp"
#include "remtime/inference.hpp"
#include "remtime/model.hpp"
#include "remtime/synthdata.hpp"

using namespace remtime;
using namespace remtime::inference;

namespace {

nn::Model small_cnn(nn::DropoutMode mode, double p, bool hetero, std::uint64_t seed = 4) {
    nn::ModelSpec spec = nn::default_spec(nn::Architecture::cnn);
    spec.vocab_sizes = {6};
    spec.embedding_dims = {3};
    spec.numeric_features = 2;
    spec.sequence_length = 5;
    spec.conv_channels = {4, 4};
    spec.dense_units = {8};
    spec.dropout = mode;
    spec.dropout_p = p;
    spec.concrete_init_p = 0.2;
    spec.heteroscedastic = hetero;
    return nn::Model(spec, seed);
}

nn::Batch random_batch(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> cat(0, 5);
    std::normal_distribution<double> num(0.0, 1.0);
    nn::Batch b;
    b.size = n;
    b.seq_len = 5;
    b.n_cat = 1;
    b.n_num = 2;
    for (std::size_t i = 0; i < n * 5; ++i) b.categorical.push_back(cat(rng));
    for (std::size_t i = 0; i < n * 10; ++i) b.numeric.push_back(num(rng));
    b.targets.assign(n, 1.0);
    return b;
}

}  // namespace

TEST_CASE("reduction matches the textbook formulas") {
    McDraws d;
    d.T = 4;
    d.rows = 2;
    d.means = {1.0, 10.0, 2.0, 10.0, 3.0, 10.0, 6.0, 10.0};
    d.log_variances = {0.0, std::log(2.0), std::log(3.0), std::log(2.0), 0.0, std::log(2.0), std::log(3.0), std::log(2.0)};
    auto e = estimates_from_draws(d);
    CHECK(e[0].mean == doctest::Approx(3.0));
    CHECK(e[0].epistemic_var == doctest::Approx((4.0 + 1.0 + 0.0 + 9.0) / 4.0));
    CHECK(e[0].aleatoric_var == doctest::Approx(2.0));
    CHECK(e[0].total_var == doctest::Approx(5.5));
    CHECK(e[0].total_std == doctest::Approx(std::sqrt(5.5)));
    CHECK(e[1].mean == 10.0);
    CHECK(e[1].epistemic_var == 0.0);
    CHECK(e[1].aleatoric_var == doctest::Approx(2.0));
    CHECK(e[0].T == 4);
    CHECK_FALSE(e[0].single_pass);

    d.log_variances.clear();
    auto h = estimates_from_draws(d);
    CHECK(h[0].aleatoric_var == 0.0);
    CHECK(h[0].total_var == h[0].epistemic_var);
}

TEST_CASE("reduction does not depend on the order of the passes") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(5.0, 3.0);
    McDraws d;
    d.T = 37;
    d.rows = 9;
    for (std::size_t i = 0; i < d.T * d.rows; ++i) {
        d.means.push_back(nd(rng));
        d.log_variances.push_back(nd(rng) / 5.0);
    }
    const auto base = estimates_from_draws(d);
    std::vector<std::size_t> perm(d.T);
    std::iota(perm.begin(), perm.end(), 0);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        McDraws p = d;
        for (std::size_t t = 0; t < d.T; ++t)
            for (std::size_t i = 0; i < d.rows; ++i) {
                p.means[t * d.rows + i] = d.means[perm[t] * d.rows + i];
                p.log_variances[t * d.rows + i] = d.log_variances[perm[t] * d.rows + i];
            }
        const auto q = estimates_from_draws(p);
        for (std::size_t i = 0; i < d.rows; ++i) {
            CHECK(q[i].mean == base[i].mean);
            CHECK(q[i].epistemic_var == base[i].epistemic_var);
            CHECK(q[i].aleatoric_var == base[i].aleatoric_var);
        }
    }
}

TEST_CASE("variance decomposition invariants on a real model") {
    auto model = small_cnn(nn::DropoutMode::concrete, 0.0, true);
    auto batch = random_batch(30, 1);
    McOptions o;
    o.T = 20;
    o.seed = 3;
    auto r = mc_predict(model, batch, o);
    REQUIRE(r.estimates.size() == 30);
    for (const auto& e : r.estimates) {
        CHECK(e.epistemic_var >= 0.0);
        CHECK(e.aleatoric_var > 0.0);
        CHECK(e.total_var == doctest::Approx(e.epistemic_var + e.aleatoric_var));
        CHECK(e.total_std == doctest::Approx(std::sqrt(e.total_var)));
    }
    CHECK(r.draws.means.empty());
}

TEST_CASE("mc_predict contract") {
    auto model = small_cnn(nn::DropoutMode::fixed, 0.1, true);
    auto batch = random_batch(4, 2);
    McOptions o;
    o.T = 1;
    CHECK_THROWS_AS(mc_predict(model, batch, o), ContractError);
    o.T = 0;
    o.allow_single_pass = true;
    CHECK_THROWS_AS(mc_predict(model, batch, o), ContractError);
    o.T = 1;
    auto one = mc_predict(model, batch, o);
    CHECK(one.estimates[0].single_pass);
    CHECK(one.estimates[0].epistemic_var == 0.0);

    auto plain = small_cnn(nn::DropoutMode::none, 0.0, true);
    o.T = 10;
    CHECK_THROWS_AS(mc_predict(plain, batch, o), ContractError);
}

TEST_CASE("zero dropout collapses to the deterministic network") {
    auto model = small_cnn(nn::DropoutMode::fixed, 0.0, true);
    auto batch = random_batch(25, 3);
    McOptions o;
    o.T = 50;
    auto r = mc_predict(model, batch, o);
    auto point = predict_point(model, batch);
    for (std::size_t i = 0; i < batch.size; ++i) {
        CHECK(r.estimates[i].mean == point[i]);
        CHECK(r.estimates[i].epistemic_var == 0.0);
    }
}

TEST_CASE("passes differ and results are reproducible across thread counts") {
    auto model = small_cnn(nn::DropoutMode::fixed, 0.2, true);
    auto batch = random_batch(50, 4);
    McOptions o;
    o.T = 16;
    o.seed = 77;
    o.keep_draws = true;
    auto a = mc_predict(model, batch, o);
    o.threads = 3;
    auto b = mc_predict(model, batch, o);
    REQUIRE(a.draws.means.size() == 16 * 50);
    CHECK(a.draws.means == b.draws.means);
    CHECK(a.draws.log_variances == b.draws.log_variances);
    bool distinct = false;
    for (std::size_t i = 0; i < 50; ++i) distinct |= a.draws.means[i] != a.draws.means[50 + i];
    CHECK(distinct);
    for (std::size_t i = 0; i < 50; ++i) CHECK(a.estimates[i].epistemic_var > 0.0);
    o.seed = 78;
    CHECK(mc_predict(model, batch, o).draws.means != a.draws.means);
}

TEST_CASE("a row's estimate does not depend on the rest of the batch") {
    auto model = small_cnn(nn::DropoutMode::concrete, 0.0, true);
    auto batch = random_batch(3000, 5);  // spans two chunks
    McOptions o;
    o.T = 4;
    auto full = mc_predict(model, batch, o);
    const std::vector<std::size_t> pick{2999, 7, 2100};
    auto sub = mc_predict(model, nn::gather_batch(batch, pick), o);
    for (std::size_t k = 0; k < pick.size(); ++k) {
        CHECK(sub.estimates[k].mean == full.estimates[pick[k]].mean);
        CHECK(sub.estimates[k].total_var == full.estimates[pick[k]].total_var);
    }
}

TEST_CASE("prediction files round-trip in timestamp order") {
    std::vector<eventlog::PrefixRecord> pre(3);
    pre[0] = {"b", 2, {}, {}, 1.5, 0, 200};
    pre[1] = {"a", 1, {}, {}, 4.0, 0, 100};
    pre[2] = {"c", 1, {}, {}, 0.25, 0, 200};
    std::vector<UncertaintyEstimate> est(3);
    for (int i = 0; i < 3; ++i) est[i] = {1.0 + i, 0.1 * i, 0.2, 0.2 + 0.1 * i, std::sqrt(0.2 + 0.1 * i), 10, false};
    const auto path = std::filesystem::temp_directory_path() / "remtime_pred_test.csv";
    {
        std::ofstream os(path);
        write_predictions(os, pre, {}, est);
    }
    auto rows = read_predictions(path);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].case_id == "a");
    CHECK(rows[1].case_id == "b");
    CHECK(rows[2].case_id == "c");
    CHECK(rows[1].target == 1.5);
    CHECK(rows[1].estimate.total_std == est[0].total_std);
    CHECK(rows[0].has_uncertainty);

    std::ostringstream plain;
    write_predictions(plain, pre, std::vector<double>{1, 2, 3}, {});
    std::istringstream lines(plain.str());
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(first == "a,1,4,2,,,");
    std::filesystem::remove(path);
}

TEST_CASE("shrinkage sweep validates sizes and reports without asserting on two sizes") {
    synth::Regression1dSpec gen;
    ShrinkageOptions o;
    o.steps = 30;
    o.T = 5;
    o.grid_points = 20;
    const std::vector<std::size_t> bad{100, 50};
    CHECK_THROWS_AS(epistemic_shrinks_with_data(gen, bad, o), ContractError);
    const std::vector<std::size_t> two{50, 100};
    auto r = epistemic_shrinks_with_data(gen, two, o);
    CHECK_FALSE(r.asserted);
    CHECK(r.passed);
    CHECK(r.mean_epistemic_var.size() == 2);
    CHECK(r.true_noise_var > 0.0);
}
