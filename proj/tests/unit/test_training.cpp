#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "remtime/errors.hpp"
#include "remtime/inference.hpp"
#include "remtime/losses.hpp"
#include "remtime/model.hpp"
#include "remtime/synthdata.hpp"
#include "remtime/training.hpp"

using namespace remtime;
using namespace remtime::training;

namespace {

nn::Model regression_model(nn::DropoutMode mode, std::uint64_t seed = 1) {
    nn::ModelSpec spec = nn::default_spec(nn::Architecture::mlp);
    spec.numeric_features = 1;
    spec.sequence_length = 1;
    spec.dense_units = {32, 32};
    spec.dropout = mode;
    spec.dropout_p = 0.05;
    spec.heteroscedastic = true;
    return nn::Model(spec, seed);
}

nn::Batch regression(std::size_t n, std::uint64_t seed) {
    synth::Regression1dSpec s;
    s.n = n;
    s.seed = seed;
    auto d = synth::gen_regression1d(s);
    return synth::regression_batch(d.x, d.y);
}

}  // namespace

TEST_CASE("first adam step has magnitude lr per coordinate") {
    ad::Tensor w({3}, std::vector<double>{1.0, -2.0, 0.5});
    w.requires_grad = true;
    w.grad = {0.3, -4.0, 1e-3};
    ad::Tensor* ps[] = {&w};
    AdamState st;
    adam_step(ps, st, 0.1);
    CHECK(w.values[0] == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(w.values[1] == doctest::Approx(-1.9).epsilon(1e-6));
    CHECK(w.values[2] == doctest::Approx(0.4).epsilon(1e-4));
    CHECK(st.step == 1);

    // second step with the same gradient: the bias-corrected ratio stays 1
    adam_step(ps, st, 0.1);
    CHECK(w.values[0] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("adam minimizes a quadratic") {
    ad::Tensor w({2}, std::vector<double>{5.0, -3.0});
    w.requires_grad = true;
    ad::Tensor* ps[] = {&w};
    AdamState st;
    for (int i = 0; i < 2000; ++i) {
        w.grad = {2.0 * (w.values[0] - 1.0), 2.0 * (w.values[1] + 2.0)};
        adam_step(ps, st, 0.05);
    }
    CHECK(w.values[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(w.values[1] == doctest::Approx(-2.0).epsilon(1e-3));

    zero_grad(ps);
    CHECK((w.grad.empty() || (w.grad[0] == 0.0 && w.grad[1] == 0.0)));
}

TEST_CASE("early stopping counts epochs since the best") {
    EarlyStopping es(2);
    CHECK_FALSE(es.should_stop());
    CHECK(es.update(5.0));
    CHECK(es.update(4.0));
    CHECK_FALSE(es.update(4.0));  // ties do not improve
    CHECK_FALSE(es.should_stop());
    CHECK_FALSE(es.update(4.5));
    CHECK(es.should_stop());
    CHECK(es.best_epoch() == 1);
    CHECK(es.best() == 4.0);
    CHECK(es.epochs_seen() == 4);

    EarlyStopping zero(0);
    zero.update(1.0);
    CHECK_FALSE(zero.should_stop());
    zero.update(2.0);
    CHECK(zero.should_stop());
}

TEST_CASE("training reduces error and restores the best epoch") {
    auto model = regression_model(nn::DropoutMode::concrete);
    auto tr = regression(400, 1);
    auto va = regression(100, 2);
    const double before = losses::mae(inference::predict_point(model, va), va.targets);
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.max_epochs = 40;
    cfg.learning_rate = 3e-3;
    cfg.patience = 5;
    auto rep = train(model, tr, va, cfg);
    REQUIRE_FALSE(rep.epochs.empty());
    CHECK(rep.best_validation_mae < 0.5 * before);
    const double after = losses::mae(inference::predict_point(model, va), va.targets);
    CHECK(after == rep.best_validation_mae);
    double min_mae = rep.epochs[0].validation_mae;
    for (const auto& e : rep.epochs) min_mae = std::min(min_mae, e.validation_mae);
    CHECK(rep.best_validation_mae == min_mae);
    CHECK(rep.epochs[rep.best_epoch].validation_mae == min_mae);
    for (double p : rep.final_dropout_probabilities) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
    for (const auto& e : rep.epochs) {
        CHECK(std::isfinite(e.train.total));
        CHECK(e.train.total == doctest::Approx(e.train.data_term + e.train.weight_reg_term + e.train.dropout_entropy_term));
    }
    if (rep.epochs.size() < cfg.max_epochs) CHECK(rep.epochs.size() - 1 - rep.best_epoch == cfg.patience);
}

TEST_CASE("training is deterministic for a seed") {
    auto tr = regression(200, 3);
    auto va = regression(50, 4);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 5;
    cfg.early_stopping = false;
    auto m1 = regression_model(nn::DropoutMode::concrete, 9);
    auto m2 = regression_model(nn::DropoutMode::concrete, 9);
    auto r1 = train(m1, tr, va, cfg);
    auto r2 = train(m2, tr, va, cfg);
    CHECK(same_outcome(r1, r2));
    CHECK(m1.to_json() == m2.to_json());
    cfg.seed = 43;
    auto m3 = regression_model(nn::DropoutMode::concrete, 9);
    CHECK_FALSE(same_outcome(r1, train(m3, tr, va, cfg)));
}

TEST_CASE("fixed and absent dropout train too") {
    auto tr = regression(100, 5);
    auto va = regression(30, 6);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.max_epochs = 3;
    for (auto mode : {nn::DropoutMode::none, nn::DropoutMode::fixed}) {
        auto m = regression_model(mode);
        auto rep = train(m, tr, va, cfg);
        CHECK(rep.epochs.size() == 3);
        if (mode == nn::DropoutMode::fixed) CHECK(rep.final_dropout_probabilities.front() == doctest::Approx(0.05));
    }
}

TEST_CASE("checkpoint holds the best model") {
    auto tr = regression(100, 7);
    auto va = regression(30, 8);
    const auto path = std::filesystem::temp_directory_path() / "remtime_ckpt_test.json";
    std::filesystem::remove(path);
    TrainConfig cfg;
    cfg.batch_size = 25;
    cfg.max_epochs = 6;
    cfg.checkpoint_path = path;
    auto m = regression_model(nn::DropoutMode::concrete);
    auto rep = train(m, tr, va, cfg);
    REQUIRE(std::filesystem::exists(path));
    auto back = nn::Model::load(path);
    CHECK(inference::predict_point(back, va) == inference::predict_point(m, va));
    std::filesystem::remove(path);

    std::ostringstream log;
    write_training_log(rep, log);
    CHECK(log.str().rfind("epoch,split,data_term,weight_reg_term,dropout_entropy_term,total,mae\n", 0) == 0);
}

TEST_CASE("training contract and divergence") {
    auto m = regression_model(nn::DropoutMode::concrete);
    auto tr = regression(50, 1);
    nn::Batch empty = tr;
    empty.size = 0;
    empty.numeric.clear();
    empty.targets.clear();
    TrainConfig cfg;
    cfg.max_epochs = 2;
    CHECK_THROWS_AS(train(m, empty, tr, cfg), ContractError);
    CHECK_THROWS_AS(train(m, tr, empty, cfg), ContractError);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train(m, tr, tr, cfg), ContractError);

    cfg.batch_size = 10;
    cfg.standardize_target = false;
    nn::Batch bad = tr;
    bad.targets[3] = std::nan("");
    CHECK_THROWS_AS(train(m, bad, tr, cfg), DivergedError);
}
