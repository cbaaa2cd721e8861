#include <doctest.h>

#include <cmath>

#include "remtime/errors.hpp"
#include "remtime/losses.hpp"
#include "remtime/model.hpp"

using namespace remtime;
using namespace remtime::losses;
using ad::Graph;
using ad::Shape;
using ad::Tensor;

namespace {

nn::HeadOutput head_of(Graph& g, std::vector<double> mu, std::vector<double> s) {
    const std::size_t n = mu.size();
    nn::HeadOutput h;
    h.mean = g.constant(Shape{n}, std::move(mu));
    if (!s.empty()) h.log_variance = g.constant(Shape{n}, std::move(s));
    return h;
}

nn::Model small_model(nn::DropoutMode mode, bool hetero, std::uint64_t seed = 1) {
    nn::ModelSpec spec = nn::default_spec(nn::Architecture::cnn);
    spec.vocab_sizes = {4};
    spec.embedding_dims = {2};
    spec.numeric_features = 1;
    spec.sequence_length = 4;
    spec.conv_channels = {3};
    spec.dense_units = {4};
    spec.dropout = mode;
    spec.dropout_p = 0.2;
    spec.heteroscedastic = hetero;
    return nn::Model(spec, seed);
}

nn::Batch batch4() {
    nn::Batch b;
    b.size = 4;
    b.seq_len = 4;
    b.n_cat = 1;
    b.n_num = 1;
    b.categorical = {0, 1, 2, 3, 1, 1, 2, 0, 0, 0, 3, 2, 2, 3, 1, 1};
    b.numeric = {0, .5, -.5, 1, .2, .1, -1, 0, 0, 0, .7, .3, -.2, .4, .9, -.6};
    b.targets = {1.0, 0.5, 2.0, 0.0};
    return b;
}

}  // namespace

TEST_CASE("mae") {
    const std::vector<double> a{1, 3}, b{2, 2};
    CHECK(mae(a, a) == 0.0);
    CHECK(mae(a, b) == 1.0);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), ContractError);
    CHECK_THROWS_AS(mae(a, std::vector<double>{1}), ContractError);

    Rng rng = make_rng(4);
    std::normal_distribution<double> d;
    std::vector<double> p(100), t(100);
    double s = 0.0;
    for (int i = 0; i < 100; ++i) {
        p[i] = d(rng);
        t[i] = d(rng);
        s += std::abs(p[i] - t[i]);
    }
    CHECK(mae(p, t) == doctest::Approx(s / 100).epsilon(1e-14));
}

TEST_CASE("hetero_nll values") {
    Graph g;
    auto y = g.constant(Shape{3}, {1.0, -2.0, 0.5});
    auto zero_s = hetero_nll(head_of(g, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}), y).item();
    CHECK(zero_s == doctest::Approx(0.5 * (1.0 + 4.0 + 0.25) / 3.0));
    CHECK(hetero_nll(head_of(g, {0.0, 0.0, 0.0}, {}), y).item() == zero_s);

    auto y1 = g.constant(Shape{1}, {2.0});
    CHECK(hetero_nll(head_of(g, {0.0}, {std::log(4.0)}), y1).item() == doctest::Approx(0.5 + std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("optimal log-variance is log r^2 and grows with the residual") {
    auto grad_at = [](double r, double s) {
        Tensor sv(Shape{1}, {s});
        sv.requires_grad = true;
        Graph g;
        nn::HeadOutput h;
        h.mean = g.constant(Shape{1}, {0.0});
        h.log_variance = g.parameter(sv);
        g.backward(hetero_nll(h, g.constant(Shape{1}, {r})));
        return g.grad_of(sv)[0];
    };
    for (double r : {0.3, 1.0, 2.5}) {
        const double s_star = std::log(r * r);
        CHECK(std::abs(grad_at(r, s_star)) < 1e-12);
        CHECK(grad_at(r, s_star - 0.1) < 0.0);
        CHECK(grad_at(r, s_star + 0.1) > 0.0);
    }
}

TEST_CASE("regularizer: fixed p is scaled L2 plus a constant") {
    nn::Model m = small_model(nn::DropoutMode::fixed, true);
    const auto sites = m.dropout_sites();
    REQUIRE(!sites.empty());
    Graph g;
    auto reg = dropout_regularizer(g, sites, 100.0, 0.01);
    double l2 = 0.0, ent = 0.0;
    const double p = 0.2;
    for (const auto& s : sites) {
        for (double w : s.weight->values) l2 += w * w;
        ent += static_cast<double>(s.input_dim) / 100.0 * (p * std::log(p) + (1 - p) * std::log(1 - p));
    }
    CHECK(reg.weight_term.item() == doctest::Approx(1e-4 / 100.0 * l2 / (1 - p)).epsilon(1e-12));
    CHECK(reg.entropy_term.item() == doctest::Approx(ent).epsilon(1e-12));
    // the entropy part does not depend on the weights in fixed mode
    for (auto* t : m.parameters())
        for (auto& v : t->values) v *= 2.0;
    Graph g2;
    CHECK(dropout_regularizer(g2, sites, 100.0, 0.01).entropy_term.item() == reg.entropy_term.item());

    Graph g0;
    auto none = dropout_regularizer(g0, {}, 10.0, 0.01);
    CHECK(none.weight_term.item() == 0.0);
    CHECK(none.entropy_term.item() == 0.0);
    CHECK_THROWS_AS(dropout_regularizer(g0, sites, 0.5, 0.01), ContractError);
    CHECK_THROWS_AS(dropout_regularizer(g0, sites, 10.0, 0.0), ContractError);
}

TEST_CASE("regularizer scales as 1/N") {
    nn::Model m = small_model(nn::DropoutMode::concrete, true);
    const auto sites = m.dropout_sites();
    Graph g;
    auto small = dropout_regularizer(g, sites, 1e3, 0.01);
    auto large = dropout_regularizer(g, sites, 1e9, 0.01);
    const double a = small.weight_term.item() + small.entropy_term.item();
    const double b = large.weight_term.item() + large.entropy_term.item();
    CHECK(b / a == doctest::Approx(1e-6).epsilon(1e-9));
}

TEST_CASE("entropy and weight terms pull p in opposite directions") {
    nn::Model m = small_model(nn::DropoutMode::concrete, true, 9);
    auto sites = m.dropout_sites();
    auto* d = const_cast<nn::WeightDropout*>(sites[0].dropout);
    d->p_logit().values[0] = std::log(0.2 / 0.8);  // p < 0.5
    auto grad_of = [&](bool weight) {
        Graph g;
        auto reg = dropout_regularizer(g, std::span<const nn::DropoutSite>(sites.data(), 1), 50.0, 0.5);
        g.backward(weight ? reg.weight_term : reg.entropy_term);
        return g.grad_of(d->p_logit())[0];
    };
    CHECK(grad_of(false) < 0.0);  // descent raises p toward 0.5
    CHECK(grad_of(true) > 0.0);   // descent lowers p
    Graph g;
    auto reg = dropout_regularizer(g, sites, 50.0, 0.5);
    CHECK(reg.entropy_term.item() <= 0.0);
}

TEST_CASE("breakdown total is the exact sum") {
    nn::Model m = small_model(nn::DropoutMode::concrete, true);
    Graph g;
    Rng rng = make_rng(2);
    const nn::ForwardContext ctx{true, &rng};
    const auto b = batch4();
    auto out = m.forward(g, b, ctx);
    auto obj = training_objective(g, out, g.constant(Shape{4}, b.targets), m.dropout_sites(), 100.0, 0.01);
    const auto lb = obj.breakdown();
    CHECK(lb.total == (lb.data_term + lb.weight_reg_term) + lb.dropout_entropy_term);
}

TEST_CASE("homoscedastic objective is half MSE plus the regularizer") {
    nn::Model m = small_model(nn::DropoutMode::fixed, false);
    Graph g;
    const auto b = batch4();
    auto out = m.forward(g, b, nn::ForwardContext{});
    auto obj = training_objective(g, out, g.constant(Shape{4}, b.targets), m.dropout_sites(), 100.0, 0.01);
    double mse = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double r = b.targets[i] - out.mean.values()[i];
        mse += 0.5 * r * r;
    }
    mse /= 4.0;
    const auto lb = obj.breakdown();
    CHECK(lb.data_term == doctest::Approx(mse).epsilon(1e-14));
    CHECK(lb.total == (lb.data_term + obj.reg.weight_term.item()) + obj.reg.entropy_term.item());
}

TEST_CASE("gradient of the full objective including p_logit") {
    nn::Model m = small_model(nn::DropoutMode::concrete, true, 5);
    const auto b = batch4();
    auto named = m.named_parameters();
    const std::uint64_t mask_seed = 77;
    auto f = [&](Graph& g) {
        Rng rng = make_rng(mask_seed);  // common random numbers on every evaluation
        auto out = m.forward(g, b, nn::ForwardContext{true, &rng});
        return training_objective(g, out, g.constant(Shape{4}, b.targets), m.dropout_sites(), 10.0, 0.5).total;
    };
    auto rep = ad::grad_check(f, named, 1e-6);
    for (const auto& e : rep.entries) {
        CAPTURE(e.name);
        const bool is_logit = e.name.find("p_logit") != std::string::npos;
        CHECK(e.max_rel_error < (is_logit ? 1e-3 : 1e-4));
    }
}
