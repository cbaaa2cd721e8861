#include <doctest.h>

#include <cmath>
#include <random>

#include "remtime/autodiff.hpp"
#include "remtime/errors.hpp"
#include "remtime/random.hpp"

using namespace remtime;
using namespace remtime::ad;

namespace {

Tensor random_param(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.values) v = d(rng);
    t.requires_grad = true;
    return t;
}

}  // namespace

TEST_CASE("forward examples") {
    Graph g;
    Var a = g.constant(Shape{2, 2}, {1, 2, 3, 4});
    Var eye = g.constant(Shape{2, 2}, {1, 0, 0, 1});
    CHECK(matmul(a, eye).values() == std::vector<double>{1, 2, 3, 4});
    CHECK(sigmoid(g.constant(Tensor::scalar(0.0))).item() == 0.5);
    CHECK(mean(g.constant(Shape{4}, {1, 2, 3, 6})).item() == 3.0);
}

TEST_CASE("backward examples") {
    Tensor x = Tensor::scalar(3.0);
    x.requires_grad = true;
    {
        Graph g;
        Var v = g.parameter(x);
        g.backward(sum(square(v)));
        CHECK(g.grad_of(x)[0] == doctest::Approx(6.0));
    }
    Tensor z = Tensor::scalar(0.0);
    z.requires_grad = true;
    Graph g;
    g.backward(sum(sigmoid(g.parameter(z))));
    CHECK(g.grad_of(z)[0] == doctest::Approx(0.25));
}

TEST_CASE("backward on a non-scalar is a contract error") {
    Graph g;
    Var v = g.constant(Shape{2}, {1, 2});
    CHECK_THROWS_AS(g.backward(v), ContractError);
}

TEST_CASE("shape mismatch names the primitive") {
    Graph g;
    Var a = g.constant(Shape{2, 3}, std::vector<double>(6, 1.0));
    Var b = g.constant(Shape{2, 3}, std::vector<double>(6, 1.0));
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("matmul") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, g.constant(Shape{3}, {1, 2, 3})), DimensionError);
}

TEST_CASE("gradients accumulate over reuse; unused parameters get zero") {
    Tensor x = Tensor::scalar(2.0);
    x.requires_grad = true;
    Tensor unused = Tensor::scalar(5.0);
    unused.requires_grad = true;
    Graph g;
    Var v = g.parameter(x);
    g.parameter(unused);
    // x*x + 3x -> 2x + 3 = 7
    g.backward(sum(add(mul(v, v), scale(v, 3.0))));
    CHECK(g.grad_of(x)[0] == doctest::Approx(7.0));
    CHECK(g.grad_of(unused)[0] == 0.0);

    // backward into tensors accumulates until zeroed
    std::vector<Tensor*> params{&x};
    for (int rep = 0; rep < 2; ++rep) {
        Graph h;
        Var w = h.parameter(x);
        h.backward(sum(scale(w, 2.0)), params);
    }
    CHECK(x.grad[0] == doctest::Approx(4.0));
    x.zero_grad();
    CHECK(x.grad[0] == 0.0);
}

TEST_CASE("linearity of backward") {
    Rng rng = make_rng(11);
    Tensor w = random_param(Shape{3, 2}, rng);
    Tensor x = random_param(Shape{4, 3}, rng);
    auto f = [&](Graph& g) { return mean(tanh(matmul(g.parameter(x), g.parameter(w)))); };
    auto h = [&](Graph& g) { return sum(square(matmul(g.parameter(x), g.parameter(w)))); };
    Graph gf, gh, gc;
    gf.backward(f(gf));
    gh.backward(h(gh));
    const double a = 0.7, b = -1.3;
    gc.backward(add(scale(f(gc), a), scale(h(gc), b)));
    const auto df = gf.grad_of(w), dh = gh.grad_of(w), dc = gc.grad_of(w);
    for (std::size_t i = 0; i < dc.size(); ++i) CHECK(dc[i] == doctest::Approx(a * df[i] + b * dh[i]).epsilon(1e-12));
}

TEST_CASE("determinism: same inputs give bit-identical values and gradients") {
    auto run = [] {
        Rng rng = make_rng(5);
        Tensor w = random_param(Shape{3, 3}, rng);
        Graph g;
        Var out = mean(exp(matmul(g.parameter(w), g.parameter(w))));
        g.backward(out);
        return std::make_pair(out.item(), g.grad_of(w));
    };
    CHECK(run() == run());
}

TEST_CASE("grad_check: linear function is exact") {
    Rng rng = make_rng(1);
    Tensor w = random_param(Shape{5}, rng);
    Tensor c = random_param(Shape{5}, rng);
    c.requires_grad = false;
    std::vector<NamedTensor> ps{{"w", &w}};
    auto rep = grad_check([&](Graph& g) { return sum(mul(g.parameter(w), g.constant(c))); }, ps);
    CHECK(rep.max_rel_error < 1e-10);
}

TEST_CASE("grad_check: dense -> relu -> mean away from kinks") {
    Rng rng = make_rng(2);
    Tensor x = random_param(Shape{6, 4}, rng);
    Tensor w = random_param(Shape{4, 3}, rng);
    Tensor b = random_param(Shape{3}, rng);
    // keep pre-activations away from zero so the step never crosses a kink
    {
        Graph g;
        auto pre = add_bias(matmul(g.parameter(x), g.parameter(w)), g.parameter(b)).values();
        for (double v : pre) REQUIRE(std::abs(v) > 1e-3);
    }
    std::vector<NamedTensor> ps{{"x", &x}, {"w", &w}, {"b", &b}};
    auto rep = grad_check(
        [&](Graph& g) { return mean(relu(add_bias(matmul(g.parameter(x), g.parameter(w)), g.parameter(b)))); }, ps);
    CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("every primitive passes grad_check") {
    Rng rng = make_rng(3);
    Tensor a = random_param(Shape{3, 4}, rng);
    Tensor b = random_param(Shape{3, 4}, rng);
    Tensor m = random_param(Shape{4, 2}, rng);
    Tensor pos = random_param(Shape{3, 4}, rng, 0.5, 2.0);
    Tensor bias = random_param(Shape{4}, rng);
    Tensor s = random_param(Shape{1}, rng);
    Tensor seq = random_param(Shape{2, 5, 3}, rng);
    Tensor kernel = random_param(Shape{3, 3, 2}, rng);
    Tensor table = random_param(Shape{4, 3}, rng);
    Tensor wsum = random_param(Shape{3, 4}, rng);  // weights turning outputs into a scalar
    wsum.requires_grad = false;
    const std::vector<std::int32_t> idx{1, 3, 0, 1, 2};

    struct Case {
        const char* name;
        std::function<Var(Graph&)> f;
        std::vector<NamedTensor> ps;
    };
    auto weighted = [&](Graph& g, Var v) { return sum(mul(v, g.constant(wsum))); };
    std::vector<Case> cases{
        {"matmul", [&](Graph& g) { return sum(square(matmul(g.parameter(a), g.parameter(m)))); }, {{"a", &a}, {"m", &m}}},
        {"add", [&](Graph& g) { return weighted(g, add(g.parameter(a), g.parameter(b))); }, {{"a", &a}, {"b", &b}}},
        {"sub", [&](Graph& g) { return weighted(g, sub(g.parameter(a), g.parameter(b))); }, {{"a", &a}, {"b", &b}}},
        {"mul", [&](Graph& g) { return weighted(g, mul(g.parameter(a), g.parameter(b))); }, {{"a", &a}, {"b", &b}}},
        {"add_bias", [&](Graph& g) { return weighted(g, add_bias(g.parameter(a), g.parameter(bias))); }, {{"a", &a}, {"bias", &bias}}},
        {"scale", [&](Graph& g) { return weighted(g, scale(g.parameter(a), -2.5)); }, {{"a", &a}}},
        {"add_const", [&](Graph& g) { return sum(square(add_const(g.parameter(a), 0.3))); }, {{"a", &a}}},
        {"mul_scalar", [&](Graph& g) { return weighted(g, mul_scalar(g.parameter(a), g.parameter(s))); }, {{"a", &a}, {"s", &s}}},
        {"add_scalar", [&](Graph& g) { return sum(square(add_scalar(g.parameter(a), g.parameter(s)))); }, {{"a", &a}, {"s", &s}}},
        {"exp", [&](Graph& g) { return weighted(g, exp(g.parameter(a))); }, {{"a", &a}}},
        {"log", [&](Graph& g) { return weighted(g, log(g.parameter(pos))); }, {{"pos", &pos}}},
        {"sigmoid", [&](Graph& g) { return weighted(g, sigmoid(g.parameter(a))); }, {{"a", &a}}},
        {"tanh", [&](Graph& g) { return weighted(g, tanh(g.parameter(a))); }, {{"a", &a}}},
        {"square", [&](Graph& g) { return weighted(g, square(g.parameter(a))); }, {{"a", &a}}},
        {"mean", [&](Graph& g) { return mean(square(g.parameter(a))); }, {{"a", &a}}},
        {"reshape", [&](Graph& g) { return sum(square(matmul(reshape(g.parameter(a), Shape{4, 3}), g.parameter(a)))); }, {{"a", &a}}},
        {"slice_cols", [&](Graph& g) { return sum(square(slice_cols(g.parameter(a), 1, 3))); }, {{"a", &a}}},
        {"concat_cols",
         [&](Graph& g) {
             std::vector<Var> parts{g.parameter(a), g.parameter(b)};
             return sum(square(matmul(concat_cols(parts), g.constant(Shape{8, 1}, {1, -2, 3, -4, 5, -6, 7, -8}))));
         },
         {{"a", &a}, {"b", &b}}},
        {"time_step", [&](Graph& g) { return sum(square(time_step(g.parameter(seq), 2))); }, {{"seq", &seq}}},
        {"conv1d", [&](Graph& g) { return sum(square(conv1d(g.parameter(seq), g.parameter(kernel)))); }, {{"seq", &seq}, {"kernel", &kernel}}},
        {"gather_rows", [&](Graph& g) { return sum(square(gather_rows(g.parameter(table), idx, 0))); }, {{"table", &table}}},
    };
    for (const auto& c : cases) {
        CAPTURE(c.name);
        auto rep = grad_check(c.f, c.ps, 1e-6);
        CHECK(rep.max_rel_error < 1e-4);
    }
}

TEST_CASE("relu grad_check away from kinks") {
    Tensor a(Shape{6}, {-1.5, -0.4, 0.3, 0.9, 2.0, -2.2});
    a.requires_grad = true;
    std::vector<NamedTensor> ps{{"a", &a}};
    auto rep = grad_check([&](Graph& g) { return sum(square(relu(g.parameter(a)))); }, ps, 1e-6);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("gather_rows: padding row is zero and receives no gradient") {
    Tensor table(Shape{3, 2}, {9, 9, 1, 2, 3, 4});
    table.requires_grad = true;
    const std::vector<std::int32_t> idx{0, 2, 0};
    Graph g;
    Var rows = gather_rows(g.parameter(table), idx, 0);
    CHECK(rows.values() == std::vector<double>{0, 0, 3, 4, 0, 0});
    g.backward(sum(rows));
    CHECK(g.grad_of(table) == std::vector<double>{0, 0, 0, 0, 1, 1});
}

TEST_CASE("conv1d: kernel wider than sequence") {
    Graph g;
    Var x = g.constant(Shape{1, 2, 1}, {1, 2});
    Var k = g.constant(Shape{3, 1, 1}, {0, 1, 0});
    CHECK_THROWS_AS(conv1d(x, k), DimensionError);
}
