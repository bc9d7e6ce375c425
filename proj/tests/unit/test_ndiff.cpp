#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gap/common/rng.hpp"
#include "gap/ndiff/checkpoint.hpp"
#include "gap/ndiff/gradcheck.hpp"
#include "gap/ndiff/graph.hpp"

using namespace gap;
using namespace gap::ndiff;

TEST_CASE("matmul and relu on hand examples") {
    Graph g;
    Var a = g.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
    Var b = g.constant(Tensor::from_rows({{1}, {1}}));
    CHECK(matmul(a, b).value() == Tensor::from_rows({{3}, {7}}));
    Var x = g.constant(Tensor::from_rows({{-1, 0, 2}}));
    CHECK(relu(x).value() == Tensor::from_rows({{0, 0, 2}}));
}

TEST_CASE("shape mismatch names both shapes") {
    Graph g;
    Var a = g.constant(Tensor::matrix(2, 3));
    Var b = g.constant(Tensor::matrix(2, 3));
    try {
        matmul(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
    }
    CHECK_THROWS_AS(add(a, g.constant(Tensor::matrix(3, 2))), std::invalid_argument);
}

TEST_CASE("gradient of sum of squares") {
    ParamStore store;
    store.add("x", Tensor::from_rows({{1, 2}}));
    Graph g;
    g.backward(sum(square(g.param(store, "x"))));
    const Tensor& gr = store.get("x").grad;
    CHECK(gr[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(gr[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
    Graph g;
    Var a = g.constant(Tensor::matrix(2, 2, 1.0));
    CHECK_THROWS(g.backward(a));
}

TEST_CASE("root independent of parameters gives zero gradient") {
    ParamStore store;
    store.add("w", Tensor::matrix(2, 2, 3.0));
    Graph g;
    Var w = g.param(store, "w");
    (void)w;
    g.backward(mean(g.constant(Tensor::matrix(3, 3, 1.5))));
    for (double v : store.get("w").grad.data()) CHECK(v == 0.0);
}

TEST_CASE("two backward calls accumulate") {
    ParamStore store;
    store.add("x", Tensor::from_rows({{1, 2}}));
    Graph g;
    Var root = sum(square(g.param(store, "x")));
    g.backward(root);
    g.backward(root);
    CHECK(store.get("x").grad[0] == doctest::Approx(4.0));
    CHECK(store.get("x").grad[1] == doctest::Approx(8.0));
}

TEST_CASE("finite-difference agreement for every op") {
    const auto checks = check_ops(100, 12345);
    CHECK(checks.size() == 16);
    for (const auto& c : checks) {
        INFO(c.op, " worst relative error ", c.worst);
        CHECK(c.worst < 1e-4);
    }
}

TEST_CASE("gradient checker catches a wrong derivative") {
    // detach hides x from backward, so the analytic gradient of x*x is half the true one.
    const ScalarFn f = [](Graph&, const std::vector<Var>& x) { return sum(mul(x[0], detach(x[0]))); };
    CHECK(gradient_error(f, {Tensor::from_rows({{0.7, -1.3}})}) > 0.4);
}

TEST_CASE("shared subexpression equals unrolled tree") {
    ParamStore a, b;
    const Tensor x0 = Tensor::from_rows({{0.4, -1.2, 0.7}});
    a.add("x", x0);
    b.add("x", x0);
    {
        Graph g;
        Var x = g.param(a, "x");
        Var s = sigmoid(x);
        g.backward(sum(s * s + s));
    }
    {
        Graph g;
        Var s1 = sigmoid(g.param(b, "x"));
        Var s2 = sigmoid(g.param(b, "x"));
        Var s3 = sigmoid(g.param(b, "x"));
        g.backward(sum(s1 * s2 + s3));
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.get("x").grad[i] == doctest::Approx(b.get("x").grad[i]).epsilon(1e-12));
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        ParamStore s;
        s.add("w", Tensor::from_rows({{1.5, -2.0}}));
        adam_step(s, 0.1);
        CHECK(s.get("w").value == Tensor::from_rows({{1.5, -2.0}}));
        CHECK(s.step_count() == 1);
    }
    SUBCASE("one step descends w^2") {
        ParamStore s;
        s.add("w", Tensor::scalar(1.0));
        Graph g;
        g.backward(sum(square(g.param(s, "w"))));
        adam_step(s, 0.1);
        CHECK(s.get("w").value.item() < 1.0);
        CHECK(s.get("w").grad.item() == 0.0);
    }
    SUBCASE("500 steps minimise a quadratic") {
        ParamStore s;
        s.add("w", Tensor::from_rows({{1.0, -0.5}}));
        double loss = 0.0;
        for (int i = 0; i < 500; ++i) {
            Graph g;
            Var w = g.param(s, "w");
            Var l = sum(square(w) * g.constant(Tensor::from_rows({{1.0, 3.0}})));
            g.backward(l);
            adam_step(s, 0.05);
        }
        for (double v : s.get("w").value.data()) loss += v * v;
        CHECK(loss < 1e-6);
    }
    SUBCASE("non-finite gradient aborts and names the parameter") {
        ParamStore s;
        s.add("alpha", Tensor::scalar(1.0));
        s.add("beta", Tensor::scalar(1.0));
        s.get("beta").grad = Tensor::scalar(std::nan(""));
        try {
            adam_step(s, 0.1);
            FAIL("expected throw");
        } catch (const std::domain_error& e) {
            CHECK(std::string(e.what()).find("beta") != std::string::npos);
        }
        CHECK(s.get("alpha").value.item() == 1.0);
        CHECK(s.step_count() == 0);
    }
}

TEST_CASE("checkpoint round trip") {
    ParamStore s;
    s.add("layer.w0", Tensor::from_rows({{1.0 / 3.0, -2.5e-300}, {1e300, 0.0}}));
    s.add("layer.b0", Tensor::from_rows({{7.0, 8.0}}));
    const auto path = std::filesystem::temp_directory_path() / "gap_ndiff_ckpt_test.gapw";
    save_params(path, s);
    ParamStore t;
    t.add("layer.w0", Tensor::matrix(2, 2));
    t.add("layer.b0", Tensor::matrix(1, 2));
    load_params(path, t);
    CHECK(t.get("layer.w0").value == s.get("layer.w0").value);
    CHECK(t.get("layer.b0").value == s.get("layer.b0").value);
    ParamStore wrong;
    wrong.add("layer.w0", Tensor::matrix(2, 3));
    wrong.add("layer.b0", Tensor::matrix(1, 2));
    CHECK_THROWS(load_params(path, wrong));
    std::filesystem::remove(path);
}
