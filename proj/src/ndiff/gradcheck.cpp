#include "gap/ndiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gap/common/rng.hpp"

namespace gap::ndiff {

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -2.0, double hi = 2.0) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data()) {
        do v = uniform(rng, lo, hi);
        while (std::abs(v) < 1e-3 || std::abs(std::abs(v) - 1.0) < 1e-3);
    }
    return t;
}

// Weighted sum keeps each output entry's gradient distinct.
Var reduce(Graph& g, Var y, Rng& rng) {
    const Tensor& v = y.value();
    return sum(y * g.constant(random_tensor(rng, v.rows(), v.cols(), 0.5, 1.5)));
}

struct Case {
    const char* name;
    std::function<std::vector<Tensor>(Rng&)> make;
    std::function<Var(Graph&, const std::vector<Var>&, Rng&)> f;
};

std::vector<Tensor> shapes(Rng& r, std::initializer_list<std::pair<std::size_t, std::size_t>> dims) {
    std::vector<Tensor> out;
    for (auto [rows, cols] : dims) out.push_back(random_tensor(r, rows, cols));
    return out;
}

const std::vector<Case>& cases() {
    using V = const std::vector<Var>&;
    static const std::vector<Case> all = {
        {"matmul", [](Rng& r) { return shapes(r, {{3, 4}, {4, 2}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, matmul(x[0], x[1]), r); }},
        {"add", [](Rng& r) { return shapes(r, {{3, 4}, {3, 4}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, add(x[0], x[1]), r); }},
        {"add_broadcast", [](Rng& r) { return shapes(r, {{3, 4}, {1, 4}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, add(x[0], x[1]), r); }},
        {"sub", [](Rng& r) { return shapes(r, {{2, 3}, {2, 3}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, sub(x[0], x[1]), r); }},
        {"mul", [](Rng& r) { return shapes(r, {{2, 3}, {2, 3}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, mul(x[0], x[1]), r); }},
        {"mul_broadcast", [](Rng& r) { return shapes(r, {{3, 2}, {1, 2}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, mul(x[0], x[1]), r); }},
        {"scale", [](Rng& r) { return shapes(r, {{2, 3}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, scale(add_scalar(x[0], 0.3), -1.7), r); }},
        {"relu", [](Rng& r) { return shapes(r, {{3, 3}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, relu(x[0]), r); }},
        {"sigmoid", [](Rng& r) { return shapes(r, {{3, 3}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, sigmoid(x[0]), r); }},
        {"exp", [](Rng& r) { return shapes(r, {{2, 3}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, exp(x[0]), r); }},
        {"square", [](Rng& r) { return shapes(r, {{2, 3}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, square(x[0]), r); }},
        {"mean", [](Rng& r) { return shapes(r, {{2, 5}}); },
         [](Graph&, V x, Rng&) { return mean(square(x[0])); }},
        {"concat", [](Rng& r) { return shapes(r, {{2, 3}, {2, 1}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, concat({x[0], x[1], x[0]}), r); }},
        {"slice", [](Rng& r) { return shapes(r, {{3, 5}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, slice(x[0], 1, 4), r); }},
        {"clamp", [](Rng& r) { return shapes(r, {{3, 4}}); },
         [](Graph& g, V x, Rng& r) { return reduce(g, clamp(x[0], -1.0, 1.0), r); }},
        {"mlp3", [](Rng& r) { return shapes(r, {{3, 5}, {1, 5}, {5, 4}, {1, 4}, {4, 2}, {1, 2}}); },
         [](Graph& g, V p, Rng&) {
             Var x = g.constant(Tensor::from_rows({{0.3, -0.8, 1.1}, {-0.5, 0.2, 0.9}}));
             Var h = relu(add(matmul(x, p[0]), p[1]));
             h = sigmoid(add(matmul(h, p[2]), p[3]));
             return mean(square(add(matmul(h, p[4]), p[5])));
         }},
    };
    return all;
}

}  // namespace

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double gradient_error(const ScalarFn& f, std::vector<Tensor> inputs, double h) {
    ParamStore store;
    for (std::size_t i = 0; i < inputs.size(); ++i) store.add("x" + std::to_string(i), inputs[i]);
    {
        Graph g;
        std::vector<Var> vars;
        for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(g.param(store, "x" + std::to_string(i)));
        g.backward(f(g, vars));
    }
    auto eval = [&](const std::vector<Tensor>& xs) {
        Graph g;
        std::vector<Var> vars;
        for (const auto& x : xs) vars.push_back(g.constant(x));
        return f(g, vars).value().item();
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& analytic = store.get("x" + std::to_string(i)).grad;
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            auto plus = inputs, minus = inputs;
            plus[i][j] += h;
            minus[i][j] -= h;
            const double numeric = (eval(plus) - eval(minus)) / (2 * h);
            worst = std::max(worst, relative_error(analytic[j], numeric));
        }
    }
    return worst;
}

std::vector<OpCheck> check_ops(std::size_t trials, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<OpCheck> out;
    for (const auto& c : cases()) {
        OpCheck check{c.name, 0.0};
        for (std::size_t t = 0; t < trials; ++t) {
            auto inputs = c.make(rng);
            const std::uint64_t wseed = rng();
            const double err = gradient_error(
                [&](Graph& g, const std::vector<Var>& x) {
                    Rng wr(wseed);
                    return c.f(g, x, wr);
                },
                inputs);
            check.worst = std::max(check.worst, err);
        }
        out.push_back(check);
    }
    return out;
}

}  // namespace gap::ndiff
