#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gap/ndiff/graph.hpp"

namespace gap::ndiff {

using ScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-6);

/// Worst relative error between backward() and central differences (step h)
/// over every entry of every input.
double gradient_error(const ScalarFn& f, std::vector<Tensor> inputs, double h = 1e-5);

struct OpCheck {
    std::string op;
    double worst = 0.0;
};

/// Central-difference check of every differentiable op (and a small
/// three-layer network) on `trials` random inputs each. Inputs avoid the
/// kinks of relu and clamp.
std::vector<OpCheck> check_ops(std::size_t trials, std::uint64_t seed);

}  // namespace gap::ndiff
