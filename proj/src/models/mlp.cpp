#include "gap/models/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace gap::models {

using ndiff::Tensor;
using ndiff::Var;

Mlp::Mlp(ndiff::ParamStore& store, std::string prefix, std::vector<std::size_t> sizes, OutputHead head, Rng& init_rng)
    : prefix_(std::move(prefix)), sizes_(std::move(sizes)), head_(head) {
    if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const std::size_t fan_in = sizes_[l], fan_out = sizes_[l + 1];
        const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor w = Tensor::matrix(fan_in, fan_out);
        for (double& v : w.data()) v = uniform(init_rng, -limit, limit);
        Tensor b = Tensor::matrix(1, fan_out);
        for (double& v : b.data()) v = uniform(init_rng, -limit, limit);
        store.add(prefix_ + ".w" + std::to_string(l), std::move(w));
        store.add(prefix_ + ".b" + std::to_string(l), std::move(b));
    }
}

Var Mlp::forward(ndiff::Graph& g, ndiff::ParamStore& store, Var x) const {
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        Var w = g.param(store, prefix_ + ".w" + std::to_string(l));
        Var b = g.param(store, prefix_ + ".b" + std::to_string(l));
        x = ndiff::add(ndiff::matmul(x, w), b);
        if (l + 1 < layers) x = ndiff::relu(x);
    }
    return head_ == OutputHead::sigmoid ? ndiff::sigmoid(x) : x;
}

Tensor Mlp::infer(const ndiff::ParamStore& store, const Tensor& x_in) const {
    if (x_in.cols() != sizes_.front()) {
        throw std::invalid_argument(prefix_ + ": input has " + std::to_string(x_in.cols()) + " columns, expected " +
                                    std::to_string(sizes_.front()));
    }
    const std::size_t layers = sizes_.size() - 1;
    Tensor x = x_in;
    for (std::size_t l = 0; l < layers; ++l) {
        x = ndiff::kernels::matmul(x, store.get(prefix_ + ".w" + std::to_string(l)).value);
        ndiff::kernels::add_row_inplace(x, store.get(prefix_ + ".b" + std::to_string(l)).value);
        if (l + 1 < layers) ndiff::kernels::relu_inplace(x);
    }
    if (head_ == OutputHead::sigmoid) ndiff::kernels::sigmoid_inplace(x);
    return x;
}

}  // namespace gap::models
