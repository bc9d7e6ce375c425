#pragma once

#include <string>
#include <vector>

#include "gap/common/rng.hpp"
#include "gap/ndiff/graph.hpp"
#include "gap/ndiff/params.hpp"

namespace gap::models {

enum class OutputHead { linear, sigmoid };

/// Fully connected stack: ReLU after every layer except the last. Parameters
/// live in a shared ParamStore under "<prefix>.w<i>" / "<prefix>.b<i>".
class Mlp {
public:
    Mlp() = default;
    Mlp(ndiff::ParamStore& store, std::string prefix, std::vector<std::size_t> sizes, OutputHead head, Rng& init_rng);

    ndiff::Var forward(ndiff::Graph& g, ndiff::ParamStore& store, ndiff::Var x) const;
    /// Value-only evaluation; safe to call concurrently on a frozen store.
    ndiff::Tensor infer(const ndiff::ParamStore& store, const ndiff::Tensor& x) const;

    std::size_t input_dim() const { return sizes_.front(); }
    std::size_t output_dim() const { return sizes_.back(); }

private:
    std::string prefix_;
    std::vector<std::size_t> sizes_;
    OutputHead head_ = OutputHead::linear;
};

}  // namespace gap::models
