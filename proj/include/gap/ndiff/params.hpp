#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "gap/ndiff/tensor.hpp"

namespace gap::ndiff {

struct Parameter {
    Tensor value;
    Tensor grad;
    Tensor first_moment;
    Tensor second_moment;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Named trainable tensors plus Adam state. Iteration order is by name, which
/// keeps checkpoints and optimizer updates independent of insertion order.
class ParamStore {
public:
    Parameter& add(const std::string& name, Tensor init);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    std::map<std::string, Parameter>& items() noexcept { return params_; }
    const std::map<std::string, Parameter>& items() const noexcept { return params_; }

    std::size_t parameter_count() const noexcept;
    std::uint64_t step_count() const noexcept { return steps_; }
    void zero_grad() noexcept;

private:
    friend void adam_step(ParamStore&, double, const AdamConfig&);

    std::map<std::string, Parameter> params_;
    std::uint64_t steps_ = 0;
};

inline constexpr double kDefaultLearningRate = 1e-4;

/// One Adam update over every parameter, then clears gradients. If any
/// gradient is non-finite the whole step is skipped and std::domain_error
/// names the offending parameter.
void adam_step(ParamStore& store, double lr = kDefaultLearningRate, const AdamConfig& cfg = {});

}  // namespace gap::ndiff
