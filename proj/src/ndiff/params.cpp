#include "gap/ndiff/params.hpp"

#include <cmath>
#include <stdexcept>

namespace gap::ndiff {

Parameter& ParamStore::add(const std::string& name, Tensor init) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Parameter p;
    p.grad = Tensor(init.shape(), 0.0);
    p.first_moment = Tensor(init.shape(), 0.0);
    p.second_moment = Tensor(init.shape(), 0.0);
    p.value = std::move(init);
    return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
}

void ParamStore::zero_grad() noexcept {
    for (auto& [_, p] : params_) p.grad.fill(0.0);
}

void adam_step(ParamStore& store, double lr, const AdamConfig& cfg) {
    for (const auto& [name, p] : store.params_) {
        if (!p.grad.all_finite()) throw std::domain_error("non-finite gradient in parameter " + name);
    }
    store.steps_ += 1;
    const double t = static_cast<double>(store.steps_);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [_, p] : store.params_) {
        double* w = p.value.raw();
        double* g = p.grad.raw();
        double* m = p.first_moment.raw();
        double* v = p.second_moment.raw();
        for (std::size_t i = 0, n = p.value.size(); i < n; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
            g[i] = 0.0;
        }
    }
}

}  // namespace gap::ndiff
