#include "gap/theorylab/theorem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gap/common/rng.hpp"
#include "gap/planner/cem.hpp"

namespace gap::theorylab {

void CostInstance::validate() const {
    if (true_costs.empty()) throw std::invalid_argument("cost instance: no sequences");
    if (predicted.size() != true_costs.size()) {
        throw std::invalid_argument("cost instance: " + std::to_string(true_costs.size()) + " true costs but " +
                                    std::to_string(predicted.size()) + " predicted");
    }
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("cost instance: epsilon must be positive");
    for (std::size_t i = 0; i < true_costs.size(); ++i) {
        if (!std::isfinite(true_costs[i]) || !std::isfinite(predicted[i])) {
            throw std::invalid_argument("cost instance: non-finite cost at index " + std::to_string(i));
        }
        if (i > 0 && true_costs[i] < true_costs[i - 1]) {
            throw std::invalid_argument("cost instance: true costs not sorted at index " + std::to_string(i));
        }
    }
}

ConditionReport check_conditions(const CostInstance& inst) {
    inst.validate();
    const double c1 = inst.true_costs.front(), eps = inst.epsilon;
    const std::size_t n = inst.true_costs.size();
    ConditionReport r;
    r.eq1_ok = std::abs(c1 - inst.predicted.front()) < eps;
    r.eq2_ok = true;
    r.exempt.assign(n, false);
    r.eq2_violations.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const double ci = inst.true_costs[i];
        if (!(ci > c1 + eps)) {
            r.exempt[i] = true;
            continue;
        }
        if (!(std::abs(ci - inst.predicted[i]) < (ci - c1) - eps)) {
            r.eq2_violations[i] = true;
            r.eq2_ok = false;
        }
    }
    return r;
}

bool check_optimality(const CostInstance& inst) {
    inst.validate();
    const std::size_t chosen = planner::select_open_loop(inst.predicted);
    return inst.true_costs[chosen] <= inst.true_costs.front() + inst.epsilon;
}

namespace {

/// Sorted true costs on a random scale, and ε as a random fraction of their range.
CostInstance random_costs(Rng& rng, std::size_t n) {
    CostInstance inst;
    const double scale = std::exp(uniform(rng, std::log(0.1), std::log(100.0)));
    inst.true_costs.resize(n);
    for (double& c : inst.true_costs) c = uniform(rng, 0.0, scale);
    std::sort(inst.true_costs.begin(), inst.true_costs.end());
    const double range = inst.true_costs.back() - inst.true_costs.front();
    inst.epsilon = std::max(uniform(rng, 0.005, 0.5) * range, 1e-6 * scale);
    inst.predicted.resize(n);
    return inst;
}

// Keeps sampled errors clear of the strict-inequality boundaries.
constexpr double kMargin = 1.0 - 1e-9;

}  // namespace

FuzzReport theorem_fuzz(const FuzzConfig& cfg, std::uint64_t seed) {
    if (cfg.trials == 0 || cfg.n == 0) throw std::invalid_argument("theorem_fuzz: trials and n must be positive");
    if (!(cfg.bound_scale > 0.0)) throw std::invalid_argument("theorem_fuzz: bound scale must be positive");
    FuzzReport rep;
    rep.trials = cfg.trials;
    rep.worst_case_trials = cfg.worst_case_trials;

    for (std::size_t t = 0; t < cfg.trials; ++t) {
        Rng rng = make_rng(seed, {0x66757a7aULL, t});
        for (;;) {
            CostInstance inst = random_costs(rng, cfg.n);
            const double c1 = inst.true_costs.front(), eps = inst.epsilon;
            const double range = inst.true_costs.back() - c1;
            inst.predicted[0] = c1 + uniform(rng, -1.0, 1.0) * eps * kMargin;
            for (std::size_t i = 1; i < cfg.n; ++i) {
                const double ci = inst.true_costs[i];
                if (ci > c1 + eps) {
                    const double b = ((ci - c1) - eps) * kMargin * cfg.bound_scale;
                    inst.predicted[i] = ci + uniform(rng, -b, b);
                } else {
                    // Exempt: the conditions place no bound on these errors.
                    inst.predicted[i] = ci + uniform(rng, -10.0, 10.0) * (range + eps);
                }
            }
            if (cfg.bound_scale == 1.0) {
                const ConditionReport c = check_conditions(inst);
                if (!c.eq1_ok || !c.eq2_ok) {
                    ++rep.rejected;
                    continue;
                }
            }
            if (!check_optimality(inst)) ++rep.violations;
            break;
        }
    }

    for (std::size_t t = 0; t < cfg.worst_case_trials; ++t) {
        Rng rng = make_rng(seed, {0x776f727374ULL, t});
        CostInstance inst = random_costs(rng, cfg.n);
        const double c1 = inst.true_costs.front(), eps = inst.epsilon;
        const double delta = 1e-4 * eps;
        inst.predicted[0] = c1 + eps - delta;
        for (std::size_t i = 1; i < cfg.n; ++i) {
            const double ci = inst.true_costs[i];
            // Exempt sequences may look arbitrarily good. Others sit just above
            // c*_1 + ε, no further than half their margin so the bound still holds.
            inst.predicted[i] = ci > c1 + eps ? c1 + eps + std::min(delta, 0.5 * ((ci - c1) - eps))
                                              : ci - uniform(rng, 0.0, 10.0) * eps;
        }
        const ConditionReport c = check_conditions(inst);
        bool ordered = c.eq1_ok && c.eq2_ok;
        for (std::size_t i = 1; i < cfg.n && ordered; ++i) {
            if (!c.exempt[i] && !(inst.predicted[0] < inst.predicted[i])) ordered = false;
        }
        if (!ordered) ++rep.construction_failures;
        if (!check_optimality(inst)) ++rep.worst_case_violations;
    }
    return rep;
}

}  // namespace gap::theorylab
