#pragma once

#include <cstdint>
#include <vector>

namespace gap::theorylab {

/// True costs c*_1 <= ... <= c*_N, model costs ĉ_i for the same sequences,
/// and the tolerance ε.
struct CostInstance {
    std::vector<double> true_costs;
    std::vector<double> predicted;
    double epsilon = 0.0;

    /// Throws std::invalid_argument unless sizes match, N >= 1, every value
    /// is finite, ε > 0 and the true costs are sorted ascending.
    void validate() const;
};

struct ConditionReport {
    bool eq1_ok = false;  // |c*_1 - ĉ_1| < ε
    bool eq2_ok = false;  // every non-exempt i has |c*_i - ĉ_i| < (c*_i - c*_1) - ε
    std::vector<bool> exempt;          // c*_i <= c*_1 + ε, including i = 1
    std::vector<bool> eq2_violations;  // per index
};

ConditionReport check_conditions(const CostInstance& inst);

/// True when the sequence with the lowest model cost has true cost within ε
/// of the best.
bool check_optimality(const CostInstance& inst);

struct FuzzConfig {
    std::size_t trials = 10000;
    std::size_t n = 100;
    std::size_t worst_case_trials = 1000;
    /// Multiplies the allowed error of non-exempt sequences. 1 samples inside
    /// the theorem's conditions; larger values probe how tight they are.
    double bound_scale = 1.0;
};

struct FuzzReport {
    std::size_t trials = 0;
    std::size_t violations = 0;          // sampled instances that were not ε-optimal
    std::size_t rejected = 0;            // samples that missed the conditions and were redrawn
    std::size_t worst_case_trials = 0;
    std::size_t worst_case_violations = 0;
    std::size_t construction_failures = 0;  // worst cases where ĉ_1 < ĉ_i failed for a non-exempt i

    std::size_t total_violations() const { return violations + worst_case_violations + construction_failures; }
};

/// Random instances satisfying both conditions (when bound_scale == 1), plus
/// the extremal instances ĉ_1 = c*_1 + ε - δ, ĉ_i = c*_1 + ε + δ for every
/// non-exempt i.
FuzzReport theorem_fuzz(const FuzzConfig& cfg, std::uint64_t seed);

}  // namespace gap::theorylab
