#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gap/envs/env.hpp"

namespace gap::theorylab {

/// Where the injected noise lands: on the predicted costs directly, or on
/// every predicted state of a sequence (costs recomputed from the noisy
/// terminal state).
enum class NoiseTarget { cost, model };

std::string_view target_name(NoiseTarget t);
NoiseTarget parse_target(std::string_view name);

/// Percent range [lo, hi) of sequences ranked by true cost, best first.
struct Bucket {
    double lo = 0.0;
    double hi = 10.0;
};

/// The ten deciles [0,10), [10,20), ..., [90,100).
std::vector<Bucket> decile_buckets();

/// Bucket index of each sequence given its true cost; -1 when no bucket
/// covers its rank. Ranks break ties by index.
std::vector<int> assign_buckets(std::span<const double> true_costs, std::span<const Bucket> buckets);

struct NoiseSweepConfig {
    NoiseTarget target = NoiseTarget::cost;
    std::size_t trials = 500;
    std::size_t sequences = 100;
    /// Steps per action sequence; 0 uses the environment's episode length.
    std::size_t length = 0;
    std::vector<Bucket> buckets = decile_buckets();
    std::vector<double> magnitudes{0.1, 0.25, 0.5, 1.0};
};

struct SweepCell {
    NoiseTarget target = NoiseTarget::cost;
    Bucket bucket;
    double magnitude = 0.0;
    std::size_t trials = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double ci95 = 0.0;  // normal-approximation half-width
};

struct SweepReport {
    NoiseTarget target = NoiseTarget::cost;
    std::size_t sequence_length = 0;
    std::size_t trials = 0;
    std::size_t baseline_successes = 0;
    double baseline_rate = 0.0;
    std::vector<SweepCell> cells;  // magnitude-major, buckets in config order

    const SweepCell& cell(double magnitude, const Bucket& b) const;
};

/// Open-loop selection among random action sequences with noise injected
/// into one bucket at a time. The cost of a sequence is the Euclidean
/// distance of its terminal state to the goal. Every cell of a trial sees the
/// same goal, sequences and unit noise draws (scaled by the magnitude), so
/// zero noise reproduces the noise-free baseline exactly.
SweepReport noise_sweep(const envs::Environment& env, const NoiseSweepConfig& cfg, std::uint64_t seed);

}  // namespace gap::theorylab
