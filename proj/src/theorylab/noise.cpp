#include "gap/theorylab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gap/common/rng.hpp"
#include "gap/planner/cem.hpp"

namespace gap::theorylab {

std::string_view target_name(NoiseTarget t) { return t == NoiseTarget::cost ? "cost" : "model"; }

NoiseTarget parse_target(std::string_view name) {
    if (name == "cost") return NoiseTarget::cost;
    if (name == "model") return NoiseTarget::model;
    throw std::invalid_argument("unknown noise target: " + std::string(name) + " (expected cost or model)");
}

std::vector<Bucket> decile_buckets() {
    std::vector<Bucket> b;
    for (int i = 0; i < 10; ++i) b.push_back({10.0 * i, 10.0 * (i + 1)});
    return b;
}

std::vector<int> assign_buckets(std::span<const double> true_costs, std::span<const Bucket> buckets) {
    const std::size_t n = true_costs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return true_costs[a] < true_costs[b]; });
    std::vector<int> out(n, -1);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const double pct = 100.0 * static_cast<double>(rank) / static_cast<double>(n);
        for (std::size_t b = 0; b < buckets.size(); ++b) {
            if (pct >= buckets[b].lo && pct < buckets[b].hi) {
                out[order[rank]] = static_cast<int>(b);
                break;
            }
        }
    }
    return out;
}

const SweepCell& SweepReport::cell(double magnitude, const Bucket& b) const {
    for (const auto& c : cells) {
        if (c.magnitude == magnitude && c.bucket.lo == b.lo && c.bucket.hi == b.hi) return c;
    }
    throw std::out_of_range("no sweep cell for magnitude " + std::to_string(magnitude));
}

namespace {

void validate(const NoiseSweepConfig& cfg) {
    if (cfg.trials == 0 || cfg.sequences == 0) throw std::invalid_argument("noise sweep: trials and sequences must be positive");
    for (const auto& b : cfg.buckets) {
        if (!(b.lo >= 0.0 && b.lo < b.hi && b.hi <= 100.0)) {
            throw std::invalid_argument("noise sweep: bucket [" + std::to_string(b.lo) + ", " + std::to_string(b.hi) +
                                        ") is not inside [0, 100)");
        }
    }
    for (double m : cfg.magnitudes) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("noise sweep: magnitudes must be >= 0");
    }
}

double distance(const envs::State& s, const envs::State& g) { return std::sqrt(envs::squared_distance(s, g)); }

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

SweepReport noise_sweep(const envs::Environment& env, const NoiseSweepConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    const std::size_t N = cfg.sequences;
    const std::size_t T = cfg.length == 0 ? static_cast<std::size_t>(env.spec().episode_length) : cfg.length;
    const std::size_t A = env.action_dim(), S = env.state_dim();
    const double bound = env.action_bound();

    SweepReport rep;
    rep.target = cfg.target;
    rep.sequence_length = T;
    rep.trials = cfg.trials;
    for (double m : cfg.magnitudes) {
        for (const auto& b : cfg.buckets) rep.cells.push_back(SweepCell{cfg.target, b, m, cfg.trials, 0, 0.0, 0.0});
    }

    std::vector<std::vector<double>> actions(N, std::vector<double>(T * A));
    std::vector<double> true_cost(N), noisy_cost(N);
    std::vector<envs::State> terminal(N);
    // Unit noise: one value per sequence (cost) or per sequence, step and coordinate (model).
    std::vector<double> unit;

    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const envs::State s0 = env.reset(derive_seed(seed, {0x7265736574ULL, t}));
        const envs::Goal goal = env.sample_goal(s0, derive_seed(seed, {0x676f616cULL, t}));
        Rng seq_rng = make_rng(seed, {0x736571ULL, t});
        for (std::size_t i = 0; i < N; ++i) {
            for (double& a : actions[i]) a = uniform(seq_rng, -bound, bound);
            envs::State s = s0;
            for (std::size_t k = 0; k < T; ++k) s = env.step(s, std::span<const double>(actions[i]).subspan(k * A, A));
            terminal[i] = s;
            true_cost[i] = distance(s, goal.state);
        }
        const std::size_t best = planner::select_open_loop(true_cost);
        const bool baseline_ok = env.success(terminal[best], goal);
        rep.baseline_successes += baseline_ok;

        Rng noise_rng = make_rng(seed, {0x6e6f697365ULL, t});
        unit.resize(cfg.target == NoiseTarget::cost ? N : N * T * S);
        for (double& u : unit) u = uniform(noise_rng, -1.0, 1.0);
        const std::vector<int> bucket_of = assign_buckets(true_cost, cfg.buckets);

        std::size_t cell = 0;
        for (double m : cfg.magnitudes) {
            for (std::size_t b = 0; b < cfg.buckets.size(); ++b, ++cell) {
                for (std::size_t i = 0; i < N; ++i) {
                    if (bucket_of[i] != static_cast<int>(b) || m == 0.0) {
                        noisy_cost[i] = true_cost[i];
                    } else if (cfg.target == NoiseTarget::cost) {
                        noisy_cost[i] = true_cost[i] + m * unit[i];
                    } else {
                        // The noise enters the state estimate and propagates through later steps.
                        envs::State s = s0;
                        for (std::size_t k = 0; k < T; ++k) {
                            s = env.step(s, std::span<const double>(actions[i]).subspan(k * A, A));
                            for (std::size_t d = 0; d < S; ++d) s[d] = clip01(s[d] + m * unit[(i * T + k) * S + d]);
                        }
                        noisy_cost[i] = distance(s, goal.state);
                    }
                }
                const std::size_t chosen = planner::select_open_loop(noisy_cost);
                rep.cells[cell].successes += env.success(terminal[chosen], goal);
            }
        }
    }
    const double n = static_cast<double>(cfg.trials);
    rep.baseline_rate = static_cast<double>(rep.baseline_successes) / n;
    for (auto& c : rep.cells) {
        c.success_rate = static_cast<double>(c.successes) / n;
        c.ci95 = 1.96 * std::sqrt(c.success_rate * (1.0 - c.success_rate) / n);
    }
    return rep;
}

}  // namespace gap::theorylab
