#include "gap/planner/cem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gap::planner {

using ndiff::Tensor;

void CemConfig::validate() const {
    if (candidates == 0 || elites == 0 || elites > candidates) {
        throw std::invalid_argument("cem: need 1 <= elites <= candidates, got elites=" + std::to_string(elites) +
                                    " candidates=" + std::to_string(candidates));
    }
    if (iterations == 0) throw std::invalid_argument("cem: iterations must be at least 1");
    if (horizon == 0) throw std::invalid_argument("cem: horizon must be at least 1");
    if (rounds == 0) throw std::invalid_argument("cem: rounds must be at least 1");
}

namespace {

class LatentScorer final : public SequenceScorer {
public:
    LatentScorer(const models::ModelBundle& m, Tensor z0, Tensor zg) : m_(m), z0_(std::move(z0)), zg_(std::move(zg)) {}

    Scores score(std::span<const double> actions, std::size_t count, std::size_t horizon) const override {
        const std::size_t L = z0_.cols(), A = m_.config().action_dim;
        Tensor z = Tensor::matrix(count, L);
        for (std::size_t i = 0; i < count; ++i) std::copy(z0_.raw(), z0_.raw() + L, z.row_span(i).begin());
        Scores out{std::vector<double>(count, 0.0), std::vector<double>(count, 0.0)};
        Tensor a = Tensor::matrix(count, A);
        for (std::size_t h = 0; h < horizon; ++h) {
            for (std::size_t i = 0; i < count; ++i) {
                const double* src = actions.data() + (i * horizon + h) * A;
                std::copy(src, src + A, a.row_span(i).begin());
            }
            z = m_.dynamics(z, a);
            for (std::size_t i = 0; i < count; ++i) {
                const double c = envs::squared_distance(z.row_span(i), zg_.row_span(0));
                out.summed[i] += c;
                if (h + 1 == horizon) out.terminal[i] = c;
            }
        }
        return out;
    }

private:
    const models::ModelBundle& m_;
    Tensor z0_, zg_;
};

class OracleScorer final : public SequenceScorer {
public:
    OracleScorer(const envs::Environment& env, envs::State s, envs::Goal g) : env_(env), s_(std::move(s)), g_(std::move(g)) {}

    Scores score(std::span<const double> actions, std::size_t count, std::size_t horizon) const override {
        const std::size_t A = env_.action_dim();
        Scores out{std::vector<double>(count, 0.0), std::vector<double>(count, 0.0)};
        for (std::size_t i = 0; i < count; ++i) {
            envs::State s = s_;
            for (std::size_t h = 0; h < horizon; ++h) {
                s = env_.step(s, actions.subspan((i * horizon + h) * A, A));
                const double c = env_.cost(s, g_);
                out.summed[i] += c;
                if (h + 1 == horizon) out.terminal[i] = c;
            }
        }
        return out;
    }

private:
    const envs::Environment& env_;
    envs::State s_;
    envs::Goal g_;
};

class ConstantScorer final : public SequenceScorer {
public:
    Scores score(std::span<const double>, std::size_t count, std::size_t) const override {
        return {std::vector<double>(count, 0.0), std::vector<double>(count, 0.0)};
    }
};

}  // namespace

LatentModel::LatentModel(const models::ModelBundle& model, const envs::Environment& env) : model_(model), env_(env) {
    if (model.config().obs_dim != env.observation_dim() || model.config().action_dim != env.action_dim()) {
        throw std::invalid_argument("model " + std::string(models::variant_name(model.variant())) +
                                    " does not match the dimensions of " + env.spec().id);
    }
}

std::string LatentModel::name() const { return std::string(models::variant_name(model_.variant())); }

std::unique_ptr<SequenceScorer> LatentModel::scorer_for(const envs::State& s, const envs::Goal& goal) const {
    const auto obs = env_.observe(s);
    const auto goal_obs = env_.observe(goal.state);
    const Tensor x = Tensor::row(obs), g = Tensor::row(goal_obs);
    const Tensor& ctx = models::wiring(model_.variant()).context == models::Context::start ? x : g;
    return std::make_unique<LatentScorer>(model_, model_.encode(x, ctx).mean, model_.encode(g, ctx).mean);
}

std::unique_ptr<SequenceScorer> OracleModel::scorer_for(const envs::State& s, const envs::Goal& goal) const {
    return std::make_unique<OracleScorer>(env_, s, goal);
}

std::unique_ptr<SequenceScorer> ConstantModel::scorer_for(const envs::State&, const envs::Goal&) const {
    return std::make_unique<ConstantScorer>();
}

PlanResult cem_plan(const SequenceScorer& scorer, std::size_t action_dim, double action_bound, const CemConfig& cfg,
                    std::uint64_t seed) {
    cfg.validate();
    const std::size_t H = cfg.horizon, A = action_dim, width = H * A, D = cfg.candidates, E = cfg.elites;
    Rng rng = make_rng(seed, {0x63656dULL});
    // Search runs in units of the action bound, so N(0, 1) spans the action box
    // the same way for every environment.
    std::vector<double> mu(width, 0.0), sigma(width, 1.0);
    std::vector<double> elite_actions;  // E x width, carried between iterations
    std::vector<double> elite_summed, elite_terminal;
    PlanResult result;

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        std::vector<double> pool;
        std::vector<double> summed, terminal;
        if (cfg.keep_elites && it > 0) {
            pool = elite_actions;
            summed = elite_summed;
            terminal = elite_terminal;
        }
        const std::size_t carried = summed.size();
        pool.resize((carried + D) * width);
        for (std::size_t i = 0; i < D; ++i) {
            double* row = pool.data() + (carried + i) * width;
            for (std::size_t j = 0; j < width; ++j) {
                row[j] = std::clamp(mu[j] + sigma[j] * standard_normal(rng), -1.0, 1.0);
            }
        }
        std::vector<double> scaled(pool.begin() + static_cast<std::ptrdiff_t>(carried * width), pool.end());
        for (double& v : scaled) v *= action_bound;
        const Scores fresh = scorer.score(scaled, D, H);
        result.sampled += D;
        summed.insert(summed.end(), fresh.summed.begin(), fresh.summed.end());
        terminal.insert(terminal.end(), fresh.terminal.begin(), fresh.terminal.end());
        for (double c : fresh.summed) {
            if (!std::isfinite(c)) throw std::domain_error("cem: scorer returned a non-finite cost");
        }

        const std::vector<double>& key = cfg.ranking == Ranking::summed ? summed : terminal;
        std::vector<std::size_t> order(summed.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });

        elite_actions.assign(E * width, 0.0);
        elite_summed.assign(E, 0.0);
        elite_terminal.assign(E, 0.0);
        double mean_cost = 0.0;
        for (std::size_t e = 0; e < E; ++e) {
            const std::size_t idx = order[e];
            std::copy_n(pool.data() + idx * width, width, elite_actions.data() + e * width);
            elite_summed[e] = summed[idx];
            elite_terminal[e] = terminal[idx];
            mean_cost += key[idx];
        }
        result.elite_means.push_back(mean_cost / static_cast<double>(E));

        for (std::size_t j = 0; j < width; ++j) {
            double m = 0.0;
            for (std::size_t e = 0; e < E; ++e) m += elite_actions[e * width + j];
            m /= static_cast<double>(E);
            double var = 0.0;
            for (std::size_t e = 0; e < E; ++e) var += (elite_actions[e * width + j] - m) * (elite_actions[e * width + j] - m);
            mu[j] = m;
            sigma[j] = std::max(std::sqrt(var / static_cast<double>(E)), 1e-3);
        }
    }
    result.actions.assign(elite_actions.begin(), elite_actions.begin() + static_cast<std::ptrdiff_t>(width));
    for (double& v : result.actions) v = std::clamp(v * action_bound, -action_bound, action_bound);
    result.predicted_cost = elite_summed.front();
    result.predicted_terminal = elite_terminal.front();
    return result;
}

PlanResult latent_mpc(const PlanningModel& model, const envs::Environment& env, const envs::State& s,
                      const envs::Goal& goal, const CemConfig& cfg, std::uint64_t seed) {
    const auto scorer = model.scorer_for(s, goal);
    return cem_plan(*scorer, env.action_dim(), env.action_bound(), cfg, seed);
}

Episode execute_replan(const PlanningModel& model, const envs::Environment& env, const envs::State& s0,
                       const envs::Goal& goal, const CemConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Episode ep;
    envs::State s = s0;
    const std::size_t A = env.action_dim();
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
        PlanResult plan = latent_mpc(model, env, s, goal, cfg, derive_seed(seed, {round}));
        for (std::size_t h = 0; h < cfg.horizon; ++h) {
            std::vector<double> a(plan.actions.begin() + static_cast<std::ptrdiff_t>(h * A),
                                  plan.actions.begin() + static_cast<std::ptrdiff_t>((h + 1) * A));
            s = env.step(s, a);
            ep.actions.push_back(std::move(a));
        }
        ep.plans.push_back(std::move(plan));
    }
    ep.final_state = s;
    ep.success = env.success(s, goal);
    ep.final_cost = env.cost(s, goal);
    return ep;
}

Episode random_episode(const envs::Environment& env, const envs::State& s0, const envs::Goal& goal, std::size_t steps,
                       std::uint64_t seed) {
    Rng rng = make_rng(seed, {0x72616e64ULL});
    Episode ep;
    envs::State s = s0;
    const double b = env.action_bound();
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<double> a(env.action_dim());
        for (double& v : a) v = uniform(rng, -b, b);
        s = env.step(s, a);
        ep.actions.push_back(std::move(a));
    }
    ep.final_state = s;
    ep.success = env.success(s, goal);
    ep.final_cost = env.cost(s, goal);
    return ep;
}

std::size_t select_open_loop(std::span<const double> costs) {
    if (costs.empty()) throw std::invalid_argument("select_open_loop: no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < costs.size(); ++i) {
        if (!std::isfinite(costs[i])) throw std::invalid_argument("select_open_loop: non-finite cost at index " + std::to_string(i));
        if (costs[i] < costs[best]) best = i;
    }
    if (!std::isfinite(costs[0])) throw std::invalid_argument("select_open_loop: non-finite cost at index 0");
    return best;
}

}  // namespace gap::planner
