#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gap/envs/env.hpp"
#include "gap/models/model.hpp"

namespace gap::planner {

/// Which candidate cost CEM ranks by.
enum class Ranking { summed, terminal };

struct CemConfig {
    std::size_t candidates = 1000;
    std::size_t elites = 10;
    std::size_t horizon = 15;
    std::size_t iterations = 3;
    /// Plan-execute rounds in execute_replan; 1 means open-loop.
    std::size_t rounds = 2;
    /// Carry the previous elites into the next iteration's pool.
    bool keep_elites = true;
    Ranking ranking = Ranking::summed;

    void validate() const;
};

/// Candidate costs from one scoring pass. `summed` adds the cost after every
/// step h = 1..H, `terminal` is the cost after step H only.
struct Scores {
    std::vector<double> summed;
    std::vector<double> terminal;
};

/// Scores D action sequences laid out row-major as [candidate][step][dim].
class SequenceScorer {
public:
    virtual ~SequenceScorer() = default;
    virtual Scores score(std::span<const double> actions, std::size_t count, std::size_t horizon) const = 0;
};

/// Something the planner can query: builds a scorer for a (state, goal) pair.
class PlanningModel {
public:
    virtual ~PlanningModel() = default;
    virtual std::unique_ptr<SequenceScorer> scorer_for(const envs::State& s, const envs::Goal& goal) const = 0;
    virtual std::string name() const = 0;
};

/// Scores by squared latent distance to the encoded goal, rolling the
/// learned dynamics from the encoder mean.
class LatentModel final : public PlanningModel {
public:
    LatentModel(const models::ModelBundle& model, const envs::Environment& env);
    std::unique_ptr<SequenceScorer> scorer_for(const envs::State& s, const envs::Goal& goal) const override;
    std::string name() const override;

private:
    const models::ModelBundle& model_;
    const envs::Environment& env_;
};

/// True dynamics and true cost: the upper bound for the planning harness.
class OracleModel final : public PlanningModel {
public:
    explicit OracleModel(const envs::Environment& env) : env_(env) {}
    std::unique_ptr<SequenceScorer> scorer_for(const envs::State& s, const envs::Goal& goal) const override;
    std::string name() const override { return "oracle"; }

private:
    const envs::Environment& env_;
};

/// Scores every sequence identically, as a model with constant latents would.
class ConstantModel final : public PlanningModel {
public:
    std::unique_ptr<SequenceScorer> scorer_for(const envs::State& s, const envs::Goal& goal) const override;
    std::string name() const override { return "constant"; }
};

struct PlanResult {
    std::vector<double> actions;  // horizon x action_dim
    double predicted_cost = 0.0;  // summed over the horizon
    double predicted_terminal = 0.0;
    std::vector<double> elite_means;  // mean elite cost per iteration
    std::size_t sampled = 0;
};

/// Cross-entropy search over action sequences, in units of the action bound:
/// starts from N(0, 1) per coordinate, clips samples to [-1, 1], ranks by
/// summed (or terminal) cost with a stable sort and refits to the elites (standard
/// deviation floored at 1e-3).
PlanResult cem_plan(const SequenceScorer& scorer, std::size_t action_dim, double action_bound, const CemConfig& cfg,
                    std::uint64_t seed);

/// cem_plan with the scorer a model builds for (s, goal).
PlanResult latent_mpc(const PlanningModel& model, const envs::Environment& env, const envs::State& s,
                      const envs::Goal& goal, const CemConfig& cfg, std::uint64_t seed);

struct Episode {
    envs::State final_state;
    std::vector<std::vector<double>> actions;
    std::vector<PlanResult> plans;
    bool success = false;
    double final_cost = 0.0;
};

/// `cfg.rounds` rounds of: plan H actions from the current state, execute all
/// of them in the environment.
Episode execute_replan(const PlanningModel& model, const envs::Environment& env, const envs::State& s0,
                       const envs::Goal& goal, const CemConfig& cfg, std::uint64_t seed);

/// Uniform random actions for `steps` steps.
Episode random_episode(const envs::Environment& env, const envs::State& s0, const envs::Goal& goal, std::size_t steps,
                       std::uint64_t seed);

/// Index of the lowest cost, 0-based; ties go to the lowest index.
std::size_t select_open_loop(std::span<const double> costs);

}  // namespace gap::planner
