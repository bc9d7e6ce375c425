#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gap/envs/env.hpp"
#include "gap/models/model.hpp"
#include "gap/planner/cem.hpp"

namespace gap::analysis {

/// Predicted observations along K action sequences from a common start.
class StatePredictor {
public:
    virtual ~StatePredictor() = default;
    virtual std::string name() const = 0;
    /// `actions` is K x (H * A). Returns H + 1 tensors of K x O for steps 0..H.
    virtual std::vector<ndiff::Tensor> predict(const envs::State& s0, const envs::Goal& goal,
                                               const ndiff::Tensor& actions, std::size_t horizon) const = 0;
};

/// Decodes the latent rollout back to observation space. Residual variants
/// predict ctx - r̂, raw variants use the decoder output directly.
class ModelPredictor final : public StatePredictor {
public:
    ModelPredictor(const models::ModelBundle& model, const envs::Environment& env);
    std::string name() const override;
    std::vector<ndiff::Tensor> predict(const envs::State& s0, const envs::Goal& goal, const ndiff::Tensor& actions,
                                       std::size_t horizon) const override;

private:
    const models::ModelBundle& model_;
    const envs::Environment& env_;
};

/// Ground truth from the environment; its errors are zero by construction.
class OraclePredictor final : public StatePredictor {
public:
    explicit OraclePredictor(const envs::Environment& env) : env_(env) {}
    std::string name() const override { return "oracle"; }
    std::vector<ndiff::Tensor> predict(const envs::State& s0, const envs::Goal& goal, const ndiff::Tensor& actions,
                                       std::size_t horizon) const override;

private:
    const envs::Environment& env_;
};

struct Cohort {
    std::string name;
    std::size_t size = 0;  // best `size` sequences by true cost
};

enum class RankBy { terminal, summed };

struct ErrorProfileConfig {
    std::size_t tasks = 20;        // (start, goal) pairs
    std::size_t sequences = 1000;  // random action sequences per task
    std::size_t horizon = 15;
    std::vector<Cohort> cohorts{{"all", 1000}, {"top100", 100}, {"top10", 10}};
    RankBy rank_by = RankBy::terminal;
};

struct ErrorCell {
    std::string predictor;
    std::string cohort;
    std::size_t step = 0;  // 1..H
    double mse = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

struct ErrorProfile {
    std::size_t horizon = 0;
    std::vector<ErrorCell> cells;

    const ErrorCell& at(const std::string& predictor, const std::string& cohort, std::size_t step) const;
};

/// Indices of the `size` lowest costs; ties by index.
std::vector<std::size_t> best_indices(std::span<const double> costs, std::size_t size);

/// Mean squared prediction error per step and cohort. Every predictor sees
/// the same starts, goals and action sequences; cohorts are ranked by true
/// cost only.
ErrorProfile error_profile(std::span<const StatePredictor* const> predictors, const envs::Environment& env,
                           const ErrorProfileConfig& cfg, std::uint64_t seed);

/// sample standard deviation / sqrt(n); 0 for n < 2.
double standard_error(std::span<const double> xs);

/// A row of the success table: a planning model, or the random policy when
/// `model` is null.
struct Contender {
    std::string name;
    const planner::PlanningModel* model = nullptr;
};

struct SuccessRow {
    std::string contender;
    std::string task;
    std::size_t trials = 0;
    std::size_t successes = 0;
    std::size_t errors = 0;  // trials whose planner threw, counted as failures
    double rate = 0.0;
    double se = 0.0;
    std::uint64_t seed = 0;
};

/// execute_replan on `trials` shared (start, goal) pairs per task.
std::vector<SuccessRow> success_table(std::span<const Contender> contenders,
                                      std::span<const envs::Environment* const> tasks, std::size_t trials,
                                      const planner::CemConfig& cem, std::uint64_t seed);

struct RolloutRow {
    std::size_t step = 0;
    std::vector<double> truth;
    std::vector<double> predicted;
    std::vector<double> residual;  // goal minus predicted
};

/// True and predicted observations along one action sequence; with no
/// actions the single row holds the reconstruction of s0.
std::vector<RolloutRow> rollout_dump(const StatePredictor& predictor, const envs::Environment& env,
                                     const envs::State& s0, const envs::Goal& goal,
                                     std::span<const std::vector<double>> actions);

/// Sample Pearson correlation; NaN when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Correlation between true and predicted coordinates of the goal's target
/// blocks, pooled over steps 1..H. Vector observations only.
double target_trace_correlation(const std::vector<RolloutRow>& rows, const envs::Goal& goal);

std::string rollout_header(std::size_t obs_dim);
void write_rollout_csv(const std::filesystem::path& path, const std::vector<RolloutRow>& rows);
void write_error_profile_csv(const std::filesystem::path& path, const ErrorProfile& p);
void write_success_csv(const std::filesystem::path& path, const std::vector<SuccessRow>& rows);

}  // namespace gap::analysis
