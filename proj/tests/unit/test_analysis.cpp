#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "gap/analysis/analysis.hpp"

using namespace gap;
using namespace gap::analysis;
using ndiff::Tensor;

namespace {

models::ModelBundle small_model(models::Variant v, const envs::Environment& env) {
    models::ModelConfig cfg;
    cfg.variant = v;
    cfg.env_id = env.spec().id;
    cfg.obs_dim = env.observation_dim();
    cfg.action_dim = env.action_dim();
    cfg.latent_dim = 4;
    cfg.hidden = {8};
    return models::ModelBundle(cfg, 3);
}

/// Oracle shifted by a constant: its error is known in closed form.
class ShiftedOracle final : public StatePredictor {
public:
    ShiftedOracle(const envs::Environment& env, double shift) : oracle_(env), shift_(shift) {}
    std::string name() const override { return "shifted"; }
    std::vector<Tensor> predict(const envs::State& s0, const envs::Goal& g, const Tensor& a, std::size_t H) const override {
        auto out = oracle_.predict(s0, g, a, H);
        for (auto& t : out) {
            for (double& v : t.data()) v += shift_;
        }
        return out;
    }

private:
    OraclePredictor oracle_;
    double shift_;
};

class ThrowingModel final : public planner::PlanningModel {
public:
    std::unique_ptr<planner::SequenceScorer> scorer_for(const envs::State&, const envs::Goal&) const override {
        throw std::domain_error("boom");
    }
    std::string name() const override { return "throwing"; }
};

ErrorProfileConfig small_profile() {
    ErrorProfileConfig cfg;
    cfg.tasks = 3;
    cfg.sequences = 50;
    cfg.horizon = 5;
    cfg.cohorts = {{"all", 50}, {"top10", 10}};
    return cfg;
}

}  // namespace

TEST_CASE("standard error and best indices") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    CHECK(standard_error(xs) == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(standard_error(std::vector<double>{7.0}) == 0.0);
    const std::vector<double> costs{0.5, 0.1, 0.5, 0.1, 0.9};
    CHECK(best_indices(costs, 3) == std::vector<std::size_t>{1, 3, 0});
    CHECK(best_indices(costs, 10).size() == 5);
}

TEST_CASE("oracle has zero error and a shifted oracle has the shift squared") {
    const envs::Environment env("blockpush-task1");
    const OraclePredictor oracle(env);
    const ShiftedOracle shifted(env, 0.1);
    const StatePredictor* ps[] = {&oracle, &shifted};
    const auto p = error_profile(ps, env, small_profile(), 5);
    CHECK(p.cells.size() == 2 * 2 * 5);
    for (std::size_t h = 1; h <= 5; ++h) {
        CHECK(p.at("oracle", "all", h).mse == 0.0);
        CHECK(p.at("shifted", "top10", h).mse == doctest::Approx(0.01));
        CHECK(p.at("shifted", "top10", h).n == 30);
        CHECK(p.at("oracle", "all", h).n == 150);
    }
    CHECK_THROWS_AS(p.at("oracle", "top100", 1), std::out_of_range);
}

TEST_CASE("cohorts do not depend on predictor order") {
    const envs::Environment env("pointnav");
    const auto gap_model = small_model(models::Variant::gap, env);
    const auto std_model = small_model(models::Variant::standard, env);
    const ModelPredictor a(gap_model, env), b(std_model, env);
    const StatePredictor* ab[] = {&a, &b};
    const StatePredictor* ba[] = {&b, &a};
    const auto p1 = error_profile(ab, env, small_profile(), 9);
    const auto p2 = error_profile(ba, env, small_profile(), 9);
    for (const char* who : {"gap", "standard"}) {
        for (std::size_t h = 1; h <= 5; ++h) {
            CHECK(p1.at(who, "top10", h).mse == p2.at(who, "top10", h).mse);
            CHECK(p1.at(who, "all", h).se == p2.at(who, "all", h).se);
        }
    }
}

TEST_CASE("model predictor inverts the residual against its context") {
    const envs::Environment env("blockpush-task1");
    const envs::State s0 = env.reset(1);
    const envs::Goal goal = env.sample_goal(s0, 2);
    const Tensor actions = Tensor::matrix(1, 3 * env.action_dim(), 0.01);
    for (auto v : {models::Variant::gap, models::Variant::gap_no_goal, models::Variant::standard}) {
        const auto m = small_model(v, env);
        const auto pred = ModelPredictor(m, env).predict(s0, goal, actions, 3);
        REQUIRE(pred.size() == 4);
        const Tensor x = Tensor::row(env.observe(s0)), g = Tensor::row(env.observe(goal.state));
        const Tensor& ctx = v == models::Variant::gap_no_goal ? x : g;
        const Tensor dec = m.decode(m.encode(x, ctx).mean);
        for (std::size_t i = 0; i < dec.size(); ++i) {
            const double expect = m.wiring().residual_target ? ctx[i] - dec[i] : dec[i];
            CHECK(pred[0][i] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    const auto inv = small_model(models::Variant::inverse, env);
    CHECK_THROWS_AS(ModelPredictor(inv, env), std::invalid_argument);
    CHECK_THROWS_AS(ModelPredictor(small_model(models::Variant::gap, env), env)
                        .predict(s0, goal, Tensor::matrix(1, 5), 3),
                    std::invalid_argument);
}

TEST_CASE("error profile is deterministic in the seed") {
    const envs::Environment env("pointnav");
    const auto m = small_model(models::Variant::gap, env);
    const ModelPredictor pred(m, env);
    const StatePredictor* ps[] = {&pred};
    const auto a = error_profile(ps, env, small_profile(), 4);
    const auto b = error_profile(ps, env, small_profile(), 4);
    const auto c = error_profile(ps, env, small_profile(), 5);
    CHECK(a.at("gap", "all", 3).mse == b.at("gap", "all", 3).mse);
    CHECK(a.at("gap", "all", 3).mse != c.at("gap", "all", 3).mse);
}

TEST_CASE("success table shares trials and counts planner errors as failures") {
    const envs::Environment env("pointnav");
    const planner::OracleModel oracle(env);
    const ThrowingModel bad;
    const Contender cs[] = {{"oracle", &oracle}, {"random", nullptr}, {"throwing", &bad}};
    const envs::Environment* tasks[] = {&env};
    planner::CemConfig cem;
    cem.candidates = 200;
    cem.horizon = 10;
    cem.iterations = 2;
    cem.ranking = planner::Ranking::terminal;
    const auto rows = success_table(cs, tasks, 20, cem, 11);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].rate >= 0.9);
    CHECK(rows[1].rate < rows[0].rate);
    CHECK(rows[2].successes == 0);
    CHECK(rows[2].errors == 20);
    CHECK(rows[0].seed == rows[1].seed);
    const auto again = success_table(cs, tasks, 20, cem, 11);
    CHECK(again[0].successes == rows[0].successes);
    CHECK(again[1].successes == rows[1].successes);
}

TEST_CASE("rollout dump rows and csv") {
    const envs::Environment env("blockpush-task1");
    const envs::State s0 = env.reset(3);
    const envs::Goal goal = env.sample_goal(s0, 4);
    const std::vector<std::vector<double>> actions(4, std::vector<double>{0.0, 0.05});
    const auto rows = rollout_dump(OraclePredictor(env), env, s0, goal, actions);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].truth == env.observe(s0));
    for (const auto& r : rows) {
        CHECK(r.truth == r.predicted);
        for (std::size_t i = 0; i < r.residual.size(); ++i) CHECK(r.residual[i] == goal.state[i] - r.predicted[i]);
    }
    CHECK(rollout_header(2) == "step,true_0,true_1,pred_0,pred_1,resid_0,resid_1");

    const auto dir = std::filesystem::temp_directory_path() / "gap_test_rollout";
    std::filesystem::remove_all(dir);
    write_rollout_csv(dir / "r.csv", rows);
    std::ifstream in(dir / "r.csv");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    CHECK(n == 6);
    std::filesystem::remove_all(dir);

    const std::vector<std::vector<double>> bad{{0.1}};
    CHECK_THROWS_AS(rollout_dump(OraclePredictor(env), env, s0, goal, bad), std::invalid_argument);
}

TEST_CASE("pearson against a direct computation") {
    const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 5, 4, 5};
    // Two-pass by hand: sxy = 6, sxx = 10, syy = 6.
    CHECK(pearson(x, y) == doctest::Approx(6.0 / std::sqrt(60.0)));
    CHECK(pearson(x, x) == doctest::Approx(1.0));
    CHECK(std::isnan(pearson(x, std::vector<double>(5, 1.0))));
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("oracle trace correlates perfectly") {
    const envs::Environment env("blockpush-task1");
    const envs::State s0 = env.reset(3);
    const envs::Goal goal = env.sample_goal(s0, 4);
    const auto plan = planner::latent_mpc(planner::OracleModel(env), env, s0, goal, [] {
        planner::CemConfig c;
        c.candidates = 300;
        return c;
    }(), 1);
    std::vector<std::vector<double>> actions;
    for (std::size_t h = 0; h < 15; ++h) actions.emplace_back(plan.actions.begin() + 2 * h, plan.actions.begin() + 2 * h + 2);
    const auto rows = rollout_dump(OraclePredictor(env), env, s0, goal, actions);
    CHECK(target_trace_correlation(rows, goal) == doctest::Approx(1.0));
}
