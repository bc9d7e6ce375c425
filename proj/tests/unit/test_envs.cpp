#include <cmath>
#include <numeric>
#include <stdexcept>

#include "doctest.h"
#include "gap/common/rng.hpp"
#include "gap/envs/env.hpp"

using namespace gap;
using namespace gap::envs;

namespace {

State random_blockpush_state(Rng& rng) {
    State s(8);
    for (double& v : s) v = uniform(rng, 0.0, 1.0);
    return s;
}

std::vector<double> random_action(Rng& rng, double bound) {
    return {uniform(rng, -bound, bound), uniform(rng, -bound, bound)};
}

}  // namespace

TEST_CASE("env specs") {
    for (const auto& id : known_env_ids()) {
        const EnvSpec s = env_spec(id);
        CHECK(s.success_threshold > 0.0);
        CHECK(s.episode_length >= 2);
    }
    CHECK(env_spec("pointnav").action_bound == 0.1);
    CHECK(env_spec("pointnav").episode_length == 10);
    CHECK(env_spec("blockpush-task1").success_threshold == 0.08);
    CHECK(env_spec("blockpush-task2").success_threshold == 0.1);
    CHECK(Environment("blockpush-grid-task1").observation_dim() == 576);
    CHECK_THROWS_AS(env_spec("door"), std::invalid_argument);
}

TEST_CASE("pointnav step") {
    const Environment env("pointnav");
    const std::vector<double> a{0.1, 0.0};
    State s = env.step({0.5, 0.5}, a);
    CHECK(s[0] == doctest::Approx(0.6));
    CHECK(s[1] == 0.5);
    s = env.step({0.98, 0.5}, a);
    CHECK(s[0] == 1.0);
    CHECK(s[1] == 0.5);
    const std::vector<double> too_big{0.2, 0.0};
    CHECK_THROWS_AS(env.step({0.5, 0.5}, too_big), std::invalid_argument);
    CHECK_THROWS_AS(env.step({1.5, 0.5}, a), std::invalid_argument);
    CHECK_THROWS_AS(env.step({0.5}, a), std::invalid_argument);
}

TEST_CASE("cost and success") {
    const Environment env("pointnav");
    CHECK(env.cost({0.3, 0.7}, Goal{{0.3, 0.7}, {}}) == 0.0);
    CHECK(env.cost({0.0, 0.0}, Goal{{0.3, 0.4}, {}}) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(env.success({0.5, 0.5}, Goal{{0.55, 0.5}, {}}));
    CHECK_FALSE(env.success({0.5, 0.5}, Goal{{0.5, 0.625}, {}}));  // exactly 0.125 away
    CHECK_THROWS(env.cost({0.0, 0.0, 0.0}, Goal{{0.3, 0.4}, {}}));

    const Environment bp("blockpush-task2");
    State s{0.5, 0.15, 0.3, 0.3, 0.5, 0.3, 0.7, 0.3};
    Goal g{s, {1, 2}};
    CHECK(bp.success(s, g));
    g.state[6] = 0.5;  // block 2 goal 0.2 away
    CHECK_FALSE(bp.success(s, g));

    const Environment t1("blockpush-task1");
    Goal g1{{0.1, 0.1, 0.4, 0.4, 0.5, 0.3, 0.7, 0.3}, {0}};
    const double before = t1.cost(s, g1);
    State moved = s;
    moved[0] = 0.9;
    moved[1] = 0.9;
    CHECK(t1.cost(moved, g1) == before);
    CHECK(before == doctest::Approx(0.02));
}

TEST_CASE("success threshold is strict") {
    Environment env(EnvSpec{"custom", EnvKind::point_nav, Task::reach, 2, 2, 0.1, 10, 0.5, "uniform-box", ObservationMode::vector});
    CHECK_FALSE(env.success({0.0, 0.0}, Goal{{0.5, 0.0}, {}}));
    CHECK(env.success({0.0, 0.0}, Goal{{0.4999, 0.0}, {}}));
}

TEST_CASE("reset and goals") {
    const Environment env("pointnav");
    CHECK(env.reset(1) == State{0.5, 0.5});
    CHECK(env.reset(99) == State{0.5, 0.5});
    double mx = 0.0, my = 0.0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const Goal g = env.sample_goal(env.reset(i), i);
        mx += g.state[0];
        my += g.state[1];
    }
    CHECK(std::abs(mx / 1000 - 0.5) < 0.05);
    CHECK(std::abs(my / 1000 - 0.5) < 0.05);

    const Environment bp("blockpush-task1");
    CHECK(bp.reset(5) == bp.reset(5));
    CHECK(bp.reset(5) != bp.reset(6));
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const State s = bp.reset(seed);
        CHECK(s[0] == 0.5);
        CHECK(s[1] == doctest::Approx(0.15));
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(std::abs(s[2 + 2 * b] - blockpush::kLattice[b][0]) <= 0.03 + 1e-12);
            CHECK(std::abs(s[3 + 2 * b] - blockpush::kLattice[b][1]) <= 0.03 + 1e-12);
        }
        const Goal g = bp.sample_goal(s, seed);
        REQUIRE(g.target_blocks.size() == 1);
        const std::size_t b = g.target_blocks[0];
        const double gx = g.state[2 + 2 * b], gy = g.state[3 + 2 * b];
        CHECK(gx >= 0.2);
        CHECK(gx <= 0.8);
        CHECK(gy >= 0.2);
        CHECK(gy <= 0.8);
        CHECK(std::hypot(gx - s[2 + 2 * b], gy - s[3 + 2 * b]) >= 0.15);
    }
    const Environment bp2("blockpush-task2");
    CHECK(bp2.sample_goal(bp2.reset(3), 3).target_blocks == std::vector<std::size_t>{1, 2});
}

TEST_CASE("blockpush dynamics properties") {
    const Environment env("blockpush-task1");
    Rng rng(2024);
    const std::vector<double> zero{0.0, 0.0};
    for (int i = 0; i < 2000; ++i) {
        const State s = random_blockpush_state(rng);
        CHECK(env.step(s, zero) == s);
        const auto a = random_action(rng, env.action_bound());
        const State n = env.step(s, a);
        CHECK(n == env.step(s, a));
        for (double v : n) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    // A valid start has no block within contact range, and actions away from
    // the blocks leave them unchanged.
    const State start = env.reset(0);
    const std::vector<double> down{0.03, -0.05};
    const State n = env.step(start, down);
    for (std::size_t i = 2; i < 8; ++i) CHECK(n[i] == start[i]);
}

TEST_CASE("blockpush contact pushes along motion and separates") {
    const Environment env("blockpush-task1");
    State s{0.5, 0.2, 0.5, 0.3, 0.1, 0.9, 0.9, 0.9};
    const std::vector<double> up{0.0, 0.05};
    for (int i = 0; i < 6; ++i) s = env.step(s, up);
    CHECK(s[1] == doctest::Approx(0.5));
    CHECK(s[2] == doctest::Approx(0.5));
    CHECK(s[3] == doctest::Approx(0.56));
    CHECK(s[4] == 0.1);

    Rng rng(77);
    for (int i = 0; i < 3000; ++i) {
        State r = random_blockpush_state(rng);
        // Start from a resolved state so the separation invariant is meaningful.
        for (std::size_t b = 0; b < 3; ++b) {
            if (std::hypot(r[2 + 2 * b] - r[0], r[3 + 2 * b] - r[1]) < blockpush::kContactRadius) r[2 + 2 * b] = r[0] > 0.5 ? 0.0 : 1.0;
        }
        bool clear = true;
        for (std::size_t b = 0; b < 3; ++b) clear &= std::hypot(r[2 + 2 * b] - r[0], r[3 + 2 * b] - r[1]) >= blockpush::kContactRadius;
        if (!clear) continue;
        const State n = env.step(r, random_action(rng, env.action_bound()));
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(std::hypot(n[2 + 2 * b] - n[0], n[3 + 2 * b] - n[1]) >= blockpush::kContactRadius - 1e-9);
        }
    }
}

TEST_CASE("pointnav greedy reachability") {
    const Environment env("pointnav");
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const Goal g{{uniform(rng, 0, 1), uniform(rng, 0, 1)}, {}};
        State s = env.reset(0);
        bool reached = env.success(s, g);
        for (int t = 0; t < 10 && !reached; ++t) {
            std::vector<double> a{g.state[0] - s[0], g.state[1] - s[1]};
            env.clip_action(a);
            s = env.step(s, a);
            reached = env.success(s, g);
        }
        CHECK(reached);
    }
}

TEST_CASE("cost symmetry") {
    Rng rng(3);
    const Environment pn("pointnav");
    const Environment bp("blockpush-task2");
    for (int i = 0; i < 500; ++i) {
        State a{uniform(rng, 0, 1), uniform(rng, 0, 1)}, b{uniform(rng, 0, 1), uniform(rng, 0, 1)};
        CHECK(pn.cost(a, Goal{b, {}}) == pn.cost(b, Goal{a, {}}));
        State c = random_blockpush_state(rng), d = random_blockpush_state(rng);
        CHECK(bp.cost(c, Goal{d, {1, 2}}) == bp.cost(d, Goal{c, {1, 2}}));
    }
}

TEST_CASE("render grid") {
    const double centre = 5.5 / 12.0;
    State s{centre, centre, 0.5, 0.5, 0.1, 0.9, 0.73, 0.21};
    const auto grid = render_grid(s);
    REQUIRE(grid.size() == 576);
    auto channel_sum = [&](const ndiff::Tensor& g, std::size_t c) {
        double t = 0.0;
        for (std::size_t i = c; i < g.size(); i += 4) t += g[i];
        return t;
    };
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(channel_sum(grid, c) - 1.0) < 1e-9);
    CHECK(grid[(5 * 12 + 5) * 4 + 0] == doctest::Approx(1.0));
    for (double v : grid.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(render_grid(s) == grid);
    State moved = s;
    moved[2] = 0.31;
    const auto g2 = render_grid(moved);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i % 4 != 1) CHECK(g2[i] == grid[i]);
    }
    CHECK(g2 != grid);
    const State corner{0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0};
    for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(channel_sum(render_grid(corner), c) - 1.0) < 1e-9);
}

TEST_CASE("a full-bound move cannot pass through a grazed block") {
    const Environment env("blockpush-task1");
    // The block sits 0.045 off the agent's path; start and end are both outside contact range.
    const State s{0.45, 0.5, 0.5, 0.545, 0.1, 0.9, 0.9, 0.9};
    const std::vector<double> right{0.1, 0.0};
    const State n = env.step(s, right);
    CHECK(n[0] == doctest::Approx(0.55));
    CHECK(n[2] > 0.55);
    CHECK(n[3] == 0.545);
    CHECK(std::hypot(n[2] - n[0], n[3] - n[1]) >= blockpush::kContactRadius - 1e-9);
}
