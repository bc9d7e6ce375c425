#include <boost/math/distributions/chi_squared.hpp>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "gap/data/dataset.hpp"
#include "gap/data/windows.hpp"

using namespace gap;
using namespace gap::data;

namespace {

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("collect shapes and determinism") {
    const envs::Environment env("pointnav");
    const Dataset one = collect(env, 1, 5, 3);
    REQUIRE(one.episodes.size() == 1);
    CHECK(one.episodes[0].states.size() == 6);
    CHECK(one.episodes[0].actions.size() == 5);
    CHECK_THROWS(collect(env, 0, 5, 3));

    const auto a = temp_file("gap_data_a.gapd"), b = temp_file("gap_data_b.gapd");
    write_dataset(a, collect(env, 20, 10, 42));
    write_dataset(b, collect(env, 20, 10, 42));
    CHECK(slurp(a) == slurp(b));
    write_dataset(b, collect(env, 20, 10, 43));
    CHECK(slurp(a) != slurp(b));
    std::filesystem::remove(a);
    std::filesystem::remove(b);
}

TEST_CASE("collected states stay in the unit box") {
    const envs::Environment env("pointnav");
    const Dataset ds = collect(env, 500, 30, 1);
    for (const auto& ep : ds.episodes) {
        for (const auto& s : ep.states) {
            for (double v : s) {
                REQUIRE(v >= 0.0);
                REQUIRE(v <= 1.0);
            }
        }
        for (const auto& a : ep.actions) {
            for (double v : a) REQUIRE(std::abs(v) <= 0.1);
        }
    }
}

TEST_CASE("dataset round trip and corruption") {
    for (const char* id : {"pointnav", "blockpush-task1"}) {
        const envs::Environment env(id);
        const Dataset ds = collect(env, 7, 12, 9);
        const auto p = temp_file("gap_data_rt.gapd");
        write_dataset(p, ds);
        const Dataset back = read_dataset(p);
        CHECK(back.env_id == ds.env_id);
        REQUIRE(back.episodes.size() == ds.episodes.size());
        for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
            for (std::size_t t = 0; t < ds.episodes[e].states.size(); ++t) {
                for (std::size_t i = 0; i < ds.state_dim; ++i) {
                    CHECK(std::abs(back.episodes[e].states[t][i] - ds.episodes[e].states[t][i]) <= 1e-6);
                }
            }
        }
        std::string bytes = slurp(p);
        {
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        }
        CHECK_THROWS(read_dataset(p));
        bytes[0] = 'X';
        {
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        }
        CHECK_THROWS(read_dataset(p));
        std::filesystem::remove(p);
    }
}

TEST_CASE("verify rejects data that does not follow the dynamics") {
    const envs::Environment env("pointnav");
    Dataset ds = collect(env, 3, 10, 4);
    for (auto& ep : ds.episodes) {
        for (std::size_t t = 1; t < ep.states.size(); ++t) ep.states[t][0] = 1.0 - ep.states[t][0];
    }
    CHECK_THROWS(verify_dataset(ds, 1000));
}

TEST_CASE("write failure names the path") {
    const envs::Environment env("pointnav");
    const Dataset ds = collect(env, 1, 3, 1);
    try {
        write_dataset("/nonexistent-dir/x/y.gapd", ds);
        FAIL("expected throw");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("/nonexistent-dir/x/y.gapd") != std::string::npos);
    }
}

TEST_CASE("relabelled windows") {
    const envs::Environment env("blockpush-task1");
    const Dataset ds = collect(env, 20, 30, 11);
    Rng rng(8);
    for (std::size_t H = 0; H <= 14; ++H) {
        for (int i = 0; i < 50; ++i) {
            const RelabeledWindow w = sample_window(ds, WindowSpec{}, H, rng);
            REQUIRE(w.horizon() == H);
            REQUIRE(w.residuals.size() == H + 1);
            const auto& ep = ds.episodes[w.episode];
            CHECK(w.goal == ep.states[w.window_end]);
            CHECK(w.window_end - w.window_begin == 14);
            CHECK(w.window_end < ep.states.size());
            CHECK(w.t >= w.window_begin);
            CHECK(w.t + H <= w.window_end);
            for (std::size_t k = 0; k <= H; ++k) {
                CHECK(w.state_at(k) == ep.states[w.t + k]);
                for (std::size_t d = 0; d < w.goal.size(); ++d) CHECK(w.residuals[k][d] + w.state_at(k)[d] == w.goal[d]);
            }
            if (w.t + H == w.window_end) {
                for (double v : w.residuals.back()) CHECK(v == 0.0);
            }
        }
    }
    const RelabeledWindow w0 = sample_window(ds, WindowSpec{}, 0, rng);
    CHECK(w0.residuals.size() == 1);
    CHECK(w0.actions.empty());
    CHECK_THROWS(sample_window(ds, WindowSpec{}, 15, rng));
    CHECK_THROWS(sample_window(ds, WindowSpec{40, GoalRelabel::window_final}, 1, rng));

    const RelabeledWindow we = sample_window(ds, WindowSpec{15, GoalRelabel::episode_final}, 3, rng);
    CHECK(we.goal == ds.episodes[we.episode].states.back());
}

TEST_CASE("window starts are uniform") {
    const envs::Environment env("pointnav");
    const Dataset ds = collect(env, 5, 30, 2);
    Rng rng(31337);
    const std::size_t cells = 31 - 15 + 1;
    std::vector<double> counts(cells, 0.0);
    const int n = 10000;
    for (int i = 0; i < n; ++i) counts[sample_window(ds, WindowSpec{}, 4, rng).window_begin] += 1;
    double chi2 = 0.0;
    const double expected = static_cast<double>(n) / cells;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    boost::math::chi_squared dist(static_cast<double>(cells - 1));
    const double p = boost::math::cdf(boost::math::complement(dist, chi2));
    CHECK(p > 0.01);
}

TEST_CASE("curriculum horizon") {
    CHECK(curriculum_horizon(0, 2000, 10) == 0);
    CHECK(curriculum_horizon(1999, 2000, 10) == 0);
    CHECK(curriculum_horizon(2000, 2000, 10) == 1);
    CHECK(curriculum_horizon(10 * 2000, 2000, 5) == 5);
    CHECK_THROWS(curriculum_horizon(5, 0, 10));
}

TEST_CASE("batch sampler serves all variants the same tensors") {
    const envs::Environment env("blockpush-grid-task1");
    const Dataset ds = collect(env, 4, 30, 5);
    BatchSampler sampler(ds, env, WindowSpec{});
    Rng r1(1), r2(1);
    const WindowBatch a = sampler.sample(8, 3, r1), b = sampler.sample(8, 3, r2);
    CHECK(a.goal == b.goal);
    CHECK(a.goal.cols() == 576);
    CHECK(a.states.size() == 4);
    CHECK(a.actions.size() == 3);
    const envs::Environment pn("pointnav");
    CHECK_THROWS(BatchSampler(ds, pn, WindowSpec{}));
}
