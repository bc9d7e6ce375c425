#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gap/data/dataset.hpp"
#include "gap/models/model.hpp"

using namespace gap;
using namespace gap::models;
using ndiff::Tensor;

namespace {

ModelConfig tiny_config(Variant v, const std::string& env = "blockpush-task1") {
    ModelConfig c;
    c.variant = v;
    c.env_id = env;
    c.obs_dim = envs::Environment(env).observation_dim();
    c.latent_dim = 4;
    c.hidden = {6};
    return c;
}

Tensor random_rows(Rng& rng, std::size_t rows, std::size_t cols, double lo = 0.0, double hi = 1.0) {
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.data()) v = uniform(rng, lo, hi);
    return t;
}

data::WindowBatch sample_batch(const data::Dataset& ds, std::size_t B, std::size_t H, std::uint64_t seed) {
    const envs::Environment env(ds.env_id);
    data::BatchSampler sampler(ds, env, data::WindowSpec{});
    Rng rng(seed);
    return sampler.sample(B, H, rng);
}

}  // namespace

TEST_CASE("variant names round trip") {
    for (Variant v : all_variants()) CHECK(parse_variant(variant_name(v)) == v);
    CHECK(all_variants().size() == 5);
    CHECK_THROWS_AS(parse_variant("rig"), std::invalid_argument);
}

TEST_CASE("wiring table") {
    const Wiring gap = wiring(Variant::gap);
    CHECK(gap.context == Context::goal);
    CHECK(gap.residual_target);
    CHECK(gap.has_decoder);
    CHECK(gap.head == OutputHead::linear);

    const Wiring no_goal = wiring(Variant::gap_no_goal);
    CHECK(no_goal.context == Context::start);
    CHECK(no_goal.residual_target);
    CHECK(no_goal.head == OutputHead::linear);

    const Wiring no_res = wiring(Variant::gap_no_residual);
    CHECK(no_res.context == Context::goal);
    CHECK_FALSE(no_res.residual_target);
    CHECK(no_res.head == OutputHead::sigmoid);

    const Wiring standard = wiring(Variant::standard);
    CHECK(standard.context == Context::none);
    CHECK_FALSE(standard.residual_target);
    CHECK(standard.head == OutputHead::sigmoid);

    const Wiring inverse = wiring(Variant::inverse);
    CHECK(inverse.context == Context::none);
    CHECK_FALSE(inverse.has_decoder);

    const envs::Environment env("blockpush-task1");
    const data::Dataset ds = data::collect(env, 3, 30, 1);
    const data::WindowBatch b = sample_batch(ds, 4, 3, 2);
    for (std::size_t k = 0; k <= 3; ++k) {
        const Tensor gap_t = target_for(Variant::gap, b, k);
        const Tensor nog_t = target_for(Variant::gap_no_goal, b, k);
        for (std::size_t i = 0; i < gap_t.size(); ++i) {
            CHECK(gap_t[i] == b.goal[i] - b.states[k][i]);
            CHECK(nog_t[i] == b.states[0][i] - b.states[k][i]);
        }
        CHECK(target_for(Variant::standard, b, k) == b.states[k]);
        CHECK(target_for(Variant::gap_no_residual, b, k) == b.states[k]);
    }
}

TEST_CASE("encoder wiring and determinism") {
    Rng rng(4);
    for (Variant v : all_variants()) {
        ModelBundle m(tiny_config(v), 11);
        const Tensor s = random_rows(rng, 5, 8), ctx = random_rows(rng, 5, 8), ctx2 = random_rows(rng, 5, 8);
        const LatentBatch a = m.encode(s, ctx), b = m.encode(s, ctx);
        CHECK(a.mean == b.mean);
        CHECK(a.log_var == b.log_var);
        const LatentBatch c = m.encode(s, ctx2);
        if (wiring(v).context == Context::none) {
            CHECK(c.mean == a.mean);
        } else {
            CHECK(c.mean != a.mean);
        }
        for (double lv : a.log_var.data()) {
            CHECK(lv >= kLogVarMin);
            CHECK(lv <= kLogVarMax);
        }
        CHECK_THROWS_AS(m.encode(random_rows(rng, 5, 3), ctx), std::invalid_argument);
    }
}

TEST_CASE("fresh encoders have moderate means") {
    Rng rng(9);
    for (Variant v : all_variants()) {
        ModelConfig c = tiny_config(v);
        c.latent_dim = 16;
        c.hidden = {128, 128};
        ModelBundle m(c, 3);
        const LatentBatch d = m.encode(random_rows(rng, 100, 8), random_rows(rng, 100, 8));
        for (double x : d.mean.data()) CHECK(std::abs(x) < 5.0);
    }
}

TEST_CASE("decoder heads and shapes") {
    Rng rng(5);
    ModelBundle standard(tiny_config(Variant::standard), 1);
    const Tensor out = standard.decode(random_rows(rng, 10, 4, -20.0, 20.0));
    CHECK(out.cols() == 8);
    for (double v : out.data()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    ModelBundle gap(tiny_config(Variant::gap), 1);
    CHECK(gap.decode(random_rows(rng, 2, 4)).cols() == 8);
    ModelBundle inverse(tiny_config(Variant::inverse), 1);
    CHECK_THROWS_AS(inverse.decode(random_rows(rng, 2, 4)), std::logic_error);
    CHECK(inverse.invert(random_rows(rng, 3, 4), random_rows(rng, 3, 4)).cols() == 2);
    CHECK_THROWS_AS(gap.invert(random_rows(rng, 3, 4), random_rows(rng, 3, 4)), std::logic_error);
}

TEST_CASE("dynamics shapes and determinism") {
    Rng rng(6);
    ModelBundle m(tiny_config(Variant::gap), 2);
    const Tensor z = random_rows(rng, 7, 4, -1, 1), a = random_rows(rng, 7, 2, -0.05, 0.05);
    CHECK(m.dynamics(z, a) == m.dynamics(z, a));
    CHECK(m.dynamics(z, a).cols() == 4);
    CHECK_THROWS_AS(m.dynamics(z, random_rows(rng, 7, 3)), std::invalid_argument);
    CHECK_THROWS_AS(m.dynamics(z, random_rows(rng, 6, 2)), std::invalid_argument);
}

TEST_CASE("graph and inference paths agree") {
    Rng rng(8);
    for (Variant v : all_variants()) {
        ModelBundle m(tiny_config(v), 5);
        const Tensor s = random_rows(rng, 3, 8), ctx = random_rows(rng, 3, 8), a = random_rows(rng, 3, 2, -0.05, 0.05);
        ndiff::Graph g;
        auto enc = m.encode(g, g.constant(s), g.constant(ctx));
        const LatentBatch d = m.encode(s, ctx);
        CHECK(enc.mean.value() == d.mean);
        CHECK(enc.log_var.value() == d.log_var);
        CHECK(m.dynamics(g, enc.mean, g.constant(a)).value() == m.dynamics(d.mean, a));
        if (wiring(v).has_decoder) CHECK(m.decode(g, enc.mean).value() == m.decode(d.mean));
    }
}

TEST_CASE("kl of the unit gaussian is zero") {
    LatentBatch d{Tensor::matrix(3, 4, 0.0), Tensor::matrix(3, 4, 0.0)};
    CHECK(kl_to_unit_gaussian(d) == 0.0);
    d.mean.fill(1.0);
    CHECK(kl_to_unit_gaussian(d) == doctest::Approx(2.0));
}

TEST_CASE("zero-residual reconstruction at H=0") {
    const envs::Environment env("blockpush-task1");
    const data::Dataset ds = data::collect(env, 3, 30, 1);
    data::WindowBatch b = sample_batch(ds, 6, 0, 3);
    b.goal = b.states[0];
    ModelBundle m(tiny_config(Variant::gap), 1);
    for (auto& [name, p] : m.params().items()) {
        if (name.rfind("dec.", 0) == 0) p.value.fill(0.0);
    }
    ndiff::Graph g;
    const LossGraph l = training_loss(g, m, b, Tensor::matrix(6, 4, 0.3));
    CHECK(l.report.reconstruction == 0.0);
    CHECK(l.report.per_step.size() == 1);
    CHECK(l.report.kl >= 0.0);
}

TEST_CASE("reparameterisation collapses to the mean at the variance floor") {
    ModelBundle m(tiny_config(Variant::standard), 1);
    // Bias the log-variance outputs far below the clamp floor.
    auto& b = m.params().get("enc.b1").value;
    for (std::size_t j = 4; j < 8; ++j) b[j] = -1000.0;
    Rng rng(2);
    const Tensor s = random_rows(rng, 4, 8);
    ndiff::Graph g;
    auto enc = m.encode(g, g.constant(s), g.constant(s));
    for (double lv : enc.log_var.value().data()) CHECK(lv == kLogVarMin);
    const double sd = std::exp(0.5 * kLogVarMin);
    Tensor noise = random_rows(rng, 4, 4, -3, 3);
    ndiff::Var z = enc.mean + ndiff::exp(ndiff::scale(enc.log_var, 0.5)) * g.constant(noise);
    for (std::size_t i = 0; i < noise.size(); ++i) {
        CHECK(std::abs(z.value()[i] - enc.mean.value()[i]) <= sd * std::abs(noise[i]) * (1 + 1e-12));
    }
}

TEST_CASE("training loss gradients match finite differences") {
    const envs::Environment env("blockpush-task1");
    const data::Dataset ds = data::collect(env, 4, 30, 7);
    const data::WindowBatch b = sample_batch(ds, 5, 3, 4);
    Rng rng(12);
    for (Variant v : all_variants()) {
        ModelBundle m(tiny_config(v), 21);
        Tensor noise = random_rows(rng, 5, 4, -1, 1);
        const double err = loss_gradient_error(m, b, noise, 10, rng());
        INFO(variant_name(v), " worst relative error ", err);
        CHECK(err < 1e-3);
    }
}

TEST_CASE("overfitting a fixed batch decreases the loss") {
    const envs::Environment env("pointnav");
    const data::Dataset ds = data::collect(env, 10, 30, 2);
    const data::WindowBatch b = sample_batch(ds, 32, 2, 5);
    for (Variant v : all_variants()) {
        ModelConfig c = tiny_config(v, "pointnav");
        c.hidden = {32, 32};
        ModelBundle m(c, 4);
        Rng rng(1);
        Tensor noise = random_rows(rng, 32, 4, -1, 1);
        double prev = INFINITY;
        bool decreasing = true;
        for (int step = 0; step < 200; ++step) {
            ndiff::Graph g;
            auto l = training_loss(g, m, b, noise);
            decreasing &= l.report.total < prev;
            prev = l.report.total;
            g.backward(l.total);
            ndiff::adam_step(m.params(), 1e-4);
        }
        INFO(variant_name(v));
        CHECK(decreasing);
    }
}

TEST_CASE("train is deterministic and steps=0 leaves parameters unchanged") {
    const envs::Environment env("pointnav");
    const data::Dataset ds = data::collect(env, 20, 30, 3);
    TrainConfig tc;
    tc.steps = 0;
    ModelBundle untouched(tiny_config(Variant::gap, "pointnav"), 9);
    ModelBundle fresh(tiny_config(Variant::gap, "pointnav"), 9);
    train(untouched, ds, tc, 1);
    for (const auto& [name, p] : fresh.params().items()) CHECK(untouched.params().get(name).value == p.value);

    tc.steps = 60;
    tc.curriculum_quota = 20;
    tc.max_horizon = 3;
    tc.log_every = 10;
    ModelBundle a(tiny_config(Variant::gap, "pointnav"), 9), b(tiny_config(Variant::gap, "pointnav"), 9);
    const TrainResult ra = train(a, ds, tc, 77), rb = train(b, ds, tc, 77);
    CHECK(ra.last.total == rb.last.total);
    CHECK(ra.last.horizon == 2);
    CHECK(ra.curve.size() == 7);
    for (const auto& [name, p] : a.params().items()) CHECK(b.params().get(name).value == p.value);

    ModelBundle inv(tiny_config(Variant::inverse, "pointnav"), 9);
    CHECK(train(inv, ds, tc, 77).curve.front().horizon == 1);

    tc.max_horizon = 15;
    CHECK_THROWS(train(a, ds, tc, 77));
    ModelBundle wrong(tiny_config(Variant::gap, "blockpush-task1"), 1);
    CHECK_THROWS(train(wrong, ds, tc, 77));
}

TEST_CASE("checkpoint save and load") {
    const auto dir = std::filesystem::temp_directory_path() / "gap_model_ckpt_test";
    std::filesystem::remove_all(dir);
    ModelConfig c = tiny_config(Variant::gap_no_goal, "blockpush-grid-task1");
    c.kl_weight = 0.0123;
    ModelBundle m(c, 17);
    save_model(dir, m, {{"train_steps", "5"}});
    const auto meta = read_meta(dir / "model.meta");
    CHECK(meta.at("train_steps") == "5");
    CHECK(meta.at("variant") == "gap_no_goal");
    const ModelBundle back = load_model(dir);
    CHECK(back.variant() == Variant::gap_no_goal);
    CHECK(back.config().obs_dim == 576);
    CHECK(back.config().kl_weight == 0.0123);
    for (const auto& [name, p] : m.params().items()) CHECK(back.params().get(name).value == p.value);
    std::filesystem::remove_all(dir);
}
