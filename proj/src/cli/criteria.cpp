#include "gap/cli/criteria.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "gap/common/rng.hpp"
#include "gap/data/dataset.hpp"
#include "gap/data/windows.hpp"
#include "gap/models/model.hpp"

namespace gap::cli {

namespace {

std::string fmt(double v, int digits = 3) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

std::string sci(double v) {
    std::ostringstream s;
    s.precision(2);
    s << std::scientific << v;
    return s.str();
}

/// Deterministic bumpy cost over the action values.
class RuggedScorer final : public planner::SequenceScorer {
public:
    explicit RuggedScorer(std::uint64_t seed) {
        Rng rng(seed);
        for (double& w : phase_) w = uniform(rng, 0.0, 6.28);
    }
    planner::Scores score(std::span<const double> actions, std::size_t count, std::size_t horizon) const override {
        const std::size_t width = actions.size() / count;
        planner::Scores s{std::vector<double>(count, 0.0), std::vector<double>(count, 0.0)};
        for (std::size_t i = 0; i < count; ++i) {
            double c = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
                const double a = actions[i * width + j];
                c += a * a + 0.3 * std::sin(17.0 * a + phase_[j % phase_.size()]);
            }
            s.summed[i] = c;
            s.terminal[i] = c / static_cast<double>(horizon);
        }
        return s;
    }

private:
    std::array<double, 8> phase_{};
};

void record(PropertyResult& p, bool ok, const std::string& what) {
    ++p.cases;
    if (!ok) {
        if (p.failures == 0) p.first_failure = what;
        ++p.failures;
    }
}

bool same_dataset(const data::Dataset& a, const data::Dataset& b) {
    if (a.env_id != b.env_id || a.episode_length != b.episode_length || a.state_dim != b.state_dim ||
        a.action_dim != b.action_dim || a.episodes.size() != b.episodes.size()) {
        return false;
    }
    for (std::size_t e = 0; e < a.episodes.size(); ++e) {
        if (a.episodes[e].states != b.episodes[e].states || a.episodes[e].actions != b.episodes[e].actions) return false;
    }
    return true;
}

}  // namespace

GradientReport run_gradient_checks(std::uint64_t seed) {
    GradientReport r;
    r.ops = ndiff::check_ops(100, derive_seed(seed, {0x6f7073ULL}));
    const envs::Environment env("blockpush-task1");
    const data::Dataset ds = data::collect(env, 4, 30, derive_seed(seed, {0x64617461ULL}));
    const data::BatchSampler sampler(ds, env, data::WindowSpec{});
    Rng rng = make_rng(seed, {0x6c6f7373ULL});
    const data::WindowBatch batch = sampler.sample(5, 3, rng);
    for (models::Variant v : models::all_variants()) {
        models::ModelConfig c;
        c.variant = v;
        c.env_id = env.spec().id;
        c.obs_dim = env.observation_dim();
        c.action_dim = env.action_dim();
        c.latent_dim = 4;
        c.hidden = {6};
        models::ModelBundle m(c, rng());
        ndiff::Tensor noise = ndiff::Tensor::matrix(5, 4);
        for (double& x : noise.data()) x = uniform(rng, -1.0, 1.0);
        r.losses.push_back({std::string(models::variant_name(v)), models::loss_gradient_error(m, batch, noise, 10, rng())});
    }
    return r;
}

std::vector<PropertyResult> run_property_suites(std::uint64_t seed) {
    std::vector<PropertyResult> out;
    const envs::Environment env("blockpush-task1");
    const data::Dataset ds = data::collect(env, 20, 30, derive_seed(seed, {0x64617461ULL}));

    {
        PropertyResult p{"zero_residual_at_goal", 0, 0, {}};
        const data::BatchSampler sampler(ds, env, data::WindowSpec{});
        const std::size_t H = sampler.max_horizon();
        for (std::size_t i = 0; i < 100; ++i) {
            Rng rng = make_rng(seed, {0x7a65726fULL, i});
            const auto batch = sampler.sample(8, H, rng);
            // t + H is the window end, so the last state is the relabelled goal.
            const auto gap_target = models::target_for(models::Variant::gap, batch, H);
            const auto start_target = models::target_for(models::Variant::gap_no_goal, batch, 0);
            const bool ok = std::ranges::all_of(gap_target.data(), [](double v) { return v == 0.0; }) &&
                            std::ranges::all_of(start_target.data(), [](double v) { return v == 0.0; });
            record(p, ok, "batch " + std::to_string(i) + " has a non-zero residual at its goal");
        }
        out.push_back(p);
    }
    {
        PropertyResult p{"dataset_round_trip", 0, 0, {}};
        const auto dir = std::filesystem::temp_directory_path() / ("gap_props_" + std::to_string(seed));
        std::filesystem::create_directories(dir);
        const auto ids = envs::known_env_ids();
        for (std::size_t i = 0; i < 100; ++i) {
            const envs::Environment e(ids[i % ids.size()]);
            const data::Dataset d = data::collect(e, 1 + i % 3, 1 + i % 7, derive_seed(seed, {0x72747270ULL, i}));
            const auto path = dir / "d.gapd";
            data::write_dataset(path, d);
            record(p, same_dataset(d, data::read_dataset(path)), "dataset " + std::to_string(i) + " on " + e.spec().id);
        }
        std::filesystem::remove_all(dir);
        out.push_back(p);
    }
    {
        PropertyResult p{"window_boundary", 0, 0, {}};
        const data::WindowSpec spec{};
        Rng rng = make_rng(seed, {0x77696e64ULL});
        for (std::size_t i = 0; i < 1000; ++i) {
            const std::size_t H = 1 + uniform_index(rng, spec.window_len - 1);
            const auto w = data::sample_window(ds, spec, H, rng);
            const auto& ep = ds.episodes.at(w.episode);
            const bool ok = w.window_end - w.window_begin == spec.window_len - 1 && w.window_end < ep.states.size() &&
                            w.t >= w.window_begin && w.t + H <= w.window_end && w.goal == ep.states[w.window_end] &&
                            w.start == ep.states[w.t] && w.successors.back() == ep.states[w.t + H];
            record(p, ok, "window " + std::to_string(i) + " crosses its bounds");
        }
        out.push_back(p);
    }
    {
        PropertyResult p{"cem_monotone_elites", 0, 0, {}};
        planner::CemConfig cfg;
        cfg.candidates = 100;
        cfg.horizon = 4;
        cfg.iterations = 6;
        for (std::size_t i = 0; i < 100; ++i) {
            const RuggedScorer scorer(derive_seed(seed, {0x636d6fULL, i}));
            const auto r = planner::cem_plan(scorer, 2, 1.0, cfg, derive_seed(seed, {0x636d70ULL, i}));
            bool ok = true;
            for (std::size_t k = 1; k < r.elite_means.size(); ++k) ok = ok && r.elite_means[k] <= r.elite_means[k - 1];
            record(p, ok, "seed " + std::to_string(i) + " has an elite mean that increased");
        }
        out.push_back(p);
    }
    {
        PropertyResult p{"argmin_tie_breaking", 0, 0, {}};
        Rng rng = make_rng(seed, {0x6172676dULL});
        for (std::size_t i = 0; i < 1000; ++i) {
            std::vector<double> costs(1 + uniform_index(rng, 20));
            for (double& c : costs) c = static_cast<double>(uniform_index(rng, 4));
            const auto first = static_cast<std::size_t>(std::ranges::min_element(costs) - costs.begin());
            record(p, planner::select_open_loop(costs) == first, "case " + std::to_string(i));
        }
        out.push_back(p);
    }
    return out;
}

HarnessReport run_harness(const planner::CemConfig& cem, std::size_t trials, std::uint64_t seed) {
    const envs::Environment nav("pointnav"), push("blockpush-task1");
    const planner::OracleModel nav_oracle(nav), push_oracle(push);
    HarnessReport r;
    r.trials = trials;
    {
        const analysis::Contender cs[] = {{"oracle", &nav_oracle}};
        const envs::Environment* tasks[] = {&nav};
        r.oracle_pointnav = analysis::success_table(cs, tasks, trials, cem, derive_seed(seed, {0x6e6176ULL}))[0].rate;
    }
    {
        const analysis::Contender cs[] = {{"oracle", &push_oracle}, {"random", nullptr}};
        const envs::Environment* tasks[] = {&push};
        const auto rows = analysis::success_table(cs, tasks, trials, cem, derive_seed(seed, {0x70757368ULL}));
        r.oracle_blockpush = rows[0].rate;
        r.random_blockpush = rows[1].rate;
    }
    return r;
}

std::size_t count_inversions(const std::vector<double>& rates) {
    std::size_t n = 0;
    for (std::size_t i = 1; i < rates.size(); ++i) n += rates[i] < rates[i - 1] ? 1 : 0;
    return n;
}

CriterionResult judge_theorem(const theorylab::FuzzConfig& cfg, const theorylab::FuzzReport& r, double seconds) {
    CriterionResult c{1, "theorem-fuzz", false, {}, {}};
    c.pass = cfg.trials >= limits::kFuzzTrials && cfg.n >= limits::kFuzzN &&
             r.worst_case_trials >= limits::kFuzzWorstCase && r.total_violations() == 0 &&
             seconds < limits::kFuzzSeconds;
    c.measured = std::to_string(r.total_violations()) + " violations in " + std::to_string(r.trials) + " random + " +
                 std::to_string(r.worst_case_trials) + " worst-case instances (n=" + std::to_string(cfg.n) + ")";
    c.required = "0 violations; >= 10000 + 1000 instances of n = 100; < 10 s";
    return c;
}

CriterionResult judge_gradients(const GradientReport& r, double seconds) {
    CriterionResult c{2, "gradients", false, {}, {}};
    double ops = 0.0, loss = 0.0;
    for (const auto& o : r.ops) ops = std::max(ops, o.worst);
    for (const auto& o : r.losses) loss = std::max(loss, o.worst);
    c.pass = !r.ops.empty() && r.losses.size() == 5 && ops < limits::kOpGradient && loss < limits::kLossGradient &&
             seconds < limits::kGradientSeconds;
    c.measured = "worst op " + sci(ops) + " over " + std::to_string(r.ops.size()) + " checks; worst loss " + sci(loss) +
                 " over " + std::to_string(r.losses.size()) + " variants";
    c.required = "op < 1e-4; training_loss < 1e-3; < 30 s";
    return c;
}

CriterionResult judge_noise_cost(const theorylab::SweepReport& r, double seconds) {
    using namespace limits;
    CriterionResult c{3, "noise-cost", false, {}, {}};
    std::vector<double> rates;
    for (const auto& b : theorylab::decile_buckets()) rates.push_back(r.cell(kNoiseCostMagnitude, b).success_rate);
    const double top = rates.back(), bottom = rates.front(), base = r.baseline_rate;
    const std::size_t inv = count_inversions(rates);
    c.pass = r.target == theorylab::NoiseTarget::cost && r.trials >= kNoiseTrials &&
             std::abs(top - base) <= kNoiseTopBucketSlack + kRateSlack && bottom <= top - kNoiseCostSpread + kRateSlack &&
             inv <= kNoiseInversions && seconds < kNoiseSeconds;
    c.measured = "baseline " + fmt(base) + "; [90,100) " + fmt(top) + "; [0,10) " + fmt(bottom) + "; inversions " +
                 std::to_string(inv) + "; trials " + std::to_string(r.trials);
    c.required = "|[90,100) - baseline| <= 0.05; [0,10) <= [90,100) - 0.15; <= 1 inversion; 500 trials; < 120 s";
    return c;
}

CriterionResult judge_noise_model(const theorylab::SweepReport& r, double seconds) {
    using namespace limits;
    CriterionResult c{4, "noise-model", false, {}, {}};
    const auto buckets = theorylab::decile_buckets();
    const double base = r.baseline_rate;
    const double bottom = r.cell(kNoiseModelMagnitude, buckets.front()).success_rate;
    const double top = r.cell(kNoiseModelMagnitude, buckets.back()).success_rate;
    double worst_upper = 0.0;
    for (const auto& b : buckets) {
        if (b.lo >= 50.0) worst_upper = std::max(worst_upper, std::abs(r.cell(kNoiseModelMagnitude, b).success_rate - base));
    }
    c.pass = r.target == theorylab::NoiseTarget::model && r.trials >= kNoiseTrials &&
             bottom <= top - kNoiseModelSpread + kRateSlack && worst_upper <= kNoiseModelSlack + kRateSlack &&
             seconds < kNoiseSeconds;
    c.measured = "baseline " + fmt(base) + "; [0,10) " + fmt(bottom) + "; [90,100) " + fmt(top) +
                 "; worst [50,100) gap " + fmt(worst_upper) + "; trials " + std::to_string(r.trials);
    c.required = "[0,10) <= [90,100) - 0.10; every bucket >= 50 within 0.05 of baseline; 500 trials; < 120 s";
    return c;
}

CriterionResult judge_harness(const HarnessReport& r) {
    using namespace limits;
    CriterionResult c{5, "harness", false, {}, {}};
    c.pass = r.trials >= kHarnessTrials && r.oracle_pointnav > kOraclePointNav && r.oracle_blockpush > kOracleBlockPush &&
             r.random_blockpush < kRandomBlockPush;
    c.measured = "oracle pointnav " + fmt(r.oracle_pointnav, 2) + "; oracle blockpush-task1 " + fmt(r.oracle_blockpush, 2) +
                 "; random blockpush-task1 " + fmt(r.random_blockpush, 2) + "; trials " + std::to_string(r.trials);
    c.required = "oracle pointnav > 0.95; oracle blockpush-task1 > 0.70; random < 0.15; 100 trials";
    return c;
}

CriterionResult judge_error_profiles(const std::vector<SeedProfile>& seeds) {
    using namespace limits;
    CriterionResult c{6, "error-redistribution", false, {}, {}};
    std::size_t gap_wins = 0, no_goal_wins = 0;
    bool fast = true;
    std::string per_seed;
    for (const auto& s : seeds) {
        gap_wins += s.gap_top10 < s.standard_top10 ? 1 : 0;
        no_goal_wins += s.no_goal_top10 < s.standard_top10 ? 1 : 0;
        fast = fast && s.seconds < kSeedSeconds;
        per_seed += " [" + sci(s.gap_top10) + " " + sci(s.standard_top10) + " " + sci(s.no_goal_top10) + "]";
    }
    c.pass = seeds.size() >= kProfileSeeds && gap_wins >= kProfileWins && 2 * no_goal_wins <= seeds.size() && fast;
    c.measured = "gap < standard in " + std::to_string(gap_wins) + "/" + std::to_string(seeds.size()) +
                 "; gap_no_goal < standard in " + std::to_string(no_goal_wins) + "/" + std::to_string(seeds.size()) +
                 "; top10 h=15 mse [gap standard gap_no_goal]:" + per_seed;
    c.required = "gap wins >= 4 of 5; gap_no_goal wins in no majority; < 600 s per seed";
    return c;
}

CriterionResult judge_success(const std::vector<SeedSuccess>& seeds) {
    using namespace limits;
    CriterionResult c{7, "downstream-success", false, {}, {}};
    std::size_t wins = 0;
    bool enough = true;
    std::string per_seed;
    for (const auto& s : seeds) {
        wins += s.gap_task1 >= s.standard_task1 && s.gap_task2 > s.standard_task2 ? 1 : 0;
        enough = enough && s.trials >= kSuccessTrials;
        per_seed += " [" + fmt(s.gap_task1, 2) + " " + fmt(s.standard_task1, 2) + " | " + fmt(s.gap_task2, 2) + " " +
                    fmt(s.standard_task2, 2) + "]";
    }
    c.pass = seeds.size() >= kSuccessSeeds && wins >= kSuccessWins && enough;
    c.measured = "gap >= standard on task1 and > on task2 in " + std::to_string(wins) + "/" +
                 std::to_string(seeds.size()) + " seeds; [gap standard | gap standard]:" + per_seed;
    c.required = ">= 2 of 3 seeds, 100 trials each";
    return c;
}

CriterionResult judge_properties(const std::vector<PropertyResult>& props) {
    CriterionResult c{8, "invariants", false, {}, {}};
    std::size_t failures = 0, cases = 0;
    std::string failed;
    for (const auto& p : props) {
        failures += p.failures;
        cases += p.cases;
        if (p.failures) failed += " " + p.name + ": " + p.first_failure + ";";
    }
    c.pass = props.size() == 5 && failures == 0;
    c.measured = std::to_string(cases - failures) + "/" + std::to_string(cases) + " cases over " +
                 std::to_string(props.size()) + " suites" + (failed.empty() ? "" : ";" + failed);
    c.required = "every case of the 5 suites passes";
    return c;
}

CriterionResult judge_determinism(const std::string& first, const std::string& second) {
    CriterionResult c{9, "determinism", false, {}, {}};
    c.pass = !first.empty() && first == second;
    c.measured = first == second ? "summary CSVs identical (" + std::to_string(first.size()) + " bytes)"
                                 : "summary CSVs differ";
    c.required = "two reproduce runs with the same seed give identical summary CSVs";
    return c;
}

std::string summary_csv(const std::vector<CriterionResult>& results) {
    std::string out = "criterion,name,pass,measured,required\n";
    auto quote = [](const std::string& s) {
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    };
    for (const auto& r : results) {
        out += std::to_string(r.id) + "," + r.name + "," + (r.pass ? "1" : "0") + "," + quote(r.measured) + "," +
               quote(r.required) + "\n";
    }
    return out;
}

std::string format_result(const CriterionResult& r) {
    return std::string(r.pass ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + ": " + r.measured +
           " (required: " + r.required + ")";
}

}  // namespace gap::cli
