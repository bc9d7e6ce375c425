#include "gap/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "gap/cli/manifest.hpp"
#include "gap/common/rng.hpp"
#include "gap/data/dataset.hpp"
#include "json.hpp"

namespace gap::ndiff {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(OpCheck, op, worst)
}
namespace gap::theorylab {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FuzzReport, trials, violations, rejected, worst_case_trials, worst_case_violations,
                                   construction_failures)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Bucket, lo, hi)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SweepCell, target, bucket, magnitude, trials, successes, success_rate, ci95)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SweepReport, target, sequence_length, trials, baseline_successes, baseline_rate,
                                   cells)
}  // namespace gap::theorylab
namespace gap::analysis {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ErrorCell, predictor, cohort, step, mse, se, n)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SuccessRow, contender, task, trials, successes, errors, rate, se, seed)
}  // namespace gap::analysis
namespace gap::cli {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GradientReport, ops, losses)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PropertyResult, name, cases, failures, first_failure)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(HarnessReport, oracle_pointnav, oracle_blockpush, random_blockpush, trials)
}  // namespace gap::cli

namespace gap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kFuzzStream = 0x66757a7a;
constexpr std::uint64_t kGradStream = 0x67726164;
constexpr std::uint64_t kNoiseStream = 0x6e6f697365;
constexpr std::uint64_t kHarnessStream = 0x6861726e;
constexpr std::uint64_t kPropStream = 0x70726f70;
constexpr std::uint64_t kDataStream = 0x64617461;
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kTrainStream = 0x747261696e;
constexpr std::uint64_t kProfileStream = 0x70726f66;
constexpr std::uint64_t kSuccessStream = 0x73756363;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string part; std::getline(in, part, ',');) {
        part.erase(0, part.find_first_not_of(' '));
        part.erase(part.find_last_not_of(' ') + 1);
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

class Runner {
public:
    explicit Runner(const ReproduceOptions& opt) : opt_(opt), cfg_(opt.config) {}

    void log(const std::string& line) {
        if (!opt_.log) return;
        std::lock_guard lock(log_mu_);
        *opt_.log << line << std::endl;
    }

    /// Loads out/stages/<name>.json if present, otherwise runs `body` and
    /// records its result with the elapsed seconds.
    json stage(const std::string& name, const std::function<json()>& body) {
        const fs::path record = opt_.out / "stages" / (name + ".json");
        if (fs::exists(record)) {
            std::ifstream in(record);
            json j = json::parse(in);
            log("[resume] " + name);
            return j;
        }
        log("[stage] " + name);
        const auto t0 = std::chrono::steady_clock::now();
        json j;
        try {
            j["result"] = body();
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
        j["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_atomic(record, j.dump(1) + "\n");
        return j;
    }

    /// Runs `tasks` on up to opt.jobs threads; rethrows the first failure.
    void parallel(std::vector<std::function<void()>> tasks) {
        const std::size_t workers = std::max<std::size_t>(1, std::min(opt_.jobs, tasks.size()));
        if (workers == 1) {
            for (auto& t : tasks) t();
            return;
        }
        std::mutex mu;
        std::size_t next = 0;
        std::exception_ptr failure;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    std::size_t i;
                    {
                        std::lock_guard lock(mu);
                        if (failure || next == tasks.size()) return;
                        i = next++;
                    }
                    try {
                        tasks[i]();
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    ReproduceResult run() {
        fs::create_directories(opt_.out / "stages");
        RunManifest manifest(opt_.out, "reproduce", cfg_, opt_.seed, {});
        try {
            ReproduceResult r = run_stages(manifest);
            manifest.finish(r.all_pass() ? "ok" : "acceptance_failed");
            return r;
        } catch (...) {
            manifest.finish("internal_error");
            throw;
        }
    }

private:
    fs::path out(const std::string& rel) const { return opt_.out / rel; }

    ReproduceResult run_stages(RunManifest& manifest) {
        const std::uint64_t seed = opt_.seed;
        ReproduceResult result;

        const auto fuzz_cfg = cfg_.fuzz();
        const json fuzz = stage("theorem-fuzz", [&] {
            const auto r = theorylab::theorem_fuzz(fuzz_cfg, derive_seed(seed, {kFuzzStream}));
            std::ofstream csv(out("theorem.csv"));
            csv << "trials,n,violations,rejected,worst_case_trials,worst_case_violations,construction_failures\n"
                << r.trials << ',' << fuzz_cfg.n << ',' << r.violations << ',' << r.rejected << ','
                << r.worst_case_trials << ',' << r.worst_case_violations << ',' << r.construction_failures << '\n';
            return json(r);
        });
        manifest.add_output(out("theorem.csv"));
        result.criteria.push_back(
            judge_theorem(fuzz_cfg, fuzz["result"].get<theorylab::FuzzReport>(), fuzz["seconds"].get<double>()));

        const json grad = stage("gradients", [&] {
            const auto r = run_gradient_checks(derive_seed(seed, {kGradStream}));
            std::ofstream csv(out("gradients.csv"));
            csv << "check,worst_relative_error\n";
            for (const auto& o : r.ops) csv << "op:" << o.op << ',' << o.worst << '\n';
            for (const auto& o : r.losses) csv << "training_loss:" << o.op << ',' << o.worst << '\n';
            return json(r);
        });
        manifest.add_output(out("gradients.csv"));
        result.criteria.push_back(judge_gradients(grad["result"].get<GradientReport>(), grad["seconds"].get<double>()));

        const envs::Environment noise_env(cfg_.text("noise.env"));
        for (auto target : {theorylab::NoiseTarget::cost, theorylab::NoiseTarget::model}) {
            const std::string name = "noise-" + std::string(theorylab::target_name(target));
            const json rec = stage(name, [&] {
                const auto r = theorylab::noise_sweep(noise_env, cfg_.noise(target),
                                                      derive_seed(seed, {kNoiseStream, static_cast<std::uint64_t>(target)}));
                write_noise_csv(out(name + ".csv"), r);
                return json(r);
            });
            manifest.add_output(out(name + ".csv"));
            const auto report = rec["result"].get<theorylab::SweepReport>();
            const double secs = rec["seconds"].get<double>();
            result.criteria.push_back(target == theorylab::NoiseTarget::cost ? judge_noise_cost(report, secs)
                                                                             : judge_noise_model(report, secs));
        }

        const json harness = stage("harness", [&] {
            const auto r = run_harness(cfg_.cem(), cfg_.count("reproduce.harness_trials"), derive_seed(seed, {kHarnessStream}));
            std::ofstream csv(out("harness.csv"));
            csv << "check,rate,trials\noracle_pointnav," << r.oracle_pointnav << ',' << r.trials
                << "\noracle_blockpush-task1," << r.oracle_blockpush << ',' << r.trials << "\nrandom_blockpush-task1,"
                << r.random_blockpush << ',' << r.trials << '\n';
            return json(r);
        });
        manifest.add_output(out("harness.csv"));
        const auto harness_report = harness["result"].get<HarnessReport>();

        const json props = stage("properties", [&] {
            const auto r = run_property_suites(derive_seed(seed, {kPropStream}));
            std::ofstream csv(out("properties.csv"));
            csv << "suite,cases,failures\n";
            for (const auto& p : r) csv << p.name << ',' << p.cases << ',' << p.failures << '\n';
            return json(r);
        });
        manifest.add_output(out("properties.csv"));

        std::vector<SeedProfile> profiles;
        std::vector<SeedSuccess> successes;
        const std::size_t profile_seeds = cfg_.count("reproduce.profile_seeds");
        const std::size_t success_seeds = std::min(cfg_.count("reproduce.success_seeds"), profile_seeds);
        for (std::size_t k = 0; k < profile_seeds; ++k) {
            auto [profile, success] = run_seed(k, k < success_seeds, manifest);
            profiles.push_back(profile);
            if (success) successes.push_back(*success);
        }

        result.criteria.push_back(judge_harness(harness_report));
        result.criteria.push_back(judge_error_profiles(profiles));
        result.criteria.push_back(judge_success(successes));
        result.criteria.push_back(judge_properties(props["result"].get<std::vector<PropertyResult>>()));
        std::sort(result.criteria.begin(), result.criteria.end(), [](auto& a, auto& b) { return a.id < b.id; });

        result.summary = out("summary.csv");
        write_atomic(result.summary, summary_csv(result.criteria));
        manifest.add_output(result.summary);
        write_timings();
        manifest.add_output(out("timings.csv"));
        return result;
    }

    std::pair<SeedProfile, std::optional<SeedSuccess>> run_seed(std::size_t k, bool with_success, RunManifest& manifest) {
        const std::uint64_t seed = opt_.seed;
        const std::string dir = "seed" + std::to_string(k);
        fs::create_directories(out(dir));
        const envs::Environment env(cfg_.text("env"));
        const fs::path data_path = out(dir + "/data.gapd");

        const json collected = stage(dir + "-collect", [&] {
            const auto ds = data::collect(env, cfg_.count("data.episodes"), cfg_.count("data.length"),
                                          derive_seed(seed, {kDataStream, k}));
            data::write_dataset(data_path, ds);
            return json{{"episodes", ds.episodes.size()}};
        });
        manifest.add_output(data_path);
        const data::Dataset ds = data::read_dataset(data_path);

        const auto variants = variants_for_seed(k);
        std::vector<json> train_records(variants.size());
        std::vector<std::function<void()>> jobs;
        for (std::size_t i = 0; i < variants.size(); ++i) {
            jobs.push_back([&, i] {
                const std::string name(models::variant_name(variants[i]));
                const fs::path model_dir = out(dir + "/models/" + name);
                train_records[i] = stage(dir + "-train-" + name, [&] {
                    models::ModelBundle m(cfg_.model(variants[i], env), derive_seed(seed, {kInitStream, k}));
                    const auto r = models::train(m, ds, cfg_.train(), derive_seed(seed, {kTrainStream, k}), model_dir);
                    models::save_model(model_dir, m);
                    log("  " + dir + " " + name + " final loss " + std::to_string(r.last.total));
                    return json{{"loss", r.last.total}, {"reconstruction", r.last.reconstruction}};
                });
            });
        }
        parallel(std::move(jobs));
        std::vector<models::ModelBundle> trained;
        for (auto v : variants) {
            const fs::path model_dir = out(dir + "/models/" + std::string(models::variant_name(v)));
            trained.push_back(models::load_model(model_dir));
            manifest.add_output(model_dir / "weights.gapw");
            manifest.add_output(model_dir / "model.meta");
        }

        const json profile = stage(dir + "-error-profile", [&] {
            std::vector<analysis::ModelPredictor> preds;
            for (const auto& m : trained) {
                if (m.wiring().has_decoder) preds.emplace_back(m, env);
            }
            const analysis::OraclePredictor oracle(env);
            std::vector<const analysis::StatePredictor*> ps{&oracle};
            for (const auto& p : preds) ps.push_back(&p);
            const auto r = analysis::error_profile(ps, env, cfg_.profile(), derive_seed(seed, {kProfileStream, k}));
            analysis::write_error_profile_csv(out(dir + "/error_profile.csv"), r);
            return json(r.cells);
        });
        manifest.add_output(out(dir + "/error_profile.csv"));

        SeedProfile sp;
        sp.seed_index = k;
        analysis::ErrorProfile ep;
        ep.horizon = cfg_.count("profile.horizon");
        ep.cells = profile["result"].get<std::vector<analysis::ErrorCell>>();
        const std::size_t h = std::min(limits::kProfileStep, ep.horizon);
        const std::string top = cfg_.profile().cohorts.back().name;
        sp.gap_top10 = ep.at("gap", top, h).mse;
        sp.standard_top10 = ep.at("standard", top, h).mse;
        sp.no_goal_top10 = ep.at("gap_no_goal", top, h).mse;
        sp.seconds = collected["seconds"].get<double>() + profile["seconds"].get<double>();
        for (std::size_t i = 0; i < variants.size(); ++i) {
            const auto v = variants[i];
            if (v == models::Variant::gap || v == models::Variant::standard || v == models::Variant::gap_no_goal) {
                sp.seconds += train_records[i]["seconds"].get<double>();
            }
        }
        if (!with_success) return {sp, std::nullopt};

        const json success = stage(dir + "-success", [&] {
            std::vector<analysis::SuccessRow> rows;
            const auto tasks = split_list(cfg_.text("success.tasks"));
            for (std::size_t t = 0; t < tasks.size(); ++t) {
                const envs::Environment task(tasks[t]);
                std::vector<planner::LatentModel> latent;
                for (const auto& m : trained) latent.emplace_back(m, task);
                const planner::OracleModel oracle(task);
                std::vector<analysis::Contender> cs;
                for (const auto& l : latent) cs.push_back({l.name(), &l});
                cs.push_back({"oracle", &oracle});
                cs.push_back({"random", nullptr});
                const envs::Environment* ts[] = {&task};
                const auto part = analysis::success_table(cs, ts, cfg_.count("success.trials"), cfg_.cem(),
                                                          derive_seed(seed, {kSuccessStream, k, t}));
                rows.insert(rows.end(), part.begin(), part.end());
            }
            analysis::write_success_csv(out(dir + "/success.csv"), rows);
            return json(rows);
        });
        manifest.add_output(out(dir + "/success.csv"));

        SeedSuccess ss;
        ss.seed_index = k;
        ss.gap_task1 = ss.standard_task1 = ss.gap_task2 = ss.standard_task2 = -1.0;
        for (const auto& r : success["result"].get<std::vector<analysis::SuccessRow>>()) {
            ss.trials = std::max(ss.trials, r.trials);
            const bool t1 = r.task == "blockpush-task1", t2 = r.task == "blockpush-task2";
            if (r.contender == "gap" && t1) ss.gap_task1 = r.rate;
            if (r.contender == "gap" && t2) ss.gap_task2 = r.rate;
            if (r.contender == "standard" && t1) ss.standard_task1 = r.rate;
            if (r.contender == "standard" && t2) ss.standard_task2 = r.rate;
        }
        return {sp, ss};
    }

    void write_timings() {
        std::vector<std::pair<std::string, double>> rows;
        for (const auto& e : fs::directory_iterator(out("stages"))) {
            if (e.path().extension() != ".json") continue;
            std::ifstream in(e.path());
            rows.emplace_back(e.path().stem().string(), json::parse(in)["seconds"].get<double>());
        }
        std::sort(rows.begin(), rows.end());
        std::ostringstream csv;
        csv << "stage,seconds\n";
        for (const auto& [name, s] : rows) csv << name << ',' << s << '\n';
        write_atomic(out("timings.csv"), csv.str());
    }

    const ReproduceOptions& opt_;
    const Config& cfg_;
    std::mutex log_mu_;
};

}  // namespace

void write_noise_csv(const fs::path& path, const theorylab::SweepReport& r) {
    std::ostringstream csv;
    csv.precision(10);
    csv << "target,bucket_lo,bucket_hi,magnitude,trials,success_rate,ci95\n";
    const std::string t(theorylab::target_name(r.target));
    const double p = r.baseline_rate;
    const double ci = r.trials ? 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(r.trials)) : 0.0;
    csv << t << ",0,100,0," << r.trials << ',' << p << ',' << ci << '\n';
    for (const auto& c : r.cells) {
        csv << t << ',' << c.bucket.lo << ',' << c.bucket.hi << ',' << c.magnitude << ',' << c.trials << ','
            << c.success_rate << ',' << c.ci95 << '\n';
    }
    write_atomic(path, csv.str());
}

bool ReproduceResult::all_pass() const {
    return !criteria.empty() && std::ranges::all_of(criteria, [](const CriterionResult& c) { return c.pass; });
}

std::vector<models::Variant> variants_for_seed(std::size_t index) {
    using models::Variant;
    if (index == 0) return {Variant::gap, Variant::standard, Variant::gap_no_goal, Variant::gap_no_residual, Variant::inverse};
    return {Variant::gap, Variant::standard, Variant::gap_no_goal};
}

ReproduceResult reproduce(const ReproduceOptions& opt) { return Runner(opt).run(); }

}  // namespace gap::cli
