#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "gap/analysis/analysis.hpp"
#include "gap/cli/config.hpp"
#include "gap/cli/manifest.hpp"
#include "gap/cli/pipeline.hpp"
#include "gap/common/rng.hpp"
#include "gap/data/dataset.hpp"

namespace fs = std::filesystem;
using namespace gap;
using namespace gap::cli;

namespace {

enum Exit { kOk = 0, kAcceptance = 1, kUsage = 2, kInternal = 3 };

struct Globals {
    std::uint64_t seed = 7;
    std::string config;
    std::string out;
    std::size_t jobs = 1;
    std::vector<std::string> sets;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

fs::path data_root() {
    const char* dir = std::getenv("GAP_DATA_DIR");
    return dir && *dir ? fs::path(dir) : fs::path("data");
}

Config load_config(const Globals& g, std::vector<std::pair<std::string, std::string>> extra) {
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : g.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    return parse_config(g.config, overrides);
}

fs::path out_dir(const Globals& g, const std::string& fallback) {
    const fs::path dir = g.out.empty() ? fs::path("runs") / fallback : fs::path(g.out);
    fs::create_directories(dir);
    return dir;
}

/// Resolves a dataset argument: as given, else under GAP_DATA_DIR.
fs::path find_data(const std::string& arg) {
    const fs::path p(arg);
    if (fs::exists(p) || p.is_absolute()) return p;
    return data_root() / p;
}

std::vector<models::ModelBundle> load_models(const std::vector<std::string>& dirs) {
    std::vector<models::ModelBundle> out;
    for (const auto& d : dirs) out.push_back(models::load_model(d));
    return out;
}

std::vector<std::pair<std::string, std::string>> opt(std::initializer_list<std::pair<const char*, std::string>> kv) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, v] : kv) {
        if (!v.empty()) out.emplace_back(k, v);
    }
    return out;
}

std::string num(std::size_t v) { return v ? std::to_string(v) : std::string(); }

int cmd_collect(const Globals& g, const std::string& env_id, std::size_t episodes, std::size_t length) {
    const Config cfg = load_config(g, opt({{"env", env_id}, {"data.episodes", num(episodes)}, {"data.length", num(length)}}));
    const envs::Environment env(cfg.text("env"));
    const fs::path path = g.out.empty() ? data_root() / (env.spec().id + "-" + std::to_string(g.seed) + ".gapd") : fs::path(g.out);
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    RunManifest m(dir, "collect", cfg, g.seed, {}, path.filename().string() + ".manifest");
    const auto ds = data::collect(env, cfg.count("data.episodes"), cfg.count("data.length"), g.seed);
    data::write_dataset(path, ds);
    m.add_output(path);
    m.finish("ok");
    std::cout << "wrote " << ds.episodes.size() << " episodes of " << ds.episode_length << " steps to " << path.string() << '\n';
    return kOk;
}

int cmd_train(const Globals& g, const std::string& variant, const std::string& data_arg, std::size_t steps) {
    const Config cfg = load_config(g, opt({{"train.steps", num(steps)}}));
    const fs::path data_path = find_data(data_arg);
    const auto ds = data::read_dataset(data_path);
    const envs::Environment env(ds.env_id);
    const fs::path dir = out_dir(g, "train-" + variant);
    RunManifest m(dir, "train", cfg, g.seed, {data_path});
    models::ModelBundle model(cfg.model(models::parse_variant(variant), env), derive_seed(g.seed, {0x696e6974ULL}));
    const auto r = models::train(model, ds, cfg.train(), derive_seed(g.seed, {0x747261696eULL}), dir);
    models::save_model(dir, model);
    std::ofstream csv(dir / "loss.csv");
    csv << "step,horizon,total,reconstruction,kl\n";
    for (const auto& l : r.curve) csv << l.step << ',' << l.horizon << ',' << l.total << ',' << l.reconstruction << ',' << l.kl << '\n';
    csv.close();
    for (const char* f : {"weights.gapw", "model.meta", "loss.csv"}) m.add_output(dir / f);
    m.finish("ok");
    std::cout << variant << " trained for " << cfg.count("train.steps") << " steps, final loss " << r.last.total << '\n';
    return kOk;
}

int cmd_plan(const Globals& g, const std::string& model_dir, bool oracle, const std::string& env_arg, std::size_t trials) {
    if (model_dir.empty() == !oracle) throw UsageError("plan needs exactly one of --model or --oracle");
    const Config cfg = load_config(g, opt({{"plan.trials", num(trials)}, {"env", env_arg}}));
    std::optional<models::ModelBundle> bundle;
    if (!oracle) bundle = models::load_model(model_dir);
    const envs::Environment env(env_arg.empty() && bundle ? bundle->config().env_id : cfg.text("env"));
    std::unique_ptr<planner::PlanningModel> model;
    if (bundle) model = std::make_unique<planner::LatentModel>(*bundle, env);
    else model = std::make_unique<planner::OracleModel>(env);
    const fs::path dir = out_dir(g, "plan-" + model->name());
    RunManifest m(dir, "plan", cfg, g.seed, bundle ? std::vector<fs::path>{model_dir} : std::vector<fs::path>{});
    const auto cem = cfg.cem();
    std::ofstream csv(dir / "report.csv");
    csv << "trial,success,final_cost,predicted_cost,wall_ms\n";
    std::size_t wins = 0;
    const std::size_t n = cfg.count("plan.trials");
    for (std::size_t t = 0; t < n; ++t) {
        const auto s0 = env.reset(derive_seed(g.seed, {0x7265736574ULL, t}));
        const auto goal = env.sample_goal(s0, derive_seed(g.seed, {0x676f616cULL, t}));
        const auto t0 = std::chrono::steady_clock::now();
        const auto ep = planner::execute_replan(*model, env, s0, goal, cem, derive_seed(g.seed, {0x706c616eULL, t}));
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        wins += ep.success ? 1 : 0;
        csv << t << ',' << (ep.success ? 1 : 0) << ',' << ep.final_cost << ',' << ep.plans.front().predicted_cost << ','
            << ms << '\n';
    }
    csv.close();
    m.add_output(dir / "report.csv");
    m.finish("ok");
    std::cout << model->name() << " on " << env.spec().id << ": " << wins << "/" << n << " successes\n";
    return kOk;
}

int cmd_fuzz(const Globals& g, std::size_t trials, std::size_t n) {
    const Config cfg = load_config(g, opt({{"fuzz.trials", num(trials)}, {"fuzz.n", num(n)}}));
    const fs::path dir = out_dir(g, "theorem-fuzz");
    RunManifest m(dir, "theorem-fuzz", cfg, g.seed, {});
    const auto t0 = std::chrono::steady_clock::now();
    const auto fc = cfg.fuzz();
    const auto r = theorylab::theorem_fuzz(fc, g.seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream csv(dir / "theorem.csv");
    csv << "trials,n,violations,rejected,worst_case_trials,worst_case_violations,construction_failures\n"
        << r.trials << ',' << fc.n << ',' << r.violations << ',' << r.rejected << ',' << r.worst_case_trials << ','
        << r.worst_case_violations << ',' << r.construction_failures << '\n';
    csv.close();
    m.add_output(dir / "theorem.csv");
    const auto verdict = judge_theorem(fc, r, secs);
    std::cout << format_result(verdict) << "\n" << secs << " s\n";
    m.finish(r.total_violations() == 0 ? "ok" : "acceptance_failed");
    return r.total_violations() == 0 ? kOk : kAcceptance;
}

int cmd_noise(const Globals& g, const std::string& target, const std::string& env_arg, std::size_t trials) {
    const Config cfg = load_config(g, opt({{"noise.env", env_arg}, {"noise.trials", num(trials)}}));
    std::vector<theorylab::NoiseTarget> targets;
    if (target == "both") targets = {theorylab::NoiseTarget::cost, theorylab::NoiseTarget::model};
    else targets = {theorylab::parse_target(target)};
    const envs::Environment env(cfg.text("noise.env"));
    const fs::path dir = out_dir(g, "noise-exp");
    RunManifest m(dir, "noise-exp", cfg, g.seed, {});
    for (auto t : targets) {
        const auto r = theorylab::noise_sweep(env, cfg.noise(t), derive_seed(g.seed, {0x6e6f697365ULL, static_cast<std::uint64_t>(t)}));
        const fs::path csv = dir / ("noise-" + std::string(theorylab::target_name(t)) + ".csv");
        write_noise_csv(csv, r);
        m.add_output(csv);
        std::cout << theorylab::target_name(t) << ": baseline " << r.baseline_rate << ", " << r.cells.size()
                  << " cells -> " << csv.string() << '\n';
    }
    m.finish("ok");
    return kOk;
}

int cmd_profile(const Globals& g, const std::vector<std::string>& dirs, bool oracle) {
    const Config cfg = load_config(g, {});
    const auto bundles = load_models(dirs);
    if (bundles.empty()) throw UsageError("error-profile needs at least one --model");
    const envs::Environment env(bundles.front().config().env_id);
    const fs::path dir = out_dir(g, "error-profile");
    RunManifest m(dir, "error-profile", cfg, g.seed, {dirs.begin(), dirs.end()});
    std::vector<analysis::ModelPredictor> preds;
    for (const auto& b : bundles) preds.emplace_back(b, env);
    const analysis::OraclePredictor orc(env);
    std::vector<const analysis::StatePredictor*> ps;
    if (oracle) ps.push_back(&orc);
    for (const auto& p : preds) ps.push_back(&p);
    const auto r = analysis::error_profile(ps, env, cfg.profile(), g.seed);
    analysis::write_error_profile_csv(dir / "error_profile.csv", r);
    m.add_output(dir / "error_profile.csv");
    m.finish("ok");
    std::cout << r.cells.size() << " cells -> " << (dir / "error_profile.csv").string() << '\n';
    return kOk;
}

int cmd_success(const Globals& g, const std::vector<std::string>& dirs, const std::string& tasks_arg, std::size_t trials) {
    const Config cfg = load_config(g, opt({{"success.tasks", tasks_arg}, {"success.trials", num(trials)}}));
    const auto bundles = load_models(dirs);
    const fs::path dir = out_dir(g, "success-table");
    RunManifest m(dir, "success-table", cfg, g.seed, {dirs.begin(), dirs.end()});
    std::vector<analysis::SuccessRow> rows;
    std::stringstream list(cfg.text("success.tasks"));
    std::size_t t = 0;
    for (std::string id; std::getline(list, id, ','); ++t) {
        id.erase(0, id.find_first_not_of(' '));
        const envs::Environment env(id);
        std::vector<planner::LatentModel> latent;
        for (const auto& b : bundles) latent.emplace_back(b, env);
        const planner::OracleModel orc(env);
        std::vector<analysis::Contender> cs;
        for (const auto& l : latent) cs.push_back({l.name(), &l});
        cs.push_back({"oracle", &orc});
        cs.push_back({"random", nullptr});
        const envs::Environment* ts[] = {&env};
        const auto part = analysis::success_table(cs, ts, cfg.count("success.trials"), cfg.cem(), derive_seed(g.seed, {t}));
        rows.insert(rows.end(), part.begin(), part.end());
    }
    analysis::write_success_csv(dir / "success.csv", rows);
    m.add_output(dir / "success.csv");
    m.finish("ok");
    for (const auto& r : rows) std::cout << r.contender << " " << r.task << " " << r.successes << "/" << r.trials << '\n';
    return kOk;
}

int cmd_rollout(const Globals& g, const std::string& model_dir, std::size_t trial, bool random_actions) {
    const Config cfg = load_config(g, {});
    const auto bundle = models::load_model(model_dir);
    const envs::Environment env(bundle.config().env_id);
    const fs::path dir = out_dir(g, "rollout-dump");
    RunManifest m(dir, "rollout-dump", cfg, g.seed, {model_dir});
    const auto s0 = env.reset(derive_seed(g.seed, {0x7265736574ULL, trial}));
    const auto goal = env.sample_goal(s0, derive_seed(g.seed, {0x676f616cULL, trial}));
    const auto cem = cfg.cem();
    std::vector<std::vector<double>> actions;
    if (random_actions) {
        Rng rng = make_rng(g.seed, {0x72616e64ULL, trial});
        for (std::size_t h = 0; h < cem.horizon; ++h) {
            std::vector<double> a(env.action_dim());
            for (double& v : a) v = uniform(rng, -env.action_bound(), env.action_bound());
            actions.push_back(a);
        }
    } else {
        // A goal-reaching sequence: the oracle's open-loop plan.
        const auto plan = planner::latent_mpc(planner::OracleModel(env), env, s0, goal, cem, derive_seed(g.seed, {trial}));
        for (std::size_t h = 0; h < cem.horizon; ++h) {
            const auto first = plan.actions.begin() + static_cast<std::ptrdiff_t>(h * env.action_dim());
            actions.emplace_back(first, first + static_cast<std::ptrdiff_t>(env.action_dim()));
        }
    }
    const analysis::ModelPredictor pred(bundle, env);
    const auto rows = analysis::rollout_dump(pred, env, s0, goal, actions);
    analysis::write_rollout_csv(dir / "rollout.csv", rows);
    m.add_output(dir / "rollout.csv");
    m.finish("ok");
    std::cout << rows.size() << " rows -> " << (dir / "rollout.csv").string() << '\n';
    if (!goal.target_blocks.empty() && env.spec().observation == envs::ObservationMode::vector) {
        std::cout << "target-block trace pearson r = " << analysis::target_trace_correlation(rows, goal) << '\n';
    }
    return kOk;
}

int cmd_reproduce(const Globals& g) {
    ReproduceOptions o;
    o.out = out_dir(g, "reproduce-" + std::to_string(g.seed));
    o.seed = g.seed;
    o.config = load_config(g, {});
    o.jobs = g.jobs;
    o.log = &std::cerr;
    const auto r = reproduce(o);
    for (const auto& c : r.criteria) std::cout << format_result(c) << '\n';
    std::cout << "summary: " << r.summary.string() << '\n';
    return r.all_pass() ? kOk : kAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Goal-aware latent dynamics: data, training, planning and evaluation"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--config", g.config, "flat key = value config file");
    app.add_option("--out", g.out, "output directory (dataset path for collect)");
    app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--set", g.sets, "config override key=value (repeatable)");

    std::function<int()> action;
    auto sub = [&](const char* name, const char* help) {
        auto* s = app.add_subcommand(name, help);
        s->fallthrough();
        return s;
    };

    std::string env_id, variant, data_path, model_dir, target = "both", tasks;
    std::size_t episodes = 0, length = 0, steps = 0, trials = 0, n = 0, trial = 0;
    bool oracle = false, random_actions = false;
    std::vector<std::string> model_dirs;

    auto* c = sub("collect", "random-policy dataset");
    c->add_option("--env", env_id);
    c->add_option("--episodes", episodes);
    c->add_option("--length", length);
    c->callback([&] { action = [&] { return cmd_collect(g, env_id, episodes, length); }; });

    auto* t = sub("train", "train one model variant");
    t->add_option("--variant", variant)->required();
    t->add_option("--data", data_path)->required();
    t->add_option("--steps", steps);
    t->callback([&] { action = [&] { return cmd_train(g, variant, data_path, steps); }; });

    auto* p = sub("plan", "latent MPC episodes");
    p->add_option("--model", model_dir);
    p->add_flag("--oracle", oracle, "plan with the true dynamics");
    p->add_option("--env", env_id);
    p->add_option("--trials", trials);
    p->callback([&] { action = [&] { return cmd_plan(g, model_dir, oracle, env_id, trials); }; });

    auto* f = sub("theorem-fuzz", "random and worst-case checks of the selection bound");
    f->add_option("--trials", trials);
    f->add_option("--n", n);
    f->callback([&] { action = [&] { return cmd_fuzz(g, trials, n); }; });

    auto* ne = sub("noise-exp", "bucketed noise-injection sweeps");
    ne->add_option("--target", target)->check(CLI::IsMember({"cost", "model", "both"}))->capture_default_str();
    ne->add_option("--env", env_id);
    ne->add_option("--trials", trials);
    ne->callback([&] { action = [&] { return cmd_noise(g, target, env_id, trials); }; });

    auto* ep = sub("error-profile", "prediction error by cohort and horizon");
    ep->add_option("--model", model_dirs)->required();
    ep->add_flag("--oracle", oracle, "include the zero-error oracle row");
    ep->callback([&] { action = [&] { return cmd_profile(g, model_dirs, oracle); }; });

    auto* st = sub("success-table", "success rates on shared trials, with oracle and random rows");
    st->add_option("--model", model_dirs);
    st->add_option("--tasks", tasks, "comma-separated env ids");
    st->add_option("--trials", trials);
    st->callback([&] { action = [&] { return cmd_success(g, model_dirs, tasks, trials); }; });

    auto* rd = sub("rollout-dump", "true vs predicted states along one sequence");
    rd->add_option("--model", model_dir)->required();
    rd->add_option("--trial", trial);
    rd->add_flag("--random", random_actions, "random actions instead of the oracle's plan");
    rd->callback([&] { action = [&] { return cmd_rollout(g, model_dir, trial, random_actions); }; });

    auto* rp = sub("reproduce", "every stage and the acceptance summary");
    rp->callback([&] { action = [&] { return cmd_reproduce(g); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    try {
        return action();
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kUsage;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    }
}
