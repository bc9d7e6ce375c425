#include "gap/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gap/common/rng.hpp"

namespace gap::analysis {

using ndiff::Tensor;

namespace {

Tensor repeat_row(std::span<const double> row, std::size_t count) {
    Tensor t = Tensor::matrix(count, row.size());
    for (std::size_t i = 0; i < count; ++i) std::copy(row.begin(), row.end(), t.row_span(i).begin());
    return t;
}

Tensor action_slice(const Tensor& actions, std::size_t h, std::size_t A) {
    Tensor a = Tensor::matrix(actions.rows(), A);
    for (std::size_t i = 0; i < actions.rows(); ++i) {
        const auto row = actions.row_span(i).subspan(h * A, A);
        std::copy(row.begin(), row.end(), a.row_span(i).begin());
    }
    return a;
}

void check_actions(const Tensor& actions, std::size_t horizon, std::size_t A) {
    if (actions.rank() != 2 || actions.cols() != horizon * A) {
        throw std::invalid_argument("predict: actions must be K x " + std::to_string(horizon * A) + ", got " +
                                    ndiff::shape_string(actions.shape()));
    }
}

void open_csv(std::ofstream& out, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out.open(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(10);
}

void close_csv(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

ModelPredictor::ModelPredictor(const models::ModelBundle& model, const envs::Environment& env) : model_(model), env_(env) {
    if (!model.wiring().has_decoder) {
        throw std::invalid_argument("model " + std::string(models::variant_name(model.variant())) +
                                    " has no decoder to predict states with");
    }
    if (model.config().obs_dim != env.observation_dim() || model.config().action_dim != env.action_dim()) {
        throw std::invalid_argument("model " + std::string(models::variant_name(model.variant())) +
                                    " does not match the dimensions of " + env.spec().id);
    }
}

std::string ModelPredictor::name() const { return std::string(models::variant_name(model_.variant())); }

std::vector<Tensor> ModelPredictor::predict(const envs::State& s0, const envs::Goal& goal, const Tensor& actions,
                                            std::size_t horizon) const {
    const std::size_t A = env_.action_dim(), K = actions.rows();
    check_actions(actions, horizon, A);
    const auto& w = model_.wiring();
    const auto x = env_.observe(s0);
    const auto g = env_.observe(goal.state);
    const std::vector<double>& ctx = w.context == models::Context::start ? x : g;
    const Tensor ctx_rows = repeat_row(ctx, K);

    Tensor z = model_.encode(repeat_row(x, K), ctx_rows).mean;
    std::vector<Tensor> out;
    out.reserve(horizon + 1);
    for (std::size_t h = 0; h <= horizon; ++h) {
        if (h > 0) z = model_.dynamics(z, action_slice(actions, h - 1, A));
        Tensor s = model_.decode(z);
        if (w.residual_target) {
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = ctx_rows[i] - s[i];
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Tensor> OraclePredictor::predict(const envs::State& s0, const envs::Goal&, const Tensor& actions,
                                             std::size_t horizon) const {
    const std::size_t A = env_.action_dim(), K = actions.rows(), O = env_.observation_dim();
    check_actions(actions, horizon, A);
    std::vector<Tensor> out(horizon + 1, Tensor::matrix(K, O));
    for (std::size_t i = 0; i < K; ++i) {
        envs::State s = s0;
        for (std::size_t h = 0; h <= horizon; ++h) {
            if (h > 0) s = env_.step(s, actions.row_span(i).subspan((h - 1) * A, A));
            const auto obs = env_.observe(s);
            std::copy(obs.begin(), obs.end(), out[h].row_span(i).begin());
        }
    }
    return out;
}

const ErrorCell& ErrorProfile::at(const std::string& predictor, const std::string& cohort, std::size_t step) const {
    for (const auto& c : cells) {
        if (c.predictor == predictor && c.cohort == cohort && c.step == step) return c;
    }
    throw std::out_of_range("error profile has no cell " + predictor + "/" + cohort + "/" + std::to_string(step));
}

std::vector<std::size_t> best_indices(std::span<const double> costs, std::size_t size) {
    std::vector<std::size_t> order(costs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
    order.resize(std::min(size, order.size()));
    return order;
}

double standard_error(std::span<const double> xs) {
    const std::size_t n = xs.size();
    if (n < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

ErrorProfile error_profile(std::span<const StatePredictor* const> predictors, const envs::Environment& env,
                           const ErrorProfileConfig& cfg, std::uint64_t seed) {
    if (cfg.tasks == 0 || cfg.sequences == 0 || cfg.horizon == 0) {
        throw std::invalid_argument("error_profile: tasks, sequences and horizon must be positive");
    }
    const std::size_t A = env.action_dim(), H = cfg.horizon, K = cfg.sequences, O = env.observation_dim();
    const double b = env.action_bound();
    const std::size_t P = predictors.size(), C = cfg.cohorts.size();

    // samples[p][c][h-1] collects one squared error per (task, sequence) in the cohort.
    std::vector<std::vector<std::vector<std::vector<double>>>> samples(
        P, std::vector<std::vector<std::vector<double>>>(C, std::vector<std::vector<double>>(H)));

    const OraclePredictor oracle(env);
    for (std::size_t t = 0; t < cfg.tasks; ++t) {
        const envs::State s0 = env.reset(derive_seed(seed, {0x7265736574ULL, t}));
        const envs::Goal goal = env.sample_goal(s0, derive_seed(seed, {0x676f616cULL, t}));
        Rng rng = make_rng(seed, {0x736571ULL, t});
        Tensor actions = Tensor::matrix(K, H * A);
        for (double& v : actions.data()) v = uniform(rng, -b, b);

        const auto truth = oracle.predict(s0, goal, actions, H);
        std::vector<double> true_cost(K, 0.0);
        for (std::size_t i = 0; i < K; ++i) {
            envs::State s = s0;
            for (std::size_t h = 0; h < H; ++h) {
                s = env.step(s, actions.row_span(i).subspan(h * A, A));
                const double c = env.cost(s, goal);
                if (cfg.rank_by == RankBy::summed) true_cost[i] += c;
                else if (h + 1 == H) true_cost[i] = c;
            }
        }
        std::vector<std::vector<std::size_t>> members;
        for (const auto& c : cfg.cohorts) members.push_back(best_indices(true_cost, c.size));

        for (std::size_t p = 0; p < P; ++p) {
            const auto pred = predictors[p]->predict(s0, goal, actions, H);
            for (std::size_t h = 1; h <= H; ++h) {
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t i : members[c]) {
                        const double e = envs::squared_distance(pred[h].row_span(i), truth[h].row_span(i));
                        samples[p][c][h - 1].push_back(e / static_cast<double>(O));
                    }
                }
            }
        }
    }

    ErrorProfile out;
    out.horizon = H;
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t h = 1; h <= H; ++h) {
                const auto& xs = samples[p][c][h - 1];
                ErrorCell cell{predictors[p]->name(), cfg.cohorts[c].name, h, 0.0, standard_error(xs), xs.size()};
                if (!xs.empty()) cell.mse = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
                out.cells.push_back(std::move(cell));
            }
        }
    }
    return out;
}

std::vector<SuccessRow> success_table(std::span<const Contender> contenders,
                                      std::span<const envs::Environment* const> tasks, std::size_t trials,
                                      const planner::CemConfig& cem, std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("success_table: trials must be positive");
    std::vector<SuccessRow> rows;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const envs::Environment& env = *tasks[k];
        const std::uint64_t task_seed = derive_seed(seed, {0x7461736bULL, k});
        std::vector<envs::State> starts;
        std::vector<envs::Goal> goals;
        for (std::size_t t = 0; t < trials; ++t) {
            starts.push_back(env.reset(derive_seed(task_seed, {0x7265736574ULL, t})));
            goals.push_back(env.sample_goal(starts.back(), derive_seed(task_seed, {0x676f616cULL, t})));
        }
        for (const auto& c : contenders) {
            SuccessRow row{c.name, env.spec().id, trials, 0, 0, 0.0, 0.0, task_seed};
            std::vector<double> outcomes;
            for (std::size_t t = 0; t < trials; ++t) {
                const std::uint64_t trial_seed = derive_seed(task_seed, {0x706c616eULL, t});
                bool ok = false;
                try {
                    const auto ep = c.model
                                        ? planner::execute_replan(*c.model, env, starts[t], goals[t], cem, trial_seed)
                                        : planner::random_episode(env, starts[t], goals[t], cem.horizon * cem.rounds,
                                                                  trial_seed);
                    ok = ep.success;
                } catch (const std::exception&) {
                    ++row.errors;
                }
                row.successes += ok ? 1 : 0;
                outcomes.push_back(ok ? 1.0 : 0.0);
            }
            row.rate = static_cast<double>(row.successes) / static_cast<double>(trials);
            row.se = standard_error(outcomes);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::vector<RolloutRow> rollout_dump(const StatePredictor& predictor, const envs::Environment& env,
                                     const envs::State& s0, const envs::Goal& goal,
                                     std::span<const std::vector<double>> actions) {
    const std::size_t A = env.action_dim(), H = actions.size();
    Tensor flat = Tensor::matrix(1, H * A);
    for (std::size_t h = 0; h < H; ++h) {
        if (actions[h].size() != A) {
            throw std::invalid_argument("rollout_dump: action " + std::to_string(h) + " has " +
                                        std::to_string(actions[h].size()) + " coordinates, expected " +
                                        std::to_string(A));
        }
        std::copy(actions[h].begin(), actions[h].end(), flat.row_span(0).begin() + static_cast<std::ptrdiff_t>(h * A));
    }
    const auto truth = OraclePredictor(env).predict(s0, goal, flat, H);
    const auto pred = predictor.predict(s0, goal, flat, H);
    const auto g = env.observe(goal.state);
    std::vector<RolloutRow> rows;
    for (std::size_t h = 0; h <= H; ++h) {
        RolloutRow r;
        r.step = h;
        r.truth.assign(truth[h].row_span(0).begin(), truth[h].row_span(0).end());
        r.predicted.assign(pred[h].row_span(0).begin(), pred[h].row_span(0).end());
        for (std::size_t i = 0; i < g.size(); ++i) r.residual.push_back(g[i] - r.predicted[i]);
        rows.push_back(std::move(r));
    }
    return rows;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("pearson: need two equal-length samples of size >= 2");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

double target_trace_correlation(const std::vector<RolloutRow>& rows, const envs::Goal& goal) {
    if (goal.target_blocks.empty()) throw std::invalid_argument("target_trace_correlation: goal has no target blocks");
    std::vector<double> truth, pred;
    for (std::size_t h = 1; h < rows.size(); ++h) {
        for (std::size_t b : goal.target_blocks) {
            for (std::size_t c : {2 + 2 * b, 3 + 2 * b}) {
                truth.push_back(rows[h].truth.at(c));
                pred.push_back(rows[h].predicted.at(c));
            }
        }
    }
    return pearson(truth, pred);
}

std::string rollout_header(std::size_t obs_dim) {
    std::ostringstream h;
    h << "step";
    for (const char* prefix : {"true_", "pred_", "resid_"}) {
        for (std::size_t i = 0; i < obs_dim; ++i) h << ',' << prefix << i;
    }
    return h.str();
}

void write_rollout_csv(const std::filesystem::path& path, const std::vector<RolloutRow>& rows) {
    std::ofstream out;
    open_csv(out, path);
    out << rollout_header(rows.empty() ? 0 : rows.front().truth.size()) << '\n';
    for (const auto& r : rows) {
        out << r.step;
        for (const auto* v : {&r.truth, &r.predicted, &r.residual}) {
            for (double x : *v) out << ',' << x;
        }
        out << '\n';
    }
    close_csv(out, path);
}

void write_error_profile_csv(const std::filesystem::path& path, const ErrorProfile& p) {
    std::ofstream out;
    open_csv(out, path);
    out << "predictor,cohort,step,mse,se,n\n";
    for (const auto& c : p.cells) {
        out << c.predictor << ',' << c.cohort << ',' << c.step << ',' << c.mse << ',' << c.se << ',' << c.n << '\n';
    }
    close_csv(out, path);
}

void write_success_csv(const std::filesystem::path& path, const std::vector<SuccessRow>& rows) {
    std::ofstream out;
    open_csv(out, path);
    out << "contender,task,trials,successes,errors,rate,se\n";
    for (const auto& r : rows) {
        out << r.contender << ',' << r.task << ',' << r.trials << ',' << r.successes << ',' << r.errors << ','
            << r.rate << ',' << r.se << '\n';
    }
    close_csv(out, path);
}

}  // namespace gap::analysis
