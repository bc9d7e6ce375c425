#include "gap/data/windows.hpp"

#include <algorithm>
#include <stdexcept>

namespace gap::data {

RelabeledWindow sample_window(const Dataset& ds, const WindowSpec& spec, std::size_t horizon, Rng& rng) {
    if (ds.episodes.empty()) throw std::invalid_argument("sample_window: empty dataset");
    if (spec.window_len < 1 || spec.window_len > ds.episode_length + 1) {
        throw std::invalid_argument("sample_window: window of " + std::to_string(spec.window_len) +
                                    " states does not fit episodes of length " + std::to_string(ds.episode_length));
    }
    if (horizon + 1 > spec.window_len) {
        throw std::invalid_argument("sample_window: horizon " + std::to_string(horizon) + " too large for window of " +
                                    std::to_string(spec.window_len) + " states");
    }
    RelabeledWindow w;
    w.episode = uniform_index(rng, ds.episodes.size());
    const auto& tr = ds.episodes[w.episode];
    w.window_begin = uniform_index(rng, tr.states.size() - spec.window_len + 1);
    w.window_end = w.window_begin + spec.window_len - 1;
    const std::size_t goal_index = spec.relabel == GoalRelabel::window_final ? w.window_end : tr.states.size() - 1;
    w.goal = tr.states[goal_index];
    w.t = w.window_begin + uniform_index(rng, spec.window_len - horizon);
    w.start = tr.states[w.t];
    for (std::size_t k = 0; k < horizon; ++k) {
        w.actions.push_back(tr.actions[w.t + k]);
        w.successors.push_back(tr.states[w.t + k + 1]);
    }
    for (std::size_t k = 0; k <= horizon; ++k) {
        const State& s = w.state_at(k);
        std::vector<double> r(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) r[i] = w.goal[i] - s[i];
        w.residuals.push_back(std::move(r));
    }
    return w;
}

std::size_t curriculum_horizon(std::size_t train_step, std::size_t step_quota, std::size_t h_max) {
    if (step_quota == 0) throw std::invalid_argument("curriculum quota must be at least 1");
    return std::min(train_step / step_quota, h_max);
}

BatchSampler::BatchSampler(const Dataset& ds, const envs::Environment& env, WindowSpec spec)
    : ds_(ds), env_(env), spec_(spec) {
    if (ds.env_id.rfind("blockpush", 0) == 0 && env.spec().id.rfind("blockpush", 0) == 0) {
        // Block-push tasks share one dynamics, so any task id may train on any block-push dataset.
    } else if (ds.env_id != env.spec().id) {
        throw std::invalid_argument("dataset from " + ds.env_id + " cannot train a model for " + env.spec().id);
    }
    if (ds.state_dim != env.state_dim()) throw std::invalid_argument("dataset state dimension mismatch");
}

WindowBatch BatchSampler::sample(std::size_t batch_size, std::size_t horizon, Rng& rng) const {
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    const std::size_t obs_dim = env_.observation_dim();
    const std::size_t act_dim = env_.action_dim();
    WindowBatch b;
    b.horizon = horizon;
    b.goal = ndiff::Tensor::matrix(batch_size, obs_dim);
    b.states.assign(horizon + 1, ndiff::Tensor::matrix(batch_size, obs_dim));
    b.actions.assign(horizon, ndiff::Tensor::matrix(batch_size, act_dim));
    auto put = [&](ndiff::Tensor& dst, std::size_t row, const State& s) {
        const auto obs = env_.observe(s);
        std::copy(obs.begin(), obs.end(), dst.row_span(row).begin());
    };
    for (std::size_t i = 0; i < batch_size; ++i) {
        const RelabeledWindow w = sample_window(ds_, spec_, horizon, rng);
        put(b.goal, i, w.goal);
        for (std::size_t k = 0; k <= horizon; ++k) put(b.states[k], i, w.state_at(k));
        for (std::size_t k = 0; k < horizon; ++k) {
            std::copy(w.actions[k].begin(), w.actions[k].end(), b.actions[k].row_span(i).begin());
        }
    }
    return b;
}

}  // namespace gap::data
