#pragma once

#include <cstddef>
#include <vector>

#include "gap/common/rng.hpp"
#include "gap/data/dataset.hpp"
#include "gap/ndiff/tensor.hpp"

namespace gap::data {

enum class GoalRelabel { window_final, episode_final };

/// One hindsight-relabelled training sample.
struct RelabeledWindow {
    std::size_t episode = 0;
    std::size_t window_begin = 0;
    std::size_t window_end = 0;  // index of the goal state inside the episode
    std::size_t t = 0;
    State start;                        // s_t
    std::vector<Action> actions;        // a_t .. a_{t+H-1}
    std::vector<State> successors;      // s_{t+1} .. s_{t+H}
    State goal;                         // s_g
    std::vector<std::vector<double>> residuals;  // r_k = s_g - s_{t+k}, k = 0..H

    std::size_t horizon() const noexcept { return actions.size(); }
    /// s_{t+k} for k = 0..H.
    const State& state_at(std::size_t k) const { return k == 0 ? start : successors.at(k - 1); }
};

struct WindowSpec {
    std::size_t window_len = 15;  // states per window
    GoalRelabel relabel = GoalRelabel::window_final;
};

/// Picks an episode and window start uniformly, relabels the goal, then picks
/// t uniformly among positions with t + H inside the window.
RelabeledWindow sample_window(const Dataset& ds, const WindowSpec& spec, std::size_t horizon, Rng& rng);

/// H = floor(step / quota), capped at h_max.
std::size_t curriculum_horizon(std::size_t train_step, std::size_t step_quota, std::size_t h_max);

/// Observation-space tensors for a batch of windows sharing one horizon.
/// Every model variant is trained from these same tensors; each variant
/// derives its own inputs and targets from them.
struct WindowBatch {
    std::size_t horizon = 0;
    ndiff::Tensor goal;                 // B x O
    std::vector<ndiff::Tensor> states;  // H+1 entries of B x O: s_t .. s_{t+H}
    std::vector<ndiff::Tensor> actions; // H entries of B x A

    std::size_t batch_size() const { return goal.rows(); }
};

class BatchSampler {
public:
    BatchSampler(const Dataset& ds, const envs::Environment& env, WindowSpec spec);

    WindowBatch sample(std::size_t batch_size, std::size_t horizon, Rng& rng) const;
    std::size_t max_horizon() const noexcept { return spec_.window_len - 1; }
    const WindowSpec& spec() const noexcept { return spec_; }

private:
    const Dataset& ds_;
    const envs::Environment& env_;
    WindowSpec spec_;
};

}  // namespace gap::data
