#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gap/envs/env.hpp"

namespace gap::data {

using envs::Action;
using envs::State;

/// states.size() == actions.size() + 1.
struct Trajectory {
    std::vector<State> states;
    std::vector<Action> actions;
};

struct Dataset {
    std::string env_id;
    std::uint64_t seed = 0;
    std::size_t episode_length = 0;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<Trajectory> episodes;
};

inline constexpr char kDatasetMagic[] = "GAPD";
inline constexpr std::uint32_t kDatasetVersion = 1;

/// Random-policy rollouts: each episode resets the environment and applies
/// `length` actions drawn uniformly from the action box. States and actions
/// are rounded to float32 as they are produced, so the stored data replays
/// exactly through Environment::step.
Dataset collect(const envs::Environment& env, std::size_t episodes, std::size_t length, std::uint64_t seed);

// Layout (little-endian): "GAPD" | u32 version | u32 len + env id |
// u32 episodes | u32 length | u32 state dim | u32 action dim |
// per episode: f32 states[(length+1) * state dim], f32 actions[length * action dim]
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
/// Reads and spot-checks that stored transitions replay through the environment.
Dataset read_dataset(const std::filesystem::path& path);

/// Throws if any episode has inconsistent lengths or dimensions, or if a
/// sampled subset of transitions does not match the environment dynamics.
void verify_dataset(const Dataset& ds, std::size_t spot_checks = 64);

}  // namespace gap::data
