#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gap/ndiff/tensor.hpp"

namespace gap::envs {

/// Flat coordinate vector; every coordinate lies in [0,1].
using State = std::vector<double>;
/// Planar displacement command, |a_i| <= EnvSpec::action_bound.
using Action = std::vector<double>;

enum class EnvKind { point_nav, block_push };
enum class Task { reach, single_block, two_blocks };
enum class ObservationMode { vector, grid };

struct EnvSpec {
    std::string id;
    EnvKind kind = EnvKind::point_nav;
    Task task = Task::reach;
    std::size_t state_dim = 2;
    std::size_t action_dim = 2;
    double action_bound = 0.1;
    int episode_length = 10;
    double success_threshold = 0.1;
    std::string goal_sampler;
    ObservationMode observation = ObservationMode::vector;
};

/// Known ids: "pointnav", "blockpush-task1", "blockpush-task2", "blockpush-grid-task1".
EnvSpec env_spec(std::string_view id);
std::vector<std::string> known_env_ids();

/// A goal state plus the blocks that the task scores. For point navigation
/// the list is empty and the whole state is scored.
struct Goal {
    State state;
    std::vector<std::size_t> target_blocks;
};

namespace blockpush {
inline constexpr std::size_t kBlocks = 3;
inline constexpr double kContactRadius = 0.06;
/// Longest agent displacement resolved in one contact pass.
inline constexpr double kMaxSubstep = 0.02;
inline constexpr double kAgentStartX = 0.5;
inline constexpr double kAgentStartY = 0.15;
inline constexpr double kJitter = 0.03;
inline constexpr double kGoalLo = 0.2;
inline constexpr double kGoalHi = 0.8;
inline constexpr double kMinGoalDistance = 0.15;
inline constexpr std::size_t kGridSide = 12;
inline constexpr std::size_t kGridChannels = kBlocks + 1;
/// Lattice centres of the blocks before jitter.
inline constexpr double kLattice[kBlocks][2] = {{0.3, 0.3}, {0.5, 0.3}, {0.7, 0.3}};
}  // namespace blockpush

/// Ground-truth dynamics, cost and success predicate. Stateless: every
/// method is a pure function of its arguments, so one instance can be shared
/// across threads.
class Environment {
public:
    explicit Environment(EnvSpec spec);
    explicit Environment(std::string_view id) : Environment(env_spec(id)) {}

    const EnvSpec& spec() const noexcept { return spec_; }
    std::size_t state_dim() const noexcept { return spec_.state_dim; }
    std::size_t action_dim() const noexcept { return spec_.action_dim; }
    double action_bound() const noexcept { return spec_.action_bound; }

    /// Throws std::invalid_argument for a malformed state or an action
    /// outside the bound; callers clip explicitly.
    State step(const State& s, std::span<const double> a) const;
    /// Squared Euclidean distance over the scored coordinates.
    double cost(const State& s, const Goal& g) const;
    /// Strict threshold test (distance < threshold) on the scored coordinates.
    bool success(const State& s, const Goal& g) const;

    State reset(std::uint64_t seed) const;
    Goal sample_goal(const State& start, std::uint64_t seed) const;

    /// Model input for a state: the state itself in vector mode, the
    /// flattened occupancy grid in grid mode.
    std::vector<double> observe(const State& s) const;
    std::size_t observation_dim() const noexcept;

    void clip_action(std::span<double> a) const noexcept;
    void validate_state(const State& s) const;

private:
    State step_block_push(const State& s, std::span<const double> a) const;

    EnvSpec spec_;
};

/// 12x12x4 occupancy grid, flattened as [row][col][channel] with row = y cell
/// and col = x cell. Each entity is splatted bilinearly onto cell centres so
/// every channel sums to one.
ndiff::Tensor render_grid(const State& s);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace gap::envs
