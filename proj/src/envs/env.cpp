#include "gap/envs/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gap/common/rng.hpp"

namespace gap::envs {

namespace bp = blockpush;

namespace {

constexpr double kBlockPushBound = 0.1;
constexpr int kBlockPushHorizon = 30;

EnvSpec block_push_spec(std::string id, Task task, ObservationMode obs) {
    EnvSpec s;
    s.id = std::move(id);
    s.kind = EnvKind::block_push;
    s.task = task;
    s.state_dim = 2 + 2 * bp::kBlocks;
    s.action_dim = 2;
    s.action_bound = kBlockPushBound;
    s.episode_length = kBlockPushHorizon;
    s.success_threshold = task == Task::single_block ? 0.08 : 0.1;
    s.goal_sampler = "band-resample";
    s.observation = obs;
    return s;
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

EnvSpec env_spec(std::string_view id) {
    if (id == "pointnav") {
        EnvSpec s;
        s.id = "pointnav";
        s.kind = EnvKind::point_nav;
        s.task = Task::reach;
        s.state_dim = 2;
        s.action_dim = 2;
        s.action_bound = 0.1;
        s.episode_length = 10;
        s.success_threshold = 0.1;
        s.goal_sampler = "uniform-box";
        return s;
    }
    if (id == "blockpush-task1") return block_push_spec(std::string(id), Task::single_block, ObservationMode::vector);
    if (id == "blockpush-task2") return block_push_spec(std::string(id), Task::two_blocks, ObservationMode::vector);
    if (id == "blockpush-grid-task1") return block_push_spec(std::string(id), Task::single_block, ObservationMode::grid);
    throw std::invalid_argument("unknown environment id: " + std::string(id));
}

std::vector<std::string> known_env_ids() {
    return {"pointnav", "blockpush-task1", "blockpush-task2", "blockpush-grid-task1"};
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    }
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) {
    if (spec_.success_threshold <= 0.0) throw std::invalid_argument("success threshold must be positive");
    if (spec_.episode_length < 2) throw std::invalid_argument("episode length must be at least 2");
}

void Environment::validate_state(const State& s) const {
    if (s.size() != spec_.state_dim) {
        throw std::invalid_argument(spec_.id + ": state has dimension " + std::to_string(s.size()) + ", expected " +
                                    std::to_string(spec_.state_dim));
    }
    for (double v : s) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw std::invalid_argument(spec_.id + ": state coordinate " + std::to_string(v) + " outside [0,1]");
        }
    }
}

void Environment::clip_action(std::span<double> a) const noexcept {
    for (double& v : a) v = std::clamp(v, -spec_.action_bound, spec_.action_bound);
}

State Environment::step(const State& s, std::span<const double> a) const {
    validate_state(s);
    if (a.size() != spec_.action_dim) {
        throw std::invalid_argument(spec_.id + ": action has dimension " + std::to_string(a.size()));
    }
    for (double v : a) {
        if (!std::isfinite(v) || std::abs(v) > spec_.action_bound) {
            throw std::invalid_argument(spec_.id + ": action component " + std::to_string(v) + " exceeds bound " +
                                        std::to_string(spec_.action_bound));
        }
    }
    if (spec_.kind == EnvKind::point_nav) {
        return {clip01(s[0] + a[0]), clip01(s[1] + a[1])};
    }
    return step_block_push(s, a);
}

namespace {

/// Moves the agent by fraction `alpha` of the command and pushes any block it
/// now overlaps out along the motion direction. Returns false when a block
/// pinned against the arena wall would still overlap the agent.
bool resolve_push(const State& s, std::span<const double> a, double alpha, State& out) {
    out = s;
    const double px = s[0], py = s[1];
    const double qx = clip01(px + alpha * a[0]);
    const double qy = clip01(py + alpha * a[1]);
    out[0] = qx;
    out[1] = qy;
    const double mx = qx - px, my = qy - py;
    const double len = std::hypot(mx, my);
    if (len == 0.0) return true;
    const double ux = mx / len, uy = my / len;
    constexpr double r = bp::kContactRadius;
    bool ok = true;
    for (std::size_t k = 0; k < bp::kBlocks; ++k) {
        double& bx = out[2 + 2 * k];
        double& by = out[3 + 2 * k];
        const double wx = bx - qx, wy = by - qy;
        const double w2 = wx * wx + wy * wy;
        if (w2 >= r * r) continue;
        // Smallest d >= 0 with |w + d u| = r.
        const double wu = wx * ux + wy * uy;
        const double d = -wu + std::sqrt(std::max(0.0, wu * wu - w2 + r * r));
        bx = clip01(bx + d * ux);
        by = clip01(by + d * uy);
        const double ex = bx - qx, ey = by - qy;
        if (ex * ex + ey * ey < r * r * (1.0 - 1e-9)) ok = false;
    }
    return ok;
}

}  // namespace

namespace {

State push_substep(const State& s, std::span<const double> a) {
    State out;
    if (resolve_push(s, a, 1.0, out)) return out;
    // A block is wedged against a wall: advance only as far as the push stays
    // feasible. alpha = 0 is always feasible because states never overlap.
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        State trial;
        if (resolve_push(s, a, mid, trial)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    resolve_push(s, a, lo, out);
    return out;
}

}  // namespace

State Environment::step_block_push(const State& s, std::span<const double> a) const {
    // Short substeps so the agent cannot pass through a block it grazes.
    const double longest = std::max(std::abs(a[0]), std::abs(a[1]));
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(longest / bp::kMaxSubstep)));
    const double part[2] = {a[0] / static_cast<double>(n), a[1] / static_cast<double>(n)};
    State out = s;
    for (std::size_t i = 0; i < n; ++i) out = push_substep(out, part);
    return out;
}

double Environment::cost(const State& s, const Goal& g) const {
    if (s.size() != spec_.state_dim || g.state.size() != spec_.state_dim) {
        throw std::invalid_argument(spec_.id + ": cost dimension mismatch (" + std::to_string(s.size()) + " vs " +
                                    std::to_string(g.state.size()) + ")");
    }
    if (spec_.kind == EnvKind::point_nav) return squared_distance(s, g.state);
    double c = 0.0;
    for (auto k : g.target_blocks) {
        if (k >= bp::kBlocks) throw std::invalid_argument("target block index out of range");
        const double dx = s[2 + 2 * k] - g.state[2 + 2 * k];
        const double dy = s[3 + 2 * k] - g.state[3 + 2 * k];
        c += dx * dx + dy * dy;
    }
    return c;
}

bool Environment::success(const State& s, const Goal& g) const {
    const double thr = spec_.success_threshold;
    if (spec_.kind == EnvKind::point_nav) return std::sqrt(squared_distance(s, g.state)) < thr;
    if (g.target_blocks.empty()) return false;
    for (auto k : g.target_blocks) {
        const double dx = s[2 + 2 * k] - g.state[2 + 2 * k];
        const double dy = s[3 + 2 * k] - g.state[3 + 2 * k];
        if (!(std::hypot(dx, dy) < thr)) return false;
    }
    return true;
}

State Environment::reset(std::uint64_t seed) const {
    if (spec_.kind == EnvKind::point_nav) return {0.5, 0.5};
    Rng rng = make_rng(seed, {0x7265736574ULL});
    State s(spec_.state_dim);
    s[0] = bp::kAgentStartX;
    s[1] = bp::kAgentStartY;
    for (std::size_t k = 0; k < bp::kBlocks; ++k) {
        s[2 + 2 * k] = bp::kLattice[k][0] + uniform(rng, -bp::kJitter, bp::kJitter);
        s[3 + 2 * k] = bp::kLattice[k][1] + uniform(rng, -bp::kJitter, bp::kJitter);
    }
    return s;
}

Goal Environment::sample_goal(const State& start, std::uint64_t seed) const {
    validate_state(start);
    Rng rng = make_rng(seed, {0x676f616cULL});
    if (spec_.kind == EnvKind::point_nav) {
        return Goal{{uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)}, {}};
    }
    Goal g;
    g.state = start;
    if (spec_.task == Task::two_blocks) {
        g.target_blocks = {1, 2};
    } else {
        g.target_blocks = {uniform_index(rng, bp::kBlocks)};
    }
    double ux = 0.0, uy = 1.0;
    for (auto k : g.target_blocks) {
        const double bx = start[2 + 2 * k], by = start[3 + 2 * k];
        double gx = 0.0, gy = 0.0;
        do {
            gx = uniform(rng, bp::kGoalLo, bp::kGoalHi);
            gy = uniform(rng, bp::kGoalLo, bp::kGoalHi);
        } while (std::hypot(gx - bx, gy - by) < bp::kMinGoalDistance);
        g.state[2 + 2 * k] = gx;
        g.state[3 + 2 * k] = gy;
        const double len = std::hypot(gx - bx, gy - by);
        ux = (gx - bx) / len;
        uy = (gy - by) / len;
    }
    // The agent ends where a straight push of the last target would leave it.
    const std::size_t last = g.target_blocks.back();
    g.state[0] = clip01(g.state[2 + 2 * last] - bp::kContactRadius * ux);
    g.state[1] = clip01(g.state[3 + 2 * last] - bp::kContactRadius * uy);
    return g;
}

std::size_t Environment::observation_dim() const noexcept {
    if (spec_.observation == ObservationMode::grid) {
        return bp::kGridSide * bp::kGridSide * bp::kGridChannels;
    }
    return spec_.state_dim;
}

std::vector<double> Environment::observe(const State& s) const {
    if (spec_.observation == ObservationMode::vector) return s;
    const ndiff::Tensor grid = render_grid(s);
    return {grid.data().begin(), grid.data().end()};
}

ndiff::Tensor render_grid(const State& s) {
    constexpr std::size_t side = bp::kGridSide;
    constexpr std::size_t channels = bp::kGridChannels;
    if (s.size() != 2 * channels) {
        throw std::invalid_argument("render_grid expects a block-push state of dimension " +
                                    std::to_string(2 * channels));
    }
    ndiff::Tensor grid({side * side * channels}, 0.0);
    const double max_cell = static_cast<double>(side - 1);
    for (std::size_t e = 0; e < channels; ++e) {
        // Continuous cell coordinate: cell i has its centre at (i + 0.5) / side.
        const double cx = std::clamp(s[2 * e] * side - 0.5, 0.0, max_cell);
        const double cy = std::clamp(s[2 * e + 1] * side - 0.5, 0.0, max_cell);
        const auto x0 = static_cast<std::size_t>(std::min(std::floor(cx), max_cell - 1.0));
        const auto y0 = static_cast<std::size_t>(std::min(std::floor(cy), max_cell - 1.0));
        const double fx = cx - static_cast<double>(x0);
        const double fy = cy - static_cast<double>(y0);
        const double w[2][2] = {{(1 - fy) * (1 - fx), (1 - fy) * fx}, {fy * (1 - fx), fy * fx}};
        for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
                grid[((y0 + dy) * side + (x0 + dx)) * channels + e] += w[dy][dx];
            }
        }
    }
    return grid;
}

}  // namespace gap::envs
