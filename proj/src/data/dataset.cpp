#include "gap/data/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "gap/common/binary_io.hpp"
#include "gap/common/rng.hpp"

namespace gap::data {

namespace {

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void quantize(std::vector<double>& v) {
    for (double& x : v) x = to_f32(x);
}

/// Largest float32 value not exceeding `bound`.
double f32_floor(double bound) {
    float f = static_cast<float>(bound);
    if (static_cast<double>(f) > bound) f = std::nextafter(f, 0.0f);
    return static_cast<double>(f);
}

}  // namespace

Dataset collect(const envs::Environment& env, std::size_t episodes, std::size_t length, std::uint64_t seed) {
    if (episodes < 1) throw std::invalid_argument("collect: need at least one episode");
    if (length < 1) throw std::invalid_argument("collect: episode length must be positive");
    Dataset ds;
    ds.env_id = env.spec().id;
    ds.seed = seed;
    ds.episode_length = length;
    ds.state_dim = env.state_dim();
    ds.action_dim = env.action_dim();
    ds.episodes.resize(episodes);
    const double bound = f32_floor(env.action_bound());
    for (std::size_t e = 0; e < episodes; ++e) {
        Rng rng = make_rng(seed, {0x636f6c6cULL, e});
        Trajectory& tr = ds.episodes[e];
        tr.states.reserve(length + 1);
        tr.actions.reserve(length);
        State s = env.reset(derive_seed(seed, {0x6570ULL, e}));
        quantize(s);
        tr.states.push_back(s);
        for (std::size_t t = 0; t < length; ++t) {
            Action a(env.action_dim());
            for (double& v : a) v = uniform(rng, -bound, bound);
            quantize(a);
            s = env.step(s, a);
            quantize(s);
            tr.actions.push_back(std::move(a));
            tr.states.push_back(s);
        }
    }
    return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(kDatasetMagic, 4);
        io::write_le<std::uint32_t>(out, kDatasetVersion);
        io::write_string(out, ds.env_id);
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.episodes.size()));
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.episode_length));
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.state_dim));
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.action_dim));
        for (const auto& tr : ds.episodes) {
            for (const auto& s : tr.states)
                for (double v : s) io::write_le<float>(out, static_cast<float>(v));
            for (const auto& a : tr.actions)
                for (double v : a) io::write_le<float>(out, static_cast<float>(v));
        }
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string() + " (disk full?)");
    }
    std::filesystem::rename(tmp, path);
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    io::expect_magic(in, kDatasetMagic, path.string());
    const auto version = io::read_le<std::uint32_t>(in, "version");
    if (version != kDatasetVersion) {
        throw std::runtime_error(path.string() + ": unsupported dataset version " + std::to_string(version));
    }
    Dataset ds;
    ds.env_id = io::read_string(in, "env id", 256);
    const auto episodes = io::read_le<std::uint32_t>(in, "episode count");
    ds.episode_length = io::read_le<std::uint32_t>(in, "episode length");
    ds.state_dim = io::read_le<std::uint32_t>(in, "state dim");
    ds.action_dim = io::read_le<std::uint32_t>(in, "action dim");
    const envs::EnvSpec spec = envs::env_spec(ds.env_id);
    if (ds.state_dim != spec.state_dim || ds.action_dim != spec.action_dim) {
        throw std::runtime_error(path.string() + ": header dimensions do not match environment " + ds.env_id);
    }
    ds.episodes.resize(episodes);
    for (auto& tr : ds.episodes) {
        tr.states.assign(ds.episode_length + 1, State(ds.state_dim));
        tr.actions.assign(ds.episode_length, Action(ds.action_dim));
        for (auto& s : tr.states)
            for (double& v : s) v = io::read_le<float>(in, "state");
        for (auto& a : tr.actions)
            for (double& v : a) v = io::read_le<float>(in, "action");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw std::runtime_error(path.string() + ": trailing bytes after " + std::to_string(episodes) + " episodes");
    }
    verify_dataset(ds);
    return ds;
}

void verify_dataset(const Dataset& ds, std::size_t spot_checks) {
    const envs::Environment env(ds.env_id);
    for (std::size_t e = 0; e < ds.episodes.size(); ++e) {
        const auto& tr = ds.episodes[e];
        if (tr.states.size() != ds.episode_length + 1 || tr.actions.size() != ds.episode_length) {
            throw std::runtime_error("episode " + std::to_string(e) + " has inconsistent lengths");
        }
    }
    if (ds.episodes.empty() || ds.episode_length == 0) return;
    Rng rng = make_rng(0x766572696679ULL, {ds.episodes.size(), ds.episode_length});
    for (std::size_t k = 0; k < spot_checks; ++k) {
        const std::size_t e = uniform_index(rng, ds.episodes.size());
        const std::size_t t = uniform_index(rng, ds.episode_length);
        const auto& tr = ds.episodes[e];
        State next = env.step(tr.states[t], tr.actions[t]);
        for (std::size_t i = 0; i < next.size(); ++i) {
            if (std::abs(to_f32(next[i]) - tr.states[t + 1][i]) > 1e-6) {
                throw std::runtime_error("episode " + std::to_string(e) + " step " + std::to_string(t) +
                                         " does not replay through " + ds.env_id);
            }
        }
    }
}

}  // namespace gap::data
