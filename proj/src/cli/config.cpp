#include "gap/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gap::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size() && !s.empty();
}

bool parse_real(std::string_view s, double& out) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size() && !s.empty() && std::isfinite(out);
}

bool parse_bool(std::string_view s, bool& out) {
    if (s == "true" || s == "1") return out = true, true;
    if (s == "false" || s == "0") return out = false, true;
    return false;
}

bool valid(KeyType t, std::string_view v) {
    std::int64_t i = 0;
    double d = 0.0;
    bool b = false;
    switch (t) {
        case KeyType::integer: return parse_int(v, i);
        case KeyType::real: return parse_real(v, d);
        case KeyType::boolean: return parse_bool(v, b);
        case KeyType::text: return true;
        case KeyType::real_list:
            return std::ranges::all_of(split(v, ','), [&](std::string_view x) { return parse_real(x, d); });
        case KeyType::size_list:
            return std::ranges::all_of(split(v, ','), [&](std::string_view x) { return parse_int(x, i) && i > 0; });
    }
    return false;
}

const char* type_name(KeyType t) {
    switch (t) {
        case KeyType::integer: return "integer";
        case KeyType::real: return "number";
        case KeyType::boolean: return "boolean (true/false)";
        case KeyType::text: return "text";
        case KeyType::real_list: return "comma-separated numbers";
        case KeyType::size_list: return "comma-separated positive integers";
    }
    return "?";
}

const KeySpec* find_key(std::string_view key) {
    for (const auto& k : known_keys()) {
        if (k.key == key) return &k;
    }
    return nullptr;
}

}  // namespace

const std::vector<KeySpec>& known_keys() {
    using enum KeyType;
    static const std::vector<KeySpec> keys{
        {"env", text, "blockpush-task1", "environment id for collect/train/plan/error-profile"},
        {"data.episodes", integer, "500", "episodes collected by the random policy"},
        {"data.length", integer, "30", "steps per collected episode"},
        {"data.window", integer, "15", "states per training window"},
        {"data.relabel", text, "window_final", "window_final | episode_final"},
        {"model.latent_dim", integer, "0", "latent size; 0 picks 16 for vector and 32 for grid observations"},
        {"model.hidden", size_list, "128,128", "hidden widths of every MLP"},
        {"model.kl_weight", real, "0.001", "beta on the encoder KL"},
        {"train.steps", integer, "20000", "Adam updates"},
        {"train.batch", integer, "32", "windows per batch"},
        {"train.lr", real, "0.0001", "Adam learning rate"},
        {"train.curriculum_quota", integer, "2000", "steps per curriculum stage"},
        {"train.max_horizon", integer, "10", "curriculum cap H_max"},
        {"cem.candidates", integer, "1000", "D, sequences sampled per iteration"},
        {"cem.elites", integer, "10", "M, elites refit per iteration"},
        {"cem.horizon", integer, "15", "H, planning horizon"},
        {"cem.iterations", integer, "3", "refit iterations"},
        {"cem.rounds", integer, "2", "plan-execute rounds per episode"},
        {"cem.keep_elites", boolean, "true", "carry elites into the next pool"},
        {"cem.ranking", text, "summed", "summed | terminal"},
        {"plan.trials", integer, "100", "episodes for the plan verb"},
        {"fuzz.trials", integer, "10000", "random theorem instances"},
        {"fuzz.n", integer, "100", "candidates per instance"},
        {"fuzz.worst_case", integer, "1000", "adversarial instances"},
        {"noise.env", text, "pointnav", "environment for the noise sweeps"},
        {"noise.trials", integer, "500", "trials per cell"},
        {"noise.sequences", integer, "100", "random sequences per trial"},
        {"noise.cost_magnitudes", real_list, "0.1,0.25,0.5,1.0", "cost-noise half widths"},
        {"noise.model_magnitudes", real_list, "0.05,0.1,0.2", "state-noise half widths"},
        {"profile.tasks", integer, "20", "(start, goal) pairs per error profile"},
        {"profile.sequences", integer, "1000", "random sequences per pair"},
        {"profile.horizon", integer, "15", "prediction steps"},
        {"profile.cohorts", size_list, "1000,100,10", "cohort sizes, best first by true cost"},
        {"profile.rank_by", text, "terminal", "terminal | summed"},
        {"success.trials", integer, "100", "trials per (model, task)"},
        {"success.tasks", text, "blockpush-task1,blockpush-task2", "comma-separated task ids"},
        {"reproduce.profile_seeds", integer, "5", "training seeds for the error-profile criterion"},
        {"reproduce.success_seeds", integer, "3", "of those, seeds also used for success tables"},
        {"reproduce.harness_trials", integer, "100", "oracle and random episodes per harness check"},
    };
    return keys;
}

Config::Config() {
    for (const auto& k : known_keys()) values_[k.key] = k.default_value;
}

void Config::set(std::string_view key, std::string_view value, const std::string& where) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    if (!valid(spec->type, value)) {
        throw ConfigError(where + ": '" + std::string(key) + "' expects " + type_name(spec->type) + ", got '" +
                          std::string(value) + "'");
    }
    values_[spec->key] = std::string(value);
}

const std::string& Config::text(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("unknown key '" + std::string(key) + "'");
    return it->second;
}

std::int64_t Config::integer(std::string_view key) const {
    std::int64_t v = 0;
    parse_int(text(key), v);
    return v;
}

std::size_t Config::count(std::string_view key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError("'" + std::string(key) + "' must not be negative, got " + std::to_string(v));
    return static_cast<std::size_t>(v);
}

double Config::real(std::string_view key) const {
    double v = 0.0;
    parse_real(text(key), v);
    return v;
}

bool Config::boolean(std::string_view key) const {
    bool v = false;
    parse_bool(text(key), v);
    return v;
}

std::vector<double> Config::reals(std::string_view key) const {
    std::vector<double> out;
    for (auto part : split(text(key), ',')) {
        double v = 0.0;
        parse_real(part, v);
        out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> Config::sizes(std::string_view key) const {
    std::vector<std::size_t> out;
    for (auto part : split(text(key), ',')) {
        std::int64_t v = 0;
        parse_int(part, v);
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::string Config::dump() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
}

planner::CemConfig Config::cem() const {
    planner::CemConfig c;
    c.candidates = count("cem.candidates");
    c.elites = count("cem.elites");
    c.horizon = count("cem.horizon");
    c.iterations = count("cem.iterations");
    c.rounds = count("cem.rounds");
    c.keep_elites = boolean("cem.keep_elites");
    const auto& r = text("cem.ranking");
    if (r == "summed") c.ranking = planner::Ranking::summed;
    else if (r == "terminal") c.ranking = planner::Ranking::terminal;
    else throw ConfigError("'cem.ranking' must be summed or terminal, got '" + r + "'");
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

models::TrainConfig Config::train() const {
    models::TrainConfig t;
    t.steps = count("train.steps");
    t.batch_size = count("train.batch");
    t.learning_rate = real("train.lr");
    t.curriculum_quota = count("train.curriculum_quota");
    t.max_horizon = count("train.max_horizon");
    t.window.window_len = count("data.window");
    const auto& r = text("data.relabel");
    if (r == "window_final") t.window.relabel = data::GoalRelabel::window_final;
    else if (r == "episode_final") t.window.relabel = data::GoalRelabel::episode_final;
    else throw ConfigError("'data.relabel' must be window_final or episode_final, got '" + r + "'");
    if (t.batch_size == 0 || t.curriculum_quota == 0) throw ConfigError("train.batch and train.curriculum_quota must be positive");
    return t;
}

models::ModelConfig Config::model(models::Variant v, const envs::Environment& env) const {
    models::ModelConfig m;
    m.variant = v;
    m.env_id = env.spec().id;
    m.obs_dim = env.observation_dim();
    m.action_dim = env.action_dim();
    m.latent_dim = count("model.latent_dim");
    if (m.latent_dim == 0) m.latent_dim = env.spec().observation == envs::ObservationMode::grid ? 32 : 16;
    m.hidden = sizes("model.hidden");
    m.kl_weight = real("model.kl_weight");
    return m;
}

theorylab::FuzzConfig Config::fuzz() const {
    theorylab::FuzzConfig f;
    f.trials = count("fuzz.trials");
    f.n = count("fuzz.n");
    f.worst_case_trials = count("fuzz.worst_case");
    return f;
}

theorylab::NoiseSweepConfig Config::noise(theorylab::NoiseTarget target) const {
    theorylab::NoiseSweepConfig n;
    n.target = target;
    n.trials = count("noise.trials");
    n.sequences = count("noise.sequences");
    n.magnitudes = reals(target == theorylab::NoiseTarget::cost ? "noise.cost_magnitudes" : "noise.model_magnitudes");
    return n;
}

analysis::ErrorProfileConfig Config::profile() const {
    analysis::ErrorProfileConfig p;
    p.tasks = count("profile.tasks");
    p.sequences = count("profile.sequences");
    p.horizon = count("profile.horizon");
    p.cohorts.clear();
    for (std::size_t size : sizes("profile.cohorts")) {
        p.cohorts.push_back({size >= p.sequences ? "all" : "top" + std::to_string(size), size});
    }
    const auto& r = text("profile.rank_by");
    if (r == "terminal") p.rank_by = analysis::RankBy::terminal;
    else if (r == "summed") p.rank_by = analysis::RankBy::summed;
    else throw ConfigError("'profile.rank_by' must be terminal or summed, got '" + r + "'");
    return p;
}

Config parse_config_text(std::string_view text, const std::string& source,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
    Config cfg;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const std::string where = source + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value', got '" + std::string(line) + "'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": missing key");
        if (!seen.insert(std::string(key)).second) throw ConfigError(where + ": duplicate key '" + std::string(key) + "'");
        cfg.set(key, value, where);
    }
    for (const auto& [k, v] : overrides) cfg.set(k, v, "--set " + k);
    return cfg;
}

Config parse_config(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    if (path.empty()) return parse_config_text("", "defaults", overrides);
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path.string(), overrides);
}

}  // namespace gap::cli
