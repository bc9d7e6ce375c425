#include "gap/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gap/ndiff/checkpoint.hpp"
#include "gap/ndiff/gradcheck.hpp"

namespace gap::models {

using ndiff::Graph;
using ndiff::Tensor;
using ndiff::Var;

std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::standard: return "standard";
        case Variant::gap: return "gap";
        case Variant::gap_no_goal: return "gap_no_goal";
        case Variant::gap_no_residual: return "gap_no_residual";
        case Variant::inverse: return "inverse";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : all_variants()) {
        if (variant_name(v) == name) return v;
    }
    throw std::invalid_argument("unknown model variant: " + std::string(name));
}

std::vector<Variant> all_variants() {
    return {Variant::gap, Variant::standard, Variant::gap_no_goal, Variant::gap_no_residual, Variant::inverse};
}

Wiring wiring(Variant v) {
    switch (v) {
        case Variant::gap: return {Context::goal, true, true, OutputHead::linear};
        case Variant::gap_no_goal: return {Context::start, true, true, OutputHead::linear};
        case Variant::gap_no_residual: return {Context::goal, false, true, OutputHead::sigmoid};
        case Variant::standard: return {Context::none, false, true, OutputHead::sigmoid};
        case Variant::inverse: return {Context::none, false, false, OutputHead::linear};
    }
    throw std::logic_error("unhandled variant");
}

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

}  // namespace

ModelBundle::ModelBundle(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)), wiring_(models::wiring(cfg_.variant)) {
    if (cfg_.obs_dim == 0 || cfg_.action_dim == 0 || cfg_.latent_dim == 0) {
        throw std::invalid_argument("model dimensions must be positive");
    }
    Rng rng = make_rng(init_seed, {0x696e6974ULL});
    const std::size_t L = cfg_.latent_dim;
    const std::size_t enc_in = wiring_.context == Context::none ? cfg_.obs_dim : 2 * cfg_.obs_dim;
    encoder_ = Mlp(params_, "enc", layer_sizes(enc_in, cfg_.hidden, 2 * L), OutputHead::linear, rng);
    dynamics_ = Mlp(params_, "dyn", layer_sizes(L + cfg_.action_dim, cfg_.hidden, L), OutputHead::linear, rng);
    if (wiring_.has_decoder) {
        decoder_ = Mlp(params_, "dec", layer_sizes(L, cfg_.hidden, cfg_.obs_dim), wiring_.head, rng);
    } else {
        inverse_ = Mlp(params_, "inv", layer_sizes(2 * L, cfg_.hidden, cfg_.action_dim), OutputHead::linear, rng);
    }
}

void ModelBundle::check_obs(const Tensor& t, const char* what) const {
    if (t.cols() != cfg_.obs_dim) {
        throw std::invalid_argument(std::string(what) + " has dimension " + std::to_string(t.cols()) + ", model " +
                                    std::string(variant_name(cfg_.variant)) + " expects " + std::to_string(cfg_.obs_dim));
    }
}

LatentBatch ModelBundle::encode(const Tensor& obs, const Tensor& ctx) const {
    check_obs(obs, "observation");
    Tensor out;
    if (wiring_.context == Context::none) {
        out = encoder_.infer(params_, obs);
    } else {
        check_obs(ctx, "context");
        const Tensor* parts[] = {&obs, &ctx};
        out = encoder_.infer(params_, ndiff::kernels::hconcat(parts));
    }
    const std::size_t L = cfg_.latent_dim;
    LatentBatch d{ndiff::kernels::slice_cols(out, 0, L), ndiff::kernels::slice_cols(out, L, 2 * L)};
    ndiff::kernels::clamp_inplace(d.log_var, kLogVarMin, kLogVarMax);
    return d;
}

Tensor ModelBundle::decode(const Tensor& z) const {
    if (!wiring_.has_decoder) throw std::logic_error("decode is not defined for the inverse variant");
    return decoder_.infer(params_, z);
}

Tensor ModelBundle::dynamics(const Tensor& z, const Tensor& actions) const {
    if (z.cols() != cfg_.latent_dim || actions.cols() != cfg_.action_dim || z.rows() != actions.rows()) {
        throw std::invalid_argument("dynamics: latent " + ndiff::shape_string(z.shape()) + " and actions " +
                                    ndiff::shape_string(actions.shape()) + " do not conform");
    }
    const Tensor* parts[] = {&z, &actions};
    Tensor next = dynamics_.infer(params_, ndiff::kernels::hconcat(parts));
    ndiff::kernels::axpy(1.0, z, next);
    return next;
}

Tensor ModelBundle::invert(const Tensor& z, const Tensor& z_next) const {
    if (cfg_.variant != Variant::inverse) throw std::logic_error("invert is only defined for the inverse variant");
    const Tensor* parts[] = {&z, &z_next};
    return inverse_.infer(params_, ndiff::kernels::hconcat(parts));
}

ModelBundle::GraphLatent ModelBundle::encode(Graph& g, Var obs, Var ctx) {
    check_obs(obs.value(), "observation");
    Var in = obs;
    if (wiring_.context != Context::none) {
        check_obs(ctx.value(), "context");
        in = ndiff::concat({obs, ctx});
    }
    Var out = encoder_.forward(g, params_, in);
    const std::size_t L = cfg_.latent_dim;
    return {ndiff::slice(out, 0, L), ndiff::clamp(ndiff::slice(out, L, 2 * L), kLogVarMin, kLogVarMax)};
}

Var ModelBundle::decode(Graph& g, Var z) {
    if (!wiring_.has_decoder) throw std::logic_error("decode is not defined for the inverse variant");
    return decoder_.forward(g, params_, z);
}

Var ModelBundle::dynamics(Graph& g, Var z, Var actions) {
    return ndiff::add(z, dynamics_.forward(g, params_, ndiff::concat({z, actions})));
}

Var ModelBundle::invert(Graph& g, Var z, Var z_next) {
    if (cfg_.variant != Variant::inverse) throw std::logic_error("invert is only defined for the inverse variant");
    return inverse_.forward(g, params_, ndiff::concat({z, z_next}));
}

const Tensor& context_for(Variant v, const Tensor& start, const Tensor& goal) {
    return wiring(v).context == Context::start ? start : goal;
}

Tensor target_for(Variant v, const data::WindowBatch& batch, std::size_t k) {
    const Wiring w = wiring(v);
    const Tensor& s = batch.states.at(k);
    if (!w.residual_target) return s;
    Tensor r = context_for(v, batch.states.front(), batch.goal);
    ndiff::kernels::axpy(-1.0, s, r);
    return r;
}

double loss_gradient_error(ModelBundle& m, const data::WindowBatch& batch, const Tensor& noise, std::size_t probes,
                           std::uint64_t seed) {
    m.params().zero_grad();
    {
        Graph g;
        g.backward(training_loss(g, m, batch, noise).total);
    }
    auto loss_at = [&] {
        Graph g;
        return training_loss(g, m, batch, noise).total.value().item();
    };
    Rng rng(seed);
    auto& items = m.params().items();
    double worst = 0.0;
    for (std::size_t i = 0; i < probes; ++i) {
        auto it = items.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(uniform_index(rng, items.size())));
        ndiff::Parameter& p = it->second;
        const std::size_t idx = uniform_index(rng, p.value.size());
        const double analytic = p.grad[idx], x0 = p.value[idx], h = 1e-5;
        p.value[idx] = x0 + h;
        const double up = loss_at();
        p.value[idx] = x0 - h;
        const double down = loss_at();
        p.value[idx] = x0;
        worst = std::max(worst, ndiff::relative_error(analytic, (up - down) / (2 * h), 1e-7));
    }
    return worst;
}

double kl_to_unit_gaussian(const LatentBatch& d) {
    double total = 0.0;
    for (std::size_t i = 0; i < d.mean.size(); ++i) {
        const double m = d.mean[i], lv = d.log_var[i];
        total += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
    return total / static_cast<double>(d.mean.rows());
}

namespace {

Var mse(Var pred, Var target) {
    return ndiff::mean(ndiff::square(ndiff::sub(pred, target)));
}

/// 0.5 * sum(mu^2 + exp(lv) - 1 - lv) / rows.
Var kl_term(Var mean, Var log_var) {
    const Tensor& mv = mean.value();
    const double rows = static_cast<double>(mv.rows());
    const double entries = static_cast<double>(mv.size());
    Var s = ndiff::sum(ndiff::square(mean)) + ndiff::sum(ndiff::exp(log_var)) - ndiff::sum(log_var);
    return ndiff::add_scalar(ndiff::scale(s, 0.5 / rows), -0.5 * entries / rows);
}

}  // namespace

LossGraph training_loss(Graph& g, ModelBundle& m, const data::WindowBatch& batch, const Tensor& noise) {
    const Variant v = m.variant();
    const std::size_t H = batch.horizon;
    LossReport rep;
    rep.horizon = H;

    Var s0 = g.constant(batch.states.front());
    Var ctx = g.constant(context_for(v, batch.states.front(), batch.goal));
    auto enc = m.encode(g, s0, ctx);
    if (noise.shape() != enc.mean.value().shape()) {
        throw std::invalid_argument("reparameterisation noise has shape " + ndiff::shape_string(noise.shape()) +
                                    ", expected " + ndiff::shape_string(enc.mean.value().shape()));
    }
    Var z = enc.mean + ndiff::exp(ndiff::scale(enc.log_var, 0.5)) * g.constant(noise);
    Var kl = kl_term(enc.mean, enc.log_var);

    Var recon = g.constant(Tensor::scalar(0.0));
    if (m.wiring().has_decoder) {
        for (std::size_t k = 0; k <= H; ++k) {
            if (k > 0) z = m.dynamics(g, z, g.constant(batch.actions[k - 1]));
            Var term = mse(m.decode(g, z), g.constant(target_for(v, batch, k)));
            rep.per_step.push_back(term.value().item());
            recon = recon + term;
        }
    } else {
        if (H == 0) throw std::invalid_argument("inverse model loss needs at least one transition");
        Var prev_mean = enc.mean;
        Var action_loss = g.constant(Tensor::scalar(0.0));
        for (std::size_t k = 1; k <= H; ++k) {
            z = m.dynamics(g, z, g.constant(batch.actions[k - 1]));
            Var obs = g.constant(batch.states[k]);
            auto next = m.encode(g, obs, obs);
            // Not detached: the action term keeps the encoder from collapsing.
            Var latent_term = mse(z, next.mean);
            Var act_term = mse(m.invert(g, prev_mean, next.mean), g.constant(batch.actions[k - 1]));
            rep.per_step.push_back(latent_term.value().item() + act_term.value().item());
            recon = recon + latent_term + act_term;
            action_loss = action_loss + act_term;
            prev_mean = next.mean;
        }
        rep.action_mse = action_loss.value().item() / static_cast<double>(H);
    }
    Var total = recon + ndiff::scale(kl, m.config().kl_weight);
    rep.reconstruction = recon.value().item();
    rep.kl = kl.value().item();
    rep.total = total.value().item();
    return {total, rep};
}

TrainResult train(ModelBundle& m, const data::Dataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                  const std::filesystem::path& checkpoint_dir) {
    const envs::Environment env(m.config().env_id);
    if (env.observation_dim() != m.config().obs_dim) {
        throw std::invalid_argument("model observation dimension does not match environment " + env.spec().id);
    }
    data::BatchSampler sampler(ds, env, cfg.window);
    if (cfg.max_horizon > sampler.max_horizon()) {
        throw std::invalid_argument("max horizon " + std::to_string(cfg.max_horizon) + " exceeds window capacity " +
                                    std::to_string(sampler.max_horizon()));
    }
    TrainResult result;
    const std::size_t L = m.config().latent_dim;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::size_t H = data::curriculum_horizon(step, cfg.curriculum_quota, cfg.max_horizon);
        // The inverse model needs one transition; it alone sees H = 1 during the first stage.
        if (m.variant() == Variant::inverse) H = std::max<std::size_t>(H, 1);
        Rng batch_rng = make_rng(seed, {0x6261746368ULL, step});
        Rng noise_rng = make_rng(seed, {0x6e6f697365ULL, step});
        const data::WindowBatch batch = sampler.sample(cfg.batch_size, H, batch_rng);
        Tensor noise = Tensor::matrix(cfg.batch_size, L);
        for (double& x : noise.data()) x = standard_normal(noise_rng);

        LossReport rep;
        try {
            Graph g;
            LossGraph loss = training_loss(g, m, batch, noise);
            rep = loss.report;
            if (!std::isfinite(rep.total)) throw std::domain_error("non-finite loss");
            g.backward(loss.total);
            ndiff::adam_step(m.params(), cfg.learning_rate);
        } catch (const std::domain_error& e) {
            m.params().zero_grad();
            if (!checkpoint_dir.empty()) save_model(checkpoint_dir, m, {{"aborted_at_step", std::to_string(step)}});
            throw std::runtime_error("training aborted at step " + std::to_string(step) + ": " + e.what());
        }
        rep.step = step;
        if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) result.curve.push_back(rep);
        result.last = rep;
    }
    return result;
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
    return out;
}

}  // namespace

void save_model(const std::filesystem::path& dir, const ModelBundle& m, const std::map<std::string, std::string>& extra_meta) {
    std::filesystem::create_directories(dir);
    ndiff::save_params(dir / "weights.gapw", m.params());
    const auto& c = m.config();
    std::map<std::string, std::string> meta = extra_meta;
    meta["variant"] = std::string(variant_name(c.variant));
    meta["env"] = c.env_id;
    meta["obs_dim"] = std::to_string(c.obs_dim);
    meta["action_dim"] = std::to_string(c.action_dim);
    meta["latent_dim"] = std::to_string(c.latent_dim);
    meta["hidden"] = join_sizes(c.hidden);
    std::ostringstream kl;
    kl.precision(17);
    kl << c.kl_weight;
    meta["kl_weight"] = kl.str();
    const auto tmp = dir / "model.meta.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        for (const auto& [k, v] : meta) out << k << "=" << v << "\n";
    }
    std::filesystem::rename(tmp, dir / "model.meta");
}

std::map<std::string, std::string> read_meta(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::map<std::string, std::string> meta;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error(file.string() + ": malformed line: " + line);
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

ModelBundle load_model(const std::filesystem::path& dir) {
    const auto meta = read_meta(dir / "model.meta");
    auto need = [&](const std::string& k) -> const std::string& {
        auto it = meta.find(k);
        if (it == meta.end()) throw std::runtime_error((dir / "model.meta").string() + ": missing key " + k);
        return it->second;
    };
    ModelConfig c;
    c.variant = parse_variant(need("variant"));
    c.env_id = need("env");
    c.obs_dim = std::stoul(need("obs_dim"));
    c.action_dim = std::stoul(need("action_dim"));
    c.latent_dim = std::stoul(need("latent_dim"));
    c.hidden = parse_sizes(need("hidden"));
    c.kl_weight = std::stod(need("kl_weight"));
    ModelBundle m(c, 0);
    ndiff::load_params(dir / "weights.gapw", m.params());
    return m;
}

}  // namespace gap::models
