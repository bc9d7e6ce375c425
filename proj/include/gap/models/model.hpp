#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gap/data/windows.hpp"
#include "gap/models/mlp.hpp"
#include "gap/ndiff/graph.hpp"
#include "gap/ndiff/params.hpp"

namespace gap::models {

enum class Variant { standard, gap, gap_no_goal, gap_no_residual, inverse };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
std::vector<Variant> all_variants();

/// What a variant's encoder is conditioned on besides the current observation.
enum class Context { none, goal, start };

/// The (encoder inputs, decoder target, output head) triple of a variant.
struct Wiring {
    Context context;
    bool residual_target;  // decoder predicts ctx - s rather than s
    bool has_decoder;
    OutputHead head;
};
Wiring wiring(Variant v);

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 4.0;

struct ModelConfig {
    Variant variant = Variant::gap;
    std::string env_id;
    std::size_t obs_dim = 0;
    std::size_t action_dim = 2;
    std::size_t latent_dim = 16;
    std::vector<std::size_t> hidden{128, 128};
    double kl_weight = 1e-3;
};

/// Diagonal-Gaussian latent belief for a batch: rows are samples.
struct LatentBatch {
    ndiff::Tensor mean;
    ndiff::Tensor log_var;
};

struct LossReport {
    double total = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    std::vector<double> per_step;  // k = 0..H (decoder variants) or 1..H (inverse)
    double action_mse = 0.0;       // inverse variant only
    std::size_t step = 0;
    std::size_t horizon = 0;
};

/// Encoder, decoder and latent dynamics of one variant, plus their parameters.
class ModelBundle {
public:
    ModelBundle(ModelConfig cfg, std::uint64_t init_seed);

    const ModelConfig& config() const noexcept { return cfg_; }
    Variant variant() const noexcept { return cfg_.variant; }
    const Wiring& wiring() const noexcept { return wiring_; }
    ndiff::ParamStore& params() noexcept { return params_; }
    const ndiff::ParamStore& params() const noexcept { return params_; }

    // Value-only inference on row batches. `ctx` is ignored by variants whose
    // encoder takes no context.
    LatentBatch encode(const ndiff::Tensor& obs, const ndiff::Tensor& ctx) const;
    ndiff::Tensor decode(const ndiff::Tensor& z) const;
    /// Mean of the next latent; the rollout propagates means.
    ndiff::Tensor dynamics(const ndiff::Tensor& z, const ndiff::Tensor& actions) const;
    ndiff::Tensor invert(const ndiff::Tensor& z, const ndiff::Tensor& z_next) const;

    // Differentiable counterparts used in training.
    struct GraphLatent {
        ndiff::Var mean;
        ndiff::Var log_var;
    };
    GraphLatent encode(ndiff::Graph& g, ndiff::Var obs, ndiff::Var ctx);
    ndiff::Var decode(ndiff::Graph& g, ndiff::Var z);
    ndiff::Var dynamics(ndiff::Graph& g, ndiff::Var z, ndiff::Var actions);
    ndiff::Var invert(ndiff::Graph& g, ndiff::Var z, ndiff::Var z_next);

private:
    void check_obs(const ndiff::Tensor& t, const char* what) const;

    ModelConfig cfg_;
    Wiring wiring_;
    ndiff::ParamStore params_;
    Mlp encoder_;
    Mlp decoder_;
    Mlp dynamics_;
    Mlp inverse_;
};

/// Encoder context for a variant given the prediction start and the goal.
const ndiff::Tensor& context_for(Variant v, const ndiff::Tensor& start, const ndiff::Tensor& goal);

/// Decoder targets for step k of a batch (residuals or raw observations).
ndiff::Tensor target_for(Variant v, const data::WindowBatch& batch, std::size_t k);

/// Multi-step loss on a batch: encode, sample z by reparameterisation with
/// `noise` (B x L standard normals), roll the dynamics open-loop for H steps,
/// decode every step and sum the per-step MSEs, plus kl_weight * KL at the
/// encoder. The inverse variant replaces reconstruction by latent regression
/// onto the encodings of the successor states plus action prediction.
struct LossGraph {
    ndiff::Var total;
    LossReport report;
};
LossGraph training_loss(ndiff::Graph& g, ModelBundle& m, const data::WindowBatch& batch, const ndiff::Tensor& noise);

/// Closed-form KL(N(mean, exp(log_var)) || N(0, I)), summed over latent dims
/// and averaged over rows.
double kl_to_unit_gaussian(const LatentBatch& d);

/// Worst relative error between the backward gradient of training_loss and
/// central differences, over `probes` randomly chosen parameter entries.
/// Parameters are restored afterwards; gradients are left accumulated.
double loss_gradient_error(ModelBundle& m, const data::WindowBatch& batch, const ndiff::Tensor& noise,
                           std::size_t probes, std::uint64_t seed);

struct TrainConfig {
    std::size_t steps = 20000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-4;
    std::size_t curriculum_quota = 2000;
    std::size_t max_horizon = 10;
    data::WindowSpec window{};
    std::size_t log_every = 100;
};

struct TrainResult {
    std::vector<LossReport> curve;  // every log_every steps and the final step
    LossReport last;
};

/// `steps` Adam updates with the curriculum horizon. Deterministic per seed;
/// batches depend only on (seed, step) so all variants see the same data.
/// If `checkpoint_dir` is non-empty the last good parameters are written
/// there when a non-finite loss aborts training.
TrainResult train(ModelBundle& m, const data::Dataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                  const std::filesystem::path& checkpoint_dir = {});

/// Checkpoint directory: weights.gapw plus model.meta (flat key=value).
void save_model(const std::filesystem::path& dir, const ModelBundle& m,
                const std::map<std::string, std::string>& extra_meta = {});
ModelBundle load_model(const std::filesystem::path& dir);
std::map<std::string, std::string> read_meta(const std::filesystem::path& file);

}  // namespace gap::models
