#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gap/cli/config.hpp"
#include "gap/cli/criteria.hpp"

namespace gap::cli {

/// A pipeline stage failed; `stage()` names it.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("stage " + stage + " failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct ReproduceOptions {
    std::filesystem::path out;
    std::uint64_t seed = 7;
    Config config;
    std::size_t jobs = 1;
    std::ostream* log = nullptr;
};

struct ReproduceResult {
    std::vector<CriterionResult> criteria;  // 1..8; determinism needs a second run
    std::filesystem::path summary;

    bool all_pass() const;
};

/// Runs every stage into `out`. A stage whose record already exists under
/// out/stages is loaded instead of rerun, so an interrupted run resumes at
/// the first unfinished stage (each trained model is its own stage).
ReproduceResult reproduce(const ReproduceOptions& opt);

/// target,bucket_lo,bucket_hi,magnitude,trials,success_rate,ci95; the first
/// row is the noise-free baseline (bucket 0..100, magnitude 0).
void write_noise_csv(const std::filesystem::path& path, const theorylab::SweepReport& r);

/// Variants trained for training seed `index`: gap, standard and gap_no_goal
/// always; the two ablations only for the first seed.
std::vector<models::Variant> variants_for_seed(std::size_t index);

}  // namespace gap::cli
