#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gap/analysis/analysis.hpp"
#include "gap/ndiff/gradcheck.hpp"
#include "gap/theorylab/noise.hpp"
#include "gap/theorylab/theorem.hpp"

namespace gap::cli {

/// Acceptance thresholds. Both `gap reproduce` and the acceptance binary
/// judge with these.
namespace limits {
inline constexpr std::size_t kFuzzTrials = 10000;
inline constexpr std::size_t kFuzzN = 100;
inline constexpr std::size_t kFuzzWorstCase = 1000;
inline constexpr double kFuzzSeconds = 10.0;

inline constexpr double kOpGradient = 1e-4;
inline constexpr double kLossGradient = 1e-3;
inline constexpr double kGradientSeconds = 30.0;

inline constexpr std::size_t kNoiseTrials = 500;
inline constexpr double kNoiseCostMagnitude = 0.5;
inline constexpr double kNoiseTopBucketSlack = 0.05;
inline constexpr double kNoiseCostSpread = 0.15;
inline constexpr std::size_t kNoiseInversions = 1;
inline constexpr double kNoiseModelMagnitude = 0.2;
inline constexpr double kNoiseModelSpread = 0.10;
inline constexpr double kNoiseModelSlack = 0.05;
inline constexpr double kNoiseSeconds = 120.0;

inline constexpr std::size_t kHarnessTrials = 100;
inline constexpr double kOraclePointNav = 0.95;
inline constexpr double kOracleBlockPush = 0.70;
inline constexpr double kRandomBlockPush = 0.15;

inline constexpr std::size_t kProfileSeeds = 5;
inline constexpr std::size_t kProfileWins = 4;
inline constexpr std::size_t kProfileStep = 15;
inline constexpr std::size_t kProfileSequences = 1000;
inline constexpr double kSeedSeconds = 600.0;

inline constexpr std::size_t kSuccessSeeds = 3;
inline constexpr std::size_t kSuccessWins = 2;
inline constexpr std::size_t kSuccessTrials = 100;

// Rates are compared with this slack so that "within 5 points" includes 5.
inline constexpr double kRateSlack = 1e-9;
}  // namespace limits

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string measured;  // the judged numbers; never timings
    std::string required;
};

struct GradientReport {
    std::vector<ndiff::OpCheck> ops;
    std::vector<ndiff::OpCheck> losses;  // one per model variant
};

/// Every op over 100 random inputs, then training_loss of every variant on a
/// small BlockPush batch.
GradientReport run_gradient_checks(std::uint64_t seed);

struct PropertyResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::string first_failure;
};

/// Zero residual at the goal, dataset round trip, window boundaries, CEM
/// elite monotonicity and argmin tie-breaking.
std::vector<PropertyResult> run_property_suites(std::uint64_t seed);

struct HarnessReport {
    double oracle_pointnav = 0.0;
    double oracle_blockpush = 0.0;
    double random_blockpush = 0.0;
    std::size_t trials = 0;
};

HarnessReport run_harness(const planner::CemConfig& cem, std::size_t trials, std::uint64_t seed);

/// Error profile of one training seed, reduced to the judged cells.
struct SeedProfile {
    std::size_t seed_index = 0;
    double gap_top10 = 0.0;
    double standard_top10 = 0.0;
    double no_goal_top10 = 0.0;
    double seconds = 0.0;  // collect + train + profile for the three variants
};

struct SeedSuccess {
    std::size_t seed_index = 0;
    double gap_task1 = 0.0, standard_task1 = 0.0;
    double gap_task2 = 0.0, standard_task2 = 0.0;
    std::size_t trials = 0;
};

CriterionResult judge_theorem(const theorylab::FuzzConfig& cfg, const theorylab::FuzzReport& r, double seconds);
CriterionResult judge_gradients(const GradientReport& r, double seconds);
CriterionResult judge_noise_cost(const theorylab::SweepReport& r, double seconds);
CriterionResult judge_noise_model(const theorylab::SweepReport& r, double seconds);
CriterionResult judge_harness(const HarnessReport& r);
CriterionResult judge_error_profiles(const std::vector<SeedProfile>& seeds);
CriterionResult judge_success(const std::vector<SeedSuccess>& seeds);
CriterionResult judge_properties(const std::vector<PropertyResult>& props);
CriterionResult judge_determinism(const std::string& first_summary, const std::string& second_summary);

/// Number of i with rates[i + 1] < rates[i].
std::size_t count_inversions(const std::vector<double>& rates);

/// "criterion,name,pass,measured,required" with one row per result.
std::string summary_csv(const std::vector<CriterionResult>& results);
/// One line per result: "[PASS] 3 noise-cost: measured (required)".
std::string format_result(const CriterionResult& r);

}  // namespace gap::cli
