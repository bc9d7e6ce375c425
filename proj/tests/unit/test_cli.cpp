#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gap/cli/config.hpp"
#include "gap/cli/manifest.hpp"
#include "gap/cli/pipeline.hpp"
#include "json.hpp"

using namespace gap;
using namespace gap::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const char* name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string error_of(std::string_view text) {
    try {
        parse_config_text(text, "run.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("empty config gives every default") {
    const Config c = parse_config_text("", "run.cfg");
    const auto cem = c.cem();
    CHECK(cem.candidates == 1000);
    CHECK(cem.elites == 10);
    CHECK(cem.horizon == 15);
    CHECK(cem.ranking == planner::Ranking::summed);
    CHECK(c.train().steps == 20000);
    CHECK(c.train().batch_size == 32);
    CHECK(c.fuzz().trials == 10000);
    CHECK(c.profile().cohorts.size() == 3);
    CHECK(c.profile().cohorts[0].name == "all");
    CHECK(c.profile().cohorts[2].name == "top10");
    CHECK(c.values().size() == known_keys().size());
}

TEST_CASE("file values and overrides") {
    const Config c = parse_config_text("# comment\n\ncem.candidates = 500\n model.hidden=64, 64 \n", "run.cfg",
                                       {{"cem.candidates", "200"}, {"cem.ranking", "terminal"}});
    CHECK(c.cem().candidates == 200);
    CHECK(c.cem().ranking == planner::Ranking::terminal);
    CHECK(c.sizes("model.hidden") == std::vector<std::size_t>{64, 64});
}

TEST_CASE("errors name the line") {
    CHECK(error_of("cem.candidates = 1000\ncem.candidates = 10\n") == "run.cfg:2: duplicate key 'cem.candidates'");
    CHECK(error_of("\ncem.candidatez = 1\n") == "run.cfg:2: unknown key 'cem.candidatez'");
    CHECK(error_of("cem.candidates 1000\n").starts_with("run.cfg:1: expected 'key = value'"));
    CHECK(error_of("x\n# ok\ncem.elites = ten\n").starts_with("run.cfg:1:"));
    CHECK(error_of("cem.elites = ten\n") == "run.cfg:1: 'cem.elites' expects integer, got 'ten'");
    CHECK(error_of("cem.keep_elites = yes\n").starts_with("run.cfg:1: 'cem.keep_elites' expects boolean"));
    CHECK(error_of("model.hidden = 64,0\n").starts_with("run.cfg:1:"));
    CHECK(error_of("noise.cost_magnitudes = 0.1,nan\n").starts_with("run.cfg:1:"));
    CHECK_THROWS_AS(parse_config_text("cem.elites = 2000\n", "run.cfg").cem(), ConfigError);
    CHECK_THROWS_AS(parse_config_text("cem.ranking = best\n", "run.cfg").cem(), ConfigError);
    CHECK_THROWS_AS(parse_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("dump reads back to the same config") {
    const Config c = parse_config_text("train.steps = 123\nnoise.model_magnitudes = 0.2\n", "a");
    const Config d = parse_config_text(c.dump(), "b");
    CHECK(c.values() == d.values());
}

TEST_CASE("latent size follows the observation mode when left at 0") {
    const Config c;
    CHECK(c.model(models::Variant::gap, envs::Environment("blockpush-task1")).latent_dim == 16);
    CHECK(c.model(models::Variant::gap, envs::Environment("blockpush-grid-task1")).latent_dim == 32);
    const Config d = parse_config_text("model.latent_dim = 8\n", "a");
    CHECK(d.model(models::Variant::gap, envs::Environment("blockpush-grid-task1")).latent_dim == 8);
}

TEST_CASE("git blob hash matches git hash-object") {
    // printf 'hello\n' | git hash-object --stdin
    CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST_CASE("input hash changes with content") {
    const auto dir = scratch("gap_test_hash");
    std::ofstream(dir / "a.txt") << "one";
    const auto h1 = hash_inputs({dir / "a.txt"}, "k = v\n");
    CHECK(h1 == hash_inputs({dir / "a.txt"}, "k = v\n"));
    CHECK(h1 != hash_inputs({dir / "a.txt"}, "k = w\n"));
    std::ofstream(dir / "a.txt") << "two";
    CHECK(h1 != hash_inputs({dir / "a.txt"}, "k = v\n"));
    CHECK_THROWS(hash_inputs({dir / "missing"}, ""));
    fs::remove_all(dir);
}

TEST_CASE("manifest is written at start and finalized") {
    const auto dir = scratch("gap_test_manifest");
    const Config cfg;
    RunManifest m(dir, "plan", cfg, 7, {});
    auto read = [&] {
        std::ifstream in(m.path());
        return nlohmann::json::parse(in);
    };
    auto j = read();
    CHECK(j["status"] == "running");
    CHECK(j["finished"].is_null());
    CHECK(j["seed"] == 7);
    CHECK(j["config"]["cem.candidates"] == "1000");
    CHECK(j["input_hash"].get<std::string>().size() == 40);
    m.add_output(dir / "report.csv");
    m.add_output(dir / "report.csv");
    m.finish("ok");
    j = read();
    CHECK(j["status"] == "ok");
    CHECK(j["outputs"] == nlohmann::json::array({"config.resolved", "report.csv"}));
    CHECK(fs::exists(dir / "config.resolved"));
    CHECK(!fs::exists(dir / "manifest.json.tmp"));
    fs::remove_all(dir);
}

namespace {

std::string read_all(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

ReproduceOptions tiny_run(const fs::path& out) {
    ReproduceOptions o;
    o.out = out;
    o.config = parse_config_text("", "tiny",
                                 {{"train.steps", "30"},          {"data.episodes", "12"},
                                  {"profile.sequences", "40"},    {"profile.tasks", "2"},
                                  {"success.trials", "2"},        {"noise.trials", "10"},
                                  {"noise.sequences", "20"},      {"fuzz.trials", "50"},
                                  {"fuzz.worst_case", "10"},      {"reproduce.profile_seeds", "2"},
                                  {"reproduce.success_seeds", "1"}, {"reproduce.harness_trials", "2"},
                                  {"cem.candidates", "40"}});
    return o;
}

}  // namespace

TEST_CASE("tiny reproduce is deterministic and resumes from stage records") {
    const auto root = scratch("gap_cli_reproduce");
    const auto a = reproduce(tiny_run(root / "a"));
    const auto b = reproduce(tiny_run(root / "b"));
    REQUIRE(a.criteria.size() == 8);
    const std::string summary = read_all(a.summary);
    CHECK(summary == read_all(b.summary));
    CHECK(judge_determinism(summary, read_all(b.summary)).pass);
    // Undersized runs can never satisfy the pinned trial counts.
    CHECK_FALSE(a.all_pass());

    for (const char* f : {"theorem.csv", "seed0/error_profile.csv", "seed0/success.csv", "seed1/models/gap/weights.gapw",
                          "timings.csv", "manifest.json", "config.resolved"}) {
        CHECK_MESSAGE(fs::exists(root / "a" / f), f);
    }
    CHECK_FALSE(fs::exists(root / "a" / "seed1" / "models" / "inverse"));
    const auto manifest = nlohmann::json::parse(read_all(root / "a" / "manifest.json"));
    CHECK(manifest["status"] == "acceptance_failed");
    CHECK_FALSE(manifest["finished"].is_null());

    // Resuming reruns only the stage whose record is missing; the others are
    // loaded as-is, elapsed seconds included.
    const fs::path rec = root / "a" / "stages" / "seed1-error-profile.json";
    REQUIRE(fs::exists(rec));
    const std::string before = read_all(rec);
    fs::remove(root / "a" / "stages" / "theorem-fuzz.json");
    const auto again = reproduce(tiny_run(root / "a"));
    CHECK(read_all(again.summary) == summary);
    CHECK(read_all(rec) == before);
    CHECK(fs::exists(root / "a" / "stages" / "theorem-fuzz.json"));
}
