// Runs `reproduce --seed 7` twice into fresh directories and prints one line
// per acceptance criterion. Exit status is 0 only if all nine pass.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gap/cli/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gap::cli;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    const char* root_env = std::getenv("GAP_ACCEPTANCE_DIR");
    const fs::path root = argc > 1 ? fs::path(argv[1]) : root_env ? fs::path(root_env) : fs::path("acceptance-runs");
    const char* jobs_env = std::getenv("GAP_JOBS");
    try {
        ReproduceResult runs[2];
        for (int i = 0; i < 2; ++i) {
            const fs::path out = root / (i == 0 ? "first" : "second");
            fs::remove_all(out);
            ReproduceOptions opt;
            opt.out = out;
            opt.seed = 7;
            opt.config = parse_config("", {});
            opt.jobs = jobs_env ? std::strtoul(jobs_env, nullptr, 10) : 1;
            opt.log = &std::cerr;
            runs[i] = reproduce(opt);
        }
        bool all = true;
        for (const auto& c : runs[0].criteria) {
            std::cout << format_result(c) << '\n';
            all = all && c.pass;
        }
        const auto det = judge_determinism(slurp(runs[0].summary), slurp(runs[1].summary));
        std::cout << format_result(det) << '\n';
        all = all && det.pass;
        std::cout << (all ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL") << '\n';
        return all ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "acceptance aborted: " << e.what() << '\n';
        return 3;
    }
}
