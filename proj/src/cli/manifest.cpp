#include "gap/cli/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <memory>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>

#include "json.hpp"

namespace gap::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read input " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string git_blob_hash(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw std::runtime_error("sha1 failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned char b : std::span(digest, len)) {
        std::snprintf(buf, sizeof buf, "%02x", b);
        hex += buf;
    }
    return hex;
}

std::string hash_inputs(const std::vector<fs::path>& inputs, std::string_view config_dump) {
    std::vector<std::string> lines{"config " + git_blob_hash(config_dump)};
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::recursive_directory_iterator(in)) {
                if (e.is_regular_file()) lines.push_back(e.path().generic_string() + " " + git_blob_hash(read_file(e.path())));
            }
        } else {
            lines.push_back(in.generic_string() + " " + git_blob_hash(read_file(in)));
        }
    }
    std::sort(lines.begin(), lines.end());
    std::string joined;
    for (const auto& l : lines) joined += l + '\n';
    return git_blob_hash(joined);
}

void write_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest::RunManifest(fs::path out_dir, std::string command, const Config& cfg, std::uint64_t seed,
                         std::vector<fs::path> inputs, const std::string& stem)
    : out_dir_(std::move(out_dir)),
      path_(out_dir_ / (stem + ".json")),
      command_(std::move(command)),
      config_dump_(cfg.dump()),
      seed_(seed),
      inputs_(std::move(inputs)),
      hash_(hash_inputs(inputs_, config_dump_)),
      started_(utc_timestamp()) {
    const std::string config_name = stem == "manifest" ? "config.resolved" : stem + ".config";
    write_atomic(out_dir_ / config_name, config_dump_);
    outputs_.push_back(config_name);
    write("running", "");
}

void RunManifest::add_output(const fs::path& p) {
    const std::string rel = p.lexically_relative(out_dir_).generic_string();
    const std::string name = rel.empty() || rel.starts_with("..") ? p.generic_string() : rel;
    if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
}

void RunManifest::finish(std::string_view status) { write(status, utc_timestamp()); }

void RunManifest::write(std::string_view status, const std::string& finished) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["seed"] = seed_;
    j["input_hash"] = hash_;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& p : inputs_) inputs.push_back(p.generic_string());
    j["inputs"] = inputs;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    std::istringstream lines(config_dump_);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find(" = ");
        if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    j["config"] = cfg;
    j["started"] = started_;
    j["finished"] = finished.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(finished);
    j["status"] = status;
    j["outputs"] = outputs_;
    write_atomic(path_, j.dump(2) + "\n");
}

}  // namespace gap::cli
