#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gap/cli/config.hpp"

namespace gap::cli {

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
std::string git_blob_hash(std::string_view content);

/// Hash over named inputs: each file (or every file under a directory) is
/// blob-hashed, and the sorted "path hash" lines are blob-hashed again.
std::string hash_inputs(const std::vector<std::filesystem::path>& inputs, std::string_view config_dump);

/// Writes `content` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

/// <stem>.json in the output directory: written when a command starts,
/// rewritten with the end time, status and outputs when it finishes. The
/// resolved config goes next to it (config.resolved for the default stem).
class RunManifest {
public:
    RunManifest(std::filesystem::path out_dir, std::string command, const Config& cfg, std::uint64_t seed,
                std::vector<std::filesystem::path> inputs, const std::string& stem = "manifest");

    void add_output(const std::filesystem::path& p);
    /// Status is "ok", "acceptance_failed", "usage_error" or "internal_error".
    void finish(std::string_view status);

    const std::filesystem::path& path() const noexcept { return path_; }
    const std::string& input_hash() const noexcept { return hash_; }

private:
    void write(std::string_view status, const std::string& finished) const;

    std::filesystem::path out_dir_, path_;
    std::string command_;
    std::string config_dump_;
    std::uint64_t seed_;
    std::vector<std::filesystem::path> inputs_;
    std::vector<std::string> outputs_;
    std::string hash_, started_;
};

std::string utc_timestamp();

}  // namespace gap::cli
