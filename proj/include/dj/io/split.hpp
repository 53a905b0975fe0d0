// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dj/schema/sample.hpp"

namespace dj {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kDefaultSplitTargetBytes = 128ULL * 1024 * 1024;

struct SplitPart {
    fs::path path;
    std::uint64_t byte_size = 0;
    std::size_t sample_count = 0;
};

struct SplitManifest {
    std::vector<SplitPart> parts;
    std::uint64_t target_bytes = 0;
    std::uint64_t total_bytes = 0;
    std::string origin_digest;
    /// One entry per line larger than target_bytes; such a line gets a
    /// part of its own.
    std::vector<std::string> warnings;

    Json to_json() const;
    static SplitManifest from_json(const Json& j);
};

inline constexpr const char* kSplitManifestName = "split_manifest.json";

/// Cuts `source` into `part-NNNNN.jsonl` files under `out_dir` on line
/// boundaries. Part count is at least max(part_count_hint,
/// ceil(total / target_bytes)); parts are padded with empty files when the
/// hint exceeds what the line layout yields. Writes the manifest as
/// `split_manifest.json` next to the parts.
SplitManifest split_subsets(const fs::path& source, std::uint64_t target_bytes,
                            std::optional<std::size_t> part_count_hint, const fs::path& out_dir);

} // namespace dj
