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

#include "dj/io/dataset.hpp"
#include "dj/schema/sample.hpp"

namespace dj {

namespace fs = std::filesystem;

inline constexpr const char* kCheckpointManifestName = "manifest.json";
inline constexpr const char* kCheckpointPlanName = "plan.json";

/// Snapshot of the dataset after plan position `completed_op_index`,
/// stored as `<root>/<recipe_digest>/<op_index>/part-*.jsonl` plus
/// `manifest.json`. The manifest is written last, so its presence marks a
/// complete snapshot.
struct Checkpoint {
    std::string recipe_digest;
    int completed_op_index = -1;
    fs::path dataset_snapshot;
    /// Executor counters as of this checkpoint; opaque to this module.
    Json counters = Json::object();
    std::vector<std::string> parts;

    Json to_json() const;
    static Checkpoint from_json(const Json& j, const fs::path& dir);
};

fs::path checkpoint_dir(const fs::path& root, const std::string& recipe_digest, int op_index);

/// Writes the manifest for a snapshot whose parts already sit in
/// checkpoint_dir(root, digest, index).
Checkpoint write_checkpoint(const fs::path& root, const std::string& recipe_digest,
                            int completed_op_index, const Json& counters);

/// Reads `<dir>/manifest.json`.
Checkpoint read_checkpoint(const fs::path& dir);

/// Accepts a snapshot directory, a digest directory or a checkpoint root and
/// returns the latest complete snapshot for `recipe_digest`. Throws
/// Error(kRecipeMismatch) when only snapshots of other recipes exist and
/// Error(kSourceNotFound) when there is nothing to resume from.
Checkpoint find_checkpoint(const fs::path& path, const std::string& recipe_digest);

struct ResumePoint {
    int next_op_index = 0;
    Json counters = Json::object();
    Dataset snapshot;
};

/// Throws Error(kRecipeMismatch) when digests differ.
ResumePoint resume(const Checkpoint& checkpoint, const std::string& recipe_digest,
                   DatasetMode mode = DatasetMode::kStreaming);

} // namespace dj
