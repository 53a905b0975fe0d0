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

#include "dj/io/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

namespace {

void write_json_atomically(const fs::path& path, const Json& j) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::kTargetUnwritable, fmt::format("cannot write '{}'", tmp.string()));
        }
        out << j.dump(2) << "\n";
        if (!out) {
            throw Error(ErrorCode::kTargetUnwritable, fmt::format("cannot write '{}'", tmp.string()));
        }
    }
    fs::rename(tmp, path);
}

std::optional<Checkpoint> latest_in(const fs::path& digest_dir) {
    std::optional<Checkpoint> best;
    std::error_code ec;
    if (!fs::is_directory(digest_dir, ec)) {
        return best;
    }
    for (const auto& entry : fs::directory_iterator(digest_dir)) {
        if (!entry.is_directory() || !fs::exists(entry.path() / kCheckpointManifestName)) {
            continue;
        }
        Checkpoint c = read_checkpoint(entry.path());
        if (!best || c.completed_op_index > best->completed_op_index) {
            best = std::move(c);
        }
    }
    return best;
}

} // namespace

Json Checkpoint::to_json() const {
    Json j = Json::object();
    j["recipe_digest"] = recipe_digest;
    j["completed_op_index"] = completed_op_index;
    j["parts"] = parts;
    j["counters"] = counters;
    return j;
}

Checkpoint Checkpoint::from_json(const Json& j, const fs::path& dir) {
    Checkpoint c;
    c.recipe_digest = j.at("recipe_digest").get<std::string>();
    c.completed_op_index = j.at("completed_op_index").get<int>();
    c.parts = j.at("parts").get<std::vector<std::string>>();
    c.counters = j.value("counters", Json::object());
    c.dataset_snapshot = dir;
    return c;
}

fs::path checkpoint_dir(const fs::path& root, const std::string& recipe_digest, int op_index) {
    return root / recipe_digest / std::to_string(op_index);
}

Checkpoint write_checkpoint(const fs::path& root, const std::string& recipe_digest,
                            int completed_op_index, const Json& counters) {
    Checkpoint c;
    c.recipe_digest = recipe_digest;
    c.completed_op_index = completed_op_index;
    c.dataset_snapshot = checkpoint_dir(root, recipe_digest, completed_op_index);
    c.counters = counters;
    std::error_code ec;
    fs::create_directories(c.dataset_snapshot, ec);
    for (const auto& entry : fs::directory_iterator(c.dataset_snapshot)) {
        auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.starts_with("part-") && name.ends_with(".jsonl")) {
            c.parts.push_back(name);
        }
    }
    std::sort(c.parts.begin(), c.parts.end());
    write_json_atomically(c.dataset_snapshot / kCheckpointManifestName, c.to_json());
    return c;
}

Checkpoint read_checkpoint(const fs::path& dir) {
    std::ifstream in(dir / kCheckpointManifestName);
    if (!in) {
        throw Error(ErrorCode::kSourceNotFound,
                    fmt::format("no checkpoint manifest in '{}'", dir.string()));
    }
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw Error(ErrorCode::kIo, fmt::format("corrupt checkpoint manifest in '{}'", dir.string()));
    }
    return Checkpoint::from_json(j, dir);
}

Checkpoint find_checkpoint(const fs::path& path, const std::string& recipe_digest) {
    auto matching = [&](Checkpoint c) {
        if (c.recipe_digest != recipe_digest) {
            throw Error(ErrorCode::kRecipeMismatch,
                        fmt::format("checkpoint '{}' belongs to recipe {}, not {}",
                                    c.dataset_snapshot.string(), c.recipe_digest, recipe_digest));
        }
        return c;
    };
    std::error_code ec;
    if (fs::exists(path / kCheckpointManifestName, ec)) {
        return matching(read_checkpoint(path));
    }
    if (auto c = latest_in(path / recipe_digest)) {
        return *c;
    }
    // Either a digest dir of another recipe or a root holding only others.
    if (auto c = latest_in(path)) {
        return matching(*c);
    }
    if (fs::is_directory(path, ec)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_directory()) {
                if (auto c = latest_in(entry.path())) {
                    return matching(*c);
                }
            }
        }
    }
    throw Error(ErrorCode::kSourceNotFound,
                fmt::format("no checkpoint to resume from under '{}'", path.string()));
}

ResumePoint resume(const Checkpoint& checkpoint, const std::string& recipe_digest,
                   DatasetMode mode) {
    if (checkpoint.recipe_digest != recipe_digest) {
        throw Error(ErrorCode::kRecipeMismatch,
                    fmt::format("checkpoint was written by recipe {} but the running recipe is {}",
                                checkpoint.recipe_digest, recipe_digest));
    }
    ResumePoint rp;
    rp.next_op_index = checkpoint.completed_op_index + 1;
    rp.counters = checkpoint.counters;
    std::vector<fs::path> parts;
    for (const auto& p : checkpoint.parts) {
        parts.push_back(checkpoint.dataset_snapshot / p);
    }
    rp.snapshot = Dataset::from_files(std::move(parts), mode);
    return rp;
}

} // namespace dj
