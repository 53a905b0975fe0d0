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
#include <string_view>
#include <vector>

#include "dj/exec/fault.hpp"
#include "dj/io/dataset.hpp"
#include "dj/ops/registry.hpp"

namespace dj {

namespace fs = std::filesystem;

struct RecipeOp {
    std::string name;
    Json params = Json::object();
};

struct Recipe {
    std::string project_name;
    fs::path dataset_path;
    fs::path export_path;
    /// Global worker cap; 0 means one per CPU.
    std::size_t np = 0;
    DatasetMode mode = DatasetMode::kMaterialized;
    bool optimize = true;
    bool speed_only = false;
    FaultPolicy fault;
    fs::path checkpoint_dir;
    bool use_checkpoint = false;
    std::uint64_t seed = 42;
    std::size_t probe_sample_size = 1000;
    std::size_t monitor_interval_ms = 500;
    bool drop_placeholders = false;
    double shift_threshold = 0.2;
    std::vector<std::uint64_t> accelerator_slots;
    std::vector<RecipeOp> process;

    /// Unknown keys and other non-fatal findings from parsing.
    std::vector<std::string> warnings;

    Json to_json() const;
    /// Throws Error(kRecipeParse) on malformed values.
    static Recipe from_json(const Json& j);
};

/// YAML text to the JSON data model. Quoted scalars stay strings; plain
/// scalars become null, booleans or numbers when they read as such.
Json yaml_to_json(std::string_view yaml_text);
std::string json_to_yaml(const Json& j);

Recipe parse_recipe(std::string_view yaml_text, const std::vector<std::string>& overrides = {});

/// Reads and parses a recipe file. Throws Error(kRecipeParse) or
/// Error(kSourceNotFound). DJ_SEED in the environment replaces `seed`.
Recipe load_recipe(const fs::path& path, const std::vector<std::string>& overrides = {});

std::string recipe_to_yaml(const Recipe& recipe);

/// Applies one `dotted.key=value` override; the value is read as YAML.
void apply_override(Json& recipe_json, std::string_view assignment);

/// Identifies the data-affecting part of a recipe (dataset and process
/// list); used to match checkpoints.
std::string recipe_digest(const Recipe& recipe);

/// Resolves every process entry against the registry. Throws
/// Error(kUnknownOp) or Error(kParamValidation) before any data is read.
std::vector<OpDescriptor> resolve_ops(const Recipe& recipe,
                                      const OpRegistry& registry = default_registry());

} // namespace dj
