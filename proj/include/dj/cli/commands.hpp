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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dj/common/error.hpp"

namespace dj::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitAborted = 3;
inline constexpr int kExitResumeMismatch = 4;

int exit_code_for(ErrorCode code);

/// Prints `error[<Code>]: <message>` on one line.
void print_error(std::ostream& err, ErrorCode code, const std::string& message);

struct ProcessArgs {
    fs::path config;
    std::vector<std::string> overrides;
    bool no_optimize = false;
    bool speed_only = false;
    std::optional<fs::path> resume;
    std::optional<fs::path> plan;
    std::optional<std::size_t> stop_after;
};

struct AnalyzeArgs {
    std::optional<fs::path> dataset;
    std::optional<fs::path> config;
    std::vector<std::string> overrides;
    std::optional<fs::path> out_dir;
    std::optional<double> threshold;
};

struct ProbeArgs {
    fs::path config;
    std::vector<std::string> overrides;
    std::optional<fs::path> dataset;
    std::optional<fs::path> output;
};

struct PlanArgs {
    fs::path config;
    std::vector<std::string> overrides;
    std::optional<fs::path> dataset;
    std::optional<fs::path> probe;
    std::optional<fs::path> output;
    bool no_optimize = false;
    bool speed_only = false;
};

struct SplitArgs {
    fs::path dataset;
    std::uint64_t target_bytes = 0;
    std::optional<std::size_t> parts;
    fs::path out_dir;
};

struct DedupArgs {
    fs::path dataset;
    std::optional<fs::path> output;
    std::optional<fs::path> report;
    double threshold = 0.7;
    std::size_t num_permutations = 256;
    std::size_t shingle_size = 5;
    std::uint64_t seed = 42;
    std::string keep = "first";
    bool fast = false;
    std::size_t shards = 0;
    std::size_t threads = 1;
    std::optional<std::string> exact;
};

struct ValidateArgs {
    fs::path config;
    std::vector<std::string> overrides;
    bool check_dataset = false;
    std::string goal = "pretrain";
};

// Each command reports progress on `out`, errors on `err`, and returns the
// process exit code. None of them throw.
int cmd_process(const ProcessArgs& args, std::ostream& out, std::ostream& err);
int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);
int cmd_probe(const ProbeArgs& args, std::ostream& out, std::ostream& err);
int cmd_plan(const PlanArgs& args, std::ostream& out, std::ostream& err);
int cmd_split(const SplitArgs& args, std::ostream& out, std::ostream& err);
int cmd_dedup(const DedupArgs& args, std::ostream& out, std::ostream& err);
int cmd_list_ops(bool as_json, std::ostream& out, std::ostream& err);
int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err);

/// Parses "1048576", "256KiB", "0.25MiB", "1GB" and similar.
std::uint64_t parse_byte_size(const std::string& text);

/// Full command line entry point, argv[0] included.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dj::cli
