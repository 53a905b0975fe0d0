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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dj/exec/fault.hpp"
#include "dj/io/checkpoint.hpp"
#include "dj/io/dataset.hpp"
#include "dj/planner/planner.hpp"

namespace dj {

namespace fs = std::filesystem;

/// Exact sample accounting for one run. Keys of the per-op maps are
/// "<plan position>:<op name>".
struct RunCounters {
    std::size_t processed = 0;
    std::size_t kept = 0;
    std::map<std::string, std::size_t> dropped_by_filter;
    std::size_t dedup_removed = 0;
    /// Extra samples created by one-to-many mappers.
    std::size_t expanded = 0;
    /// Samples folded into others by groupers and similar ops.
    std::size_t merged = 0;
    std::size_t skipped_batches = 0;
    std::size_t lost_in_skipped = 0;
    std::size_t filled_batches = 0;
    std::size_t placeholder_samples = 0;
    std::size_t retried_batches = 0;
    std::map<std::string, double> wall_time;

    std::size_t total_dropped() const;
    /// processed + expanded == kept + dropped + dedup_removed + merged + lost_in_skipped
    bool conserved() const;

    Json to_json() const;
    static RunCounters from_json(const Json& j);
};

/// A batch that exhausted its retries.
struct FailedBatch {
    std::size_t step = 0;
    std::string op;
    std::vector<std::size_t> ordinals;
    std::string error;
    FaultMode action = FaultMode::kSkipBatch;
};

struct FailureOutcome {
    FaultMode action = FaultMode::kSkipBatch;
    /// Placeholders standing in for the batch under fill_empty.
    std::vector<Sample> replacement;
};

/// Applies the policy action to a batch whose retries are exhausted.
FailureOutcome handle_batch_failure(const Batch& batch, const FaultPolicy& policy,
                                    const Sample& prototype);

struct ExecOptions {
    FaultPolicy policy;
    /// Cap on workers per step; 0 leaves the plan's allocation.
    std::size_t np = 0;
    fs::path checkpoint_root;
    std::string recipe_digest;
    /// Scratch space for streaming snapshots when checkpoints are off.
    fs::path work_dir;
    /// Simulated interruption: stop once this plan position is complete.
    std::optional<std::size_t> stop_after;
    fs::path monitor_log;
    std::size_t monitor_interval_ms = 500;
    fs::path drop_log;
    fs::path export_path;
    bool drop_placeholders = false;
    std::uint64_t seed = 42;
    std::size_t io_threads = 4;
};

struct RunOutcome {
    Dataset dataset;
    RunCounters counters;
    bool aborted = false;
    bool stopped = false;
    std::string abort_reason;
    std::vector<FailedBatch> failed_batches;
    /// Structured reports of global ops, keyed like the counters.
    Json op_reports = Json::object();
    std::optional<ExportReport> exported;
    double wall_time = 0.0;

    Json report_json() const;
};

/// Executes plan positions in order, checkpointing after each when a root
/// is set. With `from`, execution continues after the checkpointed
/// position using its snapshot and counters.
RunOutcome run_pipeline(const ExecutionPlan& plan, const Dataset& dataset,
                        const ExecOptions& options, const std::optional<ResumePoint>& from = {},
                        const OpRegistry& registry = default_registry());

} // namespace dj
