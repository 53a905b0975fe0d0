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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dj/io/dataset.hpp"
#include "dj/ops/registry.hpp"

namespace dj {

inline constexpr std::size_t kMaxProbeSize = 1000;
inline constexpr std::size_t kProbeMiniBatch = 100;
inline constexpr std::uint64_t kDefaultProbeSeed = 42;
inline constexpr double kUtilization = 0.9;
/// Groups up to this size are reordered by exhaustive enumeration.
inline constexpr std::size_t kExactReorderLimit = 8;

struct OpProbe {
    /// Position in the recipe.
    std::size_t index = 0;
    std::string name;
    /// Input samples per second; 0 when the probe failed.
    double speed = 0.0;
    /// Output count over input count.
    double selectivity = 1.0;
    std::uint64_t peak_mem = 0;
    std::uint64_t per_sample_mem = 0;
    double wall_time = 0.0;
    std::size_t probe_sample_size = 0;
    bool failed = false;
    std::string error;
};

struct ProbeReport {
    std::size_t probe_sample_size = 0;
    /// Valid samples in the probed dataset.
    std::size_t dataset_size = 0;
    std::uint64_t seed = kDefaultProbeSeed;
    std::vector<OpProbe> ops;

    const OpProbe* find(std::size_t recipe_index) const;
    Json to_json() const;
    static ProbeReport from_json(const Json& j);
};

struct ProbeOptions {
    std::uint64_t seed = kDefaultProbeSeed;
    std::size_t max_sample_size = kMaxProbeSize;
};

/// Runs every op independently on the same seeded random sample of
/// min(1000, n) valid records. A failing op is recorded, not raised.
ProbeReport probe_small_batch(const Dataset& dataset, const std::vector<OpDescriptor>& ops,
                              const ProbeOptions& options = {},
                              const OpRegistry& registry = default_registry());

/// A maximal run of commutative filters, or a single barrier op.
struct OpGroup {
    std::vector<std::size_t> members;
    bool reorderable = false;
};

std::vector<OpGroup> detect_fusible_groups(const std::vector<OpDescriptor>& ops);

/// Members of a group that share a resource tag, in recipe order. Units
/// with one member are not fused.
std::vector<std::vector<std::size_t>> fusion_units(const OpGroup& group,
                                                    const std::vector<OpDescriptor>& ops);

/// 1 / sum(1 / v_i). Throws Error(kNonPositiveSpeed).
double estimate_fused_speed(const std::vector<double>& speeds);

/// Unit order by speed descending, ties by original position.
std::vector<std::size_t> reorder_group(const std::vector<double>& speeds);

struct Resources {
    std::size_t cpu_count = 1;
    std::uint64_t mem_bytes = 0;
    std::vector<std::uint64_t> accel_slots;

    static Resources detect();
    Json to_json() const;
};

std::size_t select_batch_size(const OpDescriptor& op, std::uint64_t per_sample_mem,
                              std::uint64_t available_mem);

/// Never returns 0. Sets `*warning` when memory alone would allow none.
std::size_t allocate_workers(const OpDescriptor& op, const Resources& resources,
                             std::uint64_t mem_required, std::string* warning = nullptr);

/// One position of a plan: a single op or a fused unit.
struct PlanStep {
    std::vector<std::size_t> recipe_indices;
    OpDescriptor descriptor;
    std::size_t batch_size = 1000;
    std::size_t worker_count = 1;
    double est_speed = 0.0;
    double est_selectivity = 1.0;
    double est_time = 0.0;

    bool fused() const { return recipe_indices.size() > 1; }
};

struct PlanGroup {
    std::vector<PlanStep> steps;
    bool reorderable = false;
};

struct ExecutionPlan {
    std::vector<PlanGroup> groups;
    double estimated_total_time = 0.0;
    /// Estimate for the same steps left in recipe order.
    double original_estimated_time = 0.0;
    std::uint64_t probe_seed = kDefaultProbeSeed;
    bool speed_only = false;
    bool optimized = true;
    std::vector<std::string> warnings;

    std::vector<const PlanStep*> steps() const;
    std::size_t step_count() const;

    Json to_json() const;
    /// Rebuilds a plan for `ops`. Throws Error(kPlanInvalid) when the JSON
    /// does not describe a valid plan for these ops.
    static ExecutionPlan from_json(const Json& j, const std::vector<OpDescriptor>& ops);
};

struct PlanOptions {
    bool speed_only = false;
    bool fuse = true;
    bool reorder = true;
};

/// Estimated time of running units in the given order on n samples, with
/// n shrinking by each unit's selectivity.
double estimate_cost(const std::vector<double>& speeds, const std::vector<double>& selectivities,
                     const std::vector<std::size_t>& order, double n);

ExecutionPlan plan(const std::vector<OpDescriptor>& ops, const ProbeReport& probe,
                   const Resources& resources, const PlanOptions& options = {});

/// Recipe order, no fusion, batch and worker sizing only.
ExecutionPlan identity_plan(const std::vector<OpDescriptor>& ops, const Resources& resources,
                            const ProbeReport* probe = nullptr);

/// Checks every op appears exactly once and nothing crosses a barrier.
void validate_plan(const ExecutionPlan& plan, const std::vector<OpDescriptor>& ops);

} // namespace dj
