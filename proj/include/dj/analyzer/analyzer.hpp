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

#include "dj/io/dataset.hpp"
#include "dj/ops/registry.hpp"

namespace dj {

namespace fs = std::filesystem;

inline constexpr std::size_t kDefaultBins = 20;
inline constexpr double kDefaultShiftThreshold = 0.2;

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;

    std::size_t total() const;
};

/// Fixed-width bins over [lo, hi]; the top edge is inclusive. A zero-width
/// range puts every value in the first bin.
Histogram make_histogram(const std::vector<double>& values, double lo, double hi,
                         std::size_t bins = kDefaultBins);

/// Per-stat values of one dataset state. List-valued stats contribute the
/// mean of their elements; an empty list counts as missing.
struct StatsSnapshot {
    int op_index = -1;
    std::string label;
    std::size_t sample_count = 0;
    std::map<std::string, std::vector<double>> values;
    std::map<std::string, std::size_t> missing;
    std::map<std::string, std::map<std::string, std::size_t>> categories;

    /// Histogram over this snapshot's own observed range.
    Histogram histogram(const std::string& stat, std::size_t bins = kDefaultBins) const;
    std::vector<std::string> stat_names() const;
    Json to_json(std::size_t bins = kDefaultBins) const;
};

/// Pure read of `dataset`. Stats listed in `expected` get an entry even
/// when no sample carries them.
StatsSnapshot collect_snapshot(const Dataset& dataset, int op_index, std::string label = {},
                               const std::vector<std::string>& expected = {});

struct StatSummary {
    std::size_t count = 0;
    std::size_t missing = 0;
    double mean = 0.0;
    double min = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
    double max = 0.0;

    Json to_json() const;
};

StatSummary summarize(const std::vector<double>& values, std::size_t missing = 0);

struct InsightRow {
    int before_op = -1;
    int after_op = 0;
    std::string stat;
    bool comparable = false;
    double score = 0.0;
    bool flagged = false;
    StatSummary before;
    StatSummary after;

    Json to_json() const;
};

/// Total variation distance between the normalized histograms of both
/// snapshots on bins shared over the union of their ranges.
double shift_score(const std::vector<double>& before, const std::vector<double>& after,
                   std::size_t bins = kDefaultBins);

InsightRow compare_snapshots(const StatsSnapshot& before, const StatsSnapshot& after,
                             const std::string& stat, double threshold = kDefaultShiftThreshold,
                             std::size_t bins = kDefaultBins);

struct InsightReport {
    std::vector<StatsSnapshot> snapshots;
    std::vector<InsightRow> rows;
    double threshold = kDefaultShiftThreshold;

    Json to_json() const;
};

/// Compares every consecutive snapshot pair on the union of their stats.
InsightReport build_report(std::vector<StatsSnapshot> snapshots,
                           double threshold = kDefaultShiftThreshold);

/// Writes report.json, comparisons.csv and one hist_<stat>.csv per stat.
/// Output is byte-identical for equal input. Throws Error(kTargetUnwritable).
void render_report(const InsightReport& report, const fs::path& dir);

/// Stats-only pass: every filter computes its stats, nothing is dropped.
/// Samples whose stats cannot be computed (e.g. unreadable media) are left
/// without them.
Dataset annotate_stats(const Dataset& dataset, const std::vector<OpDescriptor>& filters,
                       const OpRegistry& registry = default_registry());

/// Every registered filter that can be built from default parameters.
std::vector<OpDescriptor> default_analysis_filters(const OpRegistry& registry = default_registry());

/// Without ops: one snapshot of the input annotated by the default filters.
/// With ops: the input plus one snapshot after each op, each annotated by
/// the recipe's filters, or by the default filters when it has none.
InsightReport analyze(const Dataset& dataset, const std::vector<OpDescriptor>& ops,
                      double threshold = kDefaultShiftThreshold,
                      const OpRegistry& registry = default_registry());

} // namespace dj
