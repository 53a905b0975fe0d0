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

#include "dj/analyzer/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/ops/run.hpp"

namespace dj {

std::size_t Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

Histogram make_histogram(const std::vector<double>& values, double lo, double hi,
                         std::size_t bins) {
    bins = std::max<std::size_t>(1, bins);
    Histogram h;
    h.counts.assign(bins, 0);
    double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0 / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.edges.push_back(lo + width * static_cast<double>(i));
    }
    if (hi > lo) {
        h.edges.back() = hi;
    }
    for (double v : values) {
        std::size_t bin = 0;
        if (hi > lo) {
            double pos = std::floor((v - lo) / width);
            bin = pos <= 0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
        }
        ++h.counts[bin];
    }
    return h;
}

namespace {

std::pair<double, double> range_of(const std::vector<double>& v) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

std::string num(double v) {
    if (!std::isfinite(v)) {
        return "null";
    }
    return fmt::format("{}", v);
}

/// Scalar view of a stat value; nullopt when it has no numeric reading.
std::optional<double> numeric_value(const Json& v) {
    if (v.is_number()) {
        return v.get<double>();
    }
    if (v.is_array() && !v.empty()) {
        double sum = 0;
        for (const auto& x : v) {
            if (!x.is_number()) {
                return std::nullopt;
            }
            sum += x.get<double>();
        }
        return sum / static_cast<double>(v.size());
    }
    return std::nullopt;
}

double quantile(const std::vector<double>& sorted, double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto i = static_cast<std::size_t>(std::floor(pos));
    std::size_t j = std::min(sorted.size() - 1, i + 1);
    double frac = pos - static_cast<double>(i);
    return sorted[i] + (sorted[j] - sorted[i]) * frac;
}

} // namespace

Histogram StatsSnapshot::histogram(const std::string& stat, std::size_t bins) const {
    auto it = values.find(stat);
    if (it == values.end() || it->second.empty()) {
        Histogram h;
        h.counts.assign(bins, 0);
        return h;
    }
    auto [lo, hi] = range_of(it->second);
    return make_histogram(it->second, lo, hi, bins);
}

std::vector<std::string> StatsSnapshot::stat_names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : values) {
        out.push_back(k);
    }
    return out;
}

Json StatsSnapshot::to_json(std::size_t bins) const {
    Json stats = Json::object();
    for (const auto& [name, v] : values) {
        Histogram h = histogram(name, bins);
        Json edges = Json::array();
        for (double e : h.edges) {
            edges.push_back(e);
        }
        stats[name] = Json{{"summary", summarize(v, missing.count(name) ? missing.at(name) : 0).to_json()},
                           {"edges", std::move(edges)},
                           {"counts", h.counts}};
    }
    Json cats = Json::object();
    for (const auto& [tag, counts] : categories) {
        Json c = Json::object();
        for (const auto& [value, n] : counts) {
            c[value] = n;
        }
        cats[tag] = std::move(c);
    }
    return Json{{"op_index", op_index},
                {"label", label},
                {"sample_count", sample_count},
                {"stats", std::move(stats)},
                {"categories", std::move(cats)}};
}

StatsSnapshot collect_snapshot(const Dataset& dataset, int op_index, std::string label,
                               const std::vector<std::string>& expected) {
    StatsSnapshot snap;
    snap.op_index = op_index;
    snap.label = std::move(label);
    std::vector<Sample> owned;
    const std::vector<Sample>* records = &dataset.records();
    if (dataset.mode() == DatasetMode::kStreaming) {
        owned = dataset.materialize().records();
        records = &owned;
    }
    std::set<std::string> keys(expected.begin(), expected.end());
    for (const auto& s : *records) {
        if (s.is_faulty() || s.is_placeholder()) {
            continue;
        }
        for (auto it = s.stats.begin(); it != s.stats.end(); ++it) {
            keys.insert(it.key());
        }
    }
    for (const auto& k : keys) {
        snap.values[k];
        snap.missing[k] = 0;
    }
    for (const auto& s : *records) {
        if (s.is_faulty() || s.is_placeholder()) {
            continue;
        }
        ++snap.sample_count;
        for (const auto& k : keys) {
            const Json* v = s.find_stat(k);
            std::optional<double> x = v != nullptr ? numeric_value(*v) : std::nullopt;
            if (x) {
                snap.values[k].push_back(*x);
            } else if (v != nullptr && v->is_string()) {
                ++snap.categories["stats." + k][v->get<std::string>()];
                ++snap.missing[k];
            } else {
                ++snap.missing[k];
            }
        }
        for (auto it = s.meta.begin(); it != s.meta.end(); ++it) {
            if (it.value().is_string()) {
                ++snap.categories["meta." + it.key()][it.value().get<std::string>()];
            }
        }
    }
    // Stats seen only as strings are tags, not numeric distributions.
    for (auto it = snap.values.begin(); it != snap.values.end();) {
        bool expected_key = std::find(expected.begin(), expected.end(), it->first) != expected.end();
        if (it->second.empty() && !expected_key && snap.categories.count("stats." + it->first)) {
            snap.missing.erase(it->first);
            it = snap.values.erase(it);
        } else {
            ++it;
        }
    }
    return snap;
}

Json StatSummary::to_json() const {
    return Json{{"count", count}, {"missing", missing}, {"mean", mean}, {"min", min},
                {"p25", p25},     {"p50", p50},         {"p75", p75},   {"max", max}};
}

StatSummary summarize(const std::vector<double>& values, std::size_t missing) {
    StatSummary s;
    s.count = values.size();
    s.missing = missing;
    if (values.empty()) {
        return s;
    }
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    s.min = sorted.front();
    s.max = sorted.back();
    s.p25 = quantile(sorted, 0.25);
    s.p50 = quantile(sorted, 0.5);
    s.p75 = quantile(sorted, 0.75);
    return s;
}

Json InsightRow::to_json() const {
    Json j{{"before_op", before_op}, {"after_op", after_op}, {"stat", stat},
           {"comparable", comparable}};
    j["score"] = comparable ? Json(score) : Json(nullptr);
    j["flagged"] = flagged;
    j["before"] = before.to_json();
    j["after"] = after.to_json();
    return j;
}

double shift_score(const std::vector<double>& before, const std::vector<double>& after,
                   std::size_t bins) {
    if (before.empty() || after.empty()) {
        return 0.0;
    }
    auto [lo_a, hi_a] = range_of(before);
    auto [lo_b, hi_b] = range_of(after);
    double lo = std::min(lo_a, lo_b);
    double hi = std::max(hi_a, hi_b);
    Histogram a = make_histogram(before, lo, hi, bins);
    Histogram b = make_histogram(after, lo, hi, bins);
    double na = static_cast<double>(before.size());
    double nb = static_cast<double>(after.size());
    double tvd = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        tvd += std::abs(static_cast<double>(a.counts[i]) / na - static_cast<double>(b.counts[i]) / nb);
    }
    return std::clamp(tvd / 2.0, 0.0, 1.0);
}

InsightRow compare_snapshots(const StatsSnapshot& before, const StatsSnapshot& after,
                             const std::string& stat, double threshold, std::size_t bins) {
    InsightRow row;
    row.before_op = before.op_index;
    row.after_op = after.op_index;
    row.stat = stat;
    static const std::vector<double> none;
    auto values_of = [&](const StatsSnapshot& s) -> const std::vector<double>& {
        auto it = s.values.find(stat);
        return it == s.values.end() ? none : it->second;
    };
    auto missing_of = [&](const StatsSnapshot& s) {
        auto it = s.missing.find(stat);
        return it == s.missing.end() ? s.sample_count : it->second;
    };
    const auto& a = values_of(before);
    const auto& b = values_of(after);
    row.before = summarize(a, missing_of(before));
    row.after = summarize(b, missing_of(after));
    row.comparable = !a.empty() && !b.empty();
    if (row.comparable) {
        row.score = shift_score(a, b, bins);
        row.flagged = row.score > threshold;
    }
    return row;
}

Json InsightReport::to_json() const {
    Json snaps = Json::array();
    for (const auto& s : snapshots) {
        snaps.push_back(s.to_json());
    }
    Json rs = Json::array();
    for (const auto& r : rows) {
        rs.push_back(r.to_json());
    }
    return Json{{"threshold", threshold},
                {"bins", kDefaultBins},
                {"snapshots", std::move(snaps)},
                {"comparisons", std::move(rs)}};
}

InsightReport build_report(std::vector<StatsSnapshot> snapshots, double threshold) {
    InsightReport report;
    report.threshold = threshold;
    for (std::size_t i = 1; i < snapshots.size(); ++i) {
        std::set<std::string> stats;
        for (const auto& [k, _] : snapshots[i - 1].values) {
            stats.insert(k);
        }
        for (const auto& [k, _] : snapshots[i].values) {
            stats.insert(k);
        }
        for (const auto& stat : stats) {
            report.rows.push_back(compare_snapshots(snapshots[i - 1], snapshots[i], stat, threshold));
        }
    }
    report.snapshots = std::move(snapshots);
    return report;
}

namespace {

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::kTargetUnwritable, fmt::format("cannot write {}", path.string()));
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

std::string safe_file_part(const std::string& s) {
    std::string out;
    for (char c : s) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ? c : '_');
    }
    return out;
}

} // namespace

void render_report(const InsightReport& report, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::kTargetUnwritable,
                    fmt::format("cannot create {}: {}", dir.string(), ec.message()));
    }
    {
        auto out = open_output(dir / "report.json");
        out << report.to_json().dump(2) << '\n';
    }
    {
        auto out = open_output(dir / "comparisons.csv");
        out << "before_op,after_op,stat,comparable,score,flagged,before_mean,after_mean,"
               "before_count,after_count\n";
        for (const auto& r : report.rows) {
            out << r.before_op << ',' << r.after_op << ',' << csv_field(r.stat) << ','
                << (r.comparable ? "true" : "false") << ',' << (r.comparable ? num(r.score) : "")
                << ',' << (r.flagged ? "true" : "false") << ',' << num(r.before.mean) << ','
                << num(r.after.mean) << ',' << r.before.count << ',' << r.after.count << '\n';
        }
    }
    // One table per stat on edges shared by every snapshot.
    std::set<std::string> stats;
    for (const auto& s : report.snapshots) {
        for (const auto& [k, _] : s.values) {
            stats.insert(k);
        }
    }
    for (const auto& stat : stats) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& s : report.snapshots) {
            auto it = s.values.find(stat);
            if (it != s.values.end() && !it->second.empty()) {
                auto [a, b] = range_of(it->second);
                lo = std::min(lo, a);
                hi = std::max(hi, b);
            }
        }
        auto out = open_output(dir / ("hist_" + safe_file_part(stat) + ".csv"));
        out << "op_index,label,bin,bin_lo,bin_hi,count\n";
        if (!std::isfinite(lo)) {
            continue;
        }
        for (const auto& s : report.snapshots) {
            auto it = s.values.find(stat);
            static const std::vector<double> none;
            Histogram h = make_histogram(it == s.values.end() ? none : it->second, lo, hi);
            for (std::size_t b = 0; b < h.counts.size(); ++b) {
                out << s.op_index << ',' << csv_field(s.label) << ',' << b << ',' << num(h.edges[b])
                    << ',' << num(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
            }
        }
    }
}

Dataset annotate_stats(const Dataset& dataset, const std::vector<OpDescriptor>& filters,
                       const OpRegistry& registry) {
    std::vector<Sample> records = dataset.mode() == DatasetMode::kStreaming
                                          ? dataset.materialize().records()
                                          : dataset.records();
    std::erase_if(records, [](const Sample& s) { return s.is_faulty(); });
    for (const auto& desc : filters) {
        std::unique_ptr<Operator> op = registry.create(desc);
        if (desc.op_type != OpType::kFilter) {
            continue;
        }
        const auto& f = static_cast<const Filter&>(*op);
        OpContext ctx;
        for (std::size_t b = 0; b < records.size(); b += kDefaultBatchSize) {
            std::size_t end = std::min(records.size(), b + kDefaultBatchSize);
            Batch batch;
            batch.samples.assign(records.begin() + static_cast<std::ptrdiff_t>(b),
                                 records.begin() + static_cast<std::ptrdiff_t>(end));
            for (std::size_t i = b; i < end; ++i) {
                batch.origin_ordinals.push_back(i);
            }
            try {
                f.annotate(batch, ctx);
                std::move(batch.samples.begin(), batch.samples.end(),
                          records.begin() + static_cast<std::ptrdiff_t>(b));
                continue;
            } catch (const Error&) {
            }
            // Retry one by one so a single bad sample only loses its own stats.
            for (std::size_t i = b; i < end; ++i) {
                Batch one{{records[i]}, {i}};
                try {
                    f.annotate(one, ctx);
                    records[i] = std::move(one.samples.front());
                } catch (const Error&) {
                }
            }
        }
    }
    return Dataset::from_samples(std::move(records));
}

std::vector<OpDescriptor> default_analysis_filters(const OpRegistry& registry) {
    std::vector<OpDescriptor> out;
    for (const OpInfo* info : registry.list()) {
        if (info->type != OpType::kFilter) {
            continue;
        }
        try {
            out.push_back(registry.describe(info->name, Json::object()));
        } catch (const Error&) {
        }
    }
    return out;
}

namespace {

std::vector<std::string> stat_keys_of(const std::vector<OpDescriptor>& filters,
                                      const OpRegistry& registry) {
    std::vector<std::string> keys;
    for (const auto& d : filters) {
        if (const OpInfo* info = registry.find(d.name)) {
            keys.insert(keys.end(), info->stat_keys.begin(), info->stat_keys.end());
        }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

void collect_filters(const OpDescriptor& d, std::vector<OpDescriptor>& out) {
    if (d.op_type == OpType::kFilter) {
        OpDescriptor copy = d;
        out.push_back(std::move(copy));
    }
    for (const auto& c : d.children) {
        collect_filters(c, out);
    }
}

} // namespace

InsightReport analyze(const Dataset& dataset, const std::vector<OpDescriptor>& ops,
                      double threshold, const OpRegistry& registry) {
    std::vector<StatsSnapshot> snapshots;
    if (ops.empty()) {
        std::vector<OpDescriptor> filters = default_analysis_filters(registry);
        Dataset annotated = annotate_stats(dataset, filters, registry);
        snapshots.push_back(collect_snapshot(annotated, -1, "input"));
        return build_report(std::move(snapshots), threshold);
    }
    std::vector<OpDescriptor> filters;
    for (const auto& d : ops) {
        collect_filters(d, filters);
    }
    if (filters.empty()) {
        filters = default_analysis_filters(registry);
    }
    std::vector<std::string> keys = stat_keys_of(filters, registry);
    Dataset current = dataset.mode() == DatasetMode::kStreaming ? dataset.materialize() : dataset;
    snapshots.push_back(collect_snapshot(annotate_stats(current, filters, registry), -1, "input", keys));
    for (std::size_t i = 0; i < ops.size(); ++i) {
        std::unique_ptr<Operator> op = registry.create(ops[i]);
        current = run(*op, current).dataset;
        snapshots.push_back(collect_snapshot(annotate_stats(current, filters, registry),
                                             static_cast<int>(i), ops[i].name, keys));
    }
    return build_report(std::move(snapshots), threshold);
}

} // namespace dj
