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

#include <algorithm>
#include <chrono>
#include <random>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/ops/run.hpp"
#include "dj/planner/planner.hpp"

namespace dj {

const OpProbe* ProbeReport::find(std::size_t recipe_index) const {
    for (const auto& p : ops) {
        if (p.index == recipe_index) {
            return &p;
        }
    }
    return nullptr;
}

Json ProbeReport::to_json() const {
    Json list = Json::array();
    for (const auto& p : ops) {
        Json j{{"index", p.index},
               {"name", p.name},
               {"speed", p.speed},
               {"selectivity", p.selectivity},
               {"peak_mem", p.peak_mem},
               {"per_sample_mem", p.per_sample_mem},
               {"wall_time", p.wall_time},
               {"probe_sample_size", p.probe_sample_size},
               {"failed", p.failed}};
        if (p.failed) {
            j["error"] = p.error;
        }
        list.push_back(std::move(j));
    }
    return Json{{"probe_sample_size", probe_sample_size},
                {"dataset_size", dataset_size},
                {"seed", seed},
                {"ops", std::move(list)}};
}

ProbeReport ProbeReport::from_json(const Json& j) {
    ProbeReport r;
    r.probe_sample_size = j.at("probe_sample_size").get<std::size_t>();
    r.dataset_size = j.value("dataset_size", r.probe_sample_size);
    r.seed = j.value("seed", kDefaultProbeSeed);
    for (const auto& o : j.at("ops")) {
        OpProbe p;
        p.index = o.at("index").get<std::size_t>();
        p.name = o.at("name").get<std::string>();
        p.speed = o.at("speed").get<double>();
        p.selectivity = o.value("selectivity", 1.0);
        p.peak_mem = o.value("peak_mem", std::uint64_t{0});
        p.per_sample_mem = o.value("per_sample_mem", std::uint64_t{0});
        p.wall_time = o.value("wall_time", 0.0);
        p.probe_sample_size = o.value("probe_sample_size", r.probe_sample_size);
        p.failed = o.value("failed", false);
        p.error = o.value("error", std::string());
        r.ops.push_back(std::move(p));
    }
    return r;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::duration d) {
    return std::chrono::duration<double>(d).count();
}

/// Reservoir sample of valid records, returned in dataset order.
std::vector<Sample> draw_sample(const Dataset& dataset, std::size_t cap, std::uint64_t seed,
                                std::size_t& valid_count) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, Sample>> reservoir;
    valid_count = 0;
    auto reader = dataset.open();
    while (auto rec = reader->next()) {
        if (rec->is_faulty() || rec->is_placeholder()) {
            continue;
        }
        std::size_t i = valid_count++;
        if (reservoir.size() < cap) {
            reservoir.emplace_back(i, std::move(*rec));
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::size_t j = pick(rng);
        if (j < cap) {
            reservoir[j] = {i, std::move(*rec)};
        }
    }
    std::sort(reservoir.begin(), reservoir.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Sample> out;
    out.reserve(reservoir.size());
    for (auto& [_, s] : reservoir) {
        out.push_back(std::move(s));
    }
    return out;
}

std::uint64_t serialized_bytes(const std::vector<Sample>& samples) {
    std::uint64_t total = 0;
    for (const auto& s : samples) {
        total += serialize_sample(s).size();
    }
    return total;
}

} // namespace

ProbeReport probe_small_batch(const Dataset& dataset, const std::vector<OpDescriptor>& ops,
                              const ProbeOptions& options, const OpRegistry& registry) {
    ProbeReport report;
    report.seed = options.seed;
    std::vector<Sample> sample =
            draw_sample(dataset, std::max<std::size_t>(1, options.max_sample_size), options.seed,
                        report.dataset_size);
    if (sample.empty()) {
        throw Error(ErrorCode::kEmptySource, "probe needs at least one valid sample");
    }
    report.probe_sample_size = sample.size();
    const double in_bytes = static_cast<double>(serialized_bytes(sample)) /
                            static_cast<double>(sample.size());

    for (std::size_t idx = 0; idx < ops.size(); ++idx) {
        OpProbe p;
        p.index = idx;
        p.name = ops[idx].name;
        p.probe_sample_size = sample.size();
        std::size_t ok_in = 0;
        std::size_t ok_out = 0;
        std::uint64_t out_bytes = 0;
        double elapsed = 0.0;
        std::string last_error;
        auto start = Clock::now();
        try {
            std::unique_ptr<Operator> op = registry.create(ops[idx]);
            if (op->is_batch_op()) {
                const auto& bop = static_cast<const BatchOperator&>(*op);
                for (std::size_t b = 0; b < sample.size(); b += kProbeMiniBatch) {
                    Batch batch;
                    std::size_t end = std::min(sample.size(), b + kProbeMiniBatch);
                    batch.samples.assign(sample.begin() + static_cast<std::ptrdiff_t>(b),
                                         sample.begin() + static_cast<std::ptrdiff_t>(end));
                    for (std::size_t i = b; i < end; ++i) {
                        batch.origin_ordinals.push_back(i);
                    }
                    OpContext ctx;
                    ctx.seed = options.seed;
                    auto t0 = Clock::now();
                    try {
                        BatchOutput out = bop.process(std::move(batch), ctx);
                        elapsed += seconds(Clock::now() - t0);
                        ok_in += end - b;
                        ok_out += out.samples.size();
                        out_bytes += serialized_bytes(out.samples);
                    } catch (const std::exception& e) {
                        last_error = e.what();
                    }
                }
            } else {
                OpContext ctx;
                ctx.seed = options.seed;
                auto t0 = Clock::now();
                RunResult r = run(*op, sample, ctx);
                elapsed = seconds(Clock::now() - t0);
                ok_in = sample.size();
                ok_out = r.dataset.size();
                out_bytes = serialized_bytes(r.dataset.records());
            }
        } catch (const std::exception& e) {
            last_error = e.what();
            ok_in = 0;
        }
        p.wall_time = seconds(Clock::now() - start);
        if (ok_in == 0) {
            p.failed = true;
            p.error = last_error.empty() ? "probe failed" : last_error;
        } else {
            p.speed = static_cast<double>(ok_in) / std::max(elapsed, 1e-9);
            p.selectivity = static_cast<double>(ok_out) / static_cast<double>(ok_in);
            double out_avg = ok_out == 0 ? 0.0 : static_cast<double>(out_bytes) / ok_out;
            // Input and output copies of a sample coexist while a batch runs.
            p.per_sample_mem = static_cast<std::uint64_t>(2.0 * (in_bytes + out_avg));
        }
        std::uint64_t footprint =
                p.per_sample_mem *
                ops[idx].batch_size.value_or(std::min(kDefaultBatchSize, report.dataset_size));
        p.peak_mem = std::max(ops[idx].mem_required, footprint);
        report.ops.push_back(std::move(p));
    }
    return report;
}

} // namespace dj
