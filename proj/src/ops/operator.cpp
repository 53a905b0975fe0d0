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

#include "dj/ops/operator.hpp"

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

std::string_view op_type_name(OpType type) {
    switch (type) {
    case OpType::kFormatter: return "Formatter";
    case OpType::kMapper: return "Mapper";
    case OpType::kFilter: return "Filter";
    case OpType::kDeduplicator: return "Deduplicator";
    case OpType::kSelector: return "Selector";
    case OpType::kGrouper: return "Grouper";
    case OpType::kAggregator: return "Aggregator";
    case OpType::kFusedOp: return "FusedOp";
    case OpType::kScriptOp: return "ScriptOp";
    }
    return "Unknown";
}

Json OpDescriptor::to_json() const {
    Json j = Json::object();
    j["name"] = name;
    j["type"] = op_type_name(op_type);
    j["params"] = params;
    j["cpu_required"] = cpu_required;
    j["mem_required"] = mem_required;
    j["supports_batch"] = supports_batch;
    j["commutative_filter"] = commutative_filter;
    if (!shared_resource.empty()) {
        j["shared_resource"] = shared_resource;
    }
    if (batch_size) {
        j["batch_size"] = *batch_size;
    }
    if (!children.empty()) {
        Json c = Json::array();
        for (const auto& child : children) {
            c.push_back(child.to_json());
        }
        j["children"] = std::move(c);
    }
    return j;
}

bool Batch::has_fault() const {
    for (const auto& s : samples) {
        if (s.is_faulty()) {
            return true;
        }
    }
    return false;
}

void throw_if_faulty(const Batch& batch) {
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        if (batch.samples[i].is_faulty()) {
            std::size_t ord = i < batch.origin_ordinals.size() ? batch.origin_ordinals[i] : i;
            throw Error(ErrorCode::kCorruptSample,
                        fmt::format("record {}: {}", ord, *batch.samples[i].fault));
        }
    }
}

BatchOutput BatchOperator::process(Batch batch, OpContext& ctx) const {
    throw_if_faulty(batch);
    if (batch.origin_ordinals.size() != batch.samples.size()) {
        batch.origin_ordinals.resize(batch.samples.size());
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            batch.origin_ordinals[i] = i;
        }
    }
    return process_batch(std::move(batch), ctx);
}

void Mapper::map_many(Sample sample, std::vector<Sample>& out, OpContext& ctx) const {
    map(sample, ctx);
    out.push_back(std::move(sample));
}

BatchOutput Mapper::process_batch(Batch batch, OpContext& ctx) const {
    BatchOutput out;
    out.samples.reserve(batch.samples.size());
    out.origin_ordinals.reserve(batch.samples.size());
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        std::size_t before = out.samples.size();
        if (batch.samples[i].is_placeholder()) {
            out.samples.push_back(std::move(batch.samples[i]));
        } else {
            map_many(std::move(batch.samples[i]), out.samples, ctx);
        }
        out.origin_ordinals.insert(out.origin_ordinals.end(), out.samples.size() - before,
                                   batch.origin_ordinals[i]);
    }
    return out;
}

void Filter::prepare(const Batch&, OpContext&) const {}

void Filter::annotate(Batch& batch, OpContext& ctx) const {
    throw_if_faulty(batch);
    MediaCache local;
    MediaCache* saved = ctx.media;
    if (ctx.media == nullptr) {
        ctx.media = &local;
    }
    try {
        prepare(batch, ctx);
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            Sample& s = batch.samples[i];
            if (s.is_placeholder()) {
                continue;
            }
            try {
                compute_stats(s, ctx);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::kUnreadableMedia) {
                    throw;
                }
                std::size_t ord = i < batch.origin_ordinals.size() ? batch.origin_ordinals[i] : i;
                throw Error(e.code(), fmt::format("record {}: {}", ord, e.what()));
            }
        }
    } catch (...) {
        ctx.media = saved;
        throw;
    }
    ctx.media = saved;
}

BatchOutput Filter::process_batch(Batch batch, OpContext& ctx) const {
    annotate(batch, ctx);
    BatchOutput out;
    out.samples.reserve(batch.samples.size());
    out.origin_ordinals.reserve(batch.samples.size());
    const auto keys = stat_keys();
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
        Sample& s = batch.samples[i];
        if (s.is_placeholder() || keep(s)) {
            out.samples.push_back(std::move(s));
            out.origin_ordinals.push_back(batch.origin_ordinals[i]);
        } else {
            DropRecord rec;
            rec.ordinal = batch.origin_ordinals[i];
            rec.op = name();
            for (const auto& k : keys) {
                if (const Json* v = s.find_stat(k)) {
                    rec.stats[k] = *v;
                }
            }
            out.drops.push_back(std::move(rec));
        }
    }
    return out;
}

void GlobalOperator::observe_batch(State& state, const Batch& batch, OpContext& ctx) const {
    throw_if_faulty(batch);
    observe(state, batch, ctx);
}

void GlobalOperator::observe(State&, const Batch&, OpContext&) const {}

void GlobalOperator::finish_observe(State&, OpContext&) const {}

BatchOutput GlobalOperator::apply_batch(State& state, Batch batch, OpContext& ctx) const {
    throw_if_faulty(batch);
    return apply(state, std::move(batch), ctx);
}

BatchOutput GlobalOperator::finish(State&, OpContext&) const {
    return {};
}

Json GlobalOperator::report(const State&) const {
    return nullptr;
}

} // namespace dj
