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

#include "dj/ops/fused.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

FusedOp::FusedOp(OpDescriptor desc, std::vector<std::unique_ptr<BatchOperator>> children)
        : BatchOperator(std::move(desc)), children_(std::move(children)) {}

BatchOutput FusedOp::process_batch(Batch batch, OpContext& ctx) const {
    MediaCache shared;
    struct Restore {
        OpContext& ctx;
        MediaCache* saved;
        ~Restore() { ctx.media = saved; }
    } restore{ctx, ctx.media};
    ctx.media = &shared;
    BatchOutput acc;
    acc.samples = std::move(batch.samples);
    acc.origin_ordinals = std::move(batch.origin_ordinals);
    for (const auto& child : children_) {
        Batch next{std::move(acc.samples), std::move(acc.origin_ordinals)};
        BatchOutput out = child->process(std::move(next), ctx);
        acc.samples = std::move(out.samples);
        acc.origin_ordinals = std::move(out.origin_ordinals);
        acc.drops.insert(acc.drops.end(), std::make_move_iterator(out.drops.begin()),
                         std::make_move_iterator(out.drops.end()));
    }
    return acc;
}

OpDescriptor fused_descriptor(std::vector<OpDescriptor> children,
                              std::optional<std::size_t> batch_size) {
    if (children.empty()) {
        throw Error(ErrorCode::kParamValidation, "fused_op needs at least one child");
    }
    OpDescriptor d;
    d.name = "fused_op";
    d.op_type = OpType::kFusedOp;
    d.batch_size = batch_size;
    d.commutative_filter = true;
    d.cpu_required = 0;
    Json names = Json::array();
    for (const auto& c : children) {
        if (!c.supports_batch) {
            throw Error(ErrorCode::kNonBatchableChild,
                        fmt::format("'{}' cannot run per batch and cannot be fused", c.name));
        }
        d.commutative_filter = d.commutative_filter && c.commutative_filter;
        d.cpu_required = std::max(d.cpu_required, c.cpu_required);
        d.mem_required = std::max(d.mem_required, c.mem_required);
        d.accelerator = d.accelerator || c.accelerator;
        names.push_back(c.name);
    }
    d.shared_resource = children.front().shared_resource;
    for (const auto& c : children) {
        if (c.shared_resource != d.shared_resource) {
            d.shared_resource.clear();
        }
    }
    d.params = Json{{"ops", names}};
    d.children = std::move(children);
    return d;
}

std::unique_ptr<FusedOp> fuse(std::vector<OpDescriptor> children,
                              std::optional<std::size_t> batch_size, const OpRegistry& registry) {
    OpDescriptor desc = fused_descriptor(std::move(children), batch_size);
    std::vector<std::unique_ptr<BatchOperator>> ops;
    for (const auto& c : desc.children) {
        std::unique_ptr<Operator> op = registry.create(c);
        if (!op->is_batch_op()) {
            throw Error(ErrorCode::kNonBatchableChild,
                        fmt::format("'{}' cannot run per batch and cannot be fused", c.name));
        }
        ops.emplace_back(static_cast<BatchOperator*>(op.release()));
    }
    return std::make_unique<FusedOp>(std::move(desc), std::move(ops));
}

} // namespace dj
