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

#include <memory>
#include <optional>
#include <vector>

#include "dj/ops/operator.hpp"
#include "dj/ops/registry.hpp"

namespace dj {

/// Runs every child on a batch before the next batch is read. Children
/// share one media cache per batch.
class FusedOp final : public BatchOperator {
public:
    FusedOp(OpDescriptor desc, std::vector<std::unique_ptr<BatchOperator>> children);

    const std::vector<std::unique_ptr<BatchOperator>>& children() const { return children_; }

protected:
    BatchOutput process_batch(Batch batch, OpContext& ctx) const override;

private:
    std::vector<std::unique_ptr<BatchOperator>> children_;
};

/// Builds a fused descriptor over `children`. Throws
/// Error(kNonBatchableChild) when a child cannot run per batch.
OpDescriptor fused_descriptor(std::vector<OpDescriptor> children,
                              std::optional<std::size_t> batch_size);

std::unique_ptr<FusedOp> fuse(std::vector<OpDescriptor> children,
                              std::optional<std::size_t> batch_size,
                              const OpRegistry& registry = default_registry());

} // namespace dj
