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

#include "dj/ops/run.hpp"

#include <algorithm>

namespace dj {

namespace {

std::vector<Batch> make_batches(std::vector<Sample>& records, std::size_t batch_size) {
    std::vector<Batch> batches;
    std::size_t ordinal = 0;
    for (std::size_t i = 0; i < records.size(); i += batch_size) {
        Batch b;
        std::size_t end = std::min(records.size(), i + batch_size);
        for (std::size_t j = i; j < end; ++j) {
            b.samples.push_back(std::move(records[j]));
            b.origin_ordinals.push_back(ordinal++);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

void append(RunResult& r, std::vector<Sample>& out, BatchOutput&& b) {
    out.insert(out.end(), std::make_move_iterator(b.samples.begin()),
               std::make_move_iterator(b.samples.end()));
    r.drops.insert(r.drops.end(), std::make_move_iterator(b.drops.begin()),
                   std::make_move_iterator(b.drops.end()));
}

} // namespace

RunResult run(const Operator& op, std::vector<Sample> records, OpContext ctx) {
    std::erase_if(records, [](const Sample& s) { return s.is_faulty(); });
    std::size_t bs = op.descriptor().batch_size.value_or(kDefaultBatchSize);
    std::vector<Batch> batches = make_batches(records, std::max<std::size_t>(1, bs));

    RunResult result;
    std::vector<Sample> out;
    if (op.is_batch_op()) {
        const auto& bop = static_cast<const BatchOperator&>(op);
        for (auto& b : batches) {
            append(result, out, bop.process(std::move(b), ctx));
        }
    } else {
        const auto& gop = static_cast<const GlobalOperator&>(op);
        auto state = gop.begin(ctx);
        if (gop.needs_observe()) {
            for (const auto& b : batches) {
                gop.observe_batch(*state, b, ctx);
            }
            gop.finish_observe(*state, ctx);
        }
        for (auto& b : batches) {
            append(result, out, gop.apply_batch(*state, std::move(b), ctx));
        }
        append(result, out, gop.finish(*state, ctx));
        result.report = gop.report(*state);
    }
    result.dataset = Dataset::from_samples(std::move(out));
    return result;
}

RunResult run(const Operator& op, const Dataset& input, OpContext ctx) {
    if (input.mode() == DatasetMode::kStreaming) {
        return run(op, input.materialize().records(), ctx);
    }
    return run(op, input.records(), ctx);
}

} // namespace dj
