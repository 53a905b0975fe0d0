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
#include <vector>

#include "dj/io/dataset.hpp"
#include "dj/ops/operator.hpp"

namespace dj {

inline constexpr std::size_t kDefaultBatchSize = 1000;

struct RunResult {
    Dataset dataset;
    std::vector<DropRecord> drops;
    Json report = nullptr;
};

/// Runs one operator over a whole dataset on the calling thread. Faulty
/// records are skipped here; fault policies belong to the executor.
RunResult run(const Operator& op, const Dataset& input, OpContext ctx = {});

/// Runs one operator over an in-memory record span, split into batches.
RunResult run(const Operator& op, std::vector<Sample> records, OpContext ctx = {});

} // namespace dj
