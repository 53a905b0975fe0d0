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

#include "dj/exec/fault.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

FaultMode parse_fault_mode(std::string_view name) {
    if (name == "skip_batch") return FaultMode::kSkipBatch;
    if (name == "fill_empty") return FaultMode::kFillEmpty;
    if (name == "abort") return FaultMode::kAbort;
    throw Error(ErrorCode::kParamValidation,
                fmt::format("fault policy '{}' is not one of skip_batch, fill_empty, abort", name));
}

std::string_view fault_mode_name(FaultMode mode) {
    switch (mode) {
    case FaultMode::kSkipBatch: return "skip_batch";
    case FaultMode::kFillEmpty: return "fill_empty";
    case FaultMode::kAbort: return "abort";
    }
    return "skip_batch";
}

std::chrono::milliseconds FaultPolicy::delay_for(std::size_t retry) const {
    if (backoff.empty()) {
        return std::chrono::milliseconds(0);
    }
    return backoff[std::min(retry, backoff.size() - 1)];
}

} // namespace dj
