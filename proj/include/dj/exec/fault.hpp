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

#include <chrono>
#include <cstddef>
#include <string_view>
#include <vector>

namespace dj {

enum class FaultMode { kSkipBatch, kFillEmpty, kAbort };

FaultMode parse_fault_mode(std::string_view name);
std::string_view fault_mode_name(FaultMode mode);

struct FaultPolicy {
    FaultMode mode = FaultMode::kSkipBatch;
    std::size_t max_retries = 1;
    /// Delay before retry k is backoff[min(k, size - 1)].
    std::vector<std::chrono::milliseconds> backoff = {std::chrono::milliseconds(100),
                                                      std::chrono::milliseconds(200),
                                                      std::chrono::milliseconds(400)};

    std::chrono::milliseconds delay_for(std::size_t retry) const;
};

} // namespace dj
