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

#include <string>
#include <string_view>
#include <vector>

#include "dj/io/dataset.hpp"
#include "dj/ops/operator.hpp"

namespace dj {

/// Extra field of a grouped record holding its member records.
inline constexpr std::string_view kBatchField = "__dj__batch__";
inline constexpr std::string_view kGroupKeyMeta = "__dj__group_key";

bool is_batched_sample(const Sample& s);
std::vector<Sample> batch_members(const Sample& s);
Sample make_batched_sample(const std::vector<Sample>& members);

/// Strips an optional "meta." prefix.
std::string meta_key_of(std::string_view key);

enum class GrouperKind { kNaive, kKeyValue };

/// Materialized conveniences over the registered grouper, aggregator and
/// script operators.
Dataset group(const Dataset& dataset, GrouperKind kind, std::string_view key = {});
Dataset aggregate(const Dataset& batched, std::string_view aggregator, const Json& params = {});
Dataset run_script(const Dataset& dataset, std::string_view command);

} // namespace dj
