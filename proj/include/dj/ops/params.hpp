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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dj/schema/sample.hpp"

namespace dj {

enum class ParamKind { kInt, kNumber, kBool, kString, kStringList, kBytes, kAny };

std::string_view param_kind_name(ParamKind kind);

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::kAny;
    /// null means "no default": the parameter is optional and absent unless
    /// given, or mandatory when `required` is set.
    Json default_value = nullptr;
    std::optional<double> min;
    std::optional<double> max;
    std::vector<std::string> choices;
    bool required = false;
    std::string doc;
};

/// Checks names, kinds, ranges and choices, and fills defaults. Byte
/// quantities given as strings ("2KiB") are normalized to integers.
/// Throws Error(kParamValidation) naming the op and parameter.
Json validate_params(std::string_view op_name, const std::vector<ParamSpec>& specs,
                     const Json& given);

/// Typed read access to validated parameters.
class Params {
public:
    explicit Params(const Json& j) : j_(j) {}

    bool has(std::string_view name) const;
    std::int64_t get_int(std::string_view name) const;
    double get_number(std::string_view name) const;
    bool get_bool(std::string_view name) const;
    std::string get_string(std::string_view name) const;
    std::vector<std::string> get_string_list(std::string_view name) const;
    std::optional<double> opt_number(std::string_view name) const;
    std::optional<std::int64_t> opt_int(std::string_view name) const;

private:
    const Json& j_;
};

} // namespace dj
