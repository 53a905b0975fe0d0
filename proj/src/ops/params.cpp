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

#include "dj/ops/params.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/common/text.hpp"

namespace dj {

namespace {

[[noreturn]] void bad(std::string_view op, std::string_view param, const std::string& what) {
    throw Error(ErrorCode::kParamValidation, fmt::format("{}.{}: {}", op, param, what));
}

Json coerce(std::string_view op, const ParamSpec& spec, const Json& v) {
    switch (spec.kind) {
    case ParamKind::kInt:
        if (v.is_number_integer() || v.is_number_unsigned()) {
            return v;
        }
        if (v.is_number_float() && v.get<double>() == static_cast<double>(v.get<std::int64_t>())) {
            return v.get<std::int64_t>();
        }
        bad(op, spec.name, "expected integer");
    case ParamKind::kNumber:
        if (v.is_number()) {
            return v;
        }
        bad(op, spec.name, "expected number");
    case ParamKind::kBool:
        if (v.is_boolean()) {
            return v;
        }
        bad(op, spec.name, "expected boolean");
    case ParamKind::kString:
        if (v.is_string()) {
            return v;
        }
        bad(op, spec.name, "expected string");
    case ParamKind::kStringList:
        if (v.is_string()) {
            return Json::array({v});
        }
        if (v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); })) {
            return v;
        }
        bad(op, spec.name, "expected list of strings");
    case ParamKind::kBytes:
        if (v.is_number_integer() || v.is_number_unsigned()) {
            return v;
        }
        if (v.is_number_float()) {
            return static_cast<std::int64_t>(v.get<double>());
        }
        if (v.is_string()) {
            if (auto b = text::parse_bytes(v.get<std::string>())) {
                return *b;
            }
        }
        bad(op, spec.name, "expected byte quantity such as 4096 or \"2KiB\"");
    case ParamKind::kAny:
        return v;
    }
    return v;
}

} // namespace

std::string_view param_kind_name(ParamKind kind) {
    switch (kind) {
    case ParamKind::kInt: return "int";
    case ParamKind::kNumber: return "number";
    case ParamKind::kBool: return "bool";
    case ParamKind::kString: return "string";
    case ParamKind::kStringList: return "string_list";
    case ParamKind::kBytes: return "bytes";
    case ParamKind::kAny: return "any";
    }
    return "any";
}

Json validate_params(std::string_view op_name, const std::vector<ParamSpec>& specs,
                     const Json& given) {
    Json out = Json::object();
    if (!given.is_null() && !given.is_object()) {
        throw Error(ErrorCode::kParamValidation,
                    fmt::format("{}: parameters must be a mapping", op_name));
    }
    if (given.is_object()) {
        for (auto it = given.begin(); it != given.end(); ++it) {
            bool known = std::any_of(specs.begin(), specs.end(),
                                     [&](const ParamSpec& s) { return s.name == it.key(); });
            if (!known) {
                bad(op_name, it.key(), "unknown parameter");
            }
        }
    }
    for (const auto& spec : specs) {
        const Json* v = nullptr;
        if (given.is_object()) {
            if (auto it = given.find(spec.name); it != given.end() && !it->is_null()) {
                v = &*it;
            }
        }
        if (v == nullptr) {
            if (spec.required) {
                bad(op_name, spec.name, "required parameter missing");
            }
            if (!spec.default_value.is_null()) {
                out[spec.name] = spec.default_value;
            }
            continue;
        }
        Json value = coerce(op_name, spec, *v);
        if (value.is_number() && (spec.min || spec.max)) {
            double d = value.get<double>();
            if (spec.min && d < *spec.min) {
                bad(op_name, spec.name, fmt::format("must be >= {}", *spec.min));
            }
            if (spec.max && d > *spec.max) {
                bad(op_name, spec.name, fmt::format("must be <= {}", *spec.max));
            }
        }
        if (!spec.choices.empty()) {
            if (!value.is_string() ||
                std::find(spec.choices.begin(), spec.choices.end(), value.get<std::string>()) ==
                        spec.choices.end()) {
                bad(op_name, spec.name,
                    fmt::format("must be one of [{}]", fmt::join(spec.choices, ", ")));
            }
        }
        out[spec.name] = std::move(value);
    }
    return out;
}

bool Params::has(std::string_view name) const {
    auto it = j_.find(name);
    return it != j_.end() && !it->is_null();
}

std::int64_t Params::get_int(std::string_view name) const {
    return j_.at(std::string(name)).get<std::int64_t>();
}

double Params::get_number(std::string_view name) const {
    return j_.at(std::string(name)).get<double>();
}

bool Params::get_bool(std::string_view name) const {
    return j_.at(std::string(name)).get<bool>();
}

std::string Params::get_string(std::string_view name) const {
    return j_.at(std::string(name)).get<std::string>();
}

std::vector<std::string> Params::get_string_list(std::string_view name) const {
    return j_.at(std::string(name)).get<std::vector<std::string>>();
}

std::optional<double> Params::opt_number(std::string_view name) const {
    if (!has(name)) {
        return std::nullopt;
    }
    return get_number(name);
}

std::optional<std::int64_t> Params::opt_int(std::string_view name) const {
    if (!has(name)) {
        return std::nullopt;
    }
    return get_int(name);
}

} // namespace dj
