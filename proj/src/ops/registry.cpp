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

#include "dj/ops/registry.hpp"

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

void register_catalog_ops(OpRegistry& registry);
void register_dedup_ops(OpRegistry& registry);

const std::vector<ParamSpec>& common_param_specs() {
    static const std::vector<ParamSpec> specs = {
            {.name = "batch_size", .kind = ParamKind::kInt, .min = 1, .doc = "samples per batch"},
            {.name = "cpu_required", .kind = ParamKind::kNumber, .min = 0.0,
             .doc = "fractional cores per worker"},
            {.name = "mem_required", .kind = ParamKind::kBytes, .min = 0.0,
             .doc = "memory per worker in bytes"},
            {.name = "accelerator", .kind = ParamKind::kBool,
             .doc = "place workers on accelerator slots"},
    };
    return specs;
}

void OpRegistry::add(OpInfo info) {
    if (ops_.contains(info.name)) {
        throw Error(ErrorCode::kInternal, fmt::format("operator '{}' registered twice", info.name));
    }
    for (const auto& key : info.stat_keys) {
        if (auto it = stat_owner_.find(key); it != stat_owner_.end() && it->second != info.name) {
            throw Error(ErrorCode::kStatKeyConflict,
                        fmt::format("stat '{}' of '{}' is already written by '{}'", key, info.name,
                                    it->second));
        }
    }
    for (const auto& key : info.stat_keys) {
        stat_owner_[key] = info.name;
    }
    std::string name = info.name;
    ops_.emplace(std::move(name), std::move(info));
}

const OpInfo* OpRegistry::find(std::string_view name) const {
    auto it = ops_.find(name);
    return it == ops_.end() ? nullptr : &it->second;
}

std::vector<const OpInfo*> OpRegistry::list() const {
    std::vector<const OpInfo*> out;
    out.reserve(ops_.size());
    for (const auto& [_, info] : ops_) {
        out.push_back(&info);
    }
    return out;
}

OpDescriptor OpRegistry::describe(std::string_view name, const Json& params) const {
    const OpInfo* info = find(name);
    if (info == nullptr) {
        throw Error(ErrorCode::kUnknownOp, fmt::format("unknown operator '{}'", name));
    }
    Json own = Json::object();
    Json common = Json::object();
    if (params.is_object()) {
        for (auto it = params.begin(); it != params.end(); ++it) {
            bool is_common = false;
            for (const auto& spec : common_param_specs()) {
                if (spec.name == it.key()) {
                    is_common = true;
                }
            }
            (is_common ? common : own)[it.key()] = it.value();
        }
    } else if (!params.is_null()) {
        throw Error(ErrorCode::kParamValidation,
                    fmt::format("{}: parameters must be a mapping", name));
    }
    OpDescriptor d;
    d.name = info->name;
    d.op_type = info->type;
    d.params = validate_params(name, info->params, own);
    Json c = validate_params(name, common_param_specs(), common);
    d.supports_batch = info->supports_batch;
    d.commutative_filter = info->commutative_filter;
    d.shared_resource = info->shared_resource;
    d.cpu_required = c.contains("cpu_required") ? c["cpu_required"].get<double>() : info->cpu_required;
    d.mem_required =
            c.contains("mem_required") ? c["mem_required"].get<std::uint64_t>() : info->mem_required;
    d.accelerator = c.contains("accelerator") ? c["accelerator"].get<bool>() : info->accelerator;
    if (c.contains("batch_size")) {
        d.batch_size = c["batch_size"].get<std::size_t>();
    }
    return d;
}

std::unique_ptr<Operator> OpRegistry::create(const OpDescriptor& desc) const {
    const OpInfo* info = find(desc.name);
    if (info == nullptr) {
        throw Error(ErrorCode::kUnknownOp, fmt::format("unknown operator '{}'", desc.name));
    }
    return info->factory(desc, *this);
}

std::unique_ptr<Operator> OpRegistry::create(std::string_view name, const Json& params) const {
    return create(describe(name, params));
}

OpRegistry& default_registry() {
    static OpRegistry* registry = [] {
        auto* r = new OpRegistry();
        register_framework_ops(*r);
        register_catalog_ops(*r);
        register_dedup_ops(*r);
        return r;
    }();
    return *registry;
}

} // namespace dj
