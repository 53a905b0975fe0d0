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

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dj/ops/operator.hpp"
#include "dj/ops/params.hpp"

namespace dj {

class OpRegistry;

using OpFactory = std::function<std::unique_ptr<Operator>(const OpDescriptor&, const OpRegistry&)>;

struct OpInfo {
    std::string name;
    OpType type = OpType::kMapper;
    std::string doc;
    std::vector<ParamSpec> params;
    bool supports_batch = true;
    bool commutative_filter = false;
    std::string shared_resource;
    std::vector<std::string> stat_keys;
    double cpu_required = 1.0;
    std::uint64_t mem_required = 0;
    bool accelerator = false;
    OpFactory factory;
};

/// Parameters every operator accepts in addition to its own.
const std::vector<ParamSpec>& common_param_specs();

class OpRegistry {
public:
    /// Throws Error(kInternal) on a duplicate name and Error(kStatKeyConflict)
    /// when a stat key is already owned by another operator.
    void add(OpInfo info);

    const OpInfo* find(std::string_view name) const;
    std::vector<const OpInfo*> list() const;

    /// Validates `params` and resolves the descriptor. Throws
    /// Error(kUnknownOp) or Error(kParamValidation) before any data is read.
    OpDescriptor describe(std::string_view name, const Json& params) const;

    std::unique_ptr<Operator> create(const OpDescriptor& desc) const;
    std::unique_ptr<Operator> create(std::string_view name, const Json& params) const;

private:
    std::map<std::string, OpInfo, std::less<>> ops_;
    std::map<std::string, std::string, std::less<>> stat_owner_;
};

/// Registry holding every built-in operator.
OpRegistry& default_registry();

void register_framework_ops(OpRegistry& registry);

} // namespace dj
