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

#include "dj/recipe/recipe.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "dj/common/error.hpp"
#include "dj/common/hash.hpp"
#include "dj/common/text.hpp"

namespace dj {

namespace {

[[noreturn]] void parse_error(std::string_view key, std::string_view what) {
    throw Error(ErrorCode::kRecipeParse, fmt::format("{}: {}", key, what));
}

Json plain_scalar(const std::string& s) {
    if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") {
        return nullptr;
    }
    if (s == "true" || s == "True" || s == "TRUE") {
        return true;
    }
    if (s == "false" || s == "False" || s == "FALSE") {
        return false;
    }
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (s[0] == '-') {
        std::int64_t i = 0;
        auto [p, ec] = std::from_chars(begin, end, i);
        if (ec == std::errc() && p == end) {
            return i;
        }
    } else {
        std::uint64_t u = 0;
        auto [p, ec] = std::from_chars(begin + (s[0] == '+' ? 1 : 0), end, u);
        if (ec == std::errc() && p == end) {
            if (u <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
                return static_cast<std::int64_t>(u);
            }
            return u;
        }
    }
    bool numeric_start = std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' ||
                         s[0] == '+' || s[0] == '.';
    if (numeric_start) {
        char* stop = nullptr;
        double d = std::strtod(begin, &stop);
        if (stop == end) {
            return d;
        }
    }
    return s;
}

Json node_to_json(const YAML::Node& n) {
    switch (n.Type()) {
    case YAML::NodeType::Undefined:
    case YAML::NodeType::Null:
        return nullptr;
    case YAML::NodeType::Scalar:
        if (n.Tag() == "!") {
            return n.Scalar();
        }
        return plain_scalar(n.Scalar());
    case YAML::NodeType::Sequence: {
        Json a = Json::array();
        for (const auto& item : n) {
            a.push_back(node_to_json(item));
        }
        return a;
    }
    case YAML::NodeType::Map: {
        Json o = Json::object();
        for (const auto& kv : n) {
            o[kv.first.as<std::string>()] = node_to_json(kv.second);
        }
        return o;
    }
    }
    return nullptr;
}

std::string format_double(double d) {
    std::string s = fmt::format("{}", d);
    if (s.find_first_of(".eEn") == std::string::npos) {
        s += ".0";
    }
    return s;
}

void emit(YAML::Emitter& out, const Json& j) {
    switch (j.type()) {
    case Json::value_t::object:
        out << YAML::BeginMap;
        for (auto it = j.begin(); it != j.end(); ++it) {
            out << YAML::Key << it.key() << YAML::Value;
            emit(out, it.value());
        }
        out << YAML::EndMap;
        break;
    case Json::value_t::array:
        out << YAML::BeginSeq;
        for (const auto& v : j) {
            emit(out, v);
        }
        out << YAML::EndSeq;
        break;
    case Json::value_t::string:
        out << YAML::DoubleQuoted << j.get<std::string>();
        break;
    case Json::value_t::boolean:
        out << YAML::TrueFalseBool << j.get<bool>();
        break;
    case Json::value_t::number_integer:
        out << j.get<std::int64_t>();
        break;
    case Json::value_t::number_unsigned:
        out << j.get<std::uint64_t>();
        break;
    case Json::value_t::number_float:
        out << format_double(j.get<double>());
        break;
    default:
        out << YAML::Null;
        break;
    }
}

template <typename T>
T get_as(const Json& v, std::string_view key) {
    try {
        return v.get<T>();
    } catch (const std::exception&) {
        parse_error(key, fmt::format("unexpected value {}", v.dump()));
    }
}

std::size_t get_count(const Json& v, std::string_view key) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        parse_error(key, fmt::format("expected a non-negative integer, got {}", v.dump()));
    }
    return v.get<std::size_t>();
}

bool get_bool(const Json& v, std::string_view key) {
    if (!v.is_boolean()) {
        parse_error(key, fmt::format("expected true or false, got {}", v.dump()));
    }
    return v.get<bool>();
}

std::uint64_t get_bytes(const Json& v, std::string_view key) {
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return v.get<std::uint64_t>();
    }
    if (v.is_string()) {
        if (auto b = text::parse_bytes(v.get<std::string>())) {
            return *b;
        }
    }
    parse_error(key, fmt::format("expected a byte quantity, got {}", v.dump()));
}

RecipeOp parse_op(const Json& entry, std::size_t i) {
    std::string where = fmt::format("process[{}]", i);
    if (entry.is_string()) {
        return {entry.get<std::string>(), Json::object()};
    }
    if (!entry.is_object() || entry.size() != 1) {
        parse_error(where, "expected '<op_name>: {params}'");
    }
    RecipeOp op;
    op.name = entry.begin().key();
    const Json& params = entry.begin().value();
    if (params.is_null()) {
        op.params = Json::object();
    } else if (params.is_object()) {
        op.params = params;
    } else {
        parse_error(where, fmt::format("parameters of '{}' must be a mapping", op.name));
    }
    return op;
}

} // namespace

Json yaml_to_json(std::string_view yaml_text) {
    try {
        return node_to_json(YAML::Load(std::string(yaml_text)));
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::kRecipeParse,
                    fmt::format("line {}: {}", e.mark.line + 1, e.msg));
    }
}

std::string json_to_yaml(const Json& j) {
    YAML::Emitter out;
    emit(out, j);
    std::string s = out.c_str();
    s.push_back('\n');
    return s;
}

Json Recipe::to_json() const {
    Json j = Json::object();
    j["project_name"] = project_name;
    j["dataset_path"] = dataset_path.string();
    j["export_path"] = export_path.string();
    j["np"] = np;
    j["dataset_mode"] = mode == DatasetMode::kStreaming ? "streaming" : "materialized";
    j["optimize"] = optimize;
    j["speed_only"] = speed_only;
    j["fault_policy"] = fault_mode_name(fault.mode);
    j["max_retries"] = fault.max_retries;
    Json backoff = Json::array();
    for (auto d : fault.backoff) {
        backoff.push_back(d.count());
    }
    j["backoff_ms"] = std::move(backoff);
    j["checkpoint_dir"] = checkpoint_dir.string();
    j["use_checkpoint"] = use_checkpoint;
    j["seed"] = seed;
    j["probe_sample_size"] = probe_sample_size;
    j["monitor_interval_ms"] = monitor_interval_ms;
    j["drop_placeholders"] = drop_placeholders;
    j["shift_threshold"] = shift_threshold;
    j["accelerator_slots"] = accelerator_slots;
    Json ops = Json::array();
    for (const auto& op : process) {
        ops.push_back(Json{{op.name, op.params}});
    }
    j["process"] = std::move(ops);
    return j;
}

Recipe Recipe::from_json(const Json& j) {
    if (!j.is_object()) {
        throw Error(ErrorCode::kRecipeParse, "recipe must be a mapping at the top level");
    }
    Recipe r;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        if (key == "project_name") {
            r.project_name = v.is_null() ? "" : get_as<std::string>(v, key);
        } else if (key == "dataset_path") {
            r.dataset_path = get_as<std::string>(v, key);
        } else if (key == "export_path") {
            r.export_path = get_as<std::string>(v, key);
        } else if (key == "np") {
            r.np = get_count(v, key);
            if (r.np == 0) {
                parse_error(key, "must be at least 1");
            }
        } else if (key == "dataset_mode") {
            try {
                r.mode = parse_dataset_mode(get_as<std::string>(v, key));
            } catch (const Error& e) {
                parse_error(key, e.what());
            }
        } else if (key == "optimize" || key == "op_fusion") {
            r.optimize = get_bool(v, key);
        } else if (key == "speed_only") {
            r.speed_only = get_bool(v, key);
        } else if (key == "fault_policy") {
            try {
                r.fault.mode = parse_fault_mode(get_as<std::string>(v, key));
            } catch (const Error& e) {
                parse_error(key, e.what());
            }
        } else if (key == "max_retries") {
            r.fault.max_retries = get_count(v, key);
        } else if (key == "backoff_ms") {
            if (!v.is_array() || v.empty()) {
                parse_error(key, "expected a non-empty list of milliseconds");
            }
            r.fault.backoff.clear();
            for (const auto& d : v) {
                r.fault.backoff.emplace_back(get_count(d, key));
            }
        } else if (key == "checkpoint_dir") {
            r.checkpoint_dir = v.is_null() ? "" : get_as<std::string>(v, key);
        } else if (key == "use_checkpoint") {
            r.use_checkpoint = get_bool(v, key);
        } else if (key == "seed") {
            r.seed = get_count(v, key);
        } else if (key == "probe_sample_size") {
            r.probe_sample_size = get_count(v, key);
            if (r.probe_sample_size == 0) {
                parse_error(key, "must be at least 1");
            }
        } else if (key == "monitor_interval_ms") {
            r.monitor_interval_ms = get_count(v, key);
        } else if (key == "drop_placeholders") {
            r.drop_placeholders = get_bool(v, key);
        } else if (key == "shift_threshold") {
            if (!v.is_number()) {
                parse_error(key, "expected a number");
            }
            r.shift_threshold = v.get<double>();
        } else if (key == "accelerator_slots") {
            if (!v.is_array()) {
                parse_error(key, "expected a list of slot memory sizes");
            }
            for (const auto& s : v) {
                r.accelerator_slots.push_back(get_bytes(s, key));
            }
        } else if (key == "process") {
            if (v.is_null()) {
                continue;
            }
            if (!v.is_array()) {
                parse_error(key, "expected a list of operators");
            }
            for (std::size_t i = 0; i < v.size(); ++i) {
                r.process.push_back(parse_op(v[i], i));
            }
        } else {
            r.warnings.push_back(fmt::format("unknown recipe key '{}' ignored", key));
        }
    }
    return r;
}

void apply_override(Json& root, std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw Error(ErrorCode::kRecipeParse,
                    fmt::format("override '{}' is not of the form key=value", assignment));
    }
    std::string_view path = assignment.substr(0, eq);
    Json value = yaml_to_json(assignment.substr(eq + 1));
    Json* node = &root;
    while (true) {
        auto dot = path.find('.');
        std::string part(path.substr(0, dot));
        bool last = dot == std::string_view::npos;
        Json* next = nullptr;
        if (node->is_array()) {
            std::size_t idx = 0;
            auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
            if (ec != std::errc() || p != part.data() + part.size() || idx >= node->size()) {
                throw Error(ErrorCode::kRecipeParse,
                            fmt::format("override '{}': '{}' is not a valid list index",
                                        assignment, part));
            }
            next = &(*node)[idx];
        } else {
            if (node->is_null()) {
                *node = Json::object();
            }
            if (!node->is_object()) {
                throw Error(ErrorCode::kRecipeParse,
                            fmt::format("override '{}': '{}' is not a mapping", assignment, part));
            }
            next = &(*node)[part];
        }
        if (last) {
            *next = std::move(value);
            return;
        }
        node = next;
        path.remove_prefix(dot + 1);
    }
}

Recipe parse_recipe(std::string_view yaml_text, const std::vector<std::string>& overrides) {
    Json j = yaml_to_json(yaml_text);
    if (j.is_null()) {
        j = Json::object();
    }
    for (const auto& o : overrides) {
        apply_override(j, o);
    }
    Recipe r = Recipe::from_json(j);
    if (const char* env = std::getenv("DJ_SEED"); env != nullptr && *env != '\0') {
        std::uint64_t seed = 0;
        std::string_view s(env);
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
        if (ec != std::errc() || p != s.data() + s.size()) {
            throw Error(ErrorCode::kRecipeParse, fmt::format("DJ_SEED: '{}' is not an integer", s));
        }
        r.seed = seed;
    }
    return r;
}

Recipe load_recipe(const fs::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kSourceNotFound, fmt::format("cannot read recipe {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_recipe(ss.str(), overrides);
}

std::string recipe_to_yaml(const Recipe& recipe) {
    return json_to_yaml(recipe.to_json());
}

std::string recipe_digest(const Recipe& recipe) {
    ContentDigest d;
    d.update(recipe.dataset_path.string());
    d.update("\n");
    Json ops = Json::array();
    for (const auto& op : recipe.process) {
        ops.push_back(Json{{op.name, op.params}});
    }
    d.update(ops.dump());
    return d.hex();
}

std::vector<OpDescriptor> resolve_ops(const Recipe& recipe, const OpRegistry& registry) {
    std::vector<OpDescriptor> out;
    out.reserve(recipe.process.size());
    for (const auto& op : recipe.process) {
        out.push_back(registry.describe(op.name, op.params));
    }
    return out;
}

} // namespace dj
