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

#include "dj/schema/sample.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

namespace {

constexpr std::array<std::string_view, 9> kReserved = {
        field::kText,   field::kQuery,  field::kResponse, field::kHistory, field::kImages,
        field::kVideos, field::kAudios, field::kMeta,     field::kStats,
};

[[noreturn]] void schema_error(std::string_view key, std::string_view what) {
    throw Error(ErrorCode::kSchemaViolation, fmt::format("field '{}': {}", key, what));
}

std::string expect_string(const Json& v, std::string_view key) {
    if (!v.is_string()) {
        schema_error(key, "expected string");
    }
    return v.get<std::string>();
}

std::vector<std::string> expect_string_list(const Json& v, std::string_view key) {
    if (!v.is_array()) {
        schema_error(key, "expected list of strings");
    }
    std::vector<std::string> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_string()) {
            schema_error(key, "expected list of strings");
        }
        out.push_back(e.get<std::string>());
    }
    return out;
}

bool is_scalar(const Json& v) {
    return v.is_primitive();
}

void emit_reserved(Json& out, const Sample& s, std::string_view key) {
    std::string k(key);
    if (key == field::kText) {
        out[k] = s.text;
    } else if (key == field::kQuery) {
        out[k] = s.query;
    } else if (key == field::kResponse) {
        out[k] = s.response;
    } else if (key == field::kHistory) {
        Json h = Json::array();
        for (const auto& [q, r] : s.history) {
            h.push_back(Json::array({q, r}));
        }
        out[k] = std::move(h);
    } else if (key == field::kImages) {
        out[k] = s.images;
    } else if (key == field::kVideos) {
        out[k] = s.videos;
    } else if (key == field::kAudios) {
        out[k] = s.audios;
    } else if (key == field::kMeta) {
        out[k] = s.meta;
    } else if (key == field::kStats) {
        out[k] = s.stats;
    }
}

bool reserved_nonempty(const Sample& s, std::string_view key) {
    if (key == field::kText) return !s.text.empty();
    if (key == field::kQuery) return !s.query.empty();
    if (key == field::kResponse) return !s.response.empty();
    if (key == field::kHistory) return !s.history.empty();
    if (key == field::kImages) return !s.images.empty();
    if (key == field::kVideos) return !s.videos.empty();
    if (key == field::kAudios) return !s.audios.empty();
    if (key == field::kMeta) return !s.meta.empty();
    if (key == field::kStats) return !s.stats.empty();
    return false;
}

} // namespace

std::string_view modality_name(Modality m) {
    switch (m) {
    case Modality::kImage: return "image";
    case Modality::kVideo: return "video";
    case Modality::kAudio: return "audio";
    }
    return "unknown";
}

bool is_reserved_field(std::string_view key) {
    return std::find(kReserved.begin(), kReserved.end(), key) != kReserved.end();
}

bool Sample::is_placeholder() const {
    auto it = meta.find(kPlaceholderKey);
    return it != meta.end() && it->is_boolean() && it->get<bool>();
}

std::vector<std::string>& Sample::media(Modality m) {
    switch (m) {
    case Modality::kImage: return images;
    case Modality::kVideo: return videos;
    case Modality::kAudio: return audios;
    }
    return images;
}

const std::vector<std::string>& Sample::media(Modality m) const {
    return const_cast<Sample*>(this)->media(m);
}

void Sample::set_stat(std::string_view key, Json value) {
    stats[std::string(key)] = std::move(value);
}

const Json* Sample::find_stat(std::string_view key) const {
    auto it = stats.find(key);
    return it == stats.end() ? nullptr : &*it;
}

Sample Sample::corrupt(std::string reason) {
    Sample s;
    s.fault = std::move(reason);
    return s;
}

Sample sample_from_json(const Json& obj) {
    if (!obj.is_object()) {
        throw Error(ErrorCode::kSchemaViolation, "record is not a JSON object");
    }
    Sample s;
    s.key_order.reserve(obj.size());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& key = it.key();
        const Json& v = it.value();
        s.key_order.push_back(key);
        if (key == field::kText) {
            s.text = expect_string(v, key);
        } else if (key == field::kQuery) {
            s.query = expect_string(v, key);
        } else if (key == field::kResponse) {
            s.response = expect_string(v, key);
        } else if (key == field::kHistory) {
            if (!v.is_array()) {
                schema_error(key, "expected list of [query, response] pairs");
            }
            for (const auto& pair : v) {
                if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
                    !pair[1].is_string()) {
                    schema_error(key, "every history entry must be a complete [query, response] pair");
                }
                s.history.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
            }
        } else if (key == field::kImages) {
            s.images = expect_string_list(v, key);
        } else if (key == field::kVideos) {
            s.videos = expect_string_list(v, key);
        } else if (key == field::kAudios) {
            s.audios = expect_string_list(v, key);
        } else if (key == field::kMeta) {
            if (!v.is_object()) {
                schema_error(key, "expected object");
            }
            s.meta = v;
        } else if (key == field::kStats) {
            if (!v.is_object()) {
                schema_error(key, "expected object");
            }
            for (const auto& [k, sv] : v.items()) {
                bool ok = is_scalar(sv) ||
                          (sv.is_array() && std::all_of(sv.begin(), sv.end(), is_scalar));
                if (!ok) {
                    schema_error(fmt::format("stats.{}", k), "expected scalar or list of scalars");
                }
            }
            s.stats = v;
        } else {
            s.extra[key] = v;
        }
    }
    return s;
}

Sample parse_sample(std::string_view line) {
    Json obj = Json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) {
        throw Error(ErrorCode::kCorruptSample, "malformed JSON");
    }
    return sample_from_json(obj);
}

Json sample_to_json(const Sample& s) {
    Json out = Json::object();
    for (const auto& key : s.key_order) {
        if (is_reserved_field(key)) {
            emit_reserved(out, s, key);
        } else if (auto it = s.extra.find(key); it != s.extra.end()) {
            out[key] = *it;
        }
    }
    for (auto key : kReserved) {
        if (!out.contains(key) && reserved_nonempty(s, key)) {
            emit_reserved(out, s, key);
        }
    }
    for (auto it = s.extra.begin(); it != s.extra.end(); ++it) {
        if (!out.contains(it.key())) {
            out[it.key()] = it.value();
        }
    }
    return out;
}

std::string serialize_sample(const Sample& s) {
    return sample_to_json(s).dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string canonical_form(const Sample& s) {
    nlohmann::json sorted = nlohmann::json::parse(serialize_sample(s));
    return sorted.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

} // namespace dj
