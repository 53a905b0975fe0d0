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

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dj {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kPlaceholderKey = "__dj__placeholder";

enum class Modality { kImage, kVideo, kAudio };

std::string_view modality_name(Modality m);

/// Reserved top-level field names of a JSONL record.
namespace field {
inline constexpr std::string_view kText = "text";
inline constexpr std::string_view kQuery = "query";
inline constexpr std::string_view kResponse = "response";
inline constexpr std::string_view kHistory = "history";
inline constexpr std::string_view kImages = "images";
inline constexpr std::string_view kVideos = "videos";
inline constexpr std::string_view kAudios = "audios";
inline constexpr std::string_view kMeta = "meta";
inline constexpr std::string_view kStats = "stats";
} // namespace field

bool is_reserved_field(std::string_view key);

/// One record. Reserved fields are typed; any other top-level field is kept
/// verbatim in `extra`, and the parsed key order is replayed on
/// serialization so well-formed records round-trip byte for byte.
struct Sample {
    std::string text;
    std::string query;
    std::string response;
    std::vector<std::pair<std::string, std::string>> history;
    std::vector<std::string> images;
    std::vector<std::string> videos;
    std::vector<std::string> audios;
    Json meta = Json::object();
    Json stats = Json::object();
    Json extra = Json::object();
    std::vector<std::string> key_order;

    /// Set when the source line could not be parsed. Such a record carries
    /// no data; any operator that touches it raises CorruptSample.
    std::optional<std::string> fault;

    bool is_faulty() const { return fault.has_value(); }
    bool is_placeholder() const;

    std::vector<std::string>& media(Modality m);
    const std::vector<std::string>& media(Modality m) const;

    /// Writes a stat, replacing a previous value under the same key.
    void set_stat(std::string_view key, Json value);
    const Json* find_stat(std::string_view key) const;

    static Sample corrupt(std::string reason);
};

/// Parses one JSONL line. Throws Error(kCorruptSample) on malformed JSON and
/// Error(kSchemaViolation) when a reserved field has the wrong shape.
Sample parse_sample(std::string_view line);

Sample sample_from_json(const Json& obj);
Json sample_to_json(const Sample& s);

/// Compact single-line serialization (no trailing newline).
std::string serialize_sample(const Sample& s);

/// Key-order-insensitive form used for multiset comparisons.
std::string canonical_form(const Sample& s);

} // namespace dj
