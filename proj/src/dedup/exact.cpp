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

#include <map>
#include <unordered_map>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/common/hash.hpp"
#include "dj/dedup/dedup.hpp"
#include "dedup_internal.hpp"

namespace dj {

ExactKey parse_exact_key(std::string_view name) {
    if (name == "text_hash") return ExactKey::kTextHash;
    if (name == "media_file_hash") return ExactKey::kMediaFileHash;
    throw Error(ErrorCode::kParamValidation,
                fmt::format("key: '{}' is not one of text_hash, media_file_hash", name));
}

std::string exact_key_of(const Sample& s, ExactKey key) {
    ContentDigest d;
    auto field = [&](std::string_view v) {
        d.update(std::to_string(v.size()));
        d.update(":");
        d.update(v);
    };
    if (key == ExactKey::kTextHash) {
        field(s.text);
        field(s.query);
        field(s.response);
        for (const auto& [q, a] : s.history) {
            field(q);
            field(a);
        }
        return d.hex();
    }
    bool any = false;
    for (Modality m : {Modality::kImage, Modality::kVideo, Modality::kAudio}) {
        for (const auto& path : s.media(m)) {
            try {
                field(file_digest_hex(path));
            } catch (const Error& e) {
                throw Error(ErrorCode::kUnreadableMedia, fmt::format("{}: {}", path, e.what()));
            }
            any = true;
        }
        d.update("|");
    }
    return any ? d.hex() : std::string();
}

DedupResult exact_dedup(const Dataset& dataset, ExactKey key) {
    std::vector<Sample> samples = dataset.mode() == DatasetMode::kStreaming
                                          ? dataset.materialize().samples()
                                          : dataset.samples();
    std::unordered_map<std::string, std::size_t> first_seen;
    std::map<std::size_t, std::vector<std::size_t>> clusters;
    DedupResult r;
    std::vector<Sample> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].is_placeholder()) {
            out.push_back(std::move(samples[i]));
            continue;
        }
        std::string k = exact_key_of(samples[i], key);
        if (k.empty()) {
            out.push_back(std::move(samples[i]));
            continue;
        }
        auto [it, inserted] = first_seen.emplace(std::move(k), i);
        if (inserted) {
            out.push_back(std::move(samples[i]));
            continue;
        }
        auto& c = clusters[it->second];
        if (c.empty()) {
            c.push_back(it->second);
        }
        c.push_back(i);
        ++r.report.removed;
    }
    for (auto& [_, c] : clusters) {
        r.report.clusters.push_back(std::move(c));
    }
    r.report.config = Json{{"key", key == ExactKey::kTextHash ? "text_hash" : "media_file_hash"}};
    r.dataset = Dataset::from_samples(std::move(out));
    return r;
}

} // namespace dj
