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

#include "dj/schema/schema.hpp"

#include <algorithm>
#include <array>
#include <filesystem>

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

namespace {

constexpr std::array<Modality, 3> kModalities = {Modality::kImage, Modality::kVideo,
                                                 Modality::kAudio};

Json empty_of_kind(const Json& v) {
    switch (v.type()) {
    case Json::value_t::string: return "";
    case Json::value_t::array: return Json::array();
    case Json::value_t::object: return Json::object();
    case Json::value_t::boolean: return false;
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned: return 0;
    case Json::value_t::number_float: return 0.0;
    default: return nullptr;
    }
}

} // namespace

const std::string& SchemaTokens::token_for(Modality m) const {
    switch (m) {
    case Modality::kImage: return image_token;
    case Modality::kVideo: return video_token;
    case Modality::kAudio: return audio_token;
    }
    return image_token;
}

void SchemaTokens::check() const {
    std::array<const std::string*, 4> all = {&image_token, &video_token, &audio_token, &eoc_token};
    for (const auto* t : all) {
        if (t->empty()) {
            throw Error(ErrorCode::kSchemaViolation, "special tokens must be non-empty");
        }
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = 0; j < all.size(); ++j) {
            if (i != j && all[j]->find(*all[i]) != std::string::npos) {
                throw Error(ErrorCode::kSchemaViolation,
                            fmt::format("special token '{}' overlaps '{}'", *all[i], *all[j]));
            }
        }
    }
}

std::size_t count_token(std::string_view text, std::string_view token) {
    if (token.empty()) {
        return 0;
    }
    std::size_t n = 0;
    for (std::size_t pos = text.find(token); pos != std::string_view::npos;
         pos = text.find(token, pos + token.size())) {
        ++n;
    }
    return n;
}

void check_token_counts(const Sample& sample, const SchemaTokens& tokens) {
    for (Modality m : kModalities) {
        std::size_t n_tokens = count_token(sample.text, tokens.token_for(m));
        std::size_t n_paths = sample.media(m).size();
        if (n_tokens != n_paths) {
            throw Error(ErrorCode::kTokenMismatch,
                        fmt::format("{}: tokens={} paths={}", modality_name(m), n_tokens, n_paths));
        }
    }
}

std::vector<Chunk> parse_chunks(const Sample& sample, const SchemaTokens& tokens) {
    check_token_counts(sample, tokens);
    std::string_view text = sample.text;
    const std::string& eoc = tokens.eoc_token;

    std::vector<Chunk> chunks;
    std::size_t start = 0;
    for (;;) {
        std::size_t hit = text.find(eoc, start);
        if (hit == std::string_view::npos) {
            if (start < text.size() || chunks.empty()) {
                chunks.push_back(Chunk{start, text.size(), false, {}});
            }
            break;
        }
        chunks.push_back(Chunk{start, hit, true, {}});
        start = hit + eoc.size();
    }

    std::array<std::size_t, 3> next_index{};
    for (auto& chunk : chunks) {
        std::string_view span = text.substr(chunk.begin, chunk.end - chunk.begin);
        // Collect (offset, modality) for every media token, then order by offset.
        std::vector<std::pair<std::size_t, Modality>> hits;
        for (Modality m : kModalities) {
            const std::string& tok = tokens.token_for(m);
            for (std::size_t p = span.find(tok); p != std::string_view::npos;
                 p = span.find(tok, p + tok.size())) {
                hits.emplace_back(p, m);
            }
        }
        std::sort(hits.begin(), hits.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [_, m] : hits) {
            chunk.media_refs.push_back(MediaRef{m, next_index[static_cast<std::size_t>(m)]++});
        }
    }
    return chunks;
}

std::string join_chunks(std::string_view text, const std::vector<Chunk>& chunks,
                        const SchemaTokens& tokens) {
    std::string out;
    for (const auto& c : chunks) {
        out.append(text.substr(c.begin, c.end - c.begin));
        if (c.terminated) {
            out.append(tokens.eoc_token);
        }
    }
    return out;
}

ProcessingGoal parse_goal(std::string_view name) {
    if (name == "pretrain") return ProcessingGoal::kPretrain;
    if (name == "post_tuning") return ProcessingGoal::kPostTuning;
    if (name == "image_text") return ProcessingGoal::kImageText;
    throw Error(ErrorCode::kParamValidation,
                fmt::format("unknown goal '{}' (expected pretrain, post_tuning, image_text)", name));
}

std::string_view goal_name(ProcessingGoal goal) {
    switch (goal) {
    case ProcessingGoal::kPretrain: return "pretrain";
    case ProcessingGoal::kPostTuning: return "post_tuning";
    case ProcessingGoal::kImageText: return "image_text";
    }
    return "unknown";
}

void ValidationReport::add(std::size_t ordinal, std::string_view rule_id, std::string message) {
    ok = false;
    errors.push_back(ValidationError{ordinal, std::string(rule_id), std::move(message)});
}

Json ValidationReport::to_json() const {
    Json j = Json::object();
    j["ok"] = ok;
    j["checked_rules"] = checked_rules;
    Json errs = Json::array();
    for (const auto& e : errors) {
        errs.push_back({{"ordinal", e.ordinal}, {"rule", e.rule_id}, {"message", e.message}});
    }
    j["errors"] = std::move(errs);
    return j;
}

std::vector<std::string> rules_for(ProcessingGoal goal) {
    std::vector<std::string> rules = {std::string(rule::kRecordParse)};
    switch (goal) {
    case ProcessingGoal::kPretrain:
        rules.emplace_back(rule::kTokenCount);
        break;
    case ProcessingGoal::kPostTuning:
        rules.emplace_back(rule::kDialogNonEmpty);
        break;
    case ProcessingGoal::kImageText:
        rules.emplace_back(rule::kTokenCount);
        rules.emplace_back(rule::kImageExists);
        break;
    }
    return rules;
}

void validate_sample(const Sample& sample, std::size_t ordinal, ProcessingGoal goal,
                     const SchemaTokens& tokens, ValidationReport& report) {
    if (sample.is_faulty()) {
        report.add(ordinal, rule::kRecordParse, *sample.fault);
        return;
    }
    bool placeholder = sample.is_placeholder();
    if (goal == ProcessingGoal::kPretrain || goal == ProcessingGoal::kImageText) {
        try {
            check_token_counts(sample, tokens);
        } catch (const Error& e) {
            report.add(ordinal, rule::kTokenCount, e.what());
        }
    }
    if (goal == ProcessingGoal::kPostTuning && !placeholder) {
        if (sample.query.empty() || sample.response.empty()) {
            report.add(ordinal, rule::kDialogNonEmpty,
                       sample.query.empty() ? "empty query" : "empty response");
        }
    }
    if (goal == ProcessingGoal::kImageText) {
        for (const auto& path : sample.images) {
            std::error_code ec;
            if (!std::filesystem::is_regular_file(path, ec)) {
                report.add(ordinal, rule::kImageExists, fmt::format("image not found: {}", path));
            }
        }
    }
}

ValidationReport validate_samples(std::span<const Sample> samples, ProcessingGoal goal,
                                  const SchemaTokens& tokens) {
    ValidationReport report;
    report.checked_rules = rules_for(goal);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        validate_sample(samples[i], i, goal, tokens, report);
    }
    return report;
}

Sample make_empty_sample(const Sample& prototype) {
    Sample s;
    s.key_order = prototype.key_order;
    for (auto it = prototype.extra.begin(); it != prototype.extra.end(); ++it) {
        s.extra[it.key()] = empty_of_kind(it.value());
    }
    s.meta = Json::object();
    s.meta[std::string(kPlaceholderKey)] = true;
    if (std::find(s.key_order.begin(), s.key_order.end(), field::kMeta) == s.key_order.end()) {
        s.key_order.emplace_back(field::kMeta);
    }
    return s;
}

} // namespace dj
