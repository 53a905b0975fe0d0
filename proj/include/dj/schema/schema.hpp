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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dj/schema/sample.hpp"

namespace dj {

struct SchemaTokens {
    std::string image_token = "<__dj__image>";
    std::string video_token = "<__dj__video>";
    std::string audio_token = "<__dj__audio>";
    std::string eoc_token = "<|__dj__eoc|>";

    const std::string& token_for(Modality m) const;

    /// Throws Error(kSchemaViolation) unless tokens are non-empty, distinct
    /// and none is a substring of another.
    void check() const;
};

/// Non-overlapping occurrences of `token` in `text`.
std::size_t count_token(std::string_view text, std::string_view token);

struct MediaRef {
    Modality modality;
    std::size_t index;

    bool operator==(const MediaRef&) const = default;
};

/// A semantic unit of `text`. The span excludes the terminating end-of-chunk
/// token; `terminated` records whether one followed it.
struct Chunk {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool terminated = false;
    std::vector<MediaRef> media_refs;
};

/// Splits `sample.text` on the end-of-chunk token and assigns the k-th media
/// token of each modality to the k-th path of that modality's list. A
/// trailing end-of-chunk token does not open a new chunk; text without any
/// is one chunk. Throws Error(kTokenMismatch) when token counts disagree
/// with media list lengths.
std::vector<Chunk> parse_chunks(const Sample& sample, const SchemaTokens& tokens = {});

/// Inverse of parse_chunks over the chunk spans.
std::string join_chunks(std::string_view text, const std::vector<Chunk>& chunks,
                        const SchemaTokens& tokens = {});

/// Throws Error(kTokenMismatch) naming the first mismatching modality.
void check_token_counts(const Sample& sample, const SchemaTokens& tokens = {});

enum class ProcessingGoal { kPretrain, kPostTuning, kImageText };

ProcessingGoal parse_goal(std::string_view name);
std::string_view goal_name(ProcessingGoal goal);

namespace rule {
inline constexpr std::string_view kRecordParse = "record_parse";
inline constexpr std::string_view kTokenCount = "token_count";
inline constexpr std::string_view kDialogNonEmpty = "dialog_nonempty";
inline constexpr std::string_view kImageExists = "image_exists";
} // namespace rule

struct ValidationError {
    std::size_t ordinal = 0;
    std::string rule_id;
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<ValidationError> errors;
    std::vector<std::string> checked_rules;

    void add(std::size_t ordinal, std::string_view rule_id, std::string message);
    Json to_json() const;
};

std::vector<std::string> rules_for(ProcessingGoal goal);

/// Appends report entries for one record. Faulty records fail
/// `record_parse`; placeholders are exempt from emptiness rules.
void validate_sample(const Sample& sample, std::size_t ordinal, ProcessingGoal goal,
                     const SchemaTokens& tokens, ValidationReport& report);

ValidationReport validate_samples(std::span<const Sample> samples, ProcessingGoal goal,
                                  const SchemaTokens& tokens = {});

/// A schema-compatible empty record: same fields and value kinds as
/// `prototype`, every value emptied, meta carrying the placeholder flag.
Sample make_empty_sample(const Sample& prototype);

} // namespace dj
