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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dj/ops/params.hpp"
#include "dj/ops/registry.hpp"

namespace dj {

/// Closed interval; an absent bound is unbounded.
struct StatRange {
    std::optional<double> min;
    std::optional<double> max;

    bool contains(double v) const {
        return (!min || v >= *min) && (!max || v <= *max);
    }

    /// Reads `<min_key>` / `<max_key>` from validated params. Throws
    /// Error(kParamValidation) when min > max.
    static StatRange from_params(std::string_view op, const Json& params, std::string_view min_key,
                                 std::string_view max_key);
};

namespace stat {
inline constexpr std::string_view kTextLen = "text_len";
inline constexpr std::string_view kCharRepRatio = "char_rep_ratio";
inline constexpr std::string_view kImageWidths = "image_widths";
inline constexpr std::string_view kImageHeights = "image_heights";
inline constexpr std::string_view kImageSizes = "image_sizes";
inline constexpr std::string_view kAudioSizes = "audio_sizes";
inline constexpr std::string_view kAspectRatios = "aspect_ratios";
} // namespace stat

/// Count of the most frequent code-point n-gram times n over the text
/// length, capped at 1. Texts shorter than n score 0.
double char_repetition_ratio(std::string_view text, std::size_t n);

/// Code-point offsets at which text_chunk_mapper starts each chunk.
std::vector<std::size_t> chunk_offsets(std::size_t length, std::size_t max_chars,
                                       std::size_t overlap_chars);

std::vector<std::string> chunk_text(std::string_view text, std::size_t max_chars,
                                    std::size_t overlap_chars);

/// Collapses runs of Unicode whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

void register_catalog_ops(OpRegistry& registry);

} // namespace dj
