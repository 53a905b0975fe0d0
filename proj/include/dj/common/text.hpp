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
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dj::text {

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD, one per
/// byte, so the result is total on arbitrary input.
std::vector<char32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);
std::string encode_utf8(const std::vector<char32_t>& cps, std::size_t begin, std::size_t end);

/// Number of code points.
std::size_t char_count(std::string_view s);

bool is_unicode_space(char32_t cp);

/// ASCII lower-casing; non-ASCII bytes pass through.
std::string ascii_lower(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

/// Parses byte quantities like "128MiB", "0.25MB", "4096", "2k".
/// Decimal (k, M, G) and binary (KiB, MiB, GiB) suffixes are both accepted;
/// bare K/M/G are treated as binary, matching common CLI usage.
std::optional<std::uint64_t> parse_bytes(std::string_view s);

} // namespace dj::text
