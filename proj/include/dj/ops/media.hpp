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

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

namespace dj {

struct ImageDims {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
};

/// Reads width and height from a PNG, JPEG, GIF or BMP container header
/// without decoding pixels.
std::optional<ImageDims> parse_image_header(std::string_view bytes);

struct MediaInfo {
    bool readable = false;
    std::uint64_t file_size = 0;
    std::optional<ImageDims> dims;
    std::string error;
};

MediaInfo read_media_info(const std::string& path);

/// Per-batch cache of media headers. Filters fused into one operator share
/// a cache, so a file referenced by several of them is opened once.
class MediaCache {
public:
    const MediaInfo& get(const std::string& path);

    /// Loads every uncached path, issuing reads on up to `io_threads`
    /// threads. Safe to call concurrently with get().
    void prefetch(std::span<const std::string> paths, std::size_t io_threads);

    std::size_t loads() const;

private:
    mutable std::mutex mu_;
    std::unordered_map<std::string, MediaInfo> entries_;
    std::size_t loads_ = 0;
};

} // namespace dj
