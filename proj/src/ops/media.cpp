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

#include "dj/ops/media.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include <fmt/format.h>

namespace dj {

namespace {

constexpr std::size_t kHeaderReadLimit = 512 * 1024;

std::uint32_t be16(std::string_view b, std::size_t at) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) << 8) |
           static_cast<unsigned char>(b[at + 1]);
}

std::uint32_t be32(std::string_view b, std::size_t at) {
    return (be16(b, at) << 16) | be16(b, at + 2);
}

std::uint32_t le16(std::string_view b, std::size_t at) {
    return static_cast<unsigned char>(b[at]) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8);
}

std::int32_t le32s(std::string_view b, std::size_t at) {
    std::uint32_t v = le16(b, at) | (le16(b, at + 2) << 16);
    return static_cast<std::int32_t>(v);
}

std::optional<ImageDims> parse_jpeg(std::string_view b) {
    std::size_t pos = 2;
    while (pos + 4 <= b.size()) {
        if (static_cast<unsigned char>(b[pos]) != 0xFF) {
            return std::nullopt;
        }
        while (pos < b.size() && static_cast<unsigned char>(b[pos]) == 0xFF) {
            ++pos;
        }
        if (pos >= b.size()) {
            return std::nullopt;
        }
        auto marker = static_cast<unsigned char>(b[pos]);
        ++pos;
        if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
            continue;
        }
        if (pos + 2 > b.size()) {
            return std::nullopt;
        }
        std::uint32_t len = be16(b, pos);
        bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                   marker != 0xCC;
        if (sof) {
            if (pos + 7 > b.size()) {
                return std::nullopt;
            }
            return ImageDims{be16(b, pos + 5), be16(b, pos + 3)};
        }
        if (len < 2) {
            return std::nullopt;
        }
        pos += len;
    }
    return std::nullopt;
}

} // namespace

std::optional<ImageDims> parse_image_header(std::string_view b) {
    static constexpr std::string_view kPng = "\x89PNG\r\n\x1a\n";
    if (b.size() >= 24 && b.substr(0, 8) == kPng && b.substr(12, 4) == "IHDR") {
        return ImageDims{be32(b, 16), be32(b, 20)};
    }
    if (b.size() >= 4 && static_cast<unsigned char>(b[0]) == 0xFF &&
        static_cast<unsigned char>(b[1]) == 0xD8) {
        return parse_jpeg(b);
    }
    if (b.size() >= 10 && (b.substr(0, 6) == "GIF87a" || b.substr(0, 6) == "GIF89a")) {
        return ImageDims{le16(b, 6), le16(b, 8)};
    }
    if (b.size() >= 26 && b.substr(0, 2) == "BM") {
        std::int32_t w = le32s(b, 18);
        std::int32_t h = le32s(b, 22);
        if (w <= 0 || h == 0) {
            return std::nullopt;
        }
        return ImageDims{static_cast<std::uint32_t>(w),
                         static_cast<std::uint32_t>(h < 0 ? -h : h)};
    }
    return std::nullopt;
}

MediaInfo read_media_info(const std::string& path) {
    MediaInfo info;
    std::error_code ec;
    auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        info.error = fmt::format("cannot stat '{}': {}", path, ec.message());
        return info;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        info.error = fmt::format("cannot open '{}'", path);
        return info;
    }
    info.readable = true;
    info.file_size = size;
    std::string head(std::min<std::uint64_t>(size, kHeaderReadLimit), '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    info.dims = parse_image_header(head);
    return info;
}

const MediaInfo& MediaCache::get(const std::string& path) {
    {
        std::lock_guard lock(mu_);
        if (auto it = entries_.find(path); it != entries_.end()) {
            return it->second;
        }
    }
    MediaInfo info = read_media_info(path);
    std::lock_guard lock(mu_);
    auto [it, inserted] = entries_.emplace(path, std::move(info));
    if (inserted) {
        ++loads_;
    }
    return it->second;
}

void MediaCache::prefetch(std::span<const std::string> paths, std::size_t io_threads) {
    std::vector<std::string> missing;
    {
        std::lock_guard lock(mu_);
        for (const auto& p : paths) {
            if (!entries_.contains(p) &&
                std::find(missing.begin(), missing.end(), p) == missing.end()) {
                missing.push_back(p);
            }
        }
    }
    if (missing.empty()) {
        return;
    }
    std::size_t threads = std::clamp<std::size_t>(io_threads, 1, missing.size());
    if (threads == 1) {
        for (const auto& p : missing) {
            get(p);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < missing.size(); i = next++) {
                get(missing[i]);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

std::size_t MediaCache::loads() const {
    std::lock_guard lock(mu_);
    return loads_;
}

} // namespace dj
