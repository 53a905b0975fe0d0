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
#include <string>
#include <string_view>

namespace dj {

inline constexpr std::uint64_t rotl64(std::uint64_t x, int r) {
    return (x << r) | (x >> (64 - r));
}

/// Murmur3 64-bit finalizer; a bijection on 64-bit words.
inline constexpr std::uint64_t fmix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded 64-bit hash of a byte string.
std::uint64_t hash64(std::string_view bytes, std::uint64_t seed = 0);

/// Incremental 128-bit content digest, rendered as 32 hex characters. Feeding
/// the same bytes in any chunking yields the same digest.
class ContentDigest {
public:
    void update(std::string_view bytes);
    std::string hex() const;

private:
    void absorb(std::uint64_t word);

    std::uint64_t lane_a_ = 0x243f6a8885a308d3ULL;
    std::uint64_t lane_b_ = 0x13198a2e03707344ULL;
    std::uint64_t pending_ = 0;
    int pending_bytes_ = 0;
    std::uint64_t total_ = 0;
};

std::string digest_hex(std::string_view bytes);

/// Digest of a file's full contents. Throws Error(kIo) when unreadable.
std::string file_digest_hex(const std::string& path);

} // namespace dj
