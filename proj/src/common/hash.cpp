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

#include "dj/common/hash.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

namespace {

constexpr std::uint64_t kMul1 = 0x87c37b91114253d5ULL;
constexpr std::uint64_t kMul2 = 0x4cf5ad432745937fULL;

std::uint64_t load_le(const char* p, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return v;
}

std::uint64_t mix_word(std::uint64_t k) {
    k *= kMul1;
    k = rotl64(k, 31);
    k *= kMul2;
    return k;
}

} // namespace

std::uint64_t hash64(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = splitmix64(seed) ^ (bytes.size() * kMul2);
    const char* p = bytes.data();
    std::size_t n = bytes.size();
    while (n >= 8) {
        h ^= mix_word(load_le(p, 8));
        h = rotl64(h, 27) * 5 + 0x52dce729;
        p += 8;
        n -= 8;
    }
    if (n > 0) {
        h ^= mix_word(load_le(p, n));
    }
    return fmix64(h ^ bytes.size());
}

void ContentDigest::absorb(std::uint64_t word) {
    lane_a_ ^= mix_word(word);
    lane_a_ = rotl64(lane_a_, 27) * 5 + 0x52dce729;
    lane_b_ ^= mix_word(word ^ 0x38495ab5ULL);
    lane_b_ = rotl64(lane_b_, 31) * 5 + 0x38495ab5;
    lane_b_ += lane_a_;
}

void ContentDigest::update(std::string_view bytes) {
    total_ += bytes.size();
    for (char c : bytes) {
        pending_ |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * pending_bytes_);
        if (++pending_bytes_ == 8) {
            absorb(pending_);
            pending_ = 0;
            pending_bytes_ = 0;
        }
    }
}

std::string ContentDigest::hex() const {
    std::uint64_t a = lane_a_;
    std::uint64_t b = lane_b_;
    if (pending_bytes_ > 0) {
        a ^= mix_word(pending_);
        b ^= mix_word(pending_ ^ 0x38495ab5ULL);
    }
    a = fmix64(a ^ total_);
    b = fmix64(b ^ (total_ * kMul1));
    a += b;
    b += a;
    return fmt::format("{:016x}{:016x}", a, b);
}

std::string digest_hex(std::string_view bytes) {
    ContentDigest d;
    d.update(bytes);
    return d.hex();
}

std::string file_digest_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kIo, fmt::format("cannot open '{}' for hashing", path));
    }
    ContentDigest d;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        d.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
    return d.hex();
}

} // namespace dj
