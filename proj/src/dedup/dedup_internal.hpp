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
#include <string_view>
#include <vector>

#include "dj/dedup/dedup.hpp"

namespace dj {

std::vector<CandidatePair> bucket_edges(const std::vector<Signature>& signatures,
                                        const DedupConfig& config, bool all_pairs,
                                        std::size_t shard_count);

struct Resolution {
    /// Indexed like MinHashIndex::signatures.
    std::vector<bool> keep;
    std::vector<std::vector<std::size_t>> clusters;
    std::size_t removed = 0;
    Json timings = Json::object();
};

/// Signatures (and shingles when verifying) of indexed samples. Slot i
/// holds the sample with ordinal `ordinals[i]`.
struct MinHashIndex {
    std::vector<Signature> signatures;
    std::vector<ShingleSet> shingles;
    std::vector<std::size_t> ordinals;
    std::vector<std::size_t> lengths;

    void add(std::size_t ordinal, std::string_view text, const DedupConfig& config,
             bool keep_shingles);
    void add_all(const std::vector<std::string_view>& texts, const std::vector<std::size_t>& ords,
                 const DedupConfig& config, bool keep_shingles, std::size_t threads);
    Resolution resolve(const DedupConfig& config, const DedupOptions& options,
                       std::size_t shard_count) const;
};

Json options_json(const DedupConfig& config, const DedupOptions& options);

/// Digest identifying a sample under an exact-dedup key; empty when the
/// sample has nothing to compare (no media under kMediaFileHash).
std::string exact_key_of(const Sample& s, ExactKey key);

} // namespace dj
