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
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dj/io/dataset.hpp"
#include "dj/ops/registry.hpp"

namespace dj {

struct DedupConfig {
    double jaccard_threshold = 0.7;
    std::size_t num_permutations = 256;
    std::size_t shingle_size = 5;
    std::size_t bands = 32;
    std::size_t rows_per_band = 8;
    std::uint64_t seed = 42;

    /// Fills bands and rows from the threshold. Throws Error(kParamValidation)
    /// on out-of-range values.
    static DedupConfig make(double threshold, std::size_t num_permutations,
                            std::size_t shingle_size, std::uint64_t seed);

    Json to_json() const;
};

/// (b, r) with b * r == num_permutations minimizing |(1/b)^(1/r) - threshold|.
std::pair<std::size_t, std::size_t> choose_bands(std::size_t num_permutations, double threshold);

/// Sorted, duplicate-free word k-grams of the lower-cased text.
using ShingleSet = std::vector<std::string>;

ShingleSet shingle(std::string_view text, std::size_t k);
double jaccard(const ShingleSet& a, const ShingleSet& b);

inline constexpr std::uint64_t kEmptySignatureValue = std::numeric_limits<std::uint64_t>::max();

struct Signature {
    std::size_t sample_ordinal = 0;
    std::vector<std::uint64_t> minhash_values;

    /// Reserved signature of an empty shingle set; never bucketed.
    bool is_empty() const;
};

Signature compute_signature(const ShingleSet& shingles, const DedupConfig& config,
                            std::size_t ordinal = 0);

/// Fraction of positions where two signatures agree.
double signature_agreement(const Signature& a, const Signature& b);

using CandidatePair = std::pair<std::size_t, std::size_t>;

/// Candidate ordinal pairs (first < second, sorted, unique) from grouping
/// signatures by band hash. With `all_pairs` false each bucket contributes
/// only edges to its first member, which yields the same components
/// without verification.
std::vector<CandidatePair> band_and_bucket(const std::vector<Signature>& signatures,
                                           const DedupConfig& config, bool all_pairs = true);

/// Dense union-find over 0..n-1 with union by size and path compression.
class UnionFind {
public:
    explicit UnionFind(std::size_t n = 0);

    std::size_t size() const { return parent_.size(); }
    std::size_t find(std::size_t x);
    /// Returns true when x and y were in different sets.
    bool unite(std::size_t x, std::size_t y);
    std::size_t set_size(std::size_t x);

    /// Sets in order of their smallest member; members ascending.
    std::vector<std::vector<std::size_t>> components(bool include_singletons = true);

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> size_;
};

/// Unions candidate pairs over n ordinals. When `shingles` is given, a pair
/// is joined only if its exact Jaccard similarity reaches `threshold`.
UnionFind union_candidates(std::size_t n, const std::vector<CandidatePair>& pairs,
                           const std::vector<ShingleSet>* shingles = nullptr,
                           double threshold = 0.0);

enum class KeepPolicy { kFirst, kLongest };

KeepPolicy parse_keep_policy(std::string_view name);

struct DedupReport {
    /// Clusters of two or more ordinals, ordered by smallest member.
    std::vector<std::vector<std::size_t>> clusters;
    std::size_t removed = 0;
    Json config = Json::object();
    /// Per-phase wall times in milliseconds.
    Json timings = Json::object();

    Json to_json(bool with_timings = false) const;
    static DedupReport from_json(const Json& j);
};

struct DedupResult {
    Dataset dataset;
    DedupReport report;
};

struct DedupOptions {
    KeepPolicy keep = KeepPolicy::kFirst;
    bool verify = true;
    std::size_t threads = 1;
};

/// MinHash-LSH near-duplicate removal over the valid samples of `dataset`,
/// ordinals being their positions. Placeholders are never clustered.
DedupResult dedup_pass(const Dataset& dataset, const DedupConfig& config,
                       const DedupOptions& options = {});

enum class ExactKey { kTextHash, kMediaFileHash };

ExactKey parse_exact_key(std::string_view name);

/// Drops samples whose key digest appeared earlier. Samples without media
/// are never duplicates under kMediaFileHash. Throws Error(kUnreadableMedia).
DedupResult exact_dedup(const Dataset& dataset, ExactKey key);

/// Signatures per part, band buckets partitioned by bucket hash over
/// `shard_count` shards processed concurrently, then one union-find merge.
/// Ordinals run across the concatenated parts.
DedupResult sharded_dedup(const std::vector<Dataset>& parts, const DedupConfig& config,
                          std::size_t shard_count, const DedupOptions& options = {});

void register_dedup_ops(OpRegistry& registry);

} // namespace dj
