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
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dj/io/dataset.hpp"
#include "dj/ops/registry.hpp"
#include "dj/schema/sample.hpp"

namespace dj::testing {

namespace fs = std::filesystem;

/// Directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline constexpr int kSyntheticFilters = 8;
inline constexpr int kSharedFilters = 4;

/// Registers the synthetic operators below into the default registry once.
///
///   syn_filter_<i>   commutative filter, keeps hash(text, salt) below keep_pct;
///                     `work` fmix rounds per sample set its cost
///   syn_shared_<i>   same, tagged with one shared resource so they fuse
///   syn_suffix_mapper appends " <tag>" to text
///   syn_flaky_mapper  throws on the first `failures` attempts of each batch
void register_synthetic_ops();

/// Forgets the attempt counts kept by syn_flaky_mapper.
void reset_flaky_attempts();

std::string random_text(std::mt19937_64& rng, std::size_t min_words, std::size_t max_words);

std::vector<Sample> text_corpus(std::size_t n, std::uint64_t seed, std::size_t min_words = 3,
                                std::size_t max_words = 40);

/// `docs` texts of `words` words in which `clusters` groups of `cluster_size`
/// near-copies are planted; each copy differs from its cluster's base in
/// `edits` word positions. Everything else is random.
struct PlantedCorpus {
    std::vector<std::string> texts;
    /// Planted clusters as ordinals, ascending.
    std::vector<std::vector<std::size_t>> clusters;
};

PlantedCorpus planted_corpus(std::size_t docs, std::size_t clusters, std::size_t cluster_size,
                             std::size_t words, std::size_t edits, std::uint64_t seed);

// Reference implementations kept deliberately naive for use as oracles.
std::set<std::string> oracle_shingles(const std::string& text, std::size_t k);
double oracle_jaccard(const std::set<std::string>& a, const std::set<std::string>& b);
/// Components of the all-pairs graph with edges at Jaccard >= threshold,
/// found by BFS; singletons included, ordered by smallest member.
std::vector<std::vector<std::size_t>> oracle_clusters(const std::vector<std::string>& texts,
                                                      std::size_t k, double threshold);
std::vector<std::vector<std::size_t>> bfs_components(std::size_t n,
                                                     const std::vector<std::pair<std::size_t, std::size_t>>& edges);

std::vector<Sample> samples_of(const std::vector<std::string>& texts);

void write_jsonl(const fs::path& path, const std::vector<Sample>& samples);
void write_lines(const fs::path& path, const std::vector<std::string>& lines);
std::string read_file(const fs::path& path);

/// Canonical forms of the valid samples, sorted.
std::vector<std::string> multiset_of(const Dataset& dataset);
std::vector<std::string> multiset_of(const std::vector<Sample>& samples);

/// Minimal valid PNG with the given dimensions.
std::string png_bytes(std::uint32_t width, std::uint32_t height);
void write_png(const fs::path& path, std::uint32_t width, std::uint32_t height);

/// Runs `body` and returns its wall time in seconds.
template <typename F>
double time_seconds(F&& body);

double median(std::vector<double> values);

} // namespace dj::testing

#include <chrono>

template <typename F>
double dj::testing::time_seconds(F&& body) {
    auto t0 = std::chrono::steady_clock::now();
    body();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
