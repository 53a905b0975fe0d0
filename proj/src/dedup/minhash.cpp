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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/common/hash.hpp"
#include "dj/common/text.hpp"
#include "dj/dedup/dedup.hpp"
#include "dedup_internal.hpp"

namespace dj {

std::pair<std::size_t, std::size_t> choose_bands(std::size_t num_permutations, double threshold) {
    std::pair<std::size_t, std::size_t> best{num_permutations, 1};
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t b = 1; b <= num_permutations; ++b) {
        if (num_permutations % b != 0) {
            continue;
        }
        std::size_t r = num_permutations / b;
        double err = std::abs(std::pow(1.0 / static_cast<double>(b), 1.0 / static_cast<double>(r)) -
                              threshold);
        if (err < best_err) {
            best_err = err;
            best = {b, r};
        }
    }
    return best;
}

DedupConfig DedupConfig::make(double threshold, std::size_t num_permutations,
                              std::size_t shingle_size, std::uint64_t seed) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw Error(ErrorCode::kParamValidation,
                    fmt::format("jaccard_threshold: {} is outside (0, 1]", threshold));
    }
    if (num_permutations == 0) {
        throw Error(ErrorCode::kParamValidation, "num_permutations: must be at least 1");
    }
    if (shingle_size == 0) {
        throw Error(ErrorCode::kParamValidation, "shingle_size: must be at least 1");
    }
    DedupConfig c;
    c.jaccard_threshold = threshold;
    c.num_permutations = num_permutations;
    c.shingle_size = shingle_size;
    c.seed = seed;
    std::tie(c.bands, c.rows_per_band) = choose_bands(num_permutations, threshold);
    return c;
}

Json DedupConfig::to_json() const {
    return Json{{"jaccard_threshold", jaccard_threshold},
                {"num_permutations", num_permutations},
                {"shingle_size", shingle_size},
                {"bands", bands},
                {"rows_per_band", rows_per_band},
                {"seed", seed}};
}

ShingleSet shingle(std::string_view t, std::size_t k) {
    std::vector<std::string> tokens = text::split_whitespace(text::ascii_lower(t));
    ShingleSet out;
    if (tokens.empty()) {
        return out;
    }
    auto join = [&](std::size_t begin, std::size_t end) {
        std::string s = tokens[begin];
        for (std::size_t i = begin + 1; i < end; ++i) {
            s.push_back(' ');
            s += tokens[i];
        }
        return s;
    };
    if (tokens.size() < k) {
        out.push_back(join(0, tokens.size()));
        return out;
    }
    out.reserve(tokens.size() - k + 1);
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
        out.push_back(join(i, i + k));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double jaccard(const ShingleSet& a, const ShingleSet& b) {
    if (a.empty() && b.empty()) {
        return 0.0;
    }
    std::size_t inter = 0;
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++inter;
            ++i;
            ++j;
        }
    }
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

bool Signature::is_empty() const {
    return std::all_of(minhash_values.begin(), minhash_values.end(),
                       [](std::uint64_t v) { return v == kEmptySignatureValue; });
}

Signature compute_signature(const ShingleSet& shingles, const DedupConfig& config,
                            std::size_t ordinal) {
    Signature sig;
    sig.sample_ordinal = ordinal;
    sig.minhash_values.assign(config.num_permutations, kEmptySignatureValue);
    if (shingles.empty()) {
        return sig;
    }
    std::vector<std::uint64_t> salts(config.num_permutations);
    for (std::size_t i = 0; i < salts.size(); ++i) {
        salts[i] = splitmix64(config.seed ^ i);
    }
    for (const auto& s : shingles) {
        std::uint64_t base = hash64(s);
        for (std::size_t i = 0; i < salts.size(); ++i) {
            // Real hashes never reach the reserved value, so empty stays distinct.
            std::uint64_t h = std::min(fmix64(base ^ salts[i]), kEmptySignatureValue - 1);
            sig.minhash_values[i] = std::min(sig.minhash_values[i], h);
        }
    }
    return sig;
}

double signature_agreement(const Signature& a, const Signature& b) {
    std::size_t n = std::min(a.minhash_values.size(), b.minhash_values.size());
    if (n == 0) {
        return 0.0;
    }
    std::size_t same = 0;
    for (std::size_t i = 0; i < n; ++i) {
        same += a.minhash_values[i] == b.minhash_values[i] ? 1 : 0;
    }
    return static_cast<double>(same) / static_cast<double>(n);
}

std::uint64_t band_key(const Signature& sig, std::size_t band, const DedupConfig& config) {
    std::uint64_t h = splitmix64(config.seed + 0x5bd1e995ULL * (band + 1));
    std::size_t begin = band * config.rows_per_band;
    for (std::size_t i = begin; i < begin + config.rows_per_band; ++i) {
        h = fmix64(rotl64(h, 29) ^ sig.minhash_values[i]);
    }
    return h;
}

std::vector<CandidatePair> bucket_edges(const std::vector<Signature>& signatures,
                                        const DedupConfig& config, bool all_pairs,
                                        std::size_t shard_count) {
    if (config.bands * config.rows_per_band != config.num_permutations) {
        throw Error(ErrorCode::kParamValidation,
                    fmt::format("bands x rows ({} x {}) does not match {} permutations",
                                config.bands, config.rows_per_band, config.num_permutations));
    }
    shard_count = std::max<std::size_t>(1, shard_count);
    struct Entry {
        std::uint64_t key;
        std::size_t ordinal;
    };
    std::vector<std::vector<Entry>> shards(shard_count);
    for (const auto& sig : signatures) {
        if (sig.minhash_values.size() != config.num_permutations) {
            throw Error(ErrorCode::kParamValidation, "signature length does not match config");
        }
        if (sig.is_empty()) {
            continue;
        }
        for (std::size_t b = 0; b < config.bands; ++b) {
            std::uint64_t key = band_key(sig, b, config);
            shards[key % shard_count].push_back({key, sig.sample_ordinal});
        }
    }

    std::vector<std::vector<CandidatePair>> edges(shard_count);
    auto work = [&](std::size_t s) {
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
        for (const auto& e : shards[s]) {
            buckets[e.key].push_back(e.ordinal);
        }
        auto& out = edges[s];
        for (auto& [_, members] : buckets) {
            if (members.size() < 2) {
                continue;
            }
            std::sort(members.begin(), members.end());
            members.erase(std::unique(members.begin(), members.end()), members.end());
            for (std::size_t i = 0; i < members.size(); ++i) {
                if (!all_pairs) {
                    if (i > 0) {
                        out.emplace_back(members[0], members[i]);
                    }
                    continue;
                }
                for (std::size_t j = i + 1; j < members.size(); ++j) {
                    out.emplace_back(members[i], members[j]);
                }
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    };
    if (shard_count == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t s = 0; s < shard_count; ++s) {
            threads.emplace_back(work, s);
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    std::vector<CandidatePair> merged;
    for (auto& e : edges) {
        merged.insert(merged.end(), e.begin(), e.end());
    }
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
    return merged;
}

std::vector<CandidatePair> band_and_bucket(const std::vector<Signature>& signatures,
                                           const DedupConfig& config, bool all_pairs) {
    return bucket_edges(signatures, config, all_pairs, 1);
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
}

std::size_t UnionFind::find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) {
        root = parent_[root];
    }
    while (parent_[x] != root) {
        std::size_t next = parent_[x];
        parent_[x] = root;
        x = next;
    }
    return root;
}

bool UnionFind::unite(std::size_t x, std::size_t y) {
    std::size_t a = find(x);
    std::size_t b = find(y);
    if (a == b) {
        return false;
    }
    if (size_[a] < size_[b] || (size_[a] == size_[b] && b < a)) {
        std::swap(a, b);
    }
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
}

std::size_t UnionFind::set_size(std::size_t x) {
    return size_[find(x)];
}

std::vector<std::vector<std::size_t>> UnionFind::components(bool include_singletons) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> slot(parent_.size(), SIZE_MAX);
    for (std::size_t i = 0; i < parent_.size(); ++i) {
        std::size_t r = find(i);
        if (!include_singletons && size_[r] < 2) {
            continue;
        }
        if (slot[r] == SIZE_MAX) {
            slot[r] = out.size();
            out.emplace_back();
        }
        out[slot[r]].push_back(i);
    }
    return out;
}

UnionFind union_candidates(std::size_t n, const std::vector<CandidatePair>& pairs,
                           const std::vector<ShingleSet>* shingles, double threshold) {
    UnionFind uf(n);
    for (const auto& [a, b] : pairs) {
        if (shingles != nullptr && jaccard((*shingles)[a], (*shingles)[b]) < threshold) {
            continue;
        }
        uf.unite(a, b);
    }
    return uf;
}

KeepPolicy parse_keep_policy(std::string_view name) {
    if (name == "first") return KeepPolicy::kFirst;
    if (name == "longest") return KeepPolicy::kLongest;
    throw Error(ErrorCode::kParamValidation,
                fmt::format("keep: '{}' is not one of first, longest", name));
}

Json DedupReport::to_json(bool with_timings) const {
    Json j = Json::object();
    j["clusters"] = clusters;
    j["removed"] = removed;
    j["config"] = config;
    if (with_timings) {
        j["timings"] = timings;
    }
    return j;
}

DedupReport DedupReport::from_json(const Json& j) {
    DedupReport r;
    r.clusters = j.at("clusters").get<std::vector<std::vector<std::size_t>>>();
    r.removed = j.at("removed").get<std::size_t>();
    r.config = j.value("config", Json::object());
    r.timings = j.value("timings", Json::object());
    return r;
}

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

void MinHashIndex::add(std::size_t ordinal, std::string_view t, const DedupConfig& config,
                       bool keep_shingles) {
    ShingleSet sh = shingle(t, config.shingle_size);
    signatures.push_back(compute_signature(sh, config, signatures.size()));
    ordinals.push_back(ordinal);
    lengths.push_back(text::char_count(t));
    if (keep_shingles) {
        shingles.push_back(std::move(sh));
    }
}

void MinHashIndex::add_all(const std::vector<std::string_view>& texts,
                           const std::vector<std::size_t>& ords, const DedupConfig& config,
                           bool keep_shingles, std::size_t threads) {
    std::size_t base = signatures.size();
    std::size_t n = texts.size();
    signatures.resize(base + n);
    lengths.resize(base + n);
    if (keep_shingles) {
        shingles.resize(base + n);
    }
    ordinals.insert(ordinals.end(), ords.begin(), ords.end());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            ShingleSet sh = shingle(texts[i], config.shingle_size);
            signatures[base + i] = compute_signature(sh, config, base + i);
            lengths[base + i] = text::char_count(texts[i]);
            if (keep_shingles) {
                shingles[base + i] = std::move(sh);
            }
        }
    };
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, n));
    if (threads == 1) {
        work(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t per = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        std::size_t begin = t * per;
        std::size_t end = std::min(n, begin + per);
        if (begin < end) {
            pool.emplace_back(work, begin, end);
        }
    }
    for (auto& th : pool) {
        th.join();
    }
}

Resolution MinHashIndex::resolve(const DedupConfig& config, const DedupOptions& options,
                                 std::size_t shard_count) const {
    Resolution res;
    auto t0 = std::chrono::steady_clock::now();
    std::vector<CandidatePair> pairs = bucket_edges(signatures, config, options.verify, shard_count);
    res.timings["bucket_ms"] = ms_since(t0);
    res.timings["candidate_pairs"] = pairs.size();

    t0 = std::chrono::steady_clock::now();
    UnionFind uf = union_candidates(signatures.size(), pairs, options.verify ? &shingles : nullptr,
                                    config.jaccard_threshold);
    res.timings["union_ms"] = ms_since(t0);

    res.keep.assign(signatures.size(), true);
    for (const auto& comp : uf.components(false)) {
        std::size_t rep = comp.front();
        if (options.keep == KeepPolicy::kLongest) {
            for (std::size_t i : comp) {
                if (lengths[i] > lengths[rep]) {
                    rep = i;
                }
            }
        }
        std::vector<std::size_t> cluster;
        for (std::size_t i : comp) {
            cluster.push_back(ordinals[i]);
            if (i != rep) {
                res.keep[i] = false;
                ++res.removed;
            }
        }
        res.clusters.push_back(std::move(cluster));
    }
    return res;
}

Json options_json(const DedupConfig& config, const DedupOptions& options) {
    Json c = config.to_json();
    c["keep"] = options.keep == KeepPolicy::kFirst ? "first" : "longest";
    c["verify"] = options.verify;
    return c;
}

namespace {

DedupResult finish_pass(const std::vector<Sample>& samples, const MinHashIndex& index,
                        const std::vector<std::size_t>& slot_of, const DedupConfig& config,
                        const DedupOptions& options, std::size_t shard_count, Json timings) {
    Resolution res = index.resolve(config, options, shard_count);
    std::vector<Sample> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (slot_of[i] == SIZE_MAX || res.keep[slot_of[i]]) {
            out.push_back(samples[i]);
        }
    }
    DedupResult r;
    r.dataset = Dataset::from_samples(std::move(out));
    r.report.clusters = std::move(res.clusters);
    r.report.removed = res.removed;
    r.report.config = options_json(config, options);
    timings.update(res.timings);
    r.report.timings = std::move(timings);
    return r;
}

void index_samples(const std::vector<Sample>& samples, std::size_t ordinal_base,
                   const DedupConfig& config, const DedupOptions& options, MinHashIndex& index,
                   std::vector<std::size_t>& slot_of) {
    std::vector<std::string_view> texts;
    std::vector<std::size_t> ords;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].is_placeholder()) {
            slot_of.push_back(SIZE_MAX);
            continue;
        }
        slot_of.push_back(index.signatures.size() + texts.size());
        texts.push_back(samples[i].text);
        ords.push_back(ordinal_base + i);
    }
    index.add_all(texts, ords, config, options.verify, options.threads);
}

} // namespace

DedupResult dedup_pass(const Dataset& dataset, const DedupConfig& config,
                       const DedupOptions& options) {
    std::vector<Sample> samples = dataset.mode() == DatasetMode::kStreaming
                                          ? dataset.materialize().samples()
                                          : dataset.samples();
    auto t0 = std::chrono::steady_clock::now();
    MinHashIndex index;
    std::vector<std::size_t> slot_of;
    index_samples(samples, 0, config, options, index, slot_of);
    Json timings{{"signature_ms", ms_since(t0)}};
    return finish_pass(samples, index, slot_of, config, options, 1, std::move(timings));
}

DedupResult sharded_dedup(const std::vector<Dataset>& parts, const DedupConfig& config,
                          std::size_t shard_count, const DedupOptions& options) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<Sample>> loaded(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
        loaded[p] = parts[p].mode() == DatasetMode::kStreaming ? parts[p].materialize().samples()
                                                               : parts[p].samples();
    }
    // Per-part signatures are independent; each part gets its own thread.
    std::vector<MinHashIndex> partial(parts.size());
    std::vector<std::vector<std::size_t>> part_slots(parts.size());
    std::vector<std::size_t> base(parts.size(), 0);
    for (std::size_t p = 1; p < parts.size(); ++p) {
        base[p] = base[p - 1] + loaded[p - 1].size();
    }
    {
        std::vector<std::thread> threads;
        DedupOptions single = options;
        single.threads = 1;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            threads.emplace_back([&, p, single] {
                index_samples(loaded[p], base[p], config, single, partial[p], part_slots[p]);
            });
        }
        for (auto& t : threads) {
            t.join();
        }
    }
    MinHashIndex index;
    std::vector<Sample> all;
    std::vector<std::size_t> slot_of;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        std::size_t offset = index.signatures.size();
        for (auto& sig : partial[p].signatures) {
            sig.sample_ordinal += offset;
            index.signatures.push_back(std::move(sig));
        }
        index.ordinals.insert(index.ordinals.end(), partial[p].ordinals.begin(),
                              partial[p].ordinals.end());
        index.lengths.insert(index.lengths.end(), partial[p].lengths.begin(),
                             partial[p].lengths.end());
        for (auto& sh : partial[p].shingles) {
            index.shingles.push_back(std::move(sh));
        }
        for (std::size_t s : part_slots[p]) {
            slot_of.push_back(s == SIZE_MAX ? SIZE_MAX : s + offset);
        }
        all.insert(all.end(), std::make_move_iterator(loaded[p].begin()),
                   std::make_move_iterator(loaded[p].end()));
    }
    Json timings{{"signature_ms", ms_since(t0)}, {"shards", shard_count}};
    return finish_pass(all, index, slot_of, config, options, shard_count, std::move(timings));
}

} // namespace dj
