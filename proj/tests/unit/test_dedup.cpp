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

#include <gtest/gtest.h>

#include <cmath>

#include "dj/common/error.hpp"
#include "dj/dedup/dedup.hpp"
#include "dj/ops/registry.hpp"
#include "dj/ops/run.hpp"
#include "test_support.hpp"

using namespace dj;
using namespace dj::testing;

namespace {

DedupConfig default_config() { return DedupConfig::make(0.7, 256, 5, 42); }

std::vector<std::size_t> firsts(const std::vector<std::vector<std::size_t>>& comps) {
    std::vector<std::size_t> out;
    for (const auto& c : comps) {
        out.push_back(c.front());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> ids_of(const Dataset& d) {
    std::vector<std::size_t> out;
    for (const auto& s : d.samples()) {
        out.push_back(s.meta["id"].get<std::size_t>());
    }
    return out;
}

std::vector<Sample> with_ids(const std::vector<std::string>& texts) {
    auto v = samples_of(texts);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i].meta["id"] = i;
    }
    return v;
}

/// Two shingle sets with exactly `shared` common and `only` private
/// elements each, so the true Jaccard is shared / (shared + 2 * only).
std::pair<ShingleSet, ShingleSet> sets_with(std::size_t shared, std::size_t only, std::uint64_t salt) {
    auto token = [&](char tag, std::size_t i) {
        return std::string(1, tag) + std::to_string(salt) + "_" + std::to_string(i);
    };
    ShingleSet a;
    for (std::size_t i = 0; i < shared; ++i) a.push_back(token('s', i));
    ShingleSet b = a;
    for (std::size_t i = 0; i < only; ++i) {
        a.push_back(token('a', i));
        b.push_back(token('b', i));
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return {a, b};
}

} // namespace

TEST(Shingle, Basics) {
    EXPECT_EQ(shingle("a b c", 2), (ShingleSet{"a b", "b c"}));
    EXPECT_EQ(shingle("a b", 5), (ShingleSet{"a b"}));
    EXPECT_EQ(shingle("", 5), ShingleSet{});
    EXPECT_EQ(shingle("A  b a B", 2), (ShingleSet{"a b", "b a"}));
    EXPECT_EQ(shingle("x y z", 1), (ShingleSet{"x", "y", "z"}));
}

TEST(Shingle, AgreesWithOracle) {
    for (const auto& s : text_corpus(200, 41, 0, 12)) {
        auto mine = shingle(s.text, 3);
        auto ref = oracle_shingles(s.text, 3);
        EXPECT_EQ(mine, ShingleSet(ref.begin(), ref.end())) << s.text;
    }
}

TEST(Bands, ProductAndThresholdFit) {
    for (double t : {0.5, 0.7, 0.8, 0.9}) {
        for (std::size_t perms : {std::size_t{64}, std::size_t{128}, std::size_t{256}}) {
            auto [b, r] = choose_bands(perms, t);
            EXPECT_EQ(b * r, perms);
            double best = 1e9;
            for (std::size_t bb = 1; bb <= perms; ++bb) {
                if (perms % bb == 0) {
                    double rr = static_cast<double>(perms / bb);
                    best = std::min(best, std::abs(std::pow(1.0 / static_cast<double>(bb), 1.0 / rr) - t));
                }
            }
            double mine = std::abs(std::pow(1.0 / static_cast<double>(b), 1.0 / static_cast<double>(r)) - t);
            EXPECT_DOUBLE_EQ(mine, best);
        }
    }
    DedupConfig c = default_config();
    EXPECT_EQ(c.bands * c.rows_per_band, 256u);
    EXPECT_THROW(DedupConfig::make(0.0, 256, 5, 1), Error);
    EXPECT_THROW(DedupConfig::make(0.5, 0, 5, 1), Error);
}

TEST(Signature, Deterministic) {
    DedupConfig c = default_config();
    auto s = shingle("the quick brown fox jumps over the lazy dog again", 3);
    EXPECT_EQ(compute_signature(s, c).minhash_values, compute_signature(s, c).minhash_values);
    EXPECT_EQ(compute_signature(s, c).minhash_values.size(), 256u);
    DedupConfig other = DedupConfig::make(0.7, 256, 5, 43);
    EXPECT_NE(compute_signature(s, c).minhash_values, compute_signature(s, other).minhash_values);
}

TEST(Signature, EmptySetReserved) {
    DedupConfig c = default_config();
    Signature e = compute_signature({}, c);
    EXPECT_TRUE(e.is_empty());
    for (auto v : e.minhash_values) EXPECT_EQ(v, kEmptySignatureValue);
    Signature n = compute_signature({"x"}, c);
    EXPECT_FALSE(n.is_empty());
    for (auto v : n.minhash_values) EXPECT_LT(v, kEmptySignatureValue);
    std::vector<Signature> sigs = {e, e};
    sigs[1].sample_ordinal = 1;
    EXPECT_TRUE(band_and_bucket(sigs, c).empty());
}

TEST(Signature, DisjointSetsRarelyAgree) {
    DedupConfig c = default_config();
    double total = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        auto [a, b] = sets_with(0, 30, k);
        total += signature_agreement(compute_signature(a, c), compute_signature(b, c));
    }
    EXPECT_LT(total / 100.0, 0.05);
}

TEST(Signature, HalfJaccardEstimate) {
    DedupConfig c = default_config();
    ShingleSet a = {"x", "y", "z"};
    ShingleSet b = {"w", "y", "z"};
    std::sort(b.begin(), b.end());
    EXPECT_DOUBLE_EQ(jaccard(a, b), 0.5);
    double total = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        auto [p, q] = sets_with(20, 10, k);
        EXPECT_DOUBLE_EQ(jaccard(p, q), 0.5);
        total += signature_agreement(compute_signature(p, c), compute_signature(q, c));
    }
    EXPECT_NEAR(total / 100.0, 0.5, 0.1);
}

TEST(Buckets, IdenticalAndDistinct) {
    DedupConfig c = default_config();
    auto s = shingle("one two three four five six seven eight nine ten", 5);
    std::vector<Signature> same = {compute_signature(s, c, 0), compute_signature(s, c, 1)};
    EXPECT_EQ(band_and_bucket(same, c), (std::vector<CandidatePair>{{0, 1}}));
    std::vector<Signature> distinct;
    for (std::size_t i = 0; i < 50; ++i) {
        auto [a, b] = sets_with(0, 40, i);
        distinct.push_back(compute_signature(a, c, i));
    }
    EXPECT_TRUE(band_and_bucket(distinct, c).empty());
}

TEST(Buckets, PlantedPairsAllFound) {
    PlantedCorpus pc = planted_corpus(100, 10, 2, 150, 2, 44);
    DedupConfig c = default_config();
    std::vector<Signature> sigs;
    for (std::size_t i = 0; i < pc.texts.size(); ++i) {
        sigs.push_back(compute_signature(shingle(pc.texts[i], 5), c, i));
    }
    auto cand = band_and_bucket(sigs, c);
    for (const auto& cl : pc.clusters) {
        auto a = oracle_shingles(pc.texts[cl[0]], 5);
        auto b = oracle_shingles(pc.texts[cl[1]], 5);
        ASSERT_GE(oracle_jaccard(a, b), 0.8);
        EXPECT_TRUE(std::binary_search(cand.begin(), cand.end(), CandidatePair{cl[0], cl[1]}));
    }
}

TEST(UnionFind, SmallExample) {
    UnionFind uf(7);
    uf.unite(1, 2);
    uf.unite(2, 3);
    uf.unite(5, 6);
    auto comps = uf.components();
    EXPECT_EQ(comps, (std::vector<std::vector<std::size_t>>{{0}, {1, 2, 3}, {4}, {5, 6}}));
    EXPECT_EQ(uf.set_size(3), 3u);
    EXPECT_EQ(uf.components(false), (std::vector<std::vector<std::size_t>>{{1, 2, 3}, {5, 6}}));
    UnionFind empty(4);
    EXPECT_EQ(empty.components().size(), 4u);
}

TEST(UnionFind, MatchesBfsOracle) {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng() % 30;
        std::size_t m = rng() % (2 * n);
        std::vector<CandidatePair> edges;
        for (std::size_t e = 0; e < m; ++e) {
            std::size_t a = rng() % n;
            std::size_t b = rng() % n;
            if (a != b) edges.emplace_back(std::min(a, b), std::max(a, b));
        }
        UnionFind uf = union_candidates(n, edges);
        EXPECT_EQ(uf.components(), bfs_components(n, edges));
        for (std::size_t x = 0; x < n; ++x) {
            std::size_t r = uf.find(x);
            EXPECT_EQ(uf.find(r), r);
            EXPECT_EQ(uf.find(x), r);
        }
    }
}

TEST(UnionFind, VerifyRejectsDissimilarPairs) {
    std::vector<ShingleSet> sh = {{"a", "b", "c"}, {"a", "b", "c"}, {"x", "y"}};
    UnionFind uf = union_candidates(3, {{0, 1}, {1, 2}}, &sh, 0.7);
    EXPECT_EQ(uf.components(false), (std::vector<std::vector<std::size_t>>{{0, 1}}));
}

TEST(DedupPass, IdenticalAndUnique) {
    std::vector<std::string> same(3, "alpha beta gamma delta epsilon zeta eta");
    DedupResult r = dedup_pass(Dataset::from_samples(samples_of(same)), default_config());
    EXPECT_EQ(r.dataset.size(), 1u);
    EXPECT_EQ(r.report.removed, 2u);
    EXPECT_EQ(r.report.clusters, (std::vector<std::vector<std::size_t>>{{0, 1, 2}}));

    Dataset unique = Dataset::from_samples(text_corpus(200, 46, 20, 40));
    DedupResult u = dedup_pass(unique, default_config());
    EXPECT_EQ(multiset_of(u.dataset), multiset_of(unique));
    EXPECT_TRUE(u.report.clusters.empty());
}

TEST(DedupPass, PlantedCorpusMatchesOracle) {
    PlantedCorpus pc = planted_corpus(400, 30, 3, 200, 2, 47);
    auto oracle = oracle_clusters(pc.texts, 5, 0.7);
    DedupResult r = dedup_pass(Dataset::from_samples(with_ids(pc.texts)), default_config());
    EXPECT_EQ(ids_of(r.dataset), firsts(oracle));
    std::vector<std::vector<std::size_t>> multi;
    for (const auto& c : oracle) {
        if (c.size() > 1) multi.push_back(c);
    }
    EXPECT_EQ(r.report.clusters, multi);
}

TEST(DedupPass, KeepLongest) {
    std::string base = "one two three four five six seven eight nine ten eleven twelve";
    std::vector<std::string> texts = {base, base + " thirteen", "unrelated words entirely here now ok"};
    DedupConfig c = DedupConfig::make(0.5, 128, 2, 1);
    DedupResult r = dedup_pass(Dataset::from_samples(with_ids(texts)), c, {.keep = KeepPolicy::kLongest});
    EXPECT_EQ(ids_of(r.dataset), (std::vector<std::size_t>{1, 2}));
}

TEST(DedupPass, FastModeSameComponentsOnPlanted) {
    PlantedCorpus pc = planted_corpus(300, 20, 3, 200, 1, 48);
    Dataset d = Dataset::from_samples(with_ids(pc.texts));
    auto exact = dedup_pass(d, default_config());
    auto fast = dedup_pass(d, default_config(), {.verify = false});
    EXPECT_EQ(ids_of(fast.dataset), ids_of(exact.dataset));
}

TEST(DedupReport, JsonShape) {
    DedupReport r;
    r.clusters = {{0, 3}};
    r.removed = 1;
    r.config = default_config().to_json();
    Json j = r.to_json();
    EXPECT_EQ(j["clusters"], Json::parse("[[0,3]]"));
    EXPECT_EQ(j["removed"], 1);
    EXPECT_TRUE(j["config"].contains("jaccard_threshold"));
    EXPECT_FALSE(j.contains("timings"));
    EXPECT_EQ(DedupReport::from_json(j).clusters, r.clusters);
}

TEST(Exact, TextAndMedia) {
    std::vector<std::string> texts = {"a", "b", "a", "c", "b"};
    DedupResult r = exact_dedup(Dataset::from_samples(with_ids(texts)), ExactKey::kTextHash);
    EXPECT_EQ(ids_of(r.dataset), (std::vector<std::size_t>{0, 1, 3}));
    EXPECT_EQ(r.report.removed, 2u);

    TempDir dir;
    write_png(dir / "x.png", 3, 3);
    write_png(dir / "copy.png", 3, 3);
    write_png(dir / "y.png", 4, 3);
    auto v = with_ids({"<__dj__image>", "<__dj__image>", "<__dj__image>", "text only"});
    v[0].images = {(dir / "x.png").string()};
    v[1].images = {(dir / "y.png").string()};
    v[2].images = {(dir / "copy.png").string()};
    DedupResult m = exact_dedup(Dataset::from_samples(v), ExactKey::kMediaFileHash);
    EXPECT_EQ(ids_of(m.dataset), (std::vector<std::size_t>{0, 1, 3}));

    v[1].images = {"/missing.png"};
    EXPECT_THROW(exact_dedup(Dataset::from_samples(v), ExactKey::kMediaFileHash), Error);
    EXPECT_EQ(exact_dedup(Dataset::from_samples({}), ExactKey::kTextHash).dataset.size(), 0u);
}

TEST(Sharded, EqualsSinglePassForAllShardCounts) {
    PlantedCorpus pc = planted_corpus(600, 40, 3, 200, 2, 49);
    auto samples = with_ids(pc.texts);
    Dataset whole = Dataset::from_samples(samples);
    DedupResult single = dedup_pass(whole, default_config());
    std::vector<Dataset> parts;
    for (std::size_t p = 0; p < 4; ++p) {
        parts.push_back(Dataset::from_samples(
                std::vector<Sample>(samples.begin() + static_cast<std::ptrdiff_t>(p * 150),
                                    samples.begin() + static_cast<std::ptrdiff_t>((p + 1) * 150))));
    }
    for (std::size_t shards : {1u, 2u, 4u, 8u}) {
        DedupResult sh = sharded_dedup(parts, default_config(), shards);
        EXPECT_EQ(ids_of(sh.dataset), ids_of(single.dataset)) << shards;
        EXPECT_EQ(sh.report.clusters, single.report.clusters) << shards;
    }
}

TEST(Ops, RegisteredDeduplicators) {
    PlantedCorpus pc = planted_corpus(200, 10, 3, 150, 2, 50);
    Dataset d = Dataset::from_samples(with_ids(pc.texts));
    auto op = default_registry().create("minhash_deduplicator", Json::object());
    RunResult r = run(*op, d);
    EXPECT_EQ(ids_of(r.dataset), ids_of(dedup_pass(d, default_config()).dataset));
    ASSERT_TRUE(r.report.is_object());
    EXPECT_EQ(r.report["removed"], 20);

    auto ex = default_registry().create("exact_deduplicator", Json::object());
    EXPECT_EQ(run(*ex, Dataset::from_samples(samples_of({"a", "a"}))).dataset.size(), 1u);
}
