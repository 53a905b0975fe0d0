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

#include <fstream>

#include "dj/catalog/catalog.hpp"
#include "dj/common/error.hpp"
#include "dj/common/text.hpp"
#include "dj/ops/media.hpp"
#include "dj/ops/registry.hpp"
#include "dj/ops/run.hpp"
#include "test_support.hpp"

using namespace dj;
using namespace dj::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kInternal;
}

Sample text_sample(std::string t) {
    Sample s;
    s.text = std::move(t);
    return s;
}

RunResult apply(const std::string& op, const Json& params, std::vector<Sample> samples) {
    return run(*default_registry().create(op, params), Dataset::from_samples(std::move(samples)));
}

void write_bytes(const fs::path& p, std::size_t n) {
    std::ofstream out(p, std::ios::binary);
    out << std::string(n, 'z');
}

} // namespace

TEST(TextLength, Examples) {
    auto r = apply("text_length_filter", {{"min_len", 10}}, {text_sample("hello")});
    EXPECT_EQ(r.dataset.size(), 0u);
    ASSERT_EQ(r.drops.size(), 1u);
    EXPECT_EQ(r.drops[0].stats["text_len"], 5);
    auto e = apply("text_length_filter", {{"min_len", 0}}, {text_sample("")});
    ASSERT_EQ(e.dataset.size(), 1u);
    EXPECT_EQ(*e.dataset.samples()[0].find_stat("text_len"), 0);
}

TEST(TextLength, CountsCodePoints) {
    auto r = apply("text_length_filter", {{"max_len", 3}}, {text_sample("éé😀")});
    ASSERT_EQ(r.dataset.size(), 1u);
    EXPECT_EQ(*r.dataset.samples()[0].find_stat("text_len"), 3);
}

TEST(TextLength, MatchesBruteForceScan) {
    auto corpus = text_corpus(1000, 21, 5, 30);
    std::vector<std::string> expect;
    for (const auto& s : corpus) {
        std::size_t n = text::char_count(s.text);
        if (n >= 80 && n <= 120) {
            expect.push_back(s.text);
        }
    }
    auto r = apply("text_length_filter", {{"min_len", 80}, {"max_len", 120}}, corpus);
    std::vector<std::string> got;
    for (const auto& s : r.dataset.samples()) {
        got.push_back(s.text);
    }
    EXPECT_EQ(got, expect);
    EXPECT_GT(expect.size(), 50u);
}

TEST(TextLength, MinAboveMaxRejected) {
    EXPECT_EQ(code_of([] {
                  default_registry().create("text_length_filter", {{"min_len", 10}, {"max_len", 5}});
              }),
              ErrorCode::kParamValidation);
}

TEST(CharRepetition, HandEnumeratedRatios) {
    EXPECT_DOUBLE_EQ(char_repetition_ratio("aaaa", 2), 1.0);
    EXPECT_DOUBLE_EQ(char_repetition_ratio("abcd", 2), 0.5);
    EXPECT_DOUBLE_EQ(char_repetition_ratio("", 2), 0.0);
    EXPECT_DOUBLE_EQ(char_repetition_ratio("abab", 2), 1.0);
    EXPECT_DOUBLE_EQ(char_repetition_ratio("abcabc", 3), 1.0);
    EXPECT_DOUBLE_EQ(char_repetition_ratio("abcdef", 3), 0.5);
    auto r = apply("character_repetition_filter", {{"rep_len", 2}, {"max_ratio", 0.5}},
                   {text_sample("aaaa"), text_sample("abcd"), text_sample("")});
    ASSERT_EQ(r.dataset.size(), 2u);
    EXPECT_EQ(r.dataset.samples()[0].text, "abcd");
    EXPECT_EQ(r.dataset.samples()[1].text, "");
}

TEST(Chunking, IndexArithmetic) {
    EXPECT_EQ(chunk_text("0123456789", 4, 0), (std::vector<std::string>{"0123", "4567", "89"}));
    EXPECT_EQ(chunk_text("abc", 4, 0), (std::vector<std::string>{"abc"}));
    EXPECT_EQ(chunk_offsets(7, 4, 1), (std::vector<std::size_t>{0, 3}));
    EXPECT_EQ(chunk_text("abcdefg", 4, 1), (std::vector<std::string>{"abcd", "defg"}));
}

TEST(Chunking, CountFormulaAndReassembly) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t max = 1 + rng() % 20;
        std::size_t overlap = rng() % max;
        std::size_t len = rng() % 120;
        std::string t;
        for (std::size_t i = 0; i < len; ++i) {
            t.push_back(static_cast<char>('a' + rng() % 26));
        }
        auto chunks = chunk_text(t, max, overlap);
        if (len > max) {
            std::size_t step = max - overlap;
            EXPECT_EQ(chunks.size(), (len - overlap + step - 1) / step);
        } else {
            EXPECT_EQ(chunks.size(), 1u);
        }
        std::string joined = chunks[0];
        for (std::size_t k = 1; k < chunks.size(); ++k) {
            joined += chunks[k].substr(overlap);
        }
        EXPECT_EQ(joined, t) << max << " " << overlap;
    }
}

TEST(Chunking, MapperEmitsSamplesKeepingMeta) {
    Sample s = text_sample("0123456789");
    s.meta["src"] = "web";
    auto r = apply("text_chunk_mapper", {{"max_chars", 4}}, {s});
    ASSERT_EQ(r.dataset.size(), 3u);
    EXPECT_EQ(r.dataset.samples()[2].text, "89");
    EXPECT_EQ(r.dataset.samples()[1].meta["src"], "web");
    EXPECT_EQ(code_of([] {
                  default_registry().create("text_chunk_mapper", {{"max_chars", 4}, {"overlap_chars", 4}});
              }),
              ErrorCode::kParamValidation);
}

TEST(Whitespace, Normalization) {
    EXPECT_EQ(normalize_whitespace("a  b\n c"), "a b c");
    EXPECT_EQ(normalize_whitespace("a b c"), "a b c");
    EXPECT_EQ(normalize_whitespace(" \t\n "), "");
    EXPECT_EQ(normalize_whitespace("x 　y "), "x y");
    for (const auto& s : text_corpus(100, 5)) {
        std::string once = normalize_whitespace(s.text + "  \n");
        EXPECT_EQ(normalize_whitespace(once), once);
    }
}

TEST(Selector, SortOracleAndTies) {
    auto make = [](std::vector<double> stats) {
        std::vector<Sample> v;
        for (std::size_t i = 0; i < stats.size(); ++i) {
            Sample s = text_sample(std::to_string(i));
            s.set_stat("text_len", stats[i]);
            v.push_back(s);
        }
        return v;
    };
    auto texts = [](const RunResult& r) {
        std::vector<std::string> out;
        for (const auto& s : r.dataset.samples()) out.push_back(s.text);
        return out;
    };
    auto r = apply("range_selector", {{"stat_key", "text_len"}, {"top_k", 2}}, make({3, 1, 2}));
    EXPECT_EQ(texts(r), (std::vector<std::string>{"0", "2"}));
    EXPECT_EQ(r.drops.size(), 1u);
    auto all = apply("range_selector", {{"stat_key", "text_len"}, {"top_k", 10}}, make({3, 1, 2}));
    EXPECT_EQ(texts(all), (std::vector<std::string>{"0", "1", "2"}));
    auto tie = apply("range_selector", {{"stat_key", "text_len"}, {"top_k", 2}}, make({1, 1, 1, 1}));
    EXPECT_EQ(texts(tie), (std::vector<std::string>{"0", "1"}));
    auto ratio = apply("range_selector", {{"stat_key", "text_len"}, {"top_ratio", 0.5}},
                       make({1, 5, 2, 4, 3}));
    EXPECT_EQ(texts(ratio), (std::vector<std::string>{"1", "3"}));

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> stats(1 + rng() % 40);
        for (auto& x : stats) x = static_cast<double>(rng() % 10);
        std::size_t k = rng() % (stats.size() + 2);
        std::vector<std::size_t> idx(stats.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return stats[a] > stats[b]; });
        idx.resize(std::min(k, idx.size()));
        std::sort(idx.begin(), idx.end());
        std::vector<std::string> expect;
        for (auto i : idx) expect.push_back(std::to_string(i));
        auto got = apply("range_selector", {{"stat_key", "text_len"}, {"top_k", k}}, make(stats));
        EXPECT_EQ(texts(got), expect);
    }
}

TEST(Selector, MissingStatAndParamRules) {
    std::vector<Sample> v = {text_sample("a")};
    EXPECT_EQ(code_of([&] { apply("range_selector", {{"stat_key", "text_len"}, {"top_k", 1}}, v); }),
              ErrorCode::kMissingStat);
    EXPECT_EQ(code_of([] { default_registry().create("range_selector", {{"stat_key", "x"}}); }),
              ErrorCode::kParamValidation);
    EXPECT_EQ(code_of([] {
                  default_registry().create("range_selector",
                                            {{"stat_key", "x"}, {"top_k", 1}, {"top_ratio", 0.5}});
              }),
              ErrorCode::kParamValidation);
}

TEST(Media, PngHeaderParsed) {
    auto dims = parse_image_header(png_bytes(224, 336));
    ASSERT_TRUE(dims);
    EXPECT_EQ(dims->width, 224u);
    EXPECT_EQ(dims->height, 336u);
    EXPECT_FALSE(parse_image_header("not an image"));
}

TEST(Media, ShapeFilter) {
    TempDir dir;
    write_png(dir / "a.png", 224, 224);
    write_png(dir / "small.png", 50, 400);
    Sample one = text_sample("<__dj__image>");
    one.images = {(dir / "a.png").string()};
    Sample none = text_sample("plain");
    Sample both = text_sample("<__dj__image><__dj__image>");
    both.images = {(dir / "a.png").string(), (dir / "small.png").string()};

    auto r = apply("image_shape_filter", {{"min_width", 100}}, {one, none, both});
    ASSERT_EQ(r.dataset.size(), 2u);
    EXPECT_EQ(*r.dataset.samples()[0].find_stat("image_widths"), Json::array({224}));
    EXPECT_EQ(*r.dataset.samples()[0].find_stat("image_heights"), Json::array({224}));
    EXPECT_EQ(*r.dataset.samples()[1].find_stat("image_widths"), Json::array());
    auto any = apply("image_shape_filter", {{"min_width", 100}, {"any_or_all", "any"}}, {both});
    EXPECT_EQ(any.dataset.size(), 1u);
}

TEST(Media, AspectRatio) {
    TempDir dir;
    write_png(dir / "sq.png", 224, 224);
    write_png(dir / "wide.png", 1000, 100);
    Sample sq = text_sample("<__dj__image>");
    sq.images = {(dir / "sq.png").string()};
    Sample wide = sq;
    wide.images = {(dir / "wide.png").string()};
    auto r = apply("image_aspect_ratio_filter", {{"min_ratio", 0.5}, {"max_ratio", 2}},
                   {sq, wide, text_sample("none")});
    ASSERT_EQ(r.dataset.size(), 2u);
    EXPECT_EQ(*r.dataset.samples()[0].find_stat("aspect_ratios"), Json::array({1.0}));
    ASSERT_EQ(r.drops.size(), 1u);
    EXPECT_EQ(r.drops[0].stats["aspect_ratios"], Json::array({10.0}));
}

TEST(Media, SizeFilters) {
    TempDir dir;
    write_bytes(dir / "one.bin", 1024);
    write_bytes(dir / "four.bin", 4096);
    auto img = [&](std::vector<std::string> names) {
        Sample s;
        for (auto& n : names) {
            s.text += "<__dj__image>";
            s.images.push_back((dir / n).string());
        }
        return s;
    };
    auto r = apply("image_size_filter", {{"max_size", 2048}},
                   {img({"one.bin"}), img({"four.bin"}), img({"one.bin", "four.bin"})});
    ASSERT_EQ(r.dataset.size(), 1u);
    EXPECT_EQ(*r.dataset.samples()[0].find_stat("image_sizes"), Json::array({1024}));
    auto kib = apply("image_size_filter", {{"max_size", "2KiB"}}, {img({"one.bin"})});
    EXPECT_EQ(kib.dataset.size(), 1u);

    Sample a;
    a.text = "<__dj__audio>";
    a.audios = {(dir / "four.bin").string()};
    auto ar = apply("audio_size_filter", {{"max_size", 2048}}, {a});
    EXPECT_EQ(ar.dataset.size(), 0u);
    EXPECT_EQ(ar.drops[0].stats["audio_sizes"], Json::array({4096}));
}

TEST(Media, MissingFileIsUnreadableMedia) {
    Sample s = text_sample("<__dj__image>");
    s.images = {"/nonexistent/img.png"};
    EXPECT_EQ(code_of([&] { apply("image_shape_filter", {{"min_width", 1}}, {s}); }),
              ErrorCode::kUnreadableMedia);
    EXPECT_EQ(code_of([&] { apply("image_size_filter", {{"max_size", 1}}, {s}); }),
              ErrorCode::kUnreadableMedia);
}

TEST(Media, CacheSharesReads) {
    TempDir dir;
    write_png(dir / "a.png", 10, 20);
    MediaCache cache;
    std::vector<std::string> paths(5, (dir / "a.png").string());
    cache.prefetch(paths, 4);
    EXPECT_EQ(cache.get(paths[0]).dims->height, 20u);
    EXPECT_EQ(cache.loads(), 1u);
}

TEST(Catalog, UnboundedFiltersKeepEverything) {
    auto corpus = text_corpus(200, 31);
    for (const char* op : {"text_length_filter", "image_shape_filter", "image_size_filter",
                           "image_aspect_ratio_filter", "audio_size_filter"}) {
        EXPECT_EQ(apply(op, Json::object(), corpus).dataset.size(), 200u) << op;
    }
    auto rep = apply("character_repetition_filter", {{"max_ratio", 1.0}}, corpus);
    EXPECT_EQ(rep.dataset.size(), 200u);
}

TEST(Catalog, FiltersArePure) {
    auto corpus = text_corpus(300, 32);
    auto a = apply("character_repetition_filter", {{"rep_len", 3}, {"max_ratio", 0.1}}, corpus);
    auto b = apply("character_repetition_filter", {{"rep_len", 3}, {"max_ratio", 0.1}}, corpus);
    EXPECT_EQ(multiset_of(a.dataset), multiset_of(b.dataset));
}
