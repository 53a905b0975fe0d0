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

#include "dj/common/error.hpp"
#include "dj/schema/sample.hpp"
#include "dj/schema/schema.hpp"

using namespace dj;

namespace {

Sample with_text(std::string text, std::vector<std::string> images = {}) {
    Sample s;
    s.text = std::move(text);
    s.images = std::move(images);
    return s;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kInternal;
}

} // namespace

TEST(Chunks, TwoChunksReferenceImagesInOrder) {
    Sample s = with_text("<__dj__image> cat <|__dj__eoc|> dog <__dj__image> <|__dj__eoc|>", {"a", "b"});
    auto chunks = parse_chunks(s);
    ASSERT_EQ(chunks.size(), 2u);
    ASSERT_EQ(chunks[0].media_refs.size(), 1u);
    EXPECT_EQ(chunks[0].media_refs[0], (MediaRef{Modality::kImage, 0}));
    ASSERT_EQ(chunks[1].media_refs.size(), 1u);
    EXPECT_EQ(chunks[1].media_refs[0], (MediaRef{Modality::kImage, 1}));
    EXPECT_TRUE(chunks[0].terminated);
    EXPECT_TRUE(chunks[1].terminated);
}

TEST(Chunks, EmptyTextIsOneEmptyChunk) {
    auto chunks = parse_chunks(with_text(""));
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_EQ(chunks[0].begin, chunks[0].end);
    EXPECT_TRUE(chunks[0].media_refs.empty());
}

TEST(Chunks, TokenWithoutPathIsMismatch) {
    Sample s = with_text("x <__dj__image> y");
    EXPECT_EQ(code_of([&] { parse_chunks(s); }), ErrorCode::kTokenMismatch);
    try {
        parse_chunks(s);
    } catch (const Error& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("image"), std::string::npos);
        EXPECT_NE(msg.find('1'), std::string::npos);
        EXPECT_NE(msg.find('0'), std::string::npos);
    }
}

TEST(Chunks, JoinReproducesText) {
    const std::vector<std::string> texts = {
            "a <|__dj__eoc|> b",
            "a <|__dj__eoc|> b <|__dj__eoc|>",
            "<|__dj__eoc|>",
            "no chunks at all",
            "<__dj__image><__dj__audio> x <|__dj__eoc|><__dj__image><|__dj__eoc|><|__dj__eoc|> tail",
    };
    for (const auto& t : texts) {
        Sample s = with_text(t);
        s.images.assign(count_token(t, "<__dj__image>"), "i");
        s.audios.assign(count_token(t, "<__dj__audio>"), "a");
        auto chunks = parse_chunks(s);
        EXPECT_EQ(join_chunks(s.text, chunks), t) << t;
        std::size_t images = 0;
        for (const auto& c : chunks) {
            for (const auto& r : c.media_refs) {
                if (r.modality == Modality::kImage) {
                    EXPECT_EQ(r.index, images++);
                }
            }
        }
        EXPECT_EQ(images, s.images.size());
    }
}

TEST(Tokens, CheckRejectsOverlap) {
    SchemaTokens t;
    EXPECT_NO_THROW(t.check());
    t.video_token = "<__dj__image>";
    EXPECT_EQ(code_of([&] { t.check(); }), ErrorCode::kSchemaViolation);
    SchemaTokens u;
    u.audio_token = "<__dj__image";
    EXPECT_EQ(code_of([&] { u.check(); }), ErrorCode::kSchemaViolation);
    SchemaTokens e;
    e.eoc_token = "";
    EXPECT_EQ(code_of([&] { e.check(); }), ErrorCode::kSchemaViolation);
}

TEST(Sample, RoundTripIsByteIdentical) {
    const std::vector<std::string> lines = {
            R"({"text":"hello","meta":{"src":"web"}})",
            R"({"zeta":1,"text":"x","alpha":[1,2,{"k":null}],"stats":{"a":0.5}})",
            R"({"query":"q","response":"r","history":[["q0","r0"]]})",
            R"({"text":"<__dj__image> caption","images":["p.png"],"extra":"kept"})",
            R"({"text":"unicode é 😀"})",
    };
    for (const auto& l : lines) {
        Sample s = parse_sample(l);
        Sample again = parse_sample(serialize_sample(s));
        EXPECT_EQ(serialize_sample(again), serialize_sample(s));
        EXPECT_EQ(canonical_form(again), canonical_form(s));
    }
    EXPECT_EQ(serialize_sample(parse_sample(lines[0])), lines[0]);
    EXPECT_EQ(serialize_sample(parse_sample(lines[1])), lines[1]);
}

TEST(Sample, UnknownFieldsSurvive) {
    Sample s = parse_sample(R"({"text":"a","custom":{"deep":[1]}})");
    EXPECT_EQ(s.extra["custom"]["deep"][0], 1);
    EXPECT_NE(serialize_sample(s).find("custom"), std::string::npos);
}

TEST(Sample, MalformedLinesRaise) {
    EXPECT_EQ(code_of([] { parse_sample("{not json"); }), ErrorCode::kCorruptSample);
    EXPECT_EQ(code_of([] { parse_sample(R"({"images":"x"})"); }), ErrorCode::kSchemaViolation);
    EXPECT_EQ(code_of([] { parse_sample(R"({"history":[["q"]]})"); }), ErrorCode::kSchemaViolation);
    EXPECT_EQ(code_of([] { parse_sample("[1,2]"); }), ErrorCode::kSchemaViolation);
}

TEST(Sample, SetStatReplaces) {
    Sample s;
    s.set_stat("a", 1);
    s.set_stat("a", 2);
    ASSERT_NE(s.find_stat("a"), nullptr);
    EXPECT_EQ(*s.find_stat("a"), 2);
    EXPECT_EQ(s.find_stat("b"), nullptr);
}

TEST(Validation, PostTuningFlagsEmptyResponse) {
    std::vector<Sample> v(3);
    for (auto& s : v) {
        s.query = "q";
        s.response = "r";
    }
    v[1].response.clear();
    auto r = validate_samples(v, ProcessingGoal::kPostTuning);
    EXPECT_FALSE(r.ok);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0].ordinal, 1u);
    EXPECT_EQ(r.errors[0].rule_id, rule::kDialogNonEmpty);
}

TEST(Validation, PretrainFlagsTokenMismatch) {
    std::vector<Sample> v = {with_text("ok"), with_text("<__dj__image>")};
    auto r = validate_samples(v, ProcessingGoal::kPretrain);
    EXPECT_FALSE(r.ok);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0].rule_id, rule::kTokenCount);
}

TEST(Validation, ImageTextChecksPaths) {
    std::vector<Sample> v = {with_text("<__dj__image>", {"/nonexistent/x.png"})};
    auto r = validate_samples(v, ProcessingGoal::kImageText);
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(r.errors[0].rule_id, rule::kImageExists);
    EXPECT_EQ(r.ok, r.errors.empty());
}

TEST(Validation, FaultyRecordFailsParseRule) {
    std::vector<Sample> v = {Sample::corrupt("bad"), with_text("fine")};
    auto r = validate_samples(v, ProcessingGoal::kPretrain);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_EQ(r.errors[0].rule_id, rule::kRecordParse);
    EXPECT_EQ(r.errors[0].ordinal, 0u);
}

TEST(EmptySample, KeepsShapeAndFlag) {
    Sample p = with_text("<__dj__image> hi", {"a.png"});
    p.meta["src"] = "web";
    p.extra["n"] = 3;
    Sample e = make_empty_sample(p);
    EXPECT_TRUE(e.text.empty());
    EXPECT_TRUE(e.images.empty());
    EXPECT_TRUE(e.is_placeholder());
    EXPECT_FALSE(e.meta.contains("src"));
    EXPECT_EQ(e.extra["n"], 0);
    EXPECT_EQ(serialize_sample(make_empty_sample(p)), serialize_sample(e));

    Sample d;
    d.query = "q";
    d.response = "r";
    d.history = {{"a", "b"}};
    Sample de = make_empty_sample(d);
    EXPECT_TRUE(de.query.empty() && de.response.empty() && de.history.empty());
    EXPECT_TRUE(de.is_placeholder());
}

TEST(EmptySample, PassesValidationOfItsPrototypeGoal) {
    Sample d;
    d.query = "q";
    d.response = "r";
    std::vector<Sample> v = {d, make_empty_sample(d)};
    EXPECT_TRUE(validate_samples(v, ProcessingGoal::kPostTuning).ok);
    std::vector<Sample> w = {with_text("plain"), make_empty_sample(with_text("plain"))};
    EXPECT_TRUE(validate_samples(w, ProcessingGoal::kPretrain).ok);
}
