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
#include "dj/io/checkpoint.hpp"
#include "dj/io/dataset.hpp"
#include "dj/io/split.hpp"
#include "dj/schema/schema.hpp"
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

std::vector<std::string> texts_of(const Dataset& d) {
    std::vector<std::string> out;
    for (const auto& s : d.samples()) {
        out.push_back(s.text);
    }
    return out;
}

} // namespace

TEST(Load, ValidFileInOrder) {
    TempDir dir;
    write_lines(dir / "a.jsonl", {R"({"text":"1"})", R"({"text":"2"})", R"({"text":"3"})"});
    Dataset d = load(dir / "a.jsonl");
    EXPECT_EQ(texts_of(d), (std::vector<std::string>{"1", "2", "3"}));
    EXPECT_EQ(d.sample_count(), 3u);
}

TEST(Load, MalformedLineIsRecordedNotFatal) {
    TempDir dir;
    write_lines(dir / "a.jsonl", {R"({"text":"1"})", R"({"text":"2"})", "{broken", R"({"text":"4"})",
                                  R"({"text":"5"})"});
    Dataset d = load(dir / "a.jsonl");
    EXPECT_EQ(d.size(), 4u);
    ASSERT_EQ(d.bad_lines().size(), 1u);
    EXPECT_EQ(d.bad_lines()[0].line_no, 3u);
    EXPECT_EQ(d.records().size(), 5u);
    EXPECT_TRUE(d.records()[2].is_faulty());
}

TEST(Load, DirectoryPartsInLexicographicOrder) {
    TempDir dir;
    fs::create_directories(dir / "parts");
    write_lines(dir / "parts/001.jsonl", {R"({"text":"c"})"});
    write_lines(dir / "parts/000.jsonl", {R"({"text":"a"})", R"({"text":"b"})"});
    Dataset d = load(dir / "parts");
    EXPECT_EQ(texts_of(d), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Load, MissingAndEmptySources) {
    TempDir dir;
    EXPECT_EQ(code_of([&] { load(dir / "nope.jsonl"); }), ErrorCode::kSourceNotFound);
    write_lines(dir / "empty.jsonl", {});
    EXPECT_EQ(code_of([&] { load(dir / "empty.jsonl"); }), ErrorCode::kEmptySource);
    write_lines(dir / "bad.jsonl", {"{x", "{y"});
    EXPECT_EQ(code_of([&] { load(dir / "bad.jsonl"); }), ErrorCode::kEmptySource);
}

TEST(Load, StreamingMatchesMaterialized) {
    TempDir dir;
    write_jsonl(dir / "a.jsonl", text_corpus(300, 5));
    Dataset m = load(dir / "a.jsonl", DatasetMode::kMaterialized);
    Dataset s = load(dir / "a.jsonl", DatasetMode::kStreaming);
    EXPECT_EQ(multiset_of(m), multiset_of(s));
    auto reader = s.open();
    std::size_t n = 0;
    while (auto rec = reader->next()) {
        EXPECT_EQ(serialize_sample(*rec), serialize_sample(m.records()[n]));
        ++n;
    }
    EXPECT_EQ(n, 300u);
}

TEST(Export, PlaceholdersDroppedOnRequest) {
    TempDir dir;
    auto samples = text_corpus(8, 1);
    samples.push_back(make_empty_sample(samples[0]));
    samples.push_back(make_empty_sample(samples[1]));
    Dataset d = Dataset::from_samples(samples);
    ExportReport dropped = export_dataset(d, dir / "a.jsonl", true);
    EXPECT_EQ(dropped.sample_count, 8u);
    EXPECT_EQ(dropped.placeholders_dropped, 2u);
    ExportReport kept = export_dataset(d, dir / "b.jsonl", false);
    EXPECT_EQ(kept.sample_count, 10u);
    EXPECT_EQ(load(dir / "b.jsonl").size(), 10u);
    EXPECT_EQ(kept.byte_count, fs::file_size(dir / "b.jsonl"));
}

TEST(Export, RoundTrip) {
    TempDir dir;
    Dataset d = Dataset::from_samples(text_corpus(50, 2));
    export_dataset(d, dir / "a.jsonl", false);
    EXPECT_EQ(multiset_of(load(dir / "a.jsonl")), multiset_of(d));
    export_dataset(load(dir / "a.jsonl"), dir / "b.jsonl", false);
    EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
}

TEST(Export, UnwritableTarget) {
    TempDir dir;
    write_lines(dir / "file", {"x"});
    Dataset d = Dataset::from_samples(text_corpus(2, 1));
    EXPECT_EQ(code_of([&] { export_dataset(d, dir / "file" / "sub.jsonl", false); }),
              ErrorCode::kTargetUnwritable);
}

TEST(Split, PartsConcatenateToSourceAndRespectTarget) {
    TempDir dir;
    write_jsonl(dir / "src.jsonl", text_corpus(4000, 3));
    std::uint64_t total = fs::file_size(dir / "src.jsonl");
    std::uint64_t target = total / 4 + 1;
    SplitManifest m = split_subsets(dir / "src.jsonl", target, std::nullopt, dir / "parts");
    std::uint64_t need = (total + target - 1) / target;
    EXPECT_GE(m.parts.size(), need);
    std::string joined;
    std::size_t count = 0;
    for (const auto& p : m.parts) {
        EXPECT_LE(p.byte_size, target);
        joined += read_file(p.path);
        count += p.sample_count;
    }
    EXPECT_EQ(joined, read_file(dir / "src.jsonl"));
    EXPECT_EQ(count, 4000u);
    EXPECT_TRUE(fs::exists(dir / "parts" / kSplitManifestName));
    EXPECT_TRUE(m.warnings.empty());
    SplitManifest again = SplitManifest::from_json(m.to_json());
    EXPECT_EQ(again.parts.size(), m.parts.size());
    EXPECT_EQ(again.origin_digest, m.origin_digest);
    EXPECT_EQ(multiset_of(load(dir / "parts")), multiset_of(load(dir / "src.jsonl")));
}

TEST(Split, SmallSourceOnePartAndHint) {
    TempDir dir;
    write_jsonl(dir / "src.jsonl", text_corpus(5, 3));
    EXPECT_EQ(split_subsets(dir / "src.jsonl", 1 << 20, std::nullopt, dir / "a").parts.size(), 1u);
    SplitManifest hinted = split_subsets(dir / "src.jsonl", 1 << 20, 8, dir / "b");
    EXPECT_EQ(hinted.parts.size(), 8u);
    std::string joined;
    for (const auto& p : hinted.parts) {
        joined += read_file(p.path);
    }
    EXPECT_EQ(joined, read_file(dir / "src.jsonl"));
}

TEST(Split, OversizedLineGetsOwnPartWithWarning) {
    TempDir dir;
    std::string big(5000, 'x');
    write_lines(dir / "src.jsonl", {R"({"text":"a"})", R"({"text":")" + big + R"("})", R"({"text":"b"})"});
    SplitManifest m = split_subsets(dir / "src.jsonl", 1000, std::nullopt, dir / "p");
    ASSERT_EQ(m.warnings.size(), 1u);
    std::size_t oversized = 0;
    std::string joined;
    for (const auto& p : m.parts) {
        if (p.byte_size > 1000) {
            ++oversized;
            EXPECT_EQ(p.sample_count, 1u);
        }
        joined += read_file(p.path);
    }
    EXPECT_EQ(oversized, 1u);
    EXPECT_EQ(joined, read_file(dir / "src.jsonl"));
}

TEST(Checkpoint, WriteFindResume) {
    TempDir dir;
    fs::path snap = checkpoint_dir(dir.path(), "abc", 2);
    fs::create_directories(snap);
    write_jsonl(snap / "part-00000.jsonl", text_corpus(10, 4));
    Json counters = {{"processed", 10}};
    Checkpoint c = write_checkpoint(dir.path(), "abc", 2, counters);
    EXPECT_EQ(c.completed_op_index, 2);
    EXPECT_TRUE(fs::exists(snap / kCheckpointManifestName));

    Checkpoint found = find_checkpoint(dir.path(), "abc");
    EXPECT_EQ(found.completed_op_index, 2);
    ResumePoint rp = resume(found, "abc", DatasetMode::kMaterialized);
    EXPECT_EQ(rp.next_op_index, 3);
    EXPECT_EQ(rp.counters["processed"], 10);
    EXPECT_EQ(rp.snapshot.size(), 10u);

    EXPECT_EQ(code_of([&] { resume(found, "other", DatasetMode::kMaterialized); }),
              ErrorCode::kRecipeMismatch);
    EXPECT_EQ(code_of([&] { find_checkpoint(dir.path(), "other"); }), ErrorCode::kRecipeMismatch);
    EXPECT_EQ(code_of([&] { find_checkpoint(dir / "missing", "abc"); }), ErrorCode::kSourceNotFound);
}

TEST(Checkpoint, LatestCompleteSnapshotWins) {
    TempDir dir;
    for (int k : {0, 1}) {
        fs::path snap = checkpoint_dir(dir.path(), "d", k);
        fs::create_directories(snap);
        write_jsonl(snap / "part-00000.jsonl", text_corpus(3 + static_cast<std::size_t>(k), 4));
        write_checkpoint(dir.path(), "d", k, Json::object());
    }
    fs::create_directories(checkpoint_dir(dir.path(), "d", 2));
    EXPECT_EQ(find_checkpoint(dir.path(), "d").completed_op_index, 1);
    EXPECT_EQ(find_checkpoint(dir.path() / "d", "d").completed_op_index, 1);
    EXPECT_EQ(find_checkpoint(checkpoint_dir(dir.path(), "d", 0), "d").completed_op_index, 0);
}
