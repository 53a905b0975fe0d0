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

#include "dj/common/error.hpp"
#include "dj/exec/executor.hpp"
#include "dj/ops/registry.hpp"
#include "dj/ops/run.hpp"
#include "dj/planner/planner.hpp"
#include "test_support.hpp"

using namespace dj;
using namespace dj::testing;

namespace {

Resources machine() { return Resources{.cpu_count = 2, .mem_bytes = 8ULL << 30, .accel_slots = {}}; }

OpDescriptor op(const std::string& name, Json params = Json::object()) {
    return default_registry().describe(name, params);
}

FaultPolicy quick(FaultMode mode) {
    return FaultPolicy{.mode = mode, .max_retries = 1, .backoff = {std::chrono::milliseconds(1)}};
}

std::vector<OpDescriptor> mixed_recipe(std::size_t bs) {
    Json b = {{"batch_size", bs}};
    Json f0 = b;
    f0["keep_pct"] = 70;
    Json f1 = b;
    f1["keep_pct"] = 60;
    f1["salt"] = 3;
    Json m = b;
    m["tag"] = "x";
    return {op("syn_filter_0", f0), op("syn_suffix_mapper", m), op("syn_filter_1", f1),
            op("whitespace_normalization_mapper", b)};
}

std::vector<std::string> texts_of(const Dataset& d) {
    std::vector<std::string> out;
    for (const auto& s : d.samples()) out.push_back(s.text);
    return out;
}

} // namespace

class ExecutorTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() { register_synthetic_ops(); }
    void SetUp() override { reset_flaky_attempts(); }
};

TEST_F(ExecutorTest, CountersConserveAndMatchSequentialRun) {
    auto ops = mixed_recipe(100);
    Dataset in = Dataset::from_samples(text_corpus(1000, 71));
    RunOutcome out = run_pipeline(identity_plan(ops, machine()), in, ExecOptions{.policy = quick(FaultMode::kSkipBatch)});
    EXPECT_TRUE(out.counters.conserved());
    EXPECT_EQ(out.counters.processed, 1000u);
    EXPECT_EQ(out.counters.kept, out.dataset.size());
    EXPECT_EQ(out.counters.processed, out.counters.kept + out.counters.total_dropped());

    std::vector<Sample> expect;
    for (Sample s : in.samples()) {
        bool keep = true;
        for (const auto& d : ops) {
            auto inst = default_registry().create(d);
            Dataset one = run(*inst, Dataset::from_samples({s})).dataset;
            if (one.size() == 0) {
                keep = false;
                break;
            }
            s = one.samples()[0];
        }
        if (keep) expect.push_back(s);
    }
    EXPECT_EQ(texts_of(out.dataset), texts_of(Dataset::from_samples(expect)));
}

TEST_F(ExecutorTest, OptimizedPlanPreservesMultiset) {
    std::vector<OpDescriptor> ops = {op("syn_filter_0", {{"keep_pct", 80}}), op("syn_shared_0", {{"keep_pct", 50}}),
                                     op("syn_filter_1", {{"keep_pct", 30}}), op("syn_shared_1", {{"keep_pct", 90}})};
    Dataset in = Dataset::from_samples(text_corpus(2000, 72));
    ExecutionPlan p = plan(ops, probe_small_batch(in, ops), machine());
    RunOutcome a = run_pipeline(p, in, {});
    RunOutcome b = run_pipeline(identity_plan(ops, machine()), in, {});
    EXPECT_EQ(multiset_of(a.dataset), multiset_of(b.dataset));
    EXPECT_TRUE(a.counters.conserved());
}

TEST_F(ExecutorTest, OrderPreservedAndDeterministic) {
    auto ops = mixed_recipe(7);
    Dataset in = Dataset::from_samples(text_corpus(500, 73));
    ExecutionPlan p = identity_plan(ops, machine());
    RunOutcome a = run_pipeline(p, in, {});
    RunOutcome b = run_pipeline(p, in, ExecOptions{.np = 1});
    EXPECT_EQ(texts_of(a.dataset), texts_of(b.dataset));
    auto ids = [](const Dataset& d) {
        std::vector<long long> v;
        for (const auto& s : d.samples()) v.push_back(s.meta["id"].get<long long>());
        return v;
    };
    auto v = ids(a.dataset);
    EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
}

TEST_F(ExecutorTest, CorruptSampleSkipsItsBatch) {
    std::vector<Sample> samples = text_corpus(100, 74);
    samples[42].fault = "truncated record";
    Dataset in = Dataset::from_samples(samples);
    std::vector<OpDescriptor> ops = {op("syn_filter_0", {{"keep_pct", 100}, {"batch_size", 4}})};
    RunOutcome out = run_pipeline(identity_plan(ops, machine()), in, ExecOptions{.policy = quick(FaultMode::kSkipBatch)});
    EXPECT_EQ(out.dataset.size(), 96u);
    EXPECT_EQ(out.counters.skipped_batches, 1u);
    EXPECT_EQ(out.counters.lost_in_skipped, 4u);
    EXPECT_TRUE(out.counters.conserved());
    ASSERT_EQ(out.failed_batches.size(), 1u);
    EXPECT_EQ(out.failed_batches[0].ordinals, (std::vector<std::size_t>{40, 41, 42, 43}));
    EXPECT_NE(out.failed_batches[0].error.find("CorruptSample"), std::string::npos);

    std::vector<OpDescriptor> filt = {op("syn_filter_0", {{"keep_pct", 50}, {"batch_size", 4}})};
    RunOutcome f = run_pipeline(identity_plan(filt, machine()), in, ExecOptions{.policy = quick(FaultMode::kSkipBatch)});
    std::vector<Sample> rest;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i < 40 || i > 43) rest.push_back(samples[i]);
    }
    auto inst = default_registry().create(filt[0]);
    std::size_t filtered = rest.size() - run(*inst, Dataset::from_samples(rest)).dataset.size();
    EXPECT_EQ(f.counters.total_dropped(), filtered);
    EXPECT_EQ(f.dataset.size(), 100 - filtered - 4);
}

TEST_F(ExecutorTest, FillEmptyWritesPlaceholders) {
    std::vector<Sample> samples = text_corpus(20, 75);
    samples[5].fault = "bad";
    Dataset in = Dataset::from_samples(samples);
    std::vector<OpDescriptor> ops = {op("syn_suffix_mapper", {{"batch_size", 4}})};
    RunOutcome out = run_pipeline(identity_plan(ops, machine()), in, ExecOptions{.policy = quick(FaultMode::kFillEmpty)});
    EXPECT_EQ(out.dataset.size(), 20u);
    EXPECT_EQ(out.counters.filled_batches, 1u);
    EXPECT_EQ(out.counters.placeholder_samples, 4u);
    std::size_t placeholders = 0;
    for (const auto& s : out.dataset.samples()) {
        if (s.meta.contains("__dj__placeholder")) {
            ++placeholders;
            EXPECT_TRUE(s.text.empty());
        }
    }
    EXPECT_EQ(placeholders, 4u);

    TempDir dir;
    RunOutcome exported = run_pipeline(identity_plan(ops, machine()), in,
                                       ExecOptions{.policy = quick(FaultMode::kFillEmpty),
                                                   .export_path = dir / "out.jsonl",
                                                   .drop_placeholders = true});
    ASSERT_TRUE(exported.exported.has_value());
    EXPECT_EQ(load(dir / "out.jsonl").size(), 16u);
}

TEST_F(ExecutorTest, TransientFailureRetriedOnce) {
    std::vector<OpDescriptor> ops = {op("syn_flaky_mapper", {{"failures", 1}, {"batch_size", 10}})};
    Dataset in = Dataset::from_samples(text_corpus(30, 76));
    RunOutcome out = run_pipeline(identity_plan(ops, machine()), in, ExecOptions{.policy = quick(FaultMode::kAbort)});
    EXPECT_FALSE(out.aborted);
    EXPECT_EQ(out.dataset.size(), 30u);
    EXPECT_EQ(out.counters.retried_batches, 3u);

    reset_flaky_attempts();
    std::vector<OpDescriptor> hard = {op("syn_flaky_mapper", {{"failures", 5}, {"batch_size", 10}})};
    RunOutcome skipped = run_pipeline(identity_plan(hard, machine()), in, ExecOptions{.policy = quick(FaultMode::kSkipBatch)});
    EXPECT_EQ(skipped.dataset.size(), 0u);
    EXPECT_EQ(skipped.counters.skipped_batches, 3u);
    EXPECT_TRUE(skipped.counters.conserved());
}

TEST_F(ExecutorTest, AbortWritesRecord) {
    TempDir dir;
    std::vector<Sample> samples = text_corpus(50, 77);
    samples[10].fault = "bad";
    std::vector<OpDescriptor> ops = {op("syn_suffix_mapper", {{"batch_size", 5}}),
                                     op("syn_filter_0", {{"batch_size", 5}})};
    RunOutcome out = run_pipeline(identity_plan(ops, machine()), Dataset::from_samples(samples),
                                  ExecOptions{.policy = quick(FaultMode::kAbort),
                                              .checkpoint_root = dir.path(),
                                              .recipe_digest = "abc"});
    EXPECT_TRUE(out.aborted);
    EXPECT_FALSE(out.abort_reason.empty());
    fs::path rec = dir.path() / "abc" / "abort.json";
    ASSERT_TRUE(fs::exists(rec));
    Json j = Json::parse(read_file(rec));
    EXPECT_EQ(j["last_completed_op_index"], -1);
    EXPECT_EQ(j["reason"], out.abort_reason);
}

TEST_F(ExecutorTest, ResumeAfterEveryStepIsIdentical) {
    auto ops = mixed_recipe(50);
    ops.push_back(op("text_length_filter", {{"min_len", 20}}));
    Dataset in = Dataset::from_samples(text_corpus(400, 78));
    ExecutionPlan p = identity_plan(ops, machine());
    TempDir base;
    RunOutcome full = run_pipeline(p, in, ExecOptions{.export_path = base / "full.jsonl"});
    std::string expect = read_file(base / "full.jsonl");
    for (std::size_t stop = 0; stop + 1 < p.step_count(); ++stop) {
        TempDir dir;
        ExecOptions o{.checkpoint_root = dir / "ckpt", .recipe_digest = "d1", .export_path = dir / "out.jsonl"};
        o.stop_after = stop;
        RunOutcome first = run_pipeline(p, in, o);
        EXPECT_TRUE(first.stopped);
        Checkpoint cp = find_checkpoint(dir / "ckpt", "d1");
        EXPECT_EQ(cp.completed_op_index, static_cast<int>(stop));
        ResumePoint rp = resume(cp, "d1");
        o.stop_after.reset();
        RunOutcome second = run_pipeline(p, rp.snapshot, o, rp);
        EXPECT_EQ(read_file(dir / "out.jsonl"), expect) << "stopped after " << stop;
        EXPECT_EQ(second.counters.kept, full.counters.kept);
        EXPECT_EQ(second.counters.processed, full.counters.processed);
        EXPECT_TRUE(second.counters.conserved());
        EXPECT_THROW(resume(cp, "other"), Error);
    }
}

TEST_F(ExecutorTest, MonitorAndDropLogsParse) {
    TempDir dir;
    auto ops = mixed_recipe(100);
    Dataset in = Dataset::from_samples(text_corpus(300, 79));
    RunOutcome out = run_pipeline(identity_plan(ops, machine()), in,
                                  ExecOptions{.monitor_log = dir / "mon.jsonl", .monitor_interval_ms = 5,
                                              .drop_log = dir / "drops.jsonl"});
    std::ifstream mon(dir / "mon.jsonl");
    std::string line;
    std::size_t n = 0;
    Json last;
    while (std::getline(mon, line)) {
        last = Json::parse(line);
        ++n;
    }
    EXPECT_GE(n, 1u);
    EXPECT_FALSE(last.empty());
    std::ifstream drops(dir / "drops.jsonl");
    std::size_t dropped = 0;
    while (std::getline(drops, line)) {
        Json d = Json::parse(line);
        EXPECT_TRUE(d.contains("op"));
        ++dropped;
    }
    EXPECT_EQ(dropped, out.counters.total_dropped());
    EXPECT_TRUE(RunCounters::from_json(out.counters.to_json()).conserved());
}

TEST_F(ExecutorTest, EmptyPlanPassesRecordsThrough) {
    Dataset in = Dataset::from_samples(text_corpus(25, 80));
    RunOutcome out = run_pipeline(identity_plan({}, machine()), in, {});
    EXPECT_EQ(multiset_of(out.dataset), multiset_of(in));
}

TEST_F(ExecutorTest, DedupCountedSeparately) {
    std::vector<Sample> s = samples_of({"a b c d e f g", "a b c d e f g", "x y z w v u t", "a b c d e f g"});
    std::vector<OpDescriptor> ops = {op("exact_deduplicator")};
    RunOutcome out = run_pipeline(identity_plan(ops, machine()), Dataset::from_samples(s), {});
    EXPECT_EQ(out.dataset.size(), 2u);
    EXPECT_EQ(out.counters.dedup_removed, 2u);
    EXPECT_TRUE(out.counters.conserved());
}
