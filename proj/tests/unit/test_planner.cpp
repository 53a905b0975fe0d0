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
#include <numeric>

#include "dj/common/error.hpp"
#include "dj/ops/registry.hpp"
#include "dj/planner/planner.hpp"
#include "test_support.hpp"

using namespace dj;
using namespace dj::testing;

namespace {

constexpr std::uint64_t kGB = 1000ULL * 1000 * 1000;
constexpr std::uint64_t kMiB = 1024ULL * 1024;

OpDescriptor op(const std::string& name, const Json& params = Json::object()) {
    return default_registry().describe(name, params);
}

ProbeReport synthetic_probe(const std::vector<double>& speeds, const std::vector<double>& sels,
                            std::size_t n = 1000) {
    ProbeReport p;
    p.dataset_size = n;
    p.probe_sample_size = std::min<std::size_t>(n, kMaxProbeSize);
    for (std::size_t i = 0; i < speeds.size(); ++i) {
        OpProbe o;
        o.index = i;
        o.speed = speeds[i];
        o.selectivity = sels[i];
        o.probe_sample_size = p.probe_sample_size;
        p.ops.push_back(o);
    }
    return p;
}

Resources small_machine() { return Resources{.cpu_count = 4, .mem_bytes = 8 * kGB, .accel_slots = {}}; }

std::vector<std::size_t> flat_order(const ExecutionPlan& p) {
    std::vector<std::size_t> out;
    for (const PlanStep* s : p.steps()) {
        out.insert(out.end(), s->recipe_indices.begin(), s->recipe_indices.end());
    }
    return out;
}

} // namespace

class PlannerTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() { register_synthetic_ops(); }
};

TEST(FusedSpeed, Examples) {
    EXPECT_DOUBLE_EQ(estimate_fused_speed({2, 2}), 1.0);
    EXPECT_NEAR(estimate_fused_speed({100, 50}), 100.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(estimate_fused_speed({7.5}), 7.5);
    EXPECT_THROW(estimate_fused_speed({1, 0}), Error);
    try {
        estimate_fused_speed({-1});
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kNonPositiveSpeed);
    }
}

TEST(FusedSpeed, SymmetricAndBelowMinimum) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(0.1, 1000);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(1 + rng() % 6);
        for (auto& x : v) x = u(rng);
        double f = estimate_fused_speed(v);
        std::vector<double> w = v;
        std::shuffle(w.begin(), w.end(), rng);
        EXPECT_NEAR(estimate_fused_speed(w), f, 1e-9 * f);
        EXPECT_LE(f, *std::min_element(v.begin(), v.end()) * (1 + 1e-12));
    }
}

TEST(Reorder, SpeedDescendingTiesStable) {
    EXPECT_EQ(reorder_group({100, 10, 1000}), (std::vector<std::size_t>{2, 0, 1}));
    EXPECT_EQ(reorder_group({5, 5, 5}), (std::vector<std::size_t>{0, 1, 2}));
    double fused = estimate_fused_speed({100, 50});
    EXPECT_EQ(reorder_group({fused, 50}), (std::vector<std::size_t>{1, 0}));
}

TEST_F(PlannerTest, GroupsSplitAtBarriers) {
    std::vector<OpDescriptor> ops = {op("syn_filter_0"), op("syn_filter_1"), op("syn_suffix_mapper"),
                                     op("syn_filter_2")};
    auto groups = detect_fusible_groups(ops);
    ASSERT_EQ(groups.size(), 3u);
    EXPECT_EQ(groups[0].members, (std::vector<std::size_t>{0, 1}));
    EXPECT_TRUE(groups[0].reorderable);
    EXPECT_EQ(groups[1].members, (std::vector<std::size_t>{2}));
    EXPECT_FALSE(groups[1].reorderable);
    EXPECT_EQ(groups[2].members, (std::vector<std::size_t>{3}));

    auto one = detect_fusible_groups({op("text_length_filter")});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].members.size(), 1u);

    auto dedup = detect_fusible_groups({op("syn_filter_0"), op("minhash_deduplicator"), op("syn_filter_1")});
    EXPECT_EQ(dedup.size(), 3u);
}

TEST_F(PlannerTest, SameFilterWithOtherParamsKeepsOrder) {
    std::vector<OpDescriptor> ops = {op("syn_filter_0", {{"salt", 1}}), op("syn_filter_1"),
                                     op("syn_filter_0", {{"salt", 2}}), op("syn_filter_0", {{"salt", 2}})};
    auto groups = detect_fusible_groups(ops);
    ASSERT_EQ(groups.size(), 2u);
    EXPECT_EQ(groups[0].members, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(groups[1].members, (std::vector<std::size_t>{2, 3}));
    EXPECT_TRUE(groups[1].reorderable);
}

TEST_F(PlannerTest, SharedMediaFiltersFuse) {
    std::vector<OpDescriptor> ops = {op("image_shape_filter", {{"min_width", 10}}),
                                     op("text_length_filter"),
                                     op("image_aspect_ratio_filter", {{"max_ratio", 3}})};
    auto groups = detect_fusible_groups(ops);
    ASSERT_EQ(groups.size(), 1u);
    auto units = fusion_units(groups[0], ops);
    std::vector<std::vector<std::size_t>> expect = {{0, 2}, {1}};
    std::sort(units.begin(), units.end());
    EXPECT_EQ(units, expect);

    ExecutionPlan p = plan(ops, synthetic_probe({100, 1000, 50}, {1, 1, 1}), small_machine());
    std::size_t fused = 0;
    for (const PlanStep* s : p.steps()) {
        if (s->fused()) {
            ++fused;
            EXPECT_EQ(s->descriptor.op_type, OpType::kFusedOp);
            EXPECT_NEAR(s->est_speed, estimate_fused_speed({100, 50}), 1e-9);
        }
    }
    EXPECT_EQ(fused, 1u);
}

TEST_F(PlannerTest, NoCommutativeGroupsKeepsRecipeOrder) {
    std::vector<OpDescriptor> ops = {op("syn_suffix_mapper"), op("minhash_deduplicator"),
                                     op("whitespace_normalization_mapper")};
    ExecutionPlan p = plan(ops, synthetic_probe({1, 1000, 10}, {1, 0.5, 1}), small_machine());
    EXPECT_EQ(flat_order(p), (std::vector<std::size_t>{0, 1, 2}));
}

TEST_F(PlannerTest, EstimateNeverWorseThanRecipeOrder) {
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> sp(1, 5000);
    std::uniform_real_distribution<double> se(0.05, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<OpDescriptor> ops;
        std::vector<double> speeds;
        std::vector<double> sels;
        std::size_t n = 1 + rng() % 12;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t kind = rng() % 10;
            if (kind < 5) {
                ops.push_back(op("syn_filter_" + std::to_string(rng() % kSyntheticFilters)));
            } else if (kind < 8) {
                ops.push_back(op("syn_shared_" + std::to_string(rng() % kSharedFilters)));
            } else {
                ops.push_back(op("syn_suffix_mapper"));
            }
            speeds.push_back(sp(rng));
            sels.push_back(ops.back().op_type == OpType::kFilter ? se(rng) : 1.0);
        }
        for (bool speed_only : {false, true}) {
            ExecutionPlan p = plan(ops, synthetic_probe(speeds, sels), small_machine(),
                                   PlanOptions{.speed_only = speed_only});
            EXPECT_NO_THROW(validate_plan(p, ops));
            if (!speed_only) {
                EXPECT_LE(p.estimated_total_time, p.original_estimated_time * (1 + 1e-9));
            }
            auto order = flat_order(p);
            std::sort(order.begin(), order.end());
            std::vector<std::size_t> all(n);
            std::iota(all.begin(), all.end(), 0);
            EXPECT_EQ(order, all);
        }
    }
}

TEST_F(PlannerTest, SpeedOnlyOrdersBySpeed) {
    std::vector<OpDescriptor> ops = {op("syn_filter_0"), op("syn_filter_1"), op("syn_filter_2")};
    ExecutionPlan p = plan(ops, synthetic_probe({100, 10, 1000}, {0.1, 0.9, 0.99}), small_machine(),
                           PlanOptions{.speed_only = true});
    EXPECT_EQ(flat_order(p), (std::vector<std::size_t>{2, 0, 1}));
    EXPECT_TRUE(p.speed_only);
}

TEST_F(PlannerTest, SelectivityAwareOrderBeatsSpeedOrder) {
    // The fast filter keeps everything; the slower one drops 90%.
    std::vector<OpDescriptor> ops = {op("syn_filter_0"), op("syn_filter_1")};
    ExecutionPlan p = plan(ops, synthetic_probe({1000, 500}, {1.0, 0.1}), small_machine());
    EXPECT_EQ(flat_order(p), (std::vector<std::size_t>{1, 0}));
    EXPECT_NEAR(p.estimated_total_time, 1000 * (1.0 / 500 + 0.1 / 1000), 1e-9);
}

TEST_F(PlannerTest, FailedProbeGoesLastInGroup) {
    std::vector<OpDescriptor> ops = {op("syn_filter_0"), op("syn_filter_1"), op("syn_filter_2")};
    ProbeReport pr = synthetic_probe({10, 100, 1000}, {0.5, 0.5, 0.5});
    pr.ops[1].failed = true;
    pr.ops[1].speed = 0;
    pr.ops[1].error = "boom";
    ExecutionPlan p = plan(ops, pr, small_machine());
    EXPECT_EQ(flat_order(p).back(), 1u);
}

TEST_F(PlannerTest, ProbeSampleSizeAndFailures) {
    Dataset small = Dataset::from_samples(text_corpus(500, 63));
    Dataset big = Dataset::from_samples(text_corpus(5000, 64));
    std::vector<OpDescriptor> ops = {op("text_length_filter", {{"min_len", 100}}),
                                     op("image_shape_filter", {{"min_width", 1}})};
    ProbeReport a = probe_small_batch(small, ops);
    EXPECT_EQ(a.probe_sample_size, 500u);
    ProbeReport b = probe_small_batch(big, ops);
    EXPECT_EQ(b.probe_sample_size, 1000u);
    EXPECT_EQ(b.dataset_size, 5000u);
    ASSERT_EQ(b.ops.size(), 2u);
    EXPECT_FALSE(b.ops[0].failed);
    EXPECT_GT(b.ops[0].speed, 0.0);
    EXPECT_GT(b.ops[0].selectivity, 0.0);
    EXPECT_LT(b.ops[0].selectivity, 1.0);
    EXPECT_EQ(b.ops[1].failed, false);

    std::vector<Sample> with_missing = text_corpus(50, 65);
    with_missing[3].text = "<__dj__image>";
    with_missing[3].images = {"/nonexistent.png"};
    ProbeReport c = probe_small_batch(Dataset::from_samples(with_missing), ops);
    EXPECT_TRUE(c.ops[1].failed);
    EXPECT_FALSE(c.ops[1].error.empty());
    ExecutionPlan p = plan(ops, c, small_machine());
    EXPECT_EQ(flat_order(p), (std::vector<std::size_t>{0, 1}));

    ProbeReport again = probe_small_batch(big, ops);
    EXPECT_DOUBLE_EQ(again.ops[0].selectivity, b.ops[0].selectivity);
    EXPECT_EQ(ProbeReport::from_json(b.to_json()).to_json()["ops"].size(), 2u);
}

TEST_F(PlannerTest, BatchSize) {
    EXPECT_EQ(select_batch_size(op("text_length_filter"), 0, 0), 1000u);
    EXPECT_EQ(select_batch_size(op("text_length_filter", {{"batch_size", 64}}), 0, 0), 64u);
    std::size_t clamped = select_batch_size(op("text_length_filter"), kMiB, 512 * kMiB);
    EXPECT_LE(clamped, 460u);
    EXPECT_EQ(clamped, 460u);
    EXPECT_EQ(select_batch_size(op("text_length_filter"), 1024 * kMiB, 512 * kMiB), 1u);
}

TEST_F(PlannerTest, WorkerAllocation) {
    OpDescriptor accel = op("text_length_filter", {{"accelerator", true}});
    Resources slots{.cpu_count = 64, .mem_bytes = 0, .accel_slots = std::vector<std::uint64_t>(8, 80 * kGB)};
    EXPECT_EQ(allocate_workers(accel, slots, 16 * kGB), 32u);
    Resources cpus{.cpu_count = 64, .mem_bytes = 512 * kGB, .accel_slots = {}};
    EXPECT_EQ(allocate_workers(op("text_length_filter"), cpus, 1024), 64u);
    std::string warning;
    Resources one_slot{.cpu_count = 64, .mem_bytes = 0, .accel_slots = {80 * kGB}};
    EXPECT_EQ(allocate_workers(accel, one_slot, 100 * kGB, &warning), 1u);
    EXPECT_FALSE(warning.empty());
}

TEST_F(PlannerTest, WorkerAllocationMonotone) {
    OpDescriptor accel = op("text_length_filter", {{"accelerator", true}});
    std::size_t prev = 0;
    for (std::uint64_t slot = 1; slot <= 100; ++slot) {
        Resources r{.cpu_count = 64, .mem_bytes = 0, .accel_slots = std::vector<std::uint64_t>(4, slot * kGB)};
        std::size_t w = allocate_workers(accel, r, 10 * kGB);
        EXPECT_GE(w, prev);
        prev = w;
    }
    prev = 1000;
    for (std::uint64_t need = 1; need <= 100; ++need) {
        Resources r{.cpu_count = 64, .mem_bytes = 0, .accel_slots = std::vector<std::uint64_t>(4, 80 * kGB)};
        std::size_t w = allocate_workers(accel, r, need * kGB);
        EXPECT_LE(w, prev);
        prev = w;
    }
}

TEST_F(PlannerTest, PlanJsonRoundTripAndValidation) {
    std::vector<OpDescriptor> ops = {op("syn_filter_0"), op("syn_shared_0"), op("syn_shared_1"),
                                     op("syn_suffix_mapper"), op("syn_filter_1")};
    ExecutionPlan p = plan(ops, synthetic_probe({10, 20, 30, 40, 50}, {0.5, 0.6, 0.7, 1, 0.8}), small_machine());
    ExecutionPlan q = ExecutionPlan::from_json(p.to_json(), ops);
    EXPECT_EQ(q.to_json(), p.to_json());
    EXPECT_EQ(flat_order(q), flat_order(p));

    Json bad = p.to_json();
    bad["groups"][0]["steps"][0]["names"][0] = "text_length_filter";
    EXPECT_THROW(ExecutionPlan::from_json(bad, ops), Error);
    std::vector<OpDescriptor> fewer(ops.begin(), ops.end() - 1);
    EXPECT_THROW(ExecutionPlan::from_json(p.to_json(), fewer), Error);

    ExecutionPlan crossing = identity_plan(ops, small_machine());
    std::swap(crossing.groups[2], crossing.groups[4]);
    EXPECT_THROW(validate_plan(crossing, ops), Error);
}

TEST_F(PlannerTest, IdentityPlanIsRecipeOrderUnfused) {
    std::vector<OpDescriptor> ops = {op("syn_shared_0"), op("syn_shared_1"), op("syn_filter_0")};
    ExecutionPlan p = identity_plan(ops, small_machine());
    EXPECT_EQ(flat_order(p), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(p.step_count(), 3u);
    EXPECT_FALSE(p.optimized);
}
