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
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dj/ops/media.hpp"
#include "dj/schema/sample.hpp"

namespace dj {

enum class OpType {
    kFormatter,
    kMapper,
    kFilter,
    kDeduplicator,
    kSelector,
    kGrouper,
    kAggregator,
    kFusedOp,
    kScriptOp,
};

std::string_view op_type_name(OpType type);

struct OpDescriptor {
    std::string name;
    OpType op_type = OpType::kMapper;
    /// Op-specific parameters after validation, defaults filled.
    Json params = Json::object();
    double cpu_required = 1.0;
    std::uint64_t mem_required = 0;
    bool supports_batch = true;
    /// Pure stat-threshold filters commute with each other.
    bool commutative_filter = false;
    /// Ops tagged with the same resource read the same inputs (for example
    /// image headers) and are fused to share them.
    std::string shared_resource;
    bool accelerator = false;
    std::optional<std::size_t> batch_size;
    std::vector<OpDescriptor> children;

    Json to_json() const;
};

/// Samples handed to one operator invocation. `origin_ordinals` are the
/// positions of the samples in the operator's input stream.
struct Batch {
    std::vector<Sample> samples;
    std::vector<std::size_t> origin_ordinals;

    std::size_t size() const { return samples.size(); }
    bool has_fault() const;
};

/// Stats of a sample that a filter dropped, kept for lineage reporting.
struct DropRecord {
    std::size_t ordinal = 0;
    std::string op;
    Json stats = Json::object();
};

struct BatchOutput {
    std::vector<Sample> samples;
    std::vector<std::size_t> origin_ordinals;
    std::vector<DropRecord> drops;
};

/// Per-invocation context. The executor builds one per batch; operators
/// must not keep state in it across batches.
struct OpContext {
    std::size_t worker_id = 0;
    std::uint64_t seed = 0;
    std::size_t io_threads = 4;
    MediaCache* media = nullptr;
};

/// Throws Error(kCorruptSample) when the batch holds an unparsed record.
void throw_if_faulty(const Batch& batch);

/// Operators are immutable after construction; one instance may serve many
/// workers on disjoint batches at once.
class Operator {
public:
    explicit Operator(OpDescriptor desc) : desc_(std::move(desc)) {}
    virtual ~Operator() = default;

    Operator(const Operator&) = delete;
    Operator& operator=(const Operator&) = delete;

    const OpDescriptor& descriptor() const { return desc_; }
    const std::string& name() const { return desc_.name; }
    OpType type() const { return desc_.op_type; }

    /// True for operators that transform each batch independently.
    virtual bool is_batch_op() const = 0;

private:
    OpDescriptor desc_;
};

class BatchOperator : public Operator {
public:
    using Operator::Operator;

    bool is_batch_op() const final { return true; }

    BatchOutput process(Batch batch, OpContext& ctx) const;

protected:
    virtual BatchOutput process_batch(Batch batch, OpContext& ctx) const = 0;
};

/// Placeholders pass through mappers untouched.
class Mapper : public BatchOperator {
public:
    using BatchOperator::BatchOperator;

protected:
    virtual void map(Sample& sample, OpContext& ctx) const = 0;

    /// One-to-many mappers override this; the default forwards to map().
    virtual void map_many(Sample sample, std::vector<Sample>& out, OpContext& ctx) const;

    BatchOutput process_batch(Batch batch, OpContext& ctx) const override;
};

/// Two-phase filter template: compute_stats() on every sample in the batch,
/// then keep() decides. Dropped samples go to the drop log with their
/// stats. Placeholders are neither scored nor dropped.
class Filter : public BatchOperator {
public:
    using BatchOperator::BatchOperator;

    virtual std::vector<std::string> stat_keys() const = 0;
    virtual void compute_stats(Sample& sample, OpContext& ctx) const = 0;
    virtual bool keep(const Sample& sample) const = 0;

    /// Hook for per-batch preparation such as concurrent media prefetch.
    virtual void prepare(const Batch& batch, OpContext& ctx) const;

    /// Stats only, no dropping; used by the analyzer.
    void annotate(Batch& batch, OpContext& ctx) const;

protected:
    BatchOutput process_batch(Batch batch, OpContext& ctx) const override;
};

/// Operators needing the whole stream: an optional observe pass over every
/// batch, then an apply pass, then a final flush. Calls are sequential.
class GlobalOperator : public Operator {
public:
    using Operator::Operator;

    struct State {
        virtual ~State() = default;
    };

    bool is_batch_op() const final { return false; }

    virtual std::unique_ptr<State> begin(OpContext& ctx) const = 0;
    virtual bool needs_observe() const { return true; }

    void observe_batch(State& state, const Batch& batch, OpContext& ctx) const;
    virtual void finish_observe(State& state, OpContext& ctx) const;
    BatchOutput apply_batch(State& state, Batch batch, OpContext& ctx) const;
    virtual BatchOutput finish(State& state, OpContext& ctx) const;

    /// Optional structured report (e.g. dedup clusters); null when none.
    virtual Json report(const State& state) const;

protected:
    virtual void observe(State& state, const Batch& batch, OpContext& ctx) const;
    virtual BatchOutput apply(State& state, Batch batch, OpContext& ctx) const = 0;
};

} // namespace dj
