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

#include <map>
#include <unordered_map>
#include <unordered_set>

#include "dj/common/error.hpp"
#include "dj/dedup/dedup.hpp"
#include "dedup_internal.hpp"

namespace dj {

namespace {

class MinHashDeduplicator final : public GlobalOperator {
public:
    explicit MinHashDeduplicator(OpDescriptor d) : GlobalOperator(std::move(d)) {
        Params p(descriptor().params);
        config_ = DedupConfig::make(p.get_number("jaccard_threshold"),
                                    static_cast<std::size_t>(p.get_int("num_permutations")),
                                    static_cast<std::size_t>(p.get_int("shingle_size")),
                                    static_cast<std::uint64_t>(p.get_int("seed")));
        options_.keep = parse_keep_policy(p.get_string("keep"));
        options_.verify = p.get_bool("verify");
    }

    struct DedupState : State {
        MinHashIndex index;
        std::unordered_set<std::size_t> removed;
        Resolution resolution;
    };

    std::unique_ptr<State> begin(OpContext&) const override {
        return std::make_unique<DedupState>();
    }

    void finish_observe(State& state, OpContext&) const override {
        auto& st = static_cast<DedupState&>(state);
        st.resolution = st.index.resolve(config_, options_, 1);
        for (std::size_t i = 0; i < st.resolution.keep.size(); ++i) {
            if (!st.resolution.keep[i]) {
                st.removed.insert(st.index.ordinals[i]);
            }
        }
    }

    Json report(const State& state) const override {
        const auto& st = static_cast<const DedupState&>(state);
        DedupReport r;
        r.clusters = st.resolution.clusters;
        r.removed = st.resolution.removed;
        r.config = options_json(config_, options_);
        return r.to_json();
    }

protected:
    void observe(State& state, const Batch& batch, OpContext&) const override {
        auto& st = static_cast<DedupState&>(state);
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            if (!batch.samples[i].is_placeholder()) {
                st.index.add(batch.origin_ordinals[i], batch.samples[i].text, config_,
                             options_.verify);
            }
        }
    }

    BatchOutput apply(State& state, Batch batch, OpContext&) const override {
        auto& st = static_cast<DedupState&>(state);
        BatchOutput out;
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            if (!st.removed.contains(batch.origin_ordinals[i])) {
                out.samples.push_back(std::move(batch.samples[i]));
                out.origin_ordinals.push_back(batch.origin_ordinals[i]);
            }
        }
        return out;
    }

private:
    DedupConfig config_;
    DedupOptions options_;
};

class ExactDeduplicator final : public GlobalOperator {
public:
    explicit ExactDeduplicator(OpDescriptor d)
            : GlobalOperator(std::move(d)),
              key_(parse_exact_key(Params(descriptor().params).get_string("key"))) {}

    struct ExactState : State {
        std::unordered_map<std::string, std::size_t> first_seen;
        std::map<std::size_t, std::vector<std::size_t>> clusters;
        std::size_t removed = 0;
    };

    bool needs_observe() const override { return false; }

    std::unique_ptr<State> begin(OpContext&) const override {
        return std::make_unique<ExactState>();
    }

    Json report(const State& state) const override {
        const auto& st = static_cast<const ExactState&>(state);
        DedupReport r;
        for (const auto& [_, c] : st.clusters) {
            r.clusters.push_back(c);
        }
        r.removed = st.removed;
        r.config = Json{{"key", descriptor().params.at("key")}};
        return r.to_json();
    }

protected:
    BatchOutput apply(State& state, Batch batch, OpContext&) const override {
        auto& st = static_cast<ExactState&>(state);
        // Keys first, so an unreadable file leaves the state untouched.
        std::vector<std::string> keys(batch.samples.size());
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            if (!batch.samples[i].is_placeholder()) {
                keys[i] = exact_key_of(batch.samples[i], key_);
            }
        }
        BatchOutput out;
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            std::size_t ord = batch.origin_ordinals[i];
            bool keep = true;
            if (!keys[i].empty()) {
                auto [it, inserted] = st.first_seen.emplace(std::move(keys[i]), ord);
                if (!inserted) {
                    auto& c = st.clusters[it->second];
                    if (c.empty()) {
                        c.push_back(it->second);
                    }
                    c.push_back(ord);
                    ++st.removed;
                    keep = false;
                }
            }
            if (keep) {
                out.samples.push_back(std::move(batch.samples[i]));
                out.origin_ordinals.push_back(ord);
            }
        }
        return out;
    }

private:
    ExactKey key_;
};

} // namespace

void register_dedup_ops(OpRegistry& r) {
    r.add({.name = "minhash_deduplicator",
           .type = OpType::kDeduplicator,
           .doc = "Removes near-duplicate texts with MinHash LSH and union-find.",
           .params = {{.name = "jaccard_threshold", .kind = ParamKind::kNumber,
                       .default_value = 0.7, .min = 0.0, .max = 1.0},
                      {.name = "num_permutations", .kind = ParamKind::kInt, .default_value = 256,
                       .min = 1},
                      {.name = "shingle_size", .kind = ParamKind::kInt, .default_value = 5,
                       .min = 1},
                      {.name = "seed", .kind = ParamKind::kInt, .default_value = 42, .min = 0},
                      {.name = "keep", .kind = ParamKind::kString, .default_value = "first",
                       .choices = {"first", "longest"}},
                      {.name = "verify", .kind = ParamKind::kBool, .default_value = true}},
           .supports_batch = false,
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<MinHashDeduplicator>(d);
           }});
    r.add({.name = "exact_deduplicator",
           .type = OpType::kDeduplicator,
           .doc = "Removes samples whose text or media file contents appeared earlier.",
           .params = {{.name = "key", .kind = ParamKind::kString, .default_value = "text_hash",
                       .choices = {"text_hash", "media_file_hash"}}},
           .supports_batch = false,
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<ExactDeduplicator>(d);
           }});
}

} // namespace dj
