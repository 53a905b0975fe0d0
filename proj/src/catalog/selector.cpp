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
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "dj/catalog/catalog.hpp"
#include "dj/common/error.hpp"
#include "catalog_internal.hpp"

namespace dj {

namespace {

/// Keeps the samples with the largest values of one stat. Ties go to the
/// earlier ordinal; survivors keep their input order.
class RangeSelector final : public GlobalOperator {
public:
    explicit RangeSelector(OpDescriptor d) : GlobalOperator(std::move(d)) {
        Params p(descriptor().params);
        key_ = p.get_string("stat_key");
        top_k_ = p.opt_int("top_k");
        top_ratio_ = p.opt_number("top_ratio");
        if (top_k_.has_value() == top_ratio_.has_value()) {
            throw Error(ErrorCode::kParamValidation,
                        fmt::format("{}: exactly one of top_k and top_ratio is required", name()));
        }
    }

    struct SelectState : State {
        std::vector<std::pair<double, std::size_t>> scored;
        std::unordered_set<std::size_t> chosen;
    };

    std::unique_ptr<State> begin(OpContext&) const override {
        return std::make_unique<SelectState>();
    }

    void finish_observe(State& state, OpContext&) const override {
        auto& st = static_cast<SelectState&>(state);
        std::size_t n = st.scored.size();
        std::size_t k = top_k_ ? static_cast<std::size_t>(*top_k_)
                               : static_cast<std::size_t>(std::floor(*top_ratio_ * static_cast<double>(n)));
        k = std::min(k, n);
        std::vector<std::pair<double, std::size_t>> ranked = st.scored;
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                          [](const auto& a, const auto& b) {
                              return a.first != b.first ? a.first > b.first : a.second < b.second;
                          });
        for (std::size_t i = 0; i < k; ++i) {
            st.chosen.insert(ranked[i].second);
        }
    }

protected:
    void observe(State& state, const Batch& batch, OpContext&) const override {
        auto& st = static_cast<SelectState&>(state);
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            if (!batch.samples[i].is_placeholder()) {
                st.scored.emplace_back(value_of(batch.samples[i], batch.origin_ordinals[i]),
                                       batch.origin_ordinals[i]);
            }
        }
    }

    BatchOutput apply(State& state, Batch batch, OpContext&) const override {
        auto& st = static_cast<SelectState&>(state);
        BatchOutput out;
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            Sample& s = batch.samples[i];
            std::size_t ord = batch.origin_ordinals[i];
            if (s.is_placeholder() || st.chosen.contains(ord)) {
                out.samples.push_back(std::move(s));
                out.origin_ordinals.push_back(ord);
            } else {
                out.drops.push_back({ord, name(), Json{{key_, *s.find_stat(key_)}}});
            }
        }
        return out;
    }

private:
    double value_of(const Sample& s, std::size_t ordinal) const {
        const Json* v = s.find_stat(key_);
        if (v != nullptr && v->is_number()) {
            return v->get<double>();
        }
        if (v != nullptr && v->is_array() && !v->empty()) {
            double sum = 0;
            for (const auto& x : *v) {
                if (!x.is_number()) {
                    v = nullptr;
                    break;
                }
                sum += x.get<double>();
            }
            if (v != nullptr) {
                return sum / static_cast<double>(v->size());
            }
        }
        throw Error(ErrorCode::kMissingStat,
                    fmt::format("record {} has no numeric stat '{}'", ordinal, key_));
    }

    std::string key_;
    std::optional<std::int64_t> top_k_;
    std::optional<double> top_ratio_;
};

} // namespace

void register_selector_ops(OpRegistry& r) {
    r.add({.name = "range_selector",
           .type = OpType::kSelector,
           .doc = "Keeps the top samples by a stat, in original order.",
           .params = {{.name = "stat_key", .kind = ParamKind::kString, .required = true},
                      {.name = "top_k", .kind = ParamKind::kInt, .min = 0},
                      {.name = "top_ratio", .kind = ParamKind::kNumber, .min = 0.0, .max = 1.0}},
           .supports_batch = false,
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<RangeSelector>(d);
           }});
}

void register_catalog_ops(OpRegistry& r) {
    register_text_ops(r);
    register_media_ops(r);
    register_selector_ops(r);
}

} // namespace dj
