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
#include <map>

#include <fmt/format.h>

#include "dj/catalog/catalog.hpp"
#include "dj/common/error.hpp"
#include "dj/common/text.hpp"
#include "catalog_internal.hpp"

namespace dj {

StatRange StatRange::from_params(std::string_view op, const Json& params, std::string_view min_key,
                                 std::string_view max_key) {
    Params p(params);
    StatRange r{p.opt_number(min_key), p.opt_number(max_key)};
    if (r.min && r.max && *r.min > *r.max) {
        throw Error(ErrorCode::kParamValidation,
                    fmt::format("{}.{}: {} exceeds {} {}", op, min_key, *r.min, max_key, *r.max));
    }
    return r;
}

double char_repetition_ratio(std::string_view t, std::size_t n) {
    std::vector<char32_t> cps = text::decode_utf8(t);
    if (n == 0 || cps.size() < n) {
        return 0.0;
    }
    std::map<std::u32string_view, std::size_t> counts;
    std::u32string_view all(cps.data(), cps.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
        best = std::max(best, ++counts[all.substr(i, n)]);
    }
    double ratio = static_cast<double>(best * n) / static_cast<double>(std::max<std::size_t>(1, cps.size()));
    return std::min(1.0, ratio);
}

std::vector<std::size_t> chunk_offsets(std::size_t length, std::size_t max_chars,
                                       std::size_t overlap_chars) {
    if (length <= max_chars) {
        return {0};
    }
    std::size_t step = max_chars - overlap_chars;
    std::size_t count = (length - overlap_chars + step - 1) / step;
    std::vector<std::size_t> out(count);
    for (std::size_t k = 0; k < count; ++k) {
        out[k] = k * step;
    }
    return out;
}

std::vector<std::string> chunk_text(std::string_view t, std::size_t max_chars,
                                    std::size_t overlap_chars) {
    std::vector<char32_t> cps = text::decode_utf8(t);
    std::vector<std::string> out;
    if (cps.size() <= max_chars) {
        out.emplace_back(t);
        return out;
    }
    for (std::size_t off : chunk_offsets(cps.size(), max_chars, overlap_chars)) {
        out.push_back(text::encode_utf8(cps, off, std::min(cps.size(), off + max_chars)));
    }
    return out;
}

std::string normalize_whitespace(std::string_view t) {
    std::string out;
    out.reserve(t.size());
    bool pending = false;
    for (char32_t cp : text::decode_utf8(t)) {
        if (text::is_unicode_space(cp)) {
            pending = !out.empty();
            continue;
        }
        if (pending) {
            out.push_back(' ');
            pending = false;
        }
        text::append_utf8(out, cp);
    }
    return out;
}

namespace {

class TextLengthFilter final : public Filter {
public:
    explicit TextLengthFilter(OpDescriptor d)
            : Filter(std::move(d)),
              range_(StatRange::from_params(name(), descriptor().params, "min_len", "max_len")) {}

    std::vector<std::string> stat_keys() const override { return {std::string(stat::kTextLen)}; }

    void compute_stats(Sample& s, OpContext&) const override {
        s.set_stat(stat::kTextLen, text::char_count(s.text));
    }

    bool keep(const Sample& s) const override {
        return range_.contains(s.find_stat(stat::kTextLen)->get<double>());
    }

private:
    StatRange range_;
};

class CharacterRepetitionFilter final : public Filter {
public:
    explicit CharacterRepetitionFilter(OpDescriptor d)
            : Filter(std::move(d)),
              n_(static_cast<std::size_t>(Params(descriptor().params).get_int("rep_len"))),
              range_(StatRange::from_params(name(), descriptor().params, "min_ratio",
                                            "max_ratio")) {}

    std::vector<std::string> stat_keys() const override {
        return {std::string(stat::kCharRepRatio)};
    }

    void compute_stats(Sample& s, OpContext&) const override {
        s.set_stat(stat::kCharRepRatio, char_repetition_ratio(s.text, n_));
    }

    bool keep(const Sample& s) const override {
        return range_.contains(s.find_stat(stat::kCharRepRatio)->get<double>());
    }

private:
    std::size_t n_;
    StatRange range_;
};

class TextChunkMapper final : public Mapper {
public:
    explicit TextChunkMapper(OpDescriptor d) : Mapper(std::move(d)) {
        Params p(descriptor().params);
        max_ = static_cast<std::size_t>(p.get_int("max_chars"));
        overlap_ = static_cast<std::size_t>(p.get_int("overlap_chars"));
        if (overlap_ >= max_) {
            throw Error(ErrorCode::kParamValidation,
                        fmt::format("{}.overlap_chars: must be below max_chars ({} >= {})", name(),
                                    overlap_, max_));
        }
    }

protected:
    void map(Sample&, OpContext&) const override {}

    void map_many(Sample s, std::vector<Sample>& out, OpContext&) const override {
        std::vector<std::string> chunks = chunk_text(s.text, max_, overlap_);
        if (chunks.size() == 1) {
            out.push_back(std::move(s));
            return;
        }
        for (auto& c : chunks) {
            Sample piece = s;
            piece.text = std::move(c);
            out.push_back(std::move(piece));
        }
    }

private:
    std::size_t max_ = 0;
    std::size_t overlap_ = 0;
};

class WhitespaceNormalizationMapper final : public Mapper {
public:
    using Mapper::Mapper;

protected:
    void map(Sample& s, OpContext&) const override { s.text = normalize_whitespace(s.text); }
};

template <typename T>
OpFactory factory() {
    return [](const OpDescriptor& d, const OpRegistry&) { return std::make_unique<T>(d); };
}

} // namespace

void register_text_ops(OpRegistry& r) {
    r.add({.name = "text_length_filter",
           .type = OpType::kFilter,
           .doc = "Keeps samples whose text length in characters is within range.",
           .params = {{.name = "min_len", .kind = ParamKind::kNumber, .min = 0.0},
                      {.name = "max_len", .kind = ParamKind::kNumber, .min = 0.0}},
           .commutative_filter = true,
           .stat_keys = {std::string(stat::kTextLen)},
           .factory = factory<TextLengthFilter>()});
    r.add({.name = "character_repetition_filter",
           .type = OpType::kFilter,
           .doc = "Keeps samples whose character n-gram repetition ratio is within range.",
           .params = {{.name = "rep_len", .kind = ParamKind::kInt, .default_value = 10, .min = 1},
                      {.name = "min_ratio", .kind = ParamKind::kNumber, .min = 0.0},
                      {.name = "max_ratio", .kind = ParamKind::kNumber, .default_value = 0.5,
                       .min = 0.0}},
           .commutative_filter = true,
           .stat_keys = {std::string(stat::kCharRepRatio)},
           .factory = factory<CharacterRepetitionFilter>()});
    r.add({.name = "text_chunk_mapper",
           .type = OpType::kMapper,
           .doc = "Splits text into chunks of at most max_chars characters.",
           .params = {{.name = "max_chars", .kind = ParamKind::kInt, .min = 1, .required = true},
                      {.name = "overlap_chars", .kind = ParamKind::kInt, .default_value = 0,
                       .min = 0}},
           .factory = factory<TextChunkMapper>()});
    r.add({.name = "whitespace_normalization_mapper",
           .type = OpType::kMapper,
           .doc = "Collapses whitespace runs to single spaces and trims the ends.",
           .factory = factory<WhitespaceNormalizationMapper>()});
}

} // namespace dj
