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

#include <fmt/format.h>

#include "dj/catalog/catalog.hpp"
#include "dj/common/error.hpp"
#include "catalog_internal.hpp"

namespace dj {

namespace {

const MediaInfo& lookup(OpContext& ctx, const std::string& path) {
    const MediaInfo& info = ctx.media->get(path);
    if (!info.readable) {
        throw Error(ErrorCode::kUnreadableMedia, fmt::format("{}: {}", path, info.error));
    }
    return info;
}

const MediaInfo& lookup_image(OpContext& ctx, const std::string& path) {
    const MediaInfo& info = lookup(ctx, path);
    if (!info.dims) {
        throw Error(ErrorCode::kUnreadableMedia,
                    fmt::format("{}: not a recognized image header", path));
    }
    return info;
}

/// Shared plumbing for filters that score each media file of one modality.
class MediaFilter : public Filter {
public:
    MediaFilter(OpDescriptor d, Modality m)
            : Filter(std::move(d)),
              modality_(m),
              all_(Params(descriptor().params).get_string("any_or_all") == "all") {}

    void prepare(const Batch& batch, OpContext& ctx) const override {
        std::vector<std::string> paths;
        for (const auto& s : batch.samples) {
            if (!s.is_placeholder()) {
                const auto& m = s.media(modality_);
                paths.insert(paths.end(), m.begin(), m.end());
            }
        }
        ctx.media->prefetch(paths, ctx.io_threads);
    }

    bool keep(const Sample& s) const override {
        std::size_t n = s.media(modality_).size();
        if (n == 0) {
            return true;
        }
        std::size_t passed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            passed += item_passes(s, i) ? 1 : 0;
        }
        return all_ ? passed == n : passed > 0;
    }

protected:
    virtual bool item_passes(const Sample& s, std::size_t i) const = 0;

    Modality modality_;

private:
    bool all_;
};

class ImageShapeFilter final : public MediaFilter {
public:
    explicit ImageShapeFilter(OpDescriptor d)
            : MediaFilter(std::move(d), Modality::kImage),
              width_(StatRange::from_params(name(), descriptor().params, "min_width", "max_width")),
              height_(StatRange::from_params(name(), descriptor().params, "min_height",
                                             "max_height")) {}

    std::vector<std::string> stat_keys() const override {
        return {std::string(stat::kImageWidths), std::string(stat::kImageHeights)};
    }

    void compute_stats(Sample& s, OpContext& ctx) const override {
        Json w = Json::array();
        Json h = Json::array();
        for (const auto& path : s.images) {
            const MediaInfo& info = lookup_image(ctx, path);
            w.push_back(info.dims->width);
            h.push_back(info.dims->height);
        }
        s.set_stat(stat::kImageWidths, std::move(w));
        s.set_stat(stat::kImageHeights, std::move(h));
    }

protected:
    bool item_passes(const Sample& s, std::size_t i) const override {
        return width_.contains(s.find_stat(stat::kImageWidths)->at(i).get<double>()) &&
               height_.contains(s.find_stat(stat::kImageHeights)->at(i).get<double>());
    }

private:
    StatRange width_;
    StatRange height_;
};

class ImageAspectRatioFilter final : public MediaFilter {
public:
    explicit ImageAspectRatioFilter(OpDescriptor d)
            : MediaFilter(std::move(d), Modality::kImage),
              range_(StatRange::from_params(name(), descriptor().params, "min_ratio",
                                            "max_ratio")) {}

    std::vector<std::string> stat_keys() const override {
        return {std::string(stat::kAspectRatios)};
    }

    void compute_stats(Sample& s, OpContext& ctx) const override {
        Json r = Json::array();
        for (const auto& path : s.images) {
            const MediaInfo& info = lookup_image(ctx, path);
            if (info.dims->height == 0) {
                throw Error(ErrorCode::kUnreadableMedia, fmt::format("{}: zero height", path));
            }
            r.push_back(static_cast<double>(info.dims->width) /
                        static_cast<double>(info.dims->height));
        }
        s.set_stat(stat::kAspectRatios, std::move(r));
    }

protected:
    bool item_passes(const Sample& s, std::size_t i) const override {
        return range_.contains(s.find_stat(stat::kAspectRatios)->at(i).get<double>());
    }

private:
    StatRange range_;
};

class FileSizeFilter final : public MediaFilter {
public:
    FileSizeFilter(OpDescriptor d, Modality m, std::string_view key)
            : MediaFilter(std::move(d), m),
              key_(key),
              range_(StatRange::from_params(name(), descriptor().params, "min_size", "max_size")) {}

    std::vector<std::string> stat_keys() const override { return {key_}; }

    void compute_stats(Sample& s, OpContext& ctx) const override {
        Json sizes = Json::array();
        for (const auto& path : s.media(modality_)) {
            sizes.push_back(lookup(ctx, path).file_size);
        }
        s.set_stat(key_, std::move(sizes));
    }

protected:
    bool item_passes(const Sample& s, std::size_t i) const override {
        return range_.contains(s.find_stat(key_)->at(i).get<double>());
    }

private:
    std::string key_;
    StatRange range_;
};

ParamSpec any_or_all_spec() {
    return {.name = "any_or_all",
            .kind = ParamKind::kString,
            .default_value = "all",
            .choices = {"any", "all"},
            .doc = "whether one or every media item must pass"};
}

std::vector<ParamSpec> size_specs() {
    return {{.name = "min_size", .kind = ParamKind::kBytes, .min = 0.0},
            {.name = "max_size", .kind = ParamKind::kBytes, .min = 0.0},
            any_or_all_spec()};
}

} // namespace

void register_media_ops(OpRegistry& r) {
    r.add({.name = "image_shape_filter",
           .type = OpType::kFilter,
           .doc = "Keeps samples whose image widths and heights are within range.",
           .params = {{.name = "min_width", .kind = ParamKind::kNumber, .min = 0.0},
                      {.name = "max_width", .kind = ParamKind::kNumber, .min = 0.0},
                      {.name = "min_height", .kind = ParamKind::kNumber, .min = 0.0},
                      {.name = "max_height", .kind = ParamKind::kNumber, .min = 0.0},
                      any_or_all_spec()},
           .commutative_filter = true,
           .shared_resource = "images",
           .stat_keys = {std::string(stat::kImageWidths), std::string(stat::kImageHeights)},
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<ImageShapeFilter>(d);
           }});
    r.add({.name = "image_aspect_ratio_filter",
           .type = OpType::kFilter,
           .doc = "Keeps samples whose image aspect ratios (width/height) are within range.",
           .params = {{.name = "min_ratio", .kind = ParamKind::kNumber, .min = 0.0},
                      {.name = "max_ratio", .kind = ParamKind::kNumber, .min = 0.0},
                      any_or_all_spec()},
           .commutative_filter = true,
           .shared_resource = "images",
           .stat_keys = {std::string(stat::kAspectRatios)},
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<ImageAspectRatioFilter>(d);
           }});
    r.add({.name = "image_size_filter",
           .type = OpType::kFilter,
           .doc = "Keeps samples whose image file sizes in bytes are within range.",
           .params = size_specs(),
           .commutative_filter = true,
           .shared_resource = "images",
           .stat_keys = {std::string(stat::kImageSizes)},
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<FileSizeFilter>(d, Modality::kImage, stat::kImageSizes);
           }});
    r.add({.name = "audio_size_filter",
           .type = OpType::kFilter,
           .doc = "Keeps samples whose audio file sizes in bytes are within range.",
           .params = size_specs(),
           .commutative_filter = true,
           .shared_resource = "audios",
           .stat_keys = {std::string(stat::kAudioSizes)},
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<FileSizeFilter>(d, Modality::kAudio, stat::kAudioSizes);
           }});
}

} // namespace dj
