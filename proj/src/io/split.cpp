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

#include "dj/io/split.hpp"

#include <fstream>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/common/hash.hpp"
#include "dj/io/dataset.hpp"

namespace dj {

namespace {

class PartWriter {
public:
    explicit PartWriter(fs::path dir) : dir_(std::move(dir)) {}

    void open_new() {
        close();
        SplitPart part;
        part.path = dir_ / fmt::format("part-{:05d}.jsonl", parts_.size());
        out_.open(part.path, std::ios::binary | std::ios::trunc);
        if (!out_) {
            throw Error(ErrorCode::kTargetUnwritable,
                        fmt::format("cannot write '{}'", part.path.string()));
        }
        parts_.push_back(part);
    }

    void write_line(const std::string& line, bool is_record) {
        out_.write(line.data(), static_cast<std::streamsize>(line.size()));
        parts_.back().byte_size += line.size();
        if (is_record) {
            ++parts_.back().sample_count;
        }
    }

    std::uint64_t current_size() const { return parts_.empty() ? 0 : parts_.back().byte_size; }
    bool has_open() const { return !parts_.empty(); }

    void close() {
        if (out_.is_open()) {
            out_.close();
            if (out_.fail()) {
                throw Error(ErrorCode::kTargetUnwritable, "failed writing split part");
            }
        }
    }

    std::vector<SplitPart>& parts() { return parts_; }

private:
    fs::path dir_;
    std::ofstream out_;
    std::vector<SplitPart> parts_;
};

bool has_content(const std::string& line) {
    for (char c : line) {
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') {
            return true;
        }
    }
    return false;
}

} // namespace

Json SplitManifest::to_json() const {
    Json j = Json::object();
    j["target_bytes"] = target_bytes;
    j["total_bytes"] = total_bytes;
    j["origin_digest"] = origin_digest;
    Json parts_j = Json::array();
    for (const auto& p : parts) {
        parts_j.push_back({{"path", p.path.filename().string()},
                           {"byte_size", p.byte_size},
                           {"sample_count", p.sample_count}});
    }
    j["parts"] = std::move(parts_j);
    j["warnings"] = warnings;
    return j;
}

SplitManifest SplitManifest::from_json(const Json& j) {
    SplitManifest m;
    m.target_bytes = j.at("target_bytes").get<std::uint64_t>();
    m.total_bytes = j.value("total_bytes", std::uint64_t{0});
    m.origin_digest = j.at("origin_digest").get<std::string>();
    for (const auto& p : j.at("parts")) {
        m.parts.push_back(SplitPart{p.at("path").get<std::string>(),
                                    p.at("byte_size").get<std::uint64_t>(),
                                    p.at("sample_count").get<std::size_t>()});
    }
    if (j.contains("warnings")) {
        m.warnings = j.at("warnings").get<std::vector<std::string>>();
    }
    return m;
}

SplitManifest split_subsets(const fs::path& source, std::uint64_t target_bytes,
                            std::optional<std::size_t> part_count_hint, const fs::path& out_dir) {
    if (target_bytes == 0) {
        throw Error(ErrorCode::kParamValidation, "target_bytes must be > 0");
    }
    std::vector<fs::path> files = resolve_sources(source);
    std::uint64_t total = 0;
    for (const auto& f : files) {
        total += fs::file_size(f);
    }
    std::size_t wanted = static_cast<std::size_t>((total + target_bytes - 1) / target_bytes);
    wanted = std::max<std::size_t>(wanted, 1);
    if (part_count_hint && *part_count_hint > wanted) {
        wanted = *part_count_hint;
    }
    // Close a part once it reaches the balanced size; never exceed the hard
    // target unless a single line is larger than it.
    std::uint64_t soft = (total + wanted - 1) / wanted;
    soft = std::max<std::uint64_t>(soft, 1);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw Error(ErrorCode::kTargetUnwritable,
                    fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
    }

    SplitManifest manifest;
    manifest.target_bytes = target_bytes;
    manifest.total_bytes = total;
    ContentDigest digest;
    PartWriter writer(out_dir);
    std::string line;
    std::size_t line_no_global = 0;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) {
            throw Error(ErrorCode::kSourceNotFound, fmt::format("cannot open '{}'", f.string()));
        }
        while (std::getline(in, line)) {
            ++line_no_global;
            if (!in.eof()) {
                line.push_back('\n');
            }
            digest.update(line);
            std::uint64_t size = line.size();
            if (!writer.has_open() ||
                (writer.current_size() > 0 && writer.current_size() + size > target_bytes)) {
                writer.open_new();
            }
            if (size > target_bytes) {
                manifest.warnings.push_back(fmt::format(
                        "OversizedSample: line {} is {} bytes (target {})", line_no_global, size,
                        target_bytes));
            }
            writer.write_line(line, has_content(line));
            if (writer.current_size() >= soft) {
                writer.close();
                writer.open_new();
            }
        }
    }
    // Drop a trailing empty part opened after the final close, then pad.
    writer.close();
    auto& parts = writer.parts();
    if (parts.size() > 1 && parts.back().byte_size == 0) {
        fs::remove(parts.back().path, ec);
        parts.pop_back();
    }
    while (parts.size() < wanted) {
        writer.open_new();
        writer.close();
    }
    manifest.parts = parts;
    manifest.origin_digest = digest.hex();

    std::ofstream mf(out_dir / kSplitManifestName, std::ios::trunc);
    if (!mf) {
        throw Error(ErrorCode::kTargetUnwritable, "cannot write split manifest");
    }
    mf << manifest.to_json().dump(2) << "\n";
    return manifest;
}

} // namespace dj
