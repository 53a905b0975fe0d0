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

#include "dj/io/dataset.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "dj/common/error.hpp"

namespace dj {

namespace {

bool blank(const std::string& line) {
    return std::all_of(line.begin(), line.end(), [](char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n';
    });
}

class MemoryReader final : public RecordReader {
public:
    explicit MemoryReader(const std::vector<Sample>& records) : records_(records) {}
    std::optional<Sample> next() override {
        if (pos_ >= records_.size()) {
            return std::nullopt;
        }
        return records_[pos_++];
    }

private:
    const std::vector<Sample>& records_;
    std::size_t pos_ = 0;
};

} // namespace

DatasetMode parse_dataset_mode(std::string_view name) {
    if (name == "materialized") return DatasetMode::kMaterialized;
    if (name == "streaming") return DatasetMode::kStreaming;
    throw Error(ErrorCode::kParamValidation, fmt::format("unknown dataset mode '{}'", name));
}

JsonlReader::JsonlReader(std::vector<fs::path> files) : files_(std::move(files)) {}

bool JsonlReader::open_next() {
    while (file_index_ < files_.size()) {
        in_ = std::ifstream(files_[file_index_], std::ios::binary);
        line_no_ = 0;
        if (in_) {
            return true;
        }
        throw Error(ErrorCode::kSourceNotFound,
                    fmt::format("cannot open '{}'", files_[file_index_].string()));
    }
    return false;
}

std::optional<Sample> JsonlReader::next() {
    for (;;) {
        if (!in_.is_open()) {
            if (!open_next()) {
                return std::nullopt;
            }
        }
        if (!std::getline(in_, line_)) {
            in_.close();
            ++file_index_;
            continue;
        }
        ++line_no_;
        if (blank(line_)) {
            continue;
        }
        std::size_t ordinal = ordinal_++;
        try {
            return parse_sample(line_);
        } catch (const Error& e) {
            std::string where = files_[file_index_].string();
            bad_lines_.push_back(BadLine{ordinal, where, line_no_, e.what()});
            return Sample::corrupt(
                    fmt::format("{}:{}: {}: {}", where, line_no_, error_code_name(e.code()), e.what()));
        }
    }
}

Dataset Dataset::from_samples(std::vector<Sample> samples) {
    Dataset d;
    d.mode_ = DatasetMode::kMaterialized;
    d.records_ = std::move(samples);
    for (std::size_t i = 0; i < d.records_.size(); ++i) {
        if (d.records_[i].is_faulty()) {
            d.bad_lines_.push_back(BadLine{i, "", 0, *d.records_[i].fault});
        } else if (d.prototype_.key_order.empty()) {
            d.prototype_ = d.records_[i];
        }
    }
    return d;
}

Dataset Dataset::from_files(std::vector<fs::path> files, DatasetMode mode) {
    Dataset d;
    d.sources_ = std::move(files);
    d.mode_ = DatasetMode::kStreaming;
    {
        JsonlReader reader(d.sources_);
        while (auto r = reader.next()) {
            if (!r->is_faulty()) {
                d.prototype_ = std::move(*r);
                break;
            }
        }
    }
    if (mode == DatasetMode::kMaterialized) {
        return d.materialize();
    }
    return d;
}

std::optional<std::size_t> Dataset::sample_count() const {
    if (mode_ == DatasetMode::kStreaming) {
        return std::nullopt;
    }
    return size();
}

std::vector<Sample> Dataset::samples() const {
    std::vector<Sample> out;
    out.reserve(records_.size());
    for (const auto& r : records_) {
        if (!r.is_faulty()) {
            out.push_back(r);
        }
    }
    return out;
}

std::size_t Dataset::size() const {
    return records_.size() - bad_lines_.size();
}

std::unique_ptr<RecordReader> Dataset::open() const {
    if (mode_ == DatasetMode::kStreaming) {
        return std::make_unique<JsonlReader>(sources_);
    }
    return std::make_unique<MemoryReader>(records_);
}

Dataset Dataset::materialize() const {
    if (mode_ == DatasetMode::kMaterialized) {
        return *this;
    }
    JsonlReader reader(sources_);
    std::vector<Sample> records;
    while (auto r = reader.next()) {
        records.push_back(std::move(*r));
    }
    Dataset d = from_samples(std::move(records));
    d.sources_ = sources_;
    d.bad_lines_ = reader.bad_lines();
    return d;
}

std::vector<fs::path> resolve_sources(const fs::path& source) {
    std::error_code ec;
    if (fs::is_regular_file(source, ec)) {
        return {source};
    }
    if (!fs::is_directory(source, ec)) {
        throw Error(ErrorCode::kSourceNotFound, fmt::format("dataset '{}' not found", source.string()));
    }
    std::vector<fs::path> parts;
    for (const auto& entry : fs::directory_iterator(source)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            parts.push_back(entry.path());
        }
    }
    std::sort(parts.begin(), parts.end());
    if (parts.empty()) {
        throw Error(ErrorCode::kEmptySource,
                    fmt::format("directory '{}' holds no .jsonl parts", source.string()));
    }
    return parts;
}

Dataset load(const fs::path& source, DatasetMode mode) {
    std::vector<fs::path> files = resolve_sources(source);
    Dataset d;
    if (mode == DatasetMode::kMaterialized) {
        d = Dataset::from_samples({});
        JsonlReader reader(files);
        while (auto r = reader.next()) {
            d.records_.push_back(std::move(*r));
        }
        d.bad_lines_ = reader.bad_lines();
        for (const auto& r : d.records_) {
            if (!r.is_faulty()) {
                d.prototype_ = r;
                break;
            }
        }
        d.mode_ = DatasetMode::kMaterialized;
    } else {
        d.mode_ = DatasetMode::kStreaming;
        // Only peek far enough to find a schema prototype.
        JsonlReader reader(files);
        bool any = false;
        while (auto r = reader.next()) {
            if (!r->is_faulty()) {
                d.prototype_ = std::move(*r);
                any = true;
                break;
            }
        }
        if (!any) {
            throw Error(ErrorCode::kEmptySource,
                        fmt::format("'{}' has no readable records", source.string()));
        }
        d.sources_ = files;
        return d;
    }
    d.sources_ = files;
    if (d.bad_lines_.size() == d.records_.size()) {
        throw Error(ErrorCode::kEmptySource,
                    fmt::format("'{}' has no readable records", source.string()));
    }
    return d;
}

JsonlWriter::JsonlWriter(const fs::path& path) : path_(path) {
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
    }
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) {
        throw Error(ErrorCode::kTargetUnwritable, fmt::format("cannot write '{}'", path.string()));
    }
}

void JsonlWriter::write(const Sample& sample) {
    if (sample.is_faulty()) {
        return;
    }
    std::string line = serialize_sample(sample);
    line.push_back('\n');
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    bytes_ += line.size();
    ++count_;
}

void JsonlWriter::close() {
    out_.flush();
    if (!out_) {
        throw Error(ErrorCode::kTargetUnwritable, fmt::format("write to '{}' failed", path_.string()));
    }
    out_.close();
}

ExportReport export_dataset(const Dataset& dataset, const fs::path& target, bool drop_placeholders) {
    JsonlWriter writer(target);
    ExportReport report;
    auto reader = dataset.open();
    while (auto r = reader->next()) {
        if (r->is_faulty()) {
            continue;
        }
        if (drop_placeholders && r->is_placeholder()) {
            ++report.placeholders_dropped;
            continue;
        }
        writer.write(*r);
    }
    writer.close();
    report.sample_count = writer.count();
    report.byte_count = writer.bytes();
    return report;
}

ValidationReport validate_dataset(const Dataset& dataset, ProcessingGoal goal,
                                  const SchemaTokens& tokens) {
    ValidationReport report;
    report.checked_rules = rules_for(goal);
    auto reader = dataset.open();
    std::size_t ordinal = 0;
    while (auto r = reader->next()) {
        validate_sample(*r, ordinal++, goal, tokens, report);
    }
    return report;
}

} // namespace dj
