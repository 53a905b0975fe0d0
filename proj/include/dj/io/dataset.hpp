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
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dj/schema/sample.hpp"
#include "dj/schema/schema.hpp"

namespace dj {

namespace fs = std::filesystem;

enum class DatasetMode { kMaterialized, kStreaming };

DatasetMode parse_dataset_mode(std::string_view name);

/// A line that failed to parse, by its position among all records.
struct BadLine {
    std::size_t ordinal = 0;
    std::string source;
    std::size_t line_no = 0;
    std::string reason;
};

/// Sequential access to records in file order, faulty ones included.
class RecordReader {
public:
    virtual ~RecordReader() = default;
    virtual std::optional<Sample> next() = 0;
};

/// Reads one or more JSONL files back to back. Whitespace-only lines are
/// skipped; lines that fail to parse become faulty records and are
/// reported to `on_bad_line` when set.
class JsonlReader final : public RecordReader {
public:
    explicit JsonlReader(std::vector<fs::path> files);
    std::optional<Sample> next() override;

    const std::vector<BadLine>& bad_lines() const { return bad_lines_; }

private:
    bool open_next();

    std::vector<fs::path> files_;
    std::size_t file_index_ = 0;
    std::ifstream in_;
    std::size_t line_no_ = 0;
    std::size_t ordinal_ = 0;
    std::string line_;
    std::vector<BadLine> bad_lines_;
};

class Dataset {
public:
    Dataset() = default;

    static Dataset from_samples(std::vector<Sample> samples);

    /// Wraps existing JSONL files without the non-empty check of load();
    /// used for snapshots, which may legitimately hold zero records.
    static Dataset from_files(std::vector<fs::path> files, DatasetMode mode);

    DatasetMode mode() const { return mode_; }
    const std::vector<fs::path>& sources() const { return sources_; }

    /// Valid samples; known up front only for materialized datasets.
    std::optional<std::size_t> sample_count() const;

    /// First valid record, emptied of nothing; used as the placeholder
    /// prototype when a failing batch has no usable sample.
    const Sample& schema_prototype() const { return prototype_; }

    /// All records in order, faulty ones included. Materialized only.
    const std::vector<Sample>& records() const { return records_; }
    std::vector<Sample>& mutable_records() { return records_; }

    /// Valid samples in order. Materialized only.
    std::vector<Sample> samples() const;
    std::size_t size() const;

    const std::vector<BadLine>& bad_lines() const { return bad_lines_; }

    std::unique_ptr<RecordReader> open() const;

    /// Loads a streaming dataset fully into memory.
    Dataset materialize() const;

private:
    friend Dataset load(const fs::path& source, DatasetMode mode);

    DatasetMode mode_ = DatasetMode::kMaterialized;
    std::vector<fs::path> sources_;
    std::vector<Sample> records_;
    std::vector<BadLine> bad_lines_;
    Sample prototype_;
};

/// Resolves a file or a directory of `*.jsonl` parts (lexicographic order).
std::vector<fs::path> resolve_sources(const fs::path& source);

/// Throws Error(kSourceNotFound) or Error(kEmptySource).
Dataset load(const fs::path& source, DatasetMode mode = DatasetMode::kMaterialized);

/// Appends records to a JSONL file, one per line. Faulty records are skipped.
class JsonlWriter {
public:
    explicit JsonlWriter(const fs::path& path);
    void write(const Sample& sample);
    void close();

    std::uint64_t bytes() const { return bytes_; }
    std::size_t count() const { return count_; }

private:
    fs::path path_;
    std::ofstream out_;
    std::uint64_t bytes_ = 0;
    std::size_t count_ = 0;
};

struct ExportReport {
    std::size_t sample_count = 0;
    std::uint64_t byte_count = 0;
    std::size_t placeholders_dropped = 0;
};

/// Throws Error(kTargetUnwritable).
ExportReport export_dataset(const Dataset& dataset, const fs::path& target, bool drop_placeholders);

ValidationReport validate_dataset(const Dataset& dataset, ProcessingGoal goal,
                                  const SchemaTokens& tokens = {});

} // namespace dj
