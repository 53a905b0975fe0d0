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

#include "dj/exec/executor.hpp"

#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/common/thread_pool.hpp"
#include "dj/ops/fused.hpp"
#include "dj/ops/run.hpp"

namespace dj {

std::size_t RunCounters::total_dropped() const {
    std::size_t n = 0;
    for (const auto& [_, v] : dropped_by_filter) {
        n += v;
    }
    return n;
}

bool RunCounters::conserved() const {
    return processed + expanded ==
           kept + total_dropped() + dedup_removed + merged + lost_in_skipped;
}

Json RunCounters::to_json() const {
    Json dropped = Json::object();
    for (const auto& [k, v] : dropped_by_filter) {
        dropped[k] = v;
    }
    Json times = Json::object();
    for (const auto& [k, v] : wall_time) {
        times[k] = v;
    }
    return Json{{"processed", processed},
                {"kept", kept},
                {"dropped_by_filter", std::move(dropped)},
                {"dedup_removed", dedup_removed},
                {"expanded", expanded},
                {"merged", merged},
                {"skipped_batches", skipped_batches},
                {"lost_in_skipped", lost_in_skipped},
                {"filled_batches", filled_batches},
                {"placeholder_samples", placeholder_samples},
                {"retried_batches", retried_batches},
                {"wall_time", std::move(times)}};
}

RunCounters RunCounters::from_json(const Json& j) {
    RunCounters c;
    auto count = [&](const char* key) { return j.value(key, std::size_t{0}); };
    c.processed = count("processed");
    c.kept = count("kept");
    c.dedup_removed = count("dedup_removed");
    c.expanded = count("expanded");
    c.merged = count("merged");
    c.skipped_batches = count("skipped_batches");
    c.lost_in_skipped = count("lost_in_skipped");
    c.filled_batches = count("filled_batches");
    c.placeholder_samples = count("placeholder_samples");
    c.retried_batches = count("retried_batches");
    if (auto it = j.find("dropped_by_filter"); it != j.end()) {
        for (auto d = it->begin(); d != it->end(); ++d) {
            c.dropped_by_filter[d.key()] = d.value().get<std::size_t>();
        }
    }
    if (auto it = j.find("wall_time"); it != j.end()) {
        for (auto d = it->begin(); d != it->end(); ++d) {
            c.wall_time[d.key()] = d.value().get<double>();
        }
    }
    return c;
}

FailureOutcome handle_batch_failure(const Batch& batch, const FaultPolicy& policy,
                                    const Sample& prototype) {
    FailureOutcome out;
    out.action = policy.mode;
    if (policy.mode == FaultMode::kFillEmpty) {
        const Sample* proto = &prototype;
        for (const auto& s : batch.samples) {
            if (!s.is_faulty() && !s.is_placeholder()) {
                proto = &s;
                break;
            }
        }
        out.replacement.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            out.replacement.push_back(make_empty_sample(*proto));
        }
    }
    return out;
}

Json RunOutcome::report_json() const {
    Json failed = Json::array();
    for (const auto& f : failed_batches) {
        failed.push_back(Json{{"step", f.step},
                              {"op", f.op},
                              {"ordinals", f.ordinals},
                              {"error", f.error},
                              {"action", fault_mode_name(f.action)}});
    }
    Json j{{"counters", counters.to_json()},
           {"conserved", counters.conserved()},
           {"aborted", aborted},
           {"failed_batches", std::move(failed)},
           {"op_reports", op_reports},
           {"wall_time", wall_time}};
    if (aborted) {
        j["abort_reason"] = abort_reason;
    }
    if (exported) {
        j["export"] = Json{{"samples", exported->sample_count},
                           {"bytes", exported->byte_count},
                           {"placeholders_dropped", exported->placeholders_dropped}};
    }
    return j;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Batches of a step's input, ordinals counted from zero.
class Source {
public:
    virtual ~Source() = default;
    virtual std::optional<Batch> next(std::size_t batch_size) = 0;
    std::size_t consumed() const { return consumed_; }

protected:
    std::size_t consumed_ = 0;
};

class MemorySource final : public Source {
public:
    explicit MemorySource(std::vector<Sample> records) : records_(std::move(records)) {}

    std::optional<Batch> next(std::size_t bs) override {
        if (pos_ >= records_.size()) {
            return std::nullopt;
        }
        Batch b;
        std::size_t end = std::min(records_.size(), pos_ + bs);
        b.samples.reserve(end - pos_);
        for (; pos_ < end; ++pos_) {
            b.samples.push_back(std::move(records_[pos_]));
            b.origin_ordinals.push_back(consumed_++);
        }
        return b;
    }

private:
    std::vector<Sample> records_;
    std::size_t pos_ = 0;
};

class FileSource final : public Source {
public:
    explicit FileSource(std::vector<fs::path> files) : reader_(std::move(files)) {}

    std::optional<Batch> next(std::size_t bs) override {
        Batch b;
        while (b.samples.size() < bs) {
            auto rec = reader_.next();
            if (!rec) {
                break;
            }
            b.samples.push_back(std::move(*rec));
            b.origin_ordinals.push_back(consumed_++);
        }
        if (b.samples.empty()) {
            return std::nullopt;
        }
        return b;
    }

private:
    JsonlReader reader_;
};

class Sink {
public:
    explicit Sink(std::optional<fs::path> file) {
        if (file) {
            fs::create_directories(file->parent_path());
            writer_.emplace(*file);
            path_ = *file;
        }
    }

    void write(std::vector<Sample>&& samples) {
        count_ += samples.size();
        if (writer_) {
            for (const auto& s : samples) {
                writer_->write(s);
            }
            return;
        }
        records_.insert(records_.end(), std::make_move_iterator(samples.begin()),
                        std::make_move_iterator(samples.end()));
    }

    std::size_t count() const { return count_; }
    bool to_file() const { return writer_.has_value(); }
    const fs::path& path() const { return path_; }

    void close() {
        if (writer_) {
            writer_->close();
        }
    }

    std::vector<Sample> take() { return std::move(records_); }

private:
    std::optional<JsonlWriter> writer_;
    fs::path path_;
    std::vector<Sample> records_;
    std::size_t count_ = 0;
};

struct BatchResult {
    std::vector<Sample> samples;
    std::vector<DropRecord> drops;
    std::size_t lost = 0;
    std::size_t placeholders = 0;
    bool retried = false;
    std::optional<FailedBatch> failure;
    std::exception_ptr fatal;
};

/// Shared progress for the monitor thread.
struct Progress {
    std::mutex mu;
    std::size_t step = 0;
    std::string op;
    std::string key;
    std::atomic<std::size_t> samples_done{0};
    std::atomic<std::size_t> queue_depth{0};
    std::map<std::string, double> op_time;
    Clock::time_point step_start = Clock::now();
};

std::uint64_t resident_bytes() {
    std::ifstream statm("/proc/self/statm");
    std::uint64_t size = 0;
    std::uint64_t rss = 0;
    statm >> size >> rss;
    return rss * static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
}

class Monitor {
public:
    Monitor(const fs::path& path, std::size_t interval_ms, Progress& progress)
            : progress_(progress), interval_(std::chrono::milliseconds(std::max<std::size_t>(1, interval_ms))) {
        if (path.empty()) {
            return;
        }
        if (path.has_parent_path()) {
            fs::create_directories(path.parent_path());
        }
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) {
            throw Error(ErrorCode::kTargetUnwritable,
                        fmt::format("cannot write monitor log {}", path.string()));
        }
        start_ = Clock::now();
        thread_ = std::thread([this] { loop(); });
    }

    ~Monitor() { stop(); }

    void stop() {
        {
            std::lock_guard lock(mu_);
            stopping_ = true;
        }
        cv_.notify_all();
        if (thread_.joinable()) {
            thread_.join();
        }
    }

    void write_final(const RunCounters& counters) {
        stop();
        if (!out_.is_open()) {
            return;
        }
        Json times = Json::object();
        double total = 0.0;
        for (const auto& [k, v] : counters.wall_time) {
            times[k] = v;
            total += v;
        }
        Json line{{"final", true},
                  {"t", seconds_since(start_)},
                  {"processed", counters.processed},
                  {"kept", counters.kept},
                  {"op_time", std::move(times)},
                  {"op_time_total", total},
                  {"rss_bytes", resident_bytes()}};
        out_ << line.dump() << '\n';
        out_.flush();
    }

private:
    void loop() {
        std::size_t last_done = 0;
        auto last_t = Clock::now();
        std::unique_lock lock(mu_);
        while (!cv_.wait_for(lock, interval_, [this] { return stopping_; })) {
            auto now = Clock::now();
            Json line = Json::object();
            {
                std::lock_guard plock(progress_.mu);
                std::size_t done = progress_.samples_done.load();
                if (done < last_done) {
                    last_done = 0;
                }
                double dt = std::chrono::duration<double>(now - last_t).count();
                Json times = Json::object();
                for (const auto& [k, v] : progress_.op_time) {
                    times[k] = v;
                }
                if (!progress_.op.empty()) {
                    const std::string& key = progress_.key;
                    double cur = std::chrono::duration<double>(now - progress_.step_start).count();
                    times[key] = times.value(key, 0.0) + cur;
                }
                line = Json{{"t", std::chrono::duration<double>(now - start_).count()},
                            {"step", progress_.step},
                            {"op", progress_.op},
                            {"samples_done", done},
                            {"throughput", dt > 0 ? static_cast<double>(done - last_done) / dt : 0.0},
                            {"queue_depth", progress_.queue_depth.load()},
                            {"op_time", std::move(times)},
                            {"rss_bytes", resident_bytes()}};
                last_done = done;
                last_t = now;
            }
            out_ << line.dump() << '\n';
            out_.flush();
        }
    }

    Progress& progress_;
    std::chrono::milliseconds interval_;
    std::ofstream out_;
    Clock::time_point start_ = Clock::now();
    std::thread thread_;
    std::mutex mu_;
    std::condition_variable cv_;
    bool stopping_ = false;
};

std::string step_label(const PlanStep& step) {
    if (!step.fused()) {
        return step.descriptor.name;
    }
    std::string names;
    for (const auto& c : step.descriptor.children) {
        names += names.empty() ? c.name : "," + c.name;
    }
    return fmt::format("fused_op({})", names);
}

class Runner {
public:
    Runner(const ExecutionPlan& plan, const ExecOptions& options, const OpRegistry& registry)
            : plan_(plan), options_(options), registry_(registry) {}

    RunOutcome run(const Dataset& dataset, const std::optional<ResumePoint>& from);

private:
    struct StepStats {
        std::size_t lost = 0;
        std::size_t drops = 0;
    };

    template <typename Attempt>
    BatchResult guarded(Batch batch, std::size_t step, const std::string& op,
                        Attempt&& attempt) const;

    void absorb(BatchResult&& r, std::size_t step, const std::string& key, Sink& sink,
                StepStats& stats);
    void run_batch_step(std::size_t k, const PlanStep& step, const BatchOperator& op,
                        Source& source, Sink& sink, StepStats& stats);
    void run_global_step(std::size_t k, const PlanStep& step, const GlobalOperator& op,
                         const std::function<std::unique_ptr<Source>()>& open_source, Sink& sink,
                         StepStats& stats);
    void log_drops(std::size_t step, const std::vector<DropRecord>& drops);
    void write_abort_record();

    const ExecutionPlan& plan_;
    const ExecOptions& options_;
    const OpRegistry& registry_;
    RunOutcome outcome_;
    Progress progress_;
    Sample prototype_;
    std::ofstream drop_log_;
    std::exception_ptr fatal_;
    bool abort_ = false;
    int last_completed_ = -1;
};

template <typename Attempt>
BatchResult Runner::guarded(Batch batch, std::size_t step, const std::string& op,
                            Attempt&& attempt) const {
    BatchResult r;
    const FaultPolicy& policy = options_.policy;
    std::string last_error;
    // The final attempt consumes the batch; keep what failure handling needs.
    std::vector<std::size_t> ordinals = batch.origin_ordinals;
    const std::size_t batch_size = batch.size();
    Sample proto = prototype_;
    for (const auto& s : batch.samples) {
        if (!s.is_faulty() && !s.is_placeholder()) {
            proto = s;
            break;
        }
    }
    for (std::size_t attempt_no = 0; attempt_no <= policy.max_retries; ++attempt_no) {
        if (attempt_no > 0) {
            r.retried = true;
            std::this_thread::sleep_for(policy.delay_for(attempt_no - 1));
        }
        try {
            BatchOutput out = attempt_no < policy.max_retries ? attempt(Batch(batch))
                                                              : attempt(std::move(batch));
            r.samples = std::move(out.samples);
            r.drops = std::move(out.drops);
            return r;
        } catch (const Error& e) {
            if (!e.is_sample_level()) {
                r.fatal = std::current_exception();
                return r;
            }
            last_error = fmt::format("[{}] {}", error_code_name(e.code()), e.what());
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    FailedBatch fb;
    fb.step = step;
    fb.op = op;
    fb.ordinals = std::move(ordinals);
    fb.error = last_error;
    fb.action = policy.mode;
    Batch shape;
    shape.samples.assign(batch_size, proto);
    FailureOutcome fo = handle_batch_failure(shape, policy, proto);
    if (fo.action == FaultMode::kSkipBatch) {
        r.lost = batch_size;
    } else if (fo.action == FaultMode::kFillEmpty) {
        r.placeholders = fo.replacement.size();
        r.samples = std::move(fo.replacement);
    }
    r.failure = std::move(fb);
    return r;
}

void Runner::log_drops(std::size_t step, const std::vector<DropRecord>& drops) {
    if (!drop_log_.is_open()) {
        return;
    }
    for (const auto& d : drops) {
        drop_log_ << Json{{"step", step}, {"op", d.op}, {"ordinal", d.ordinal}, {"stats", d.stats}}
                             .dump()
                  << '\n';
    }
}

void Runner::absorb(BatchResult&& r, std::size_t step, const std::string& key, Sink& sink,
                    StepStats& stats) {
    if (r.fatal) {
        if (!fatal_) {
            fatal_ = r.fatal;
        }
        return;
    }
    if (fatal_ || abort_) {
        return;
    }
    RunCounters& c = outcome_.counters;
    if (r.retried) {
        ++c.retried_batches;
    }
    if (r.failure) {
        if (r.failure->action == FaultMode::kAbort) {
            abort_ = true;
            outcome_.abort_reason =
                    fmt::format("step {} ({}): {}", step, r.failure->op, r.failure->error);
            outcome_.failed_batches.push_back(std::move(*r.failure));
            return;
        }
        if (r.failure->action == FaultMode::kSkipBatch) {
            ++c.skipped_batches;
            c.lost_in_skipped += r.lost;
            stats.lost += r.lost;
        } else {
            ++c.filled_batches;
            c.placeholder_samples += r.placeholders;
        }
        outcome_.failed_batches.push_back(std::move(*r.failure));
    }
    if (!r.drops.empty()) {
        c.dropped_by_filter[key] += r.drops.size();
        stats.drops += r.drops.size();
        log_drops(step, r.drops);
    }
    progress_.samples_done += r.samples.size() + r.drops.size() + r.lost;
    sink.write(std::move(r.samples));
}

void Runner::run_batch_step(std::size_t k, const PlanStep& step, const BatchOperator& op,
                            Source& source, Sink& sink, StepStats& stats) {
    std::size_t workers = step.worker_count;
    if (options_.np > 0) {
        workers = std::min(workers, options_.np);
    }
    workers = std::max<std::size_t>(1, workers);
    const std::string key = fmt::format("{}:{}", k, op.name());
    ThreadPool pool(workers);
    std::deque<std::future<BatchResult>> inflight;
    const std::size_t cap = 2 * workers;
    auto drain_front = [&] {
        BatchResult r = inflight.front().get();
        inflight.pop_front();
        progress_.queue_depth = inflight.size();
        absorb(std::move(r), k, key, sink, stats);
    };
    const std::size_t bs = std::max<std::size_t>(1, step.batch_size);
    while (!fatal_ && !abort_) {
        std::optional<Batch> batch = source.next(bs);
        if (!batch) {
            break;
        }
        inflight.push_back(pool.submit([this, &op, k, b = std::move(*batch)](std::size_t worker) mutable {
            return guarded(std::move(b), k, op.name(), [&](Batch attempt) {
                OpContext ctx;
                ctx.worker_id = worker;
                ctx.seed = options_.seed;
                ctx.io_threads = options_.io_threads;
                return op.process(std::move(attempt), ctx);
            });
        }));
        progress_.queue_depth = inflight.size();
        while (inflight.size() >= cap) {
            drain_front();
        }
    }
    while (!inflight.empty()) {
        drain_front();
    }
}

void Runner::run_global_step(std::size_t k, const PlanStep&, const GlobalOperator& op,
                             const std::function<std::unique_ptr<Source>()>& open_source,
                             Sink& sink, StepStats& stats) {
    const std::string key = fmt::format("{}:{}", k, op.name());
    OpContext ctx;
    ctx.seed = options_.seed;
    ctx.io_threads = options_.io_threads;
    auto state = op.begin(ctx);
    const std::size_t bs = std::max<std::size_t>(1, op.descriptor().batch_size.value_or(kDefaultBatchSize));

    // Batch index -> placeholders replacing it, or nullopt when skipped.
    std::map<std::size_t, std::optional<std::vector<Sample>>> failed;
    if (op.needs_observe()) {
        auto source = open_source();
        std::size_t index = 0;
        while (!fatal_ && !abort_) {
            std::optional<Batch> batch = source->next(bs);
            if (!batch) {
                break;
            }
            BatchResult r = guarded(std::move(*batch), k, op.name(), [&](Batch b) {
                op.observe_batch(*state, b, ctx);
                return BatchOutput{};
            });
            if (r.failure && r.failure->action != FaultMode::kAbort) {
                if (r.failure->action == FaultMode::kSkipBatch) {
                    failed[index] = std::nullopt;
                } else {
                    failed[index] = std::move(r.samples);
                }
                r.samples.clear();
            }
            // Observation emits nothing; the sink is untouched here.
            Sink scratch(std::nullopt);
            absorb(std::move(r), k, key, scratch, stats);
            ++index;
        }
        if (fatal_ || abort_) {
            return;
        }
        op.finish_observe(*state, ctx);
    }
    auto source = open_source();
    std::size_t index = 0;
    while (!fatal_ && !abort_) {
        std::optional<Batch> batch = source->next(bs);
        if (!batch) {
            break;
        }
        if (auto it = failed.find(index++); it != failed.end()) {
            if (it->second) {
                progress_.samples_done += it->second->size();
                sink.write(std::move(*it->second));
            }
            continue;
        }
        BatchResult r = guarded(std::move(*batch), k, op.name(), [&](Batch b) {
            return op.apply_batch(*state, std::move(b), ctx);
        });
        absorb(std::move(r), k, key, sink, stats);
    }
    if (fatal_ || abort_) {
        return;
    }
    BatchOutput tail = op.finish(*state, ctx);
    sink.write(std::move(tail.samples));
    Json report = op.report(*state);
    if (!report.is_null()) {
        outcome_.op_reports[key] = std::move(report);
    }
}

void Runner::write_abort_record() {
    if (options_.checkpoint_root.empty()) {
        return;
    }
    fs::path dir = options_.checkpoint_root / options_.recipe_digest;
    fs::create_directories(dir);
    std::ofstream out(dir / "abort.json", std::ios::binary | std::ios::trunc);
    out << Json{{"reason", outcome_.abort_reason},
                {"counters", outcome_.counters.to_json()},
                {"last_completed_op_index", last_completed_}}
                   .dump(2)
        << '\n';
}

RunOutcome Runner::run(const Dataset& dataset, const std::optional<ResumePoint>& from) {
    auto run_start = Clock::now();
    std::vector<const PlanStep*> steps = plan_.steps();
    // An empty recipe still passes records through the fault handling.
    PlanStep identity;
    if (steps.empty()) {
        identity.recipe_indices = {0};
        identity.descriptor = registry_.describe("identity_mapper", Json::object());
        steps.push_back(&identity);
    }

    const bool checkpointing = !options_.checkpoint_root.empty();
    fs::path work_dir = options_.work_dir;
    bool own_work_dir = false;
    std::size_t first = 0;
    const Dataset* input = &dataset;
    if (from) {
        outcome_.counters = RunCounters::from_json(from->counters);
        first = static_cast<std::size_t>(from->next_op_index);
        last_completed_ = from->next_op_index - 1;
        input = &from->snapshot;
        progress_.op_time = outcome_.counters.wall_time;
    }
    const bool streaming = input->mode() == DatasetMode::kStreaming;
    if (streaming && !checkpointing && work_dir.empty()) {
        static std::atomic<unsigned> seq{0};
        work_dir = fs::temp_directory_path() /
                   fmt::format("dj-work-{}-{}", ::getpid(), seq.fetch_add(1));
        own_work_dir = true;
    }
    prototype_ = input->schema_prototype();
    if (!options_.drop_log.empty()) {
        if (options_.drop_log.has_parent_path()) {
            fs::create_directories(options_.drop_log.parent_path());
        }
        drop_log_.open(options_.drop_log, std::ios::binary | (from ? std::ios::app : std::ios::trunc));
    }
    if (checkpointing) {
        fs::path dir = options_.checkpoint_root / options_.recipe_digest;
        fs::create_directories(dir);
        std::ofstream out(dir / kCheckpointPlanName, std::ios::binary | std::ios::trunc);
        out << plan_.to_json().dump(2) << '\n';
    }

    Monitor monitor(options_.monitor_log, options_.monitor_interval_ms, progress_);

    std::vector<Sample> records;
    std::vector<fs::path> files;
    if (streaming) {
        files = input->sources();
    } else {
        records = input->records();
    }

    fs::path previous_temp;
    bool completed = true;
    for (std::size_t k = first; k < steps.size(); ++k) {
        const PlanStep& step = *steps[k];
        const std::string label = step_label(step);
        const std::string key = fmt::format("{}:{}", k, step.descriptor.name);
        {
            std::lock_guard lock(progress_.mu);
            progress_.step = k;
            progress_.op = label;
            progress_.key = key;
            progress_.step_start = Clock::now();
            progress_.samples_done = 0;
        }
        auto t0 = Clock::now();
        std::optional<fs::path> out_file;
        if (checkpointing) {
            fs::path dir = checkpoint_dir(options_.checkpoint_root, options_.recipe_digest,
                                          static_cast<int>(k));
            fs::remove_all(dir);
            if (streaming) {
                out_file = dir / "part-00000.jsonl";
            }
        } else if (streaming) {
            out_file = work_dir / fmt::format("step-{:05d}.jsonl", k);
        }
        Sink sink(out_file);
        std::unique_ptr<Operator> op = registry_.create(step.descriptor);
        StepStats stats;
        std::size_t input_count = 0;
        if (op->is_batch_op()) {
            std::unique_ptr<Source> source;
            if (streaming) {
                source = std::make_unique<FileSource>(files);
            } else {
                source = std::make_unique<MemorySource>(std::move(records));
            }
            run_batch_step(k, step, static_cast<const BatchOperator&>(*op), *source, sink, stats);
            input_count = source->consumed();
        } else {
            // Global ops may read their input twice, so keep it addressable.
            std::vector<Sample> held = std::move(records);
            std::size_t last_consumed = 0;
            auto open_source = [&]() -> std::unique_ptr<Source> {
                std::unique_ptr<Source> s;
                if (streaming) {
                    s = std::make_unique<FileSource>(files);
                } else {
                    s = std::make_unique<MemorySource>(held);
                }
                last_consumed = 0;
                return s;
            };
            struct Counting final : Source {
                std::unique_ptr<Source> inner;
                std::size_t* total;
                std::optional<Batch> next(std::size_t bs) override {
                    auto b = inner->next(bs);
                    if (b) {
                        *total += b->size();
                    }
                    return b;
                }
            };
            auto counted = [&]() -> std::unique_ptr<Source> {
                auto c = std::make_unique<Counting>();
                c->inner = open_source();
                c->total = &last_consumed;
                return c;
            };
            run_global_step(k, step, static_cast<const GlobalOperator&>(*op), counted, sink, stats);
            input_count = last_consumed;
        }
        sink.close();
        if (fatal_) {
            monitor.stop();
            if (own_work_dir) {
                fs::remove_all(work_dir);
            }
            std::rethrow_exception(fatal_);
        }
        RunCounters& c = outcome_.counters;
        c.wall_time[key] += seconds_since(t0);
        {
            std::lock_guard lock(progress_.mu);
            progress_.op_time[key] = c.wall_time[key];
            progress_.op.clear();
        }
        if (abort_) {
            completed = false;
            break;
        }
        if (k == 0 && !from) {
            c.processed = input_count;
        }
        long long diff = static_cast<long long>(sink.count()) -
                         static_cast<long long>(input_count - stats.lost - stats.drops);
        if (diff > 0) {
            c.expanded += static_cast<std::size_t>(diff);
        } else if (diff < 0) {
            (step.descriptor.op_type == OpType::kDeduplicator ? c.dedup_removed : c.merged) +=
                    static_cast<std::size_t>(-diff);
        }
        c.kept = sink.count();

        if (streaming) {
            if (!previous_temp.empty()) {
                fs::remove(previous_temp);
            }
            files = {sink.path()};
            previous_temp = checkpointing ? fs::path() : sink.path();
        } else {
            records = sink.take();
        }
        if (checkpointing) {
            fs::path dir = checkpoint_dir(options_.checkpoint_root, options_.recipe_digest,
                                          static_cast<int>(k));
            if (!streaming) {
                JsonlWriter w(dir / "part-00000.jsonl");
                for (const auto& s : records) {
                    w.write(s);
                }
                w.close();
            }
            write_checkpoint(options_.checkpoint_root, options_.recipe_digest, static_cast<int>(k),
                             c.to_json());
        }
        last_completed_ = static_cast<int>(k);
        if (options_.stop_after && k == *options_.stop_after && k + 1 < steps.size()) {
            outcome_.stopped = true;
            completed = false;
            break;
        }
    }

    if (abort_) {
        outcome_.aborted = true;
        write_abort_record();
        monitor.write_final(outcome_.counters);
        if (own_work_dir) {
            fs::remove_all(work_dir);
        }
        outcome_.wall_time = seconds_since(run_start);
        return std::move(outcome_);
    }

    Dataset result = streaming ? Dataset::from_files(files, DatasetMode::kStreaming)
                               : Dataset::from_samples(std::move(records));
    if (completed && !options_.export_path.empty()) {
        outcome_.exported =
                export_dataset(result, options_.export_path, options_.drop_placeholders);
        if (streaming && own_work_dir) {
            result = Dataset::from_files({options_.export_path}, DatasetMode::kStreaming);
        }
    } else if (streaming && own_work_dir) {
        result = result.materialize();
    }
    if (own_work_dir) {
        fs::remove_all(work_dir);
    }
    outcome_.dataset = std::move(result);
    outcome_.wall_time = seconds_since(run_start);
    monitor.write_final(outcome_.counters);
    return std::move(outcome_);
}

} // namespace

RunOutcome run_pipeline(const ExecutionPlan& plan, const Dataset& dataset,
                        const ExecOptions& options, const std::optional<ResumePoint>& from,
                        const OpRegistry& registry) {
    Runner runner(plan, options, registry);
    return runner.run(dataset, from);
}

} // namespace dj
