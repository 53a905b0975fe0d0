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

#include "dj/ops/compose.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/ops/fused.hpp"
#include "dj/ops/registry.hpp"
#include "dj/ops/run.hpp"

namespace dj {

bool is_batched_sample(const Sample& s) {
    auto it = s.extra.find(kBatchField);
    return it != s.extra.end() && it->is_array();
}

std::vector<Sample> batch_members(const Sample& s) {
    std::vector<Sample> out;
    if (!is_batched_sample(s)) {
        out.push_back(s);
        return out;
    }
    for (const auto& m : s.extra.at(std::string(kBatchField))) {
        out.push_back(sample_from_json(m));
    }
    return out;
}

Sample make_batched_sample(const std::vector<Sample>& members) {
    Sample s;
    Json arr = Json::array();
    for (const auto& m : members) {
        arr.push_back(sample_to_json(m));
    }
    s.extra[std::string(kBatchField)] = std::move(arr);
    return s;
}

std::string meta_key_of(std::string_view key) {
    if (key.starts_with("meta.")) {
        key.remove_prefix(5);
    }
    return std::string(key);
}

namespace {

class IdentityMapper final : public Mapper {
public:
    using Mapper::Mapper;

protected:
    void map(Sample&, OpContext&) const override {}
};

class Grouper final : public GlobalOperator {
public:
    Grouper(OpDescriptor desc, GrouperKind kind)
            : GlobalOperator(std::move(desc)), kind_(kind) {
        if (kind_ == GrouperKind::kKeyValue) {
            key_ = meta_key_of(Params(descriptor().params).get_string("key"));
        }
    }

    struct GroupState : State {
        std::vector<Json> keys;
        std::vector<std::vector<Sample>> groups;
        std::unordered_map<std::string, std::size_t> index;
    };

    std::unique_ptr<State> begin(OpContext&) const override { return std::make_unique<GroupState>(); }
    bool needs_observe() const override { return false; }

    BatchOutput finish(State& state, OpContext&) const override {
        auto& st = static_cast<GroupState&>(state);
        BatchOutput out;
        for (std::size_t g = 0; g < st.groups.size(); ++g) {
            Sample s = make_batched_sample(st.groups[g]);
            if (kind_ == GrouperKind::kKeyValue) {
                s.meta[std::string(kGroupKeyMeta)] = st.keys[g];
            }
            s.meta["batch_size"] = st.groups[g].size();
            out.samples.push_back(std::move(s));
            out.origin_ordinals.push_back(g);
        }
        return out;
    }

protected:
    BatchOutput apply(State& state, Batch batch, OpContext&) const override {
        auto& st = static_cast<GroupState&>(state);
        BatchOutput out;
        // Check the whole batch first so a missing key leaves state untouched.
        if (kind_ == GrouperKind::kKeyValue) {
            for (std::size_t i = 0; i < batch.samples.size(); ++i) {
                const Sample& s = batch.samples[i];
                if (!s.is_placeholder() && !s.meta.contains(key_)) {
                    throw Error(ErrorCode::kMissingGroupKey,
                                fmt::format("record {} has no meta key '{}'",
                                            batch.origin_ordinals[i], key_));
                }
            }
        }
        for (std::size_t i = 0; i < batch.samples.size(); ++i) {
            Sample& s = batch.samples[i];
            if (s.is_placeholder()) {
                out.samples.push_back(std::move(s));
                out.origin_ordinals.push_back(batch.origin_ordinals[i]);
                continue;
            }
            Json key = kind_ == GrouperKind::kKeyValue ? s.meta.at(key_) : Json(nullptr);
            std::string k = key.dump();
            auto [it, inserted] = st.index.emplace(k, st.groups.size());
            if (inserted) {
                st.groups.emplace_back();
                st.keys.push_back(key);
            }
            st.groups[it->second].push_back(std::move(s));
        }
        return out;
    }

private:
    GrouperKind kind_;
    std::string key_;
};

class CountAggregator final : public Mapper {
public:
    using Mapper::Mapper;

protected:
    void map(Sample& s, OpContext&) const override {
        std::size_t n = is_batched_sample(s) ? s.extra.at(std::string(kBatchField)).size() : 1;
        Sample out;
        if (auto it = s.meta.find(kGroupKeyMeta); it != s.meta.end()) {
            out.meta[std::string(kGroupKeyMeta)] = *it;
        }
        out.meta["count"] = n;
        s = std::move(out);
    }
};

class ConcatAggregator final : public Mapper {
public:
    ConcatAggregator(OpDescriptor desc)
            : Mapper(std::move(desc)), sep_(Params(descriptor().params).get_string("separator")) {}

protected:
    void map(Sample& s, OpContext&) const override {
        std::vector<Sample> members = batch_members(s);
        Sample out;
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (i > 0) {
                out.text += sep_;
            }
            out.text += members[i].text;
        }
        if (auto it = s.meta.find(kGroupKeyMeta); it != s.meta.end()) {
            out.meta[std::string(kGroupKeyMeta)] = *it;
        }
        out.meta["count"] = members.size();
        out.key_order = {"text", "meta"};
        s = std::move(out);
    }

private:
    std::string sep_;
};

/// Child process fed JSONL on stdin, read back from stdout. The whole
/// dataset goes through one process so scripts may keep state across lines.
class ScriptOp final : public GlobalOperator {
public:
    ScriptOp(OpDescriptor desc)
            : GlobalOperator(std::move(desc)),
              command_(Params(descriptor().params).get_string("command")) {}

    struct ScriptState : State {
        pid_t pid = -1;
        int in_fd = -1;
        std::thread out_reader;
        std::thread err_reader;
        std::mutex mu;
        std::string out_buf;
        std::string err_buf;
        std::size_t emitted = 0;
        bool write_failed = false;

        ~ScriptState() override {
            if (in_fd >= 0) {
                ::close(in_fd);
            }
            if (out_reader.joinable()) out_reader.join();
            if (err_reader.joinable()) err_reader.join();
            if (pid > 0) {
                int status = 0;
                ::waitpid(pid, &status, 0);
            }
        }
    };

    bool needs_observe() const override { return false; }

    std::unique_ptr<State> begin(OpContext&) const override {
        ::signal(SIGPIPE, SIG_IGN);
        int in_pipe[2];
        int out_pipe[2];
        int err_pipe[2];
        if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0) {
            throw Error(ErrorCode::kIo, "pipe() failed");
        }
        pid_t pid = ::fork();
        if (pid < 0) {
            throw Error(ErrorCode::kIo, "fork() failed");
        }
        if (pid == 0) {
            ::dup2(in_pipe[0], STDIN_FILENO);
            ::dup2(out_pipe[1], STDOUT_FILENO);
            ::dup2(err_pipe[1], STDERR_FILENO);
            for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
                ::close(fd);
            }
            ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(in_pipe[0]);
        ::close(out_pipe[1]);
        ::close(err_pipe[1]);
        auto st = std::make_unique<ScriptState>();
        st->pid = pid;
        st->in_fd = in_pipe[1];
        ScriptState* raw = st.get();
        int out_fd = out_pipe[0];
        int err_fd = err_pipe[0];
        st->out_reader = std::thread([raw, out_fd] { drain(out_fd, raw->out_buf, raw->mu); });
        st->err_reader = std::thread([raw, err_fd] { drain(err_fd, raw->err_buf, raw->mu); });
        return st;
    }

    BatchOutput finish(State& state, OpContext&) const override {
        auto& st = static_cast<ScriptState&>(state);
        ::close(st.in_fd);
        st.in_fd = -1;
        st.out_reader.join();
        st.err_reader.join();
        int status = 0;
        ::waitpid(st.pid, &status, 0);
        st.pid = -1;
        int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        if (code != 0) {
            std::string err = st.err_buf;
            while (!err.empty() && (err.back() == '\n' || err.back() == '\r')) {
                err.pop_back();
            }
            throw Error(ErrorCode::kScriptNonZeroExit,
                        fmt::format("script '{}' exited with {}: {}", command_, code, err));
        }
        BatchOutput out;
        take_lines(st, out, /*final=*/true);
        return out;
    }

protected:
    BatchOutput apply(State& state, Batch batch, OpContext&) const override {
        auto& st = static_cast<ScriptState&>(state);
        std::string payload;
        for (const auto& s : batch.samples) {
            payload += serialize_sample(s);
            payload.push_back('\n');
        }
        std::size_t off = 0;
        while (off < payload.size() && !st.write_failed) {
            ssize_t n = ::write(st.in_fd, payload.data() + off, payload.size() - off);
            if (n < 0) {
                if (errno == EINTR) {
                    continue;
                }
                // The script closed its stdin; its exit status decides in finish().
                st.write_failed = true;
                break;
            }
            off += static_cast<std::size_t>(n);
        }
        BatchOutput out;
        take_lines(st, out, false);
        return out;
    }

private:
    static void drain(int fd, std::string& buf, std::mutex& mu) {
        char tmp[1 << 14];
        for (;;) {
            ssize_t n = ::read(fd, tmp, sizeof tmp);
            if (n < 0 && errno == EINTR) {
                continue;
            }
            if (n <= 0) {
                break;
            }
            std::lock_guard lock(mu);
            buf.append(tmp, static_cast<std::size_t>(n));
        }
        ::close(fd);
    }

    void take_lines(ScriptState& st, BatchOutput& out, bool final) const {
        std::string chunk;
        {
            std::lock_guard lock(st.mu);
            std::size_t cut = final ? st.out_buf.size() : st.out_buf.rfind('\n');
            if (cut == std::string::npos) {
                return;
            }
            if (!final) {
                ++cut;
            }
            chunk = st.out_buf.substr(0, cut);
            st.out_buf.erase(0, cut);
        }
        std::size_t start = 0;
        while (start < chunk.size()) {
            std::size_t end = chunk.find('\n', start);
            if (end == std::string::npos) {
                end = chunk.size();
            }
            std::string_view line(chunk.data() + start, end - start);
            start = end + 1;
            if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
                continue;
            }
            try {
                out.samples.push_back(parse_sample(line));
            } catch (const Error& e) {
                throw Error(ErrorCode::kSchemaViolation,
                            fmt::format("script '{}' output line {}: {}", command_, st.emitted + 1,
                                        e.what()));
            }
            out.origin_ordinals.push_back(st.emitted++);
        }
    }

    std::string command_;
};

template <typename T>
OpFactory simple_factory() {
    return [](const OpDescriptor& d, const OpRegistry&) { return std::make_unique<T>(d); };
}

std::unique_ptr<Operator> make_fused_from_params(const OpDescriptor& d, const OpRegistry& reg) {
    std::vector<OpDescriptor> children = d.children;
    if (children.empty()) {
        const Json& ops = d.params.at("ops");
        if (!ops.is_array() || ops.empty()) {
            throw Error(ErrorCode::kParamValidation, "fused_op.ops: expected non-empty list");
        }
        for (const auto& entry : ops) {
            if (entry.is_string()) {
                children.push_back(reg.describe(entry.get<std::string>(), Json::object()));
            } else if (entry.is_object() && entry.size() == 1) {
                children.push_back(reg.describe(entry.begin().key(), entry.begin().value()));
            } else {
                throw Error(ErrorCode::kParamValidation,
                            "fused_op.ops: each entry must be an op name or {name: params}");
            }
        }
    }
    return fuse(std::move(children), d.batch_size, reg);
}

} // namespace

void register_framework_ops(OpRegistry& r) {
    r.add({.name = "identity_mapper",
           .type = OpType::kMapper,
           .doc = "Returns every sample unchanged.",
           .factory = simple_factory<IdentityMapper>()});
    r.add({.name = "naive_grouper",
           .type = OpType::kGrouper,
           .doc = "Groups all samples into one batched sample.",
           .supports_batch = false,
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<Grouper>(d, GrouperKind::kNaive);
           }});
    r.add({.name = "key_value_grouper",
           .type = OpType::kGrouper,
           .doc = "Groups samples into one batched sample per distinct meta value.",
           .params = {{.name = "key", .kind = ParamKind::kString, .required = true,
                       .doc = "meta key, optionally written as meta.<key>"}},
           .supports_batch = false,
           .factory = [](const OpDescriptor& d, const OpRegistry&) {
               return std::make_unique<Grouper>(d, GrouperKind::kKeyValue);
           }});
    r.add({.name = "count_aggregator",
           .type = OpType::kAggregator,
           .doc = "Reduces each batched sample to one sample carrying meta.count.",
           .factory = simple_factory<CountAggregator>()});
    r.add({.name = "concat_aggregator",
           .type = OpType::kAggregator,
           .doc = "Reduces each batched sample to one sample with member texts joined.",
           .params = {{.name = "separator", .kind = ParamKind::kString, .default_value = "\n"}},
           .factory = simple_factory<ConcatAggregator>()});
    r.add({.name = "script_op",
           .type = OpType::kScriptOp,
           .doc = "Pipes the dataset as JSONL through a shell command.",
           .params = {{.name = "command", .kind = ParamKind::kString, .required = true}},
           .supports_batch = false,
           .factory = simple_factory<ScriptOp>()});
    r.add({.name = "fused_op",
           .type = OpType::kFusedOp,
           .doc = "Runs the listed ops batch by batch.",
           .params = {{.name = "ops", .kind = ParamKind::kAny, .required = true}},
           .factory = make_fused_from_params});
}

Dataset group(const Dataset& dataset, GrouperKind kind, std::string_view key) {
    if (kind == GrouperKind::kNaive) {
        return run(*default_registry().create("naive_grouper", Json::object()), dataset).dataset;
    }
    return run(*default_registry().create("key_value_grouper", Json{{"key", std::string(key)}}),
               dataset)
            .dataset;
}

Dataset aggregate(const Dataset& batched, std::string_view aggregator, const Json& params) {
    return run(*default_registry().create(aggregator, params.is_null() ? Json::object() : params),
               batched)
            .dataset;
}

Dataset run_script(const Dataset& dataset, std::string_view command) {
    return run(*default_registry().create("script_op", Json{{"command", std::string(command)}}),
               dataset)
            .dataset;
}

} // namespace dj
