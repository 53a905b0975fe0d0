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

#include "dj/cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "dj/analyzer/analyzer.hpp"
#include "dj/common/text.hpp"
#include "dj/dedup/dedup.hpp"
#include "dj/exec/executor.hpp"
#include "dj/io/checkpoint.hpp"
#include "dj/io/split.hpp"
#include "dj/planner/planner.hpp"
#include "dj/recipe/recipe.hpp"

namespace dj::cli {

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::kUnknownOp:
    case ErrorCode::kParamValidation:
    case ErrorCode::kRecipeParse:
    case ErrorCode::kSourceNotFound:
    case ErrorCode::kEmptySource:
    case ErrorCode::kPlanInvalid:
    case ErrorCode::kStatKeyConflict:
    case ErrorCode::kNonBatchableChild:
        return kExitValidation;
    case ErrorCode::kAborted:
        return kExitAborted;
    case ErrorCode::kRecipeMismatch:
        return kExitResumeMismatch;
    default:
        return kExitFailure;
    }
}

void print_error(std::ostream& err, ErrorCode code, const std::string& message) {
    std::string flat = message;
    for (char& c : flat) {
        if (c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    err << "error[" << error_code_name(code) << "]: " << flat << '\n';
}

std::uint64_t parse_byte_size(const std::string& text) {
    if (auto b = text::parse_bytes(text)) {
        return *b;
    }
    throw Error(ErrorCode::kParamValidation, fmt::format("not a byte size: '{}'", text));
}

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        print_error(err, e.code(), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        print_error(err, ErrorCode::kInternal, e.what());
        return kExitFailure;
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw Error(ErrorCode::kTargetUnwritable, fmt::format("cannot write {}", path.string()));
    }
}

Json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kSourceNotFound, fmt::format("cannot read {}", path.string()));
    }
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::kRecipeParse, fmt::format("{}: {}", path.string(), e.what()));
    }
}

void emit(const std::optional<fs::path>& target, const Json& j, std::ostream& out) {
    if (target) {
        write_text(*target, j.dump(2) + "\n");
    } else {
        out << j.dump(2) << '\n';
    }
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) {
        err << "warning: " << w << '\n';
    }
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
    return fs::path(p.string() + suffix);
}

Resources resources_for(const Recipe& recipe) {
    Resources res = Resources::detect();
    if (!recipe.accelerator_slots.empty()) {
        res.accel_slots = recipe.accelerator_slots;
    }
    if (recipe.np > 0) {
        res.cpu_count = std::min(res.cpu_count, recipe.np);
    }
    return res;
}

ProbeOptions probe_options(const Recipe& recipe) {
    return ProbeOptions{.seed = recipe.seed, .max_sample_size = recipe.probe_sample_size};
}

ExecutionPlan make_plan(const Recipe& recipe, const std::vector<OpDescriptor>& ops,
                        const Dataset& data, bool no_optimize, bool speed_only,
                        const ProbeReport* given_probe, ProbeReport* probe_out) {
    ProbeReport probe = given_probe ? *given_probe : probe_small_batch(data, ops, probe_options(recipe));
    Resources res = resources_for(recipe);
    ExecutionPlan p = no_optimize || !recipe.optimize
                              ? identity_plan(ops, res, &probe)
                              : plan(ops, probe, res, PlanOptions{.speed_only = speed_only || recipe.speed_only});
    if (probe_out) {
        *probe_out = std::move(probe);
    }
    return p;
}

} // namespace

int cmd_process(const ProcessArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Recipe recipe = load_recipe(args.config, args.overrides);
        print_warnings(recipe.warnings, err);
        std::vector<OpDescriptor> ops = resolve_ops(recipe);
        if (recipe.export_path.empty()) {
            throw Error(ErrorCode::kRecipeParse, "export_path is required");
        }
        std::string digest = recipe_digest(recipe);

        ExecOptions opts;
        opts.policy = recipe.fault;
        opts.np = recipe.np;
        opts.recipe_digest = digest;
        opts.monitor_log = with_suffix(recipe.export_path, ".monitor.jsonl");
        opts.monitor_interval_ms = recipe.monitor_interval_ms;
        opts.drop_log = with_suffix(recipe.export_path, ".drops.jsonl");
        opts.export_path = recipe.export_path;
        opts.drop_placeholders = recipe.drop_placeholders;
        opts.seed = recipe.seed;
        opts.stop_after = args.stop_after;
        if (recipe.use_checkpoint) {
            opts.checkpoint_root = recipe.checkpoint_dir.empty()
                                           ? with_suffix(recipe.export_path, ".ckpt")
                                           : recipe.checkpoint_dir;
        }

        std::optional<ResumePoint> from;
        std::optional<ExecutionPlan> exec_plan;
        ProbeReport probe;
        Dataset data;
        if (args.resume) {
            Checkpoint cp = find_checkpoint(*args.resume, digest);
            fs::path digest_dir = cp.dataset_snapshot.parent_path();
            opts.checkpoint_root = digest_dir.parent_path();
            exec_plan = ExecutionPlan::from_json(read_json_file(digest_dir / kCheckpointPlanName), ops);
            from = resume(cp, digest, recipe.mode);
            out << fmt::format("resuming after step {} from {}\n", cp.completed_op_index,
                               cp.dataset_snapshot.string());
        } else {
            data = load(recipe.dataset_path, recipe.mode);
            if (args.plan) {
                exec_plan = ExecutionPlan::from_json(read_json_file(*args.plan), ops);
            } else {
                exec_plan = make_plan(recipe, ops, data, args.no_optimize, args.speed_only, nullptr, &probe);
            }
        }
        print_warnings(exec_plan->warnings, err);

        RunOutcome outcome = run_pipeline(*exec_plan, data, opts, from);

        Json report = outcome.report_json();
        report["plan"] = exec_plan->to_json();
        if (!probe.ops.empty()) {
            report["probe"] = probe.to_json();
        }
        write_text(with_suffix(recipe.export_path, ".report.json"), report.dump(2) + "\n");

        const RunCounters& c = outcome.counters;
        if (outcome.aborted) {
            print_error(err, ErrorCode::kAborted, outcome.abort_reason);
            return kExitAborted;
        }
        if (outcome.stopped) {
            out << fmt::format("stopped after step {}\n", *args.stop_after);
            return kExitOk;
        }
        out << fmt::format("processed {} kept {} dropped {} dedup_removed {} skipped_batches {} "
                           "placeholders {} time {:.3f}s\n",
                           c.processed, c.kept, c.total_dropped(), c.dedup_removed, c.skipped_batches,
                           c.placeholder_samples, outcome.wall_time);
        if (outcome.exported) {
            out << fmt::format("exported {} samples to {}\n", outcome.exported->sample_count,
                               recipe.export_path.string());
        }
        return kExitOk;
    });
}

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::optional<Recipe> recipe;
        std::vector<OpDescriptor> ops;
        if (args.config) {
            recipe = load_recipe(*args.config, args.overrides);
            print_warnings(recipe->warnings, err);
            ops = resolve_ops(*recipe);
        }
        fs::path dataset_path;
        if (args.dataset) {
            dataset_path = *args.dataset;
        } else if (recipe && !recipe->dataset_path.empty()) {
            dataset_path = recipe->dataset_path;
        } else {
            throw Error(ErrorCode::kSourceNotFound, "no dataset given");
        }
        double threshold = args.threshold.value_or(recipe ? recipe->shift_threshold : kDefaultShiftThreshold);
        Dataset data = load(dataset_path, DatasetMode::kMaterialized);
        InsightReport report = analyze(data, ops, threshold);
        fs::path dir = args.out_dir.value_or(with_suffix(dataset_path, ".analysis"));
        render_report(report, dir);
        std::size_t flagged = 0;
        for (const auto& r : report.rows) {
            if (r.flagged) {
                ++flagged;
                out << fmt::format("flagged: {} after op {} score {:.4f}\n", r.stat, r.after_op, r.score);
            }
        }
        out << fmt::format("{} snapshots, {} comparisons, {} flagged; report in {}\n",
                           report.snapshots.size(), report.rows.size(), flagged, dir.string());
        return kExitOk;
    });
}

int cmd_probe(const ProbeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Recipe recipe = load_recipe(args.config, args.overrides);
        print_warnings(recipe.warnings, err);
        std::vector<OpDescriptor> ops = resolve_ops(recipe);
        Dataset data = load(args.dataset.value_or(recipe.dataset_path), recipe.mode);
        ProbeReport probe = probe_small_batch(data, ops, probe_options(recipe));
        emit(args.output, probe.to_json(), out);
        return kExitOk;
    });
}

int cmd_plan(const PlanArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Recipe recipe = load_recipe(args.config, args.overrides);
        print_warnings(recipe.warnings, err);
        std::vector<OpDescriptor> ops = resolve_ops(recipe);
        std::optional<ProbeReport> given;
        Dataset data;
        if (args.probe) {
            given = ProbeReport::from_json(read_json_file(*args.probe));
        } else {
            data = load(args.dataset.value_or(recipe.dataset_path), recipe.mode);
        }
        ExecutionPlan p = make_plan(recipe, ops, data, args.no_optimize, args.speed_only,
                                    given ? &*given : nullptr, nullptr);
        validate_plan(p, ops);
        print_warnings(p.warnings, err);
        emit(args.output, p.to_json(), out);
        return kExitOk;
    });
}

int cmd_split(const SplitArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.target_bytes == 0) {
            throw Error(ErrorCode::kParamValidation, "target size must be positive");
        }
        SplitManifest m = split_subsets(args.dataset, args.target_bytes, args.parts, args.out_dir);
        print_warnings(m.warnings, err);
        out << fmt::format("{} parts, {} bytes, manifest {}\n", m.parts.size(), m.total_bytes,
                           (args.out_dir / kSplitManifestName).string());
        return kExitOk;
    });
}

int cmd_dedup(const DedupArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        DedupResult result;
        if (args.exact) {
            result = exact_dedup(load(args.dataset), parse_exact_key(*args.exact));
        } else {
            DedupConfig cfg = DedupConfig::make(args.threshold, args.num_permutations, args.shingle_size,
                                                args.seed);
            DedupOptions opts{.keep = parse_keep_policy(args.keep), .verify = !args.fast,
                              .threads = std::max<std::size_t>(1, args.threads)};
            if (args.shards > 0) {
                std::vector<Dataset> parts;
                for (const auto& f : resolve_sources(args.dataset)) {
                    parts.push_back(Dataset::from_files({f}, DatasetMode::kMaterialized).materialize());
                }
                result = sharded_dedup(parts, cfg, args.shards, opts);
            } else {
                result = dedup_pass(load(args.dataset), cfg, opts);
            }
        }
        if (args.output) {
            export_dataset(result.dataset, *args.output, false);
        }
        if (args.report) {
            write_text(*args.report, result.report.to_json(true).dump(2) + "\n");
        }
        out << fmt::format("{} clusters, {} removed, {} kept\n", result.report.clusters.size(),
                           result.report.removed, result.dataset.size());
        return kExitOk;
    });
}

int cmd_list_ops(bool as_json, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Json all = Json::array();
        for (const OpInfo* info : default_registry().list()) {
            Json params = Json::array();
            std::vector<std::string> shown;
            for (const auto& p : info->params) {
                params.push_back(Json{{"name", p.name},
                                      {"kind", param_kind_name(p.kind)},
                                      {"default", p.default_value},
                                      {"required", p.required}});
                std::string s = fmt::format("{}:{}", p.name, param_kind_name(p.kind));
                if (!p.default_value.is_null()) {
                    s += "=" + p.default_value.dump();
                } else if (p.required) {
                    s += "!";
                }
                shown.push_back(std::move(s));
            }
            if (as_json) {
                all.push_back(Json{{"name", info->name},
                                   {"type", op_type_name(info->type)},
                                   {"supports_batch", info->supports_batch},
                                   {"params", std::move(params)}});
            } else {
                std::string line = fmt::format("{:<34} {:<12} batch={:<3} {}", info->name,
                                               op_type_name(info->type),
                                               info->supports_batch ? "yes" : "no",
                                               fmt::join(shown, " "));
                while (!line.empty() && line.back() == ' ') {
                    line.pop_back();
                }
                out << line << '\n';
            }
        }
        if (as_json) {
            out << all.dump(2) << '\n';
        }
        return kExitOk;
    });
}

int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Recipe recipe = load_recipe(args.config, args.overrides);
        print_warnings(recipe.warnings, err);
        std::vector<OpDescriptor> ops = resolve_ops(recipe);
        out << fmt::format("recipe ok: {} ops\n", ops.size());
        if (!args.check_dataset) {
            return kExitOk;
        }
        Dataset data = load(recipe.dataset_path, DatasetMode::kMaterialized);
        ValidationReport report = validate_dataset(data, parse_goal(args.goal));
        if (report.ok) {
            out << fmt::format("dataset ok: {} samples\n", data.size());
            return kExitOk;
        }
        out << report.to_json().dump(2) << '\n';
        print_error(err, ErrorCode::kSchemaViolation,
                    fmt::format("{} validation errors in {}", report.errors.size(),
                                recipe.dataset_path.string()));
        return kExitValidation;
    });
}

} // namespace dj::cli
