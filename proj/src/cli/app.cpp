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

#include <ostream>

#include <CLI11.hpp>

#include "dj/cli/commands.hpp"

namespace dj::cli {

namespace {

std::size_t non_negative_count(long long v) { return v < 0 ? 0 : static_cast<std::size_t>(v); }

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Composable data processing for large model corpora", "dj"};
    app.require_subcommand(1);

    ProcessArgs process;
    std::string resume;
    std::string plan_file;
    long long stop_after = -1;
    auto* p = app.add_subcommand("process", "Run a recipe: validate, probe, plan, execute, export");
    p->add_option("-c,--config", process.config, "Recipe YAML")->required();
    p->add_option("--set", process.overrides, "Override a recipe value: dotted.key=value");
    p->add_flag("--no-optimize", process.no_optimize, "Keep recipe order, no fusion");
    p->add_flag("--speed-only", process.speed_only, "Order commutative filters by speed alone");
    p->add_option("--resume", resume, "Checkpoint root, digest or snapshot directory");
    p->add_option("--plan", plan_file, "Execute this plan JSON instead of planning");
    p->add_option("--stop-after", stop_after, "Stop once this plan position completes")->group("");

    AnalyzeArgs analyze;
    std::string a_dataset, a_config, a_out;
    double a_threshold = -1;
    auto* a = app.add_subcommand("analyze", "Per-op statistics and distribution shift report");
    a->add_option("-d,--dataset", a_dataset, "JSONL file or directory");
    a->add_option("-c,--config", a_config, "Recipe whose ops are analyzed in turn");
    a->add_option("--set", analyze.overrides, "Override a recipe value");
    a->add_option("-o,--out", a_out, "Report directory (default <dataset>.analysis)");
    a->add_option("--threshold", a_threshold, "Shift score above which a comparison is flagged");

    ProbeArgs probe;
    std::string pr_dataset, pr_out;
    auto* pr = app.add_subcommand("probe", "Time every op on a small random sample");
    pr->add_option("-c,--config", probe.config, "Recipe YAML")->required();
    pr->add_option("--set", probe.overrides, "Override a recipe value");
    pr->add_option("-d,--dataset", pr_dataset, "Dataset instead of the recipe's");
    pr->add_option("-o,--output", pr_out, "Write the probe report here instead of stdout");

    PlanArgs plan;
    std::string pl_dataset, pl_probe, pl_out;
    auto* pl = app.add_subcommand("plan", "Emit the execution plan as JSON");
    pl->add_option("-c,--config", plan.config, "Recipe YAML")->required();
    pl->add_option("--set", plan.overrides, "Override a recipe value");
    pl->add_option("-d,--dataset", pl_dataset, "Dataset instead of the recipe's");
    pl->add_option("--probe", pl_probe, "Probe report JSON to plan from");
    pl->add_option("-o,--output", pl_out, "Write the plan here instead of stdout");
    pl->add_flag("--no-optimize", plan.no_optimize, "Keep recipe order, no fusion");
    pl->add_flag("--speed-only", plan.speed_only, "Order commutative filters by speed alone");

    SplitArgs split;
    std::string target;
    long long parts = -1;
    auto* s = app.add_subcommand("split", "Cut a JSONL file into size-bounded parts");
    s->add_option("-d,--dataset", split.dataset, "Source JSONL file")->required();
    s->add_option("-t,--target", target, "Target part size, e.g. 128MiB")->required();
    s->add_option("-n,--parts", parts, "Minimum number of parts");
    s->add_option("-o,--out", split.out_dir, "Output directory")->required();

    DedupArgs dedup;
    std::string d_out, d_report, d_exact;
    auto* d = app.add_subcommand("dedup", "Near-duplicate or exact duplicate removal");
    d->add_option("-d,--dataset", dedup.dataset, "JSONL file or directory of parts")->required();
    d->add_option("-o,--output", d_out, "Export survivors here");
    d->add_option("--report", d_report, "Write the cluster report here");
    d->add_option("--threshold", dedup.threshold, "Jaccard threshold");
    d->add_option("--num-permutations", dedup.num_permutations, "MinHash signature length");
    d->add_option("--shingle-size", dedup.shingle_size, "Words per shingle");
    d->add_option("--seed", dedup.seed, "Hash seed");
    d->add_option("--keep", dedup.keep, "Survivor per cluster: first or longest");
    d->add_flag("--fast", dedup.fast, "Skip the exact Jaccard check of candidates");
    d->add_option("--shards", dedup.shards, "Bucket shards; each part file is signed separately");
    d->add_option("--threads", dedup.threads, "Signature threads");
    d->add_option("--exact", d_exact, "Exact dedup by key: text_hash or media_file_hash");

    bool list_json = false;
    auto* l = app.add_subcommand("list-ops", "List registered operators");
    l->add_flag("--json", list_json, "Machine-readable output");

    ValidateArgs validate;
    auto* v = app.add_subcommand("validate", "Check a recipe and optionally its dataset");
    v->add_option("-c,--config", validate.config, "Recipe YAML")->required();
    v->add_option("--set", validate.overrides, "Override a recipe value");
    v->add_flag("--dataset", validate.check_dataset, "Also validate the dataset records");
    v->add_option("--goal", validate.goal, "pretrain, post_tuning or image_text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error[Usage]: " << e.what() << '\n';
        return kExitValidation;
    }

    if (p->parsed()) {
        if (!resume.empty()) process.resume = resume;
        if (!plan_file.empty()) process.plan = plan_file;
        if (stop_after >= 0) process.stop_after = non_negative_count(stop_after);
        return cmd_process(process, out, err);
    }
    if (a->parsed()) {
        if (!a_dataset.empty()) analyze.dataset = a_dataset;
        if (!a_config.empty()) analyze.config = a_config;
        if (!a_out.empty()) analyze.out_dir = a_out;
        if (a_threshold >= 0) analyze.threshold = a_threshold;
        return cmd_analyze(analyze, out, err);
    }
    if (pr->parsed()) {
        if (!pr_dataset.empty()) probe.dataset = pr_dataset;
        if (!pr_out.empty()) probe.output = pr_out;
        return cmd_probe(probe, out, err);
    }
    if (pl->parsed()) {
        if (!pl_dataset.empty()) plan.dataset = pl_dataset;
        if (!pl_probe.empty()) plan.probe = pl_probe;
        if (!pl_out.empty()) plan.output = pl_out;
        return cmd_plan(plan, out, err);
    }
    if (s->parsed()) {
        try {
            split.target_bytes = parse_byte_size(target);
        } catch (const Error& e) {
            print_error(err, e.code(), e.what());
            return exit_code_for(e.code());
        }
        if (parts >= 0) split.parts = non_negative_count(parts);
        return cmd_split(split, out, err);
    }
    if (d->parsed()) {
        if (!d_out.empty()) dedup.output = d_out;
        if (!d_report.empty()) dedup.report = d_report;
        if (!d_exact.empty()) dedup.exact = d_exact;
        return cmd_dedup(dedup, out, err);
    }
    if (l->parsed()) {
        return cmd_list_ops(list_json, out, err);
    }
    return cmd_validate(validate, out, err);
}

} // namespace dj::cli
