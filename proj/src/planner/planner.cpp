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

#include <sys/sysinfo.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "dj/common/error.hpp"
#include "dj/ops/fused.hpp"
#include "dj/ops/run.hpp"
#include "dj/planner/planner.hpp"

namespace dj {

std::vector<OpGroup> detect_fusible_groups(const std::vector<OpDescriptor>& ops) {
    std::vector<OpGroup> groups;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        bool commutes = ops[i].commutative_filter && ops[i].supports_batch;
        if (commutes && !groups.empty() && groups.back().reorderable) {
            // Same-named filters write the same stat; with different params the
            // last writer wins, so they keep their relative order.
            const auto& members = groups.back().members;
            bool clash = std::any_of(members.begin(), members.end(), [&](std::size_t m) {
                return ops[m].name == ops[i].name && ops[m].params != ops[i].params;
            });
            if (!clash) {
                groups.back().members.push_back(i);
                continue;
            }
        }
        groups.push_back({{i}, commutes});
    }
    return groups;
}

std::vector<std::vector<std::size_t>> fusion_units(const OpGroup& group,
                                                    const std::vector<OpDescriptor>& ops) {
    std::vector<std::vector<std::size_t>> units;
    std::map<std::string, std::size_t> by_tag;
    for (std::size_t idx : group.members) {
        const std::string& tag = ops[idx].shared_resource;
        if (!group.reorderable || tag.empty()) {
            units.push_back({idx});
            continue;
        }
        auto [it, inserted] = by_tag.emplace(tag, units.size());
        if (inserted) {
            units.emplace_back();
        }
        units[it->second].push_back(idx);
    }
    return units;
}

double estimate_fused_speed(const std::vector<double>& speeds) {
    if (speeds.empty()) {
        throw Error(ErrorCode::kNonPositiveSpeed, "no speeds to fuse");
    }
    double inv = 0.0;
    for (double v : speeds) {
        if (!(v > 0.0)) {
            throw Error(ErrorCode::kNonPositiveSpeed, fmt::format("speed {} is not positive", v));
        }
        inv += 1.0 / v;
    }
    return 1.0 / inv;
}

std::vector<std::size_t> reorder_group(const std::vector<double>& speeds) {
    std::vector<std::size_t> order(speeds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return speeds[a] > speeds[b]; });
    return order;
}

double estimate_cost(const std::vector<double>& speeds, const std::vector<double>& selectivities,
                     const std::vector<std::size_t>& order, double n) {
    double total = 0.0;
    for (std::size_t u : order) {
        total += n / speeds[u];
        n *= selectivities[u];
    }
    return total;
}

Resources Resources::detect() {
    Resources r;
    r.cpu_count = std::max(1u, std::thread::hardware_concurrency());
    std::ifstream meminfo("/proc/meminfo");
    std::string key;
    std::uint64_t value = 0;
    std::string unit;
    while (meminfo >> key >> value >> unit) {
        if (key == "MemAvailable:") {
            r.mem_bytes = value * 1024;
            break;
        }
    }
    if (r.mem_bytes == 0) {
        r.mem_bytes = static_cast<std::uint64_t>(sysconf(_SC_PHYS_PAGES)) *
                      static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
    }
    return r;
}

Json Resources::to_json() const {
    return Json{{"cpu_count", cpu_count}, {"mem_bytes", mem_bytes}, {"accel_slots", accel_slots}};
}

namespace {

/// floor(budget * 0.9 / need) in exact integer arithmetic.
std::uint64_t fit_count(std::uint64_t budget, std::uint64_t need) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(budget) * 9) /
                                      (static_cast<unsigned __int128>(need) * 10));
}

} // namespace

std::size_t select_batch_size(const OpDescriptor& op, std::uint64_t per_sample_mem,
                              std::uint64_t available_mem) {
    std::size_t bs = op.batch_size.value_or(kDefaultBatchSize);
    if (per_sample_mem > 0 && available_mem > 0) {
        std::uint64_t cap = fit_count(available_mem, per_sample_mem);
        bs = static_cast<std::size_t>(std::min<std::uint64_t>(bs, cap));
    }
    return std::max<std::size_t>(1, bs);
}

std::size_t allocate_workers(const OpDescriptor& op, const Resources& resources,
                             std::uint64_t mem_required, std::string* warning) {
    std::uint64_t cpu = std::max<std::size_t>(1, resources.cpu_count);
    std::uint64_t by_mem = cpu;
    if (mem_required > 0) {
        if (op.accelerator && !resources.accel_slots.empty()) {
            by_mem = 0;
            for (std::uint64_t slot : resources.accel_slots) {
                by_mem += fit_count(slot, mem_required);
            }
        } else if (resources.mem_bytes > 0) {
            by_mem = fit_count(resources.mem_bytes, mem_required);
        }
    }
    std::uint64_t workers = std::min(cpu, by_mem);
    if (workers == 0) {
        if (warning != nullptr) {
            *warning = fmt::format("{} needs {} bytes per worker, more than the available budget; "
                                   "running one worker",
                                   op.name, mem_required);
        }
        workers = 1;
    }
    return static_cast<std::size_t>(workers);
}

std::vector<const PlanStep*> ExecutionPlan::steps() const {
    std::vector<const PlanStep*> out;
    for (const auto& g : groups) {
        for (const auto& s : g.steps) {
            out.push_back(&s);
        }
    }
    return out;
}

std::size_t ExecutionPlan::step_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) {
        n += g.steps.size();
    }
    return n;
}

Json ExecutionPlan::to_json() const {
    Json gs = Json::array();
    for (const auto& g : groups) {
        Json steps = Json::array();
        for (const auto& s : g.steps) {
            Json names = Json::array();
            for (const auto& c : s.descriptor.children) {
                names.push_back(c.name);
            }
            if (names.empty()) {
                names.push_back(s.descriptor.name);
            }
            steps.push_back(Json{{"ops", s.recipe_indices},
                                 {"names", std::move(names)},
                                 {"fused", s.fused()},
                                 {"batch_size", s.batch_size},
                                 {"worker_count", s.worker_count},
                                 {"est_speed", s.est_speed},
                                 {"est_selectivity", s.est_selectivity},
                                 {"est_time", s.est_time}});
        }
        gs.push_back(Json{{"reorderable", g.reorderable}, {"steps", std::move(steps)}});
    }
    return Json{{"optimized", optimized},
                {"speed_only", speed_only},
                {"probe_seed", probe_seed},
                {"estimated_total_time", estimated_total_time},
                {"original_estimated_time", original_estimated_time},
                {"warnings", warnings},
                {"groups", std::move(gs)}};
}

ExecutionPlan ExecutionPlan::from_json(const Json& j, const std::vector<OpDescriptor>& ops) {
    ExecutionPlan p;
    try {
        p.optimized = j.value("optimized", true);
        p.speed_only = j.value("speed_only", false);
        p.probe_seed = j.value("probe_seed", kDefaultProbeSeed);
        p.estimated_total_time = j.value("estimated_total_time", 0.0);
        p.original_estimated_time = j.value("original_estimated_time", 0.0);
        p.warnings = j.value("warnings", std::vector<std::string>{});
        for (const auto& gj : j.at("groups")) {
            PlanGroup g;
            g.reorderable = gj.value("reorderable", false);
            for (const auto& sj : gj.at("steps")) {
                PlanStep s;
                s.recipe_indices = sj.at("ops").get<std::vector<std::size_t>>();
                s.batch_size = sj.value("batch_size", kDefaultBatchSize);
                s.worker_count = sj.value("worker_count", std::size_t{1});
                s.est_speed = sj.value("est_speed", 0.0);
                s.est_selectivity = sj.value("est_selectivity", 1.0);
                s.est_time = sj.value("est_time", 0.0);
                if (s.recipe_indices.empty() || s.batch_size == 0 || s.worker_count == 0) {
                    throw Error(ErrorCode::kPlanInvalid, "plan step has no ops or zero sizing");
                }
                std::vector<OpDescriptor> children;
                for (std::size_t idx : s.recipe_indices) {
                    if (idx >= ops.size()) {
                        throw Error(ErrorCode::kPlanInvalid,
                                    fmt::format("plan refers to op {} of a {}-op recipe", idx,
                                                ops.size()));
                    }
                    children.push_back(ops[idx]);
                }
                if (sj.contains("names")) {
                    auto names = sj.at("names").get<std::vector<std::string>>();
                    for (std::size_t k = 0; k < names.size() && k < children.size(); ++k) {
                        if (names[k] != children[k].name) {
                            throw Error(ErrorCode::kPlanInvalid,
                                        fmt::format("plan op {} is '{}' but the recipe has '{}'",
                                                    s.recipe_indices[k], names[k],
                                                    children[k].name));
                        }
                    }
                }
                if (children.size() == 1) {
                    s.descriptor = children.front();
                } else {
                    s.descriptor = fused_descriptor(std::move(children), s.batch_size);
                }
                s.descriptor.batch_size = s.batch_size;
                g.steps.push_back(std::move(s));
            }
            p.groups.push_back(std::move(g));
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::kPlanInvalid, fmt::format("malformed plan: {}", e.what()));
    }
    validate_plan(p, ops);
    return p;
}

void validate_plan(const ExecutionPlan& plan, const std::vector<OpDescriptor>& ops) {
    std::vector<OpGroup> groups = detect_fusible_groups(ops);
    std::vector<std::size_t> block(ops.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t idx : groups[g].members) {
            block[idx] = g;
        }
    }
    std::vector<bool> seen(ops.size(), false);
    std::size_t last_block = 0;
    for (const PlanStep* s : plan.steps()) {
        for (std::size_t idx : s->recipe_indices) {
            if (idx >= ops.size() || seen[idx]) {
                throw Error(ErrorCode::kPlanInvalid,
                            fmt::format("op {} appears more than once or is out of range", idx));
            }
            seen[idx] = true;
            if (block[idx] < last_block) {
                throw Error(ErrorCode::kPlanInvalid,
                            fmt::format("op {} ('{}') moved across an order barrier", idx,
                                        ops[idx].name));
            }
            last_block = block[idx];
            if (s->fused() && (!groups[block[idx]].reorderable || !ops[idx].supports_batch)) {
                throw Error(ErrorCode::kPlanInvalid,
                            fmt::format("op {} ('{}') cannot be fused", idx, ops[idx].name));
            }
        }
        if (s->fused() && block[s->recipe_indices.front()] != block[s->recipe_indices.back()]) {
            throw Error(ErrorCode::kPlanInvalid, "fused step spans an order barrier");
        }
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
        if (!seen[i]) {
            throw Error(ErrorCode::kPlanInvalid,
                        fmt::format("op {} ('{}') is missing from the plan", i, ops[i].name));
        }
    }
}

namespace {

struct OpEstimate {
    double speed = 1.0;
    double selectivity = 1.0;
    bool failed = false;
    std::uint64_t per_sample_mem = 0;
    std::uint64_t peak_mem = 0;
};

std::vector<OpEstimate> estimates_from(const std::vector<OpDescriptor>& ops,
                                       const ProbeReport* probe) {
    std::vector<OpEstimate> est(ops.size());
    double slowest = std::numeric_limits<double>::infinity();
    if (probe != nullptr) {
        for (const auto& p : probe->ops) {
            if (!p.failed && p.speed > 0.0) {
                slowest = std::min(slowest, p.speed);
            }
        }
    }
    if (!std::isfinite(slowest)) {
        slowest = 1.0;
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
        est[i].peak_mem = ops[i].mem_required;
        const OpProbe* p = probe != nullptr ? probe->find(i) : nullptr;
        if (p == nullptr) {
            continue;
        }
        est[i].per_sample_mem = p->per_sample_mem;
        est[i].peak_mem = std::max(p->peak_mem, ops[i].mem_required);
        if (p->failed || !(p->speed > 0.0)) {
            // A failed probe ranks as the slowest op and is assumed to keep everything.
            est[i].failed = true;
            est[i].speed = slowest;
        } else {
            est[i].speed = p->speed;
            est[i].selectivity = p->selectivity;
        }
    }
    return est;
}

/// Sequential cost per input sample of running `members` in order, and
/// the fraction that survives all of them.
std::pair<double, double> chain_cost(const std::vector<std::size_t>& members,
                                     const std::vector<OpEstimate>& est) {
    double cost = 0.0;
    double keep = 1.0;
    for (std::size_t idx : members) {
        cost += keep / est[idx].speed;
        keep *= est[idx].selectivity;
    }
    return {cost, keep};
}

/// Order minimizing sum(c_k * prod_{j<k} s_j): ascending c / (1 - s),
/// ties by position. Optimal for chains of independent ops.
std::vector<std::size_t> rank_order(const std::vector<double>& costs,
                                    const std::vector<double>& sels) {
    std::vector<std::size_t> order(costs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rank = [&](std::size_t u) {
        double drop = 1.0 - sels[u];
        return drop <= 0.0 ? std::numeric_limits<double>::infinity() : costs[u] / drop;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rank(a) < rank(b); });
    return order;
}

std::vector<std::size_t> exact_order(const std::vector<double>& speeds,
                                     const std::vector<double>& sels) {
    std::vector<std::size_t> order(speeds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> best = order;
    double best_cost = estimate_cost(speeds, sels, order, 1.0);
    while (std::next_permutation(order.begin(), order.end())) {
        double c = estimate_cost(speeds, sels, order, 1.0);
        if (c < best_cost * (1.0 - 1e-12)) {
            best_cost = c;
            best = order;
        }
    }
    return best;
}

/// Speeds that reproduce per-sample unit costs under estimate_cost.
std::vector<double> eff_speeds(const std::vector<double>& costs) {
    std::vector<double> out;
    for (double c : costs) {
        out.push_back(1.0 / c);
    }
    return out;
}

std::vector<std::size_t> speed_order(const std::vector<std::size_t>& members,
                                     const std::vector<OpEstimate>& est) {
    std::vector<double> speeds;
    for (std::size_t idx : members) {
        speeds.push_back(est[idx].speed);
    }
    std::vector<std::size_t> out;
    for (std::size_t k : reorder_group(speeds)) {
        out.push_back(members[k]);
    }
    return out;
}

std::vector<std::size_t> chain_order(const std::vector<std::size_t>& members,
                                     const std::vector<OpEstimate>& est) {
    std::vector<double> costs;
    std::vector<double> sels;
    for (std::size_t idx : members) {
        costs.push_back(1.0 / est[idx].speed);
        sels.push_back(est[idx].selectivity);
    }
    std::vector<std::size_t> out;
    for (std::size_t k : rank_order(costs, sels)) {
        out.push_back(members[k]);
    }
    return out;
}

PlanStep make_step(std::vector<std::size_t> members, const std::vector<OpDescriptor>& ops,
                   const std::vector<OpEstimate>& est, const Resources& resources,
                   std::vector<std::string>& warnings) {
    PlanStep s;
    s.recipe_indices = std::move(members);
    std::uint64_t per_sample = 0;
    std::uint64_t peak = 0;
    std::vector<double> speeds;
    std::optional<std::size_t> declared;
    for (std::size_t idx : s.recipe_indices) {
        per_sample = std::max(per_sample, est[idx].per_sample_mem);
        peak = std::max(peak, est[idx].peak_mem);
        speeds.push_back(est[idx].speed);
        if (ops[idx].batch_size) {
            declared = std::min(declared.value_or(*ops[idx].batch_size), *ops[idx].batch_size);
        }
    }
    if (s.recipe_indices.size() == 1) {
        s.descriptor = ops[s.recipe_indices.front()];
    } else {
        std::vector<OpDescriptor> children;
        for (std::size_t idx : s.recipe_indices) {
            children.push_back(ops[idx]);
        }
        s.descriptor = fused_descriptor(std::move(children), declared);
    }
    s.est_speed = estimate_fused_speed(speeds);
    s.est_selectivity = chain_cost(s.recipe_indices, est).second;
    s.batch_size = select_batch_size(s.descriptor, per_sample, resources.mem_bytes);
    s.descriptor.batch_size = s.batch_size;
    if (s.descriptor.supports_batch) {
        std::string warning;
        s.worker_count = allocate_workers(s.descriptor, resources, peak, &warning);
        if (!warning.empty()) {
            warnings.push_back(std::move(warning));
        }
    } else {
        s.worker_count = 1;
    }
    return s;
}

/// Fills est_time along the plan and returns the total.
double annotate_times(ExecutionPlan& plan, const std::vector<OpEstimate>& est, double n) {
    double total = 0.0;
    for (auto& g : plan.groups) {
        for (auto& s : g.steps) {
            auto [cost, keep] = chain_cost(s.recipe_indices, est);
            s.est_time = n * cost;
            total += s.est_time;
            n *= keep;
        }
    }
    return total;
}

double original_time(const std::vector<OpDescriptor>& ops, const std::vector<OpEstimate>& est,
                     double n) {
    std::vector<std::size_t> all(ops.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return n * chain_cost(all, est).first;
}

} // namespace

ExecutionPlan identity_plan(const std::vector<OpDescriptor>& ops, const Resources& resources,
                            const ProbeReport* probe) {
    std::vector<OpEstimate> est = estimates_from(ops, probe);
    ExecutionPlan p;
    p.optimized = false;
    if (probe != nullptr) {
        p.probe_seed = probe->seed;
    }
    for (std::size_t i = 0; i < ops.size(); ++i) {
        PlanGroup g;
        g.steps.push_back(make_step({i}, ops, est, resources, p.warnings));
        p.groups.push_back(std::move(g));
    }
    double n = probe != nullptr ? static_cast<double>(probe->dataset_size) : 0.0;
    p.estimated_total_time = annotate_times(p, est, n);
    p.original_estimated_time = original_time(ops, est, n);
    return p;
}

ExecutionPlan plan(const std::vector<OpDescriptor>& ops, const ProbeReport& probe,
                   const Resources& resources, const PlanOptions& options) {
    std::vector<OpEstimate> est = estimates_from(ops, &probe);
    ExecutionPlan p;
    p.probe_seed = probe.seed;
    p.speed_only = options.speed_only;
    std::vector<std::size_t> unreordered_flat;

    for (const OpGroup& group : detect_fusible_groups(ops)) {
        PlanGroup pg;
        pg.reorderable = group.reorderable;
        if (!group.reorderable) {
            pg.steps.push_back(make_step(group.members, ops, est, resources, p.warnings));
            p.groups.push_back(std::move(pg));
            unreordered_flat.insert(unreordered_flat.end(), group.members.begin(), group.members.end());
            continue;
        }
        // Failed probes neither fuse nor compete: they run last, in recipe order.
        OpGroup probed{{}, true};
        std::vector<std::size_t> failed;
        for (std::size_t idx : group.members) {
            (est[idx].failed ? failed : probed.members).push_back(idx);
        }
        std::vector<std::vector<std::size_t>> units;
        if (options.fuse) {
            units = fusion_units(probed, ops);
        } else {
            for (std::size_t idx : probed.members) {
                units.push_back({idx});
            }
        }
        for (auto& u : units) {
            u = options.speed_only ? speed_order(u, est) : chain_order(u, est);
        }

        std::vector<double> speeds;
        std::vector<double> costs;
        std::vector<double> sels;
        for (const auto& u : units) {
            std::vector<double> member_speeds;
            for (std::size_t idx : u) {
                member_speeds.push_back(est[idx].speed);
            }
            auto [cost, keep] = chain_cost(u, est);
            speeds.push_back(estimate_fused_speed(member_speeds));
            costs.push_back(cost);
            sels.push_back(keep);
        }
        std::vector<std::size_t> order(units.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (options.reorder && options.speed_only) {
            order = reorder_group(speeds);
        } else if (options.reorder) {
            order = units.size() <= kExactReorderLimit ? exact_order(eff_speeds(costs), sels)
                                                       : rank_order(costs, sels);
        }

        // Units in the order their first members appear in the recipe.
        std::vector<std::size_t> unreordered(units.size());
        std::iota(unreordered.begin(), unreordered.end(), std::size_t{0});
        std::stable_sort(unreordered.begin(), unreordered.end(), [&](std::size_t a, std::size_t b) {
            return *std::min_element(units[a].begin(), units[a].end()) <
                   *std::min_element(units[b].begin(), units[b].end());
        });
        if (!options.speed_only &&
            estimate_cost(eff_speeds(costs), sels, order, 1.0) >
                    estimate_cost(eff_speeds(costs), sels, unreordered, 1.0) * (1.0 + 1e-12)) {
            order = unreordered;
        }
        for (std::size_t k : order) {
            pg.steps.push_back(make_step(units[k], ops, est, resources, p.warnings));
        }
        std::vector<std::size_t> baseline;
        for (std::size_t k : unreordered) {
            baseline.insert(baseline.end(), units[k].begin(), units[k].end());
        }
        for (std::size_t idx : failed) {
            pg.steps.push_back(make_step({idx}, ops, est, resources, p.warnings));
            baseline.push_back(idx);
        }
        unreordered_flat.insert(unreordered_flat.end(), baseline.begin(), baseline.end());
        p.groups.push_back(std::move(pg));
    }

    double n = static_cast<double>(probe.dataset_size);
    p.estimated_total_time = annotate_times(p, est, n);
    p.original_estimated_time = n * chain_cost(unreordered_flat, est).first;
    validate_plan(p, ops);
    return p;
}

} // namespace dj
