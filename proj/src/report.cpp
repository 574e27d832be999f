#include "mcrl/report.hpp"

#include <cstdarg>
#include <cstdio>

#include "json.hpp"

namespace mcrl {

using Json = nlohmann::ordered_json;

namespace {

std::string policy_kind_name(SelectionPolicy::Kind k) {
    switch (k) {
        case SelectionPolicy::Kind::single_label: return "single_label";
        case SelectionPolicy::Kind::hard: return "hard";
        case SelectionPolicy::Kind::soft: return "soft";
        case SelectionPolicy::Kind::ratio: return "ratio";
    }
    return "?";
}

Json policy_json(const SelectionPolicy& p) {
    Json j;
    j["name"] = p.name();
    j["kind"] = policy_kind_name(p.kind);
    j["k"] = p.k;
    j["threshold"] = p.threshold;
    return j;
}

Json config_json(const AdaptConfig& c) {
    Json kernel;
    kernel["bandwidth_rule"] = bandwidth_rule_name(c.kernel.bandwidth_rule);
    kernel["fixed_sigma2"] = c.kernel.fixed_sigma2;
    kernel["multipliers"] = c.kernel.multipliers;
    kernel["weight_scaling"] = weight_scaling_name(c.kernel.weight_scaling);
    kernel["min_cluster_size"] = c.kernel.min_cluster_size;

    Json j;
    j["seed"] = c.seed;
    j["lr"] = c.lr;
    j["momentum"] = c.momentum;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["steps_per_epoch"] = c.steps_per_epoch;
    j["lambda"] = c.lambda;
    j["lambda_ramp"] = c.lambda_ramp;
    j["policy"] = policy_json(c.policy);
    j["kernel"] = std::move(kernel);
    j["mode"] = mode_name(c.mode);
    j["freeze_g"] = c.freeze_g;
    j["global_clusters"] = c.global_clusters;
    j["cluster_samples_per_class"] = c.cluster_samples_per_class;
    j["pretrained"] = c.pretrained;
    return j;
}

Json metrics_json(const MetricsReport& m) {
    Json j;
    j["top1"] = m.top1;
    j["top3"] = m.top3;
    j["macro_f1"] = m.macro_f1;
    j["n_eval"] = m.n_eval;
    Json rows = Json::array();
    for (std::size_t t = 0; t < m.confusion.classes(); ++t) {
        Json row = Json::array();
        for (std::size_t p = 0; p < m.confusion.classes(); ++p) row.push_back(m.confusion.at(t, p));
        rows.push_back(std::move(row));
    }
    j["confusion"] = std::move(rows);
    return j;
}

Json trace_json(const std::vector<EpochRecord>& trace) {
    Json arr = Json::array();
    for (const auto& e : trace) {
        Json j;
        j["epoch"] = e.epoch;
        j["ce_loss"] = e.ce_loss;
        j["mcrl_loss"] = e.mcrl_loss;
        j["active_class_rate"] = e.active_class_rate;
        j["degenerate_steps"] = e.degenerate_steps;
        if (e.target) {
            j["target_top1"] = e.target->top1;
            j["target_top3"] = e.target->top3;
            j["target_macro_f1"] = e.target->macro_f1;
        } else {
            j["target_top1"] = nullptr;
            j["target_top3"] = nullptr;
            j["target_macro_f1"] = nullptr;
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

Json dims_json(const ModelDims& d) {
    Json j;
    j["d_in"] = d.d_in;
    j["hidden"] = d.hidden;
    j["d_feat"] = d.d_feat;
    j["classes"] = d.classes;
    return j;
}

Json environment_json() {
    Json j;
    j["library"] = "mcrl";
    j["version"] = kLibraryVersion;
    j["float"] = "ieee754-binary64";
    j["rng"] = "mt19937_64+splitmix64";
    return j;
}

Json header(const std::string& kind, const RunContext& ctx) {
    Json j;
    j["schema"] = "mcrl.report";
    j["schema_version"] = kReportSchemaVersion;
    j["kind"] = kind;
    j["command"] = ctx.command;
    Json data;
    data["source"] = ctx.source;
    data["target"] = ctx.target;
    j["data"] = std::move(data);
    j["model"] = dims_json(ctx.dims);
    return j;
}

Json training_body(const AdaptReport& r, bool timing) {
    Json j;
    j["kind"] = r.kind;
    j["config"] = config_json(r.config);
    j["stage1_trace"] = trace_json(r.stage1_trace);
    j["trace"] = trace_json(r.trace);
    j["final_metrics"] = r.final_metrics ? metrics_json(*r.final_metrics) : Json(nullptr);
    j["total_steps"] = r.total_steps;
    j["degenerate_steps"] = r.degenerate_steps;
    if (timing) j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

std::string finish(Json j) {
    j["environment"] = environment_json();
    return j.dump(2) + "\n";
}

std::string fmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

std::string pct(double v) { return fmt("%7.2f", 100.0 * v); }

}  // namespace

std::string mode_name(AdaptMode mode) { return mode == AdaptMode::two_stage ? "two_stage" : "end_to_end"; }

std::string bandwidth_rule_name(BandwidthRule rule) {
    return rule == BandwidthRule::median_heuristic ? "median_heuristic" : "fixed";
}

std::string weight_scaling_name(WeightScaling scaling) {
    return scaling == WeightScaling::per_class_sum ? "per_class_sum" : "literal_inverse_nt";
}

std::string training_report_json(const AdaptReport& report, const RunContext& ctx) {
    Json j = header(report.kind, ctx);
    j["run"] = training_body(report, ctx.include_timing);
    return finish(std::move(j));
}

std::string chain_report_json(const std::vector<AdaptReport>& reports, const RunContext& ctx) {
    Json j = header("chain", ctx);
    Json stages = Json::array();
    for (const auto& r : reports) stages.push_back(training_body(r, ctx.include_timing));
    j["stages"] = std::move(stages);
    j["final_metrics"] =
        !reports.empty() && reports.back().final_metrics ? metrics_json(*reports.back().final_metrics) : Json(nullptr);
    return finish(std::move(j));
}

std::string metrics_report_json(const MetricsReport& metrics, const RunContext& ctx) {
    Json j = header("evaluate", ctx);
    j["final_metrics"] = metrics_json(metrics);
    return finish(std::move(j));
}

std::string grid_report_json(const AblationGrid& grid, const RunContext& ctx) {
    Json j = header("grid", ctx);
    j["seeds"] = grid.seeds;
    j["config"] = config_json(grid.base);
    const auto row_json = [](const GridRow& r) {
        Json o;
        o["family"] = r.family;
        o["label"] = r.label;
        o["policy"] = r.policy ? policy_json(*r.policy) : Json(nullptr);
        o["top1"] = r.top1;
        o["mean_top1"] = r.ok() ? Json(r.mean_top1) : Json(nullptr);
        o["error"] = r.ok() ? Json(nullptr) : Json(r.error);
        return o;
    };
    j["baseline"] = row_json(grid.baseline);
    Json rows = Json::array();
    for (const auto& r : grid.rows) rows.push_back(row_json(r));
    j["rows"] = std::move(rows);
    return finish(std::move(j));
}

std::string gradcheck_report_json(const GradcheckReport& report, bool include_timing) {
    Json j;
    j["schema"] = "mcrl.report";
    j["schema_version"] = kReportSchemaVersion;
    j["kind"] = "gradcheck";
    Json suites = Json::array();
    for (const auto& s : report.suites) {
        Json o;
        o["name"] = s.name;
        o["instances"] = s.instances;
        o["partials"] = s.partials;
        o["max_rel_error"] = s.max_rel_error;
        o["passed"] = s.passed;
        suites.push_back(std::move(o));
    }
    j["suites"] = std::move(suites);
    j["passed"] = report.passed();
    if (include_timing) j["seconds"] = report.seconds;
    return finish(std::move(j));
}

std::string training_table(const AdaptReport& report) {
    std::string out = fmt("%-6s %10s %10s %7s %5s %7s %7s %7s\n", "epoch", "ce_loss", "mcrl_loss", "active", "degen",
                          "top1%", "top3%", "F1%");
    for (const auto& e : report.trace) {
        out += fmt("%-6zu %10.5f %10.5f %7.3f %5zu ", e.epoch, e.ce_loss, e.mcrl_loss, e.active_class_rate,
                   e.degenerate_steps);
        if (e.target)
            out += pct(e.target->top1) + " " + pct(e.target->top3) + " " + pct(e.target->macro_f1) + "\n";
        else
            out += fmt("%7s %7s %7s\n", "-", "-", "-");
    }
    if (report.final_metrics) out += "final: " + metrics_table(*report.final_metrics);
    return out;
}

std::string metrics_table(const MetricsReport& m) {
    return fmt("top1 %.2f%%  top3 %.2f%%  macro-F1 %.2f%%  (n=%zu)\n", 100.0 * m.top1, 100.0 * m.top3,
               100.0 * m.macro_f1, m.n_eval);
}

std::string grid_table(const AblationGrid& grid) {
    std::string out = fmt("%-12s %-10s %9s  %s\n", "method", "setting", "top1%", "per-seed top1%");
    const auto line = [&](const GridRow& r) {
        std::string s = fmt("%-12s %-10s ", r.family.c_str(), r.label.c_str());
        if (!r.ok()) return s + fmt("%9s  error: %s\n", "-", r.error.c_str());
        s += fmt("%9.2f ", 100.0 * r.mean_top1);
        for (double v : r.top1) s += " " + fmt("%.2f", 100.0 * v);
        return s + "\n";
    };
    out += line(grid.baseline);
    for (const auto& r : grid.rows) out += line(r);
    return out;
}

std::string gradcheck_table(const GradcheckReport& report) {
    std::string out = fmt("%-14s %9s %9s %13s %s\n", "suite", "instances", "partials", "max_rel_err", "result");
    for (const auto& s : report.suites)
        out += fmt("%-14s %9zu %9zu %13.3e %s\n", s.name.c_str(), s.instances, s.partials, s.max_rel_error,
                   s.passed ? "PASS" : "FAIL");
    return out;
}

}  // namespace mcrl
