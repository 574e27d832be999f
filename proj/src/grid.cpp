#include "mcrl/grid.hpp"

#include <cstdio>
#include <numeric>

namespace mcrl {

namespace {

std::string family_of(const SelectionPolicy& p) {
    switch (p.kind) {
        case SelectionPolicy::Kind::ratio: return "RAM";
        case SelectionPolicy::Kind::hard: return "HM";
        case SelectionPolicy::Kind::soft: return "SM";
        case SelectionPolicy::Kind::single_label: return "single";
    }
    return "?";
}

std::string label_of(const SelectionPolicy& p) {
    if (p.kind == SelectionPolicy::Kind::ratio) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "ratio=%g", p.threshold);
        return buf;
    }
    return "k=" + std::to_string(p.k);
}

double mean(const Vec& v) { return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

std::vector<SelectionPolicy> ablation_policies() {
    return {SelectionPolicy::ratio(1.1), SelectionPolicy::ratio(1.2), SelectionPolicy::ratio(1.5),
            SelectionPolicy::hard(2),    SelectionPolicy::hard(3),    SelectionPolicy::hard(4),
            SelectionPolicy::soft(2),    SelectionPolicy::soft(3),    SelectionPolicy::soft(4)};
}

AblationGrid run_ablation_grid(const EmbeddingDataset& source, const EmbeddingDataset& target,
                               const AdaptConfig& base_cfg, const ModelDims& dims,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<SelectionPolicy>& policies) {
    check_arg(!seeds.empty(), "grid: need at least one seed");
    check_arg(target.has_evaluation_labels(), "grid: target dataset needs evaluation labels");
    base_cfg.validate();

    AblationGrid grid;
    grid.seeds = seeds;
    grid.dims = dims;
    grid.base = base_cfg;
    grid.baseline.family = "source-only";
    grid.baseline.label = "-";

    std::vector<ModelParams> stage1;
    try {
        for (auto seed : seeds) {
            AdaptConfig cfg = base_cfg;
            cfg.seed = seed;
            TrainResult r = train_source_only(init_model(dims, seed), source, cfg);
            grid.baseline.top1.push_back(evaluate_model(r.model, target).top1);
            stage1.push_back(std::move(r.model));
        }
        grid.baseline.mean_top1 = mean(grid.baseline.top1);
    } catch (const std::exception& e) {
        grid.baseline.top1.clear();
        grid.baseline.error = e.what();
        stage1.clear();
    }

    const bool reuse = base_cfg.mode == AdaptMode::two_stage && !base_cfg.pretrained && !stage1.empty();
    for (const auto& policy : policies) {
        GridRow row;
        row.family = family_of(policy);
        row.label = label_of(policy);
        row.policy = policy;
        try {
            for (std::size_t s = 0; s < seeds.size(); ++s) {
                AdaptConfig cfg = base_cfg;
                cfg.seed = seeds[s];
                cfg.policy = policy;
                ModelParams start = init_model(dims, seeds[s]);
                if (reuse) {
                    start = stage1[s];
                    cfg.pretrained = true;
                }
                const TrainResult r = adapt(std::move(start), source, target, cfg);
                row.top1.push_back(evaluate_model(r.model, target).top1);
            }
            row.mean_top1 = mean(row.top1);
        } catch (const std::exception& e) {
            row.top1.clear();
            row.error = e.what();
        }
        grid.rows.push_back(std::move(row));
    }
    return grid;
}

}  // namespace mcrl
