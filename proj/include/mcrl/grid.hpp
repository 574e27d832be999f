#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcrl/adapt.hpp"

namespace mcrl {

struct GridRow {
    std::string family;  // "RAM", "HM", "SM" or "source-only"
    std::string label;   // "ratio=1.1", "k=3", ...
    std::optional<SelectionPolicy> policy;
    Vec top1;            // one entry per seed; empty when the cell failed
    double mean_top1 = 0.0;
    std::string error;

    bool ok() const { return error.empty(); }
};

struct AblationGrid {
    std::vector<std::uint64_t> seeds;
    ModelDims dims;
    AdaptConfig base;
    GridRow baseline;
    std::vector<GridRow> rows;
};

// RAM 1.1/1.2/1.5, HM k=2/3/4, SM k=2/3/4.
std::vector<SelectionPolicy> ablation_policies();

// One adapt run per (policy, seed) with base_cfg otherwise unchanged, plus
// a source-only baseline per seed. `target` must carry evaluation labels.
// In two-stage mode the source-only model of each seed doubles as the
// stage-1 model of every cell, which yields the same result as running each
// cell from scratch. A failing cell is recorded and the grid still returned.
AblationGrid run_ablation_grid(const EmbeddingDataset& source, const EmbeddingDataset& target,
                               const AdaptConfig& base_cfg, const ModelDims& dims,
                               const std::vector<std::uint64_t>& seeds,
                               const std::vector<SelectionPolicy>& policies = ablation_policies());

}  // namespace mcrl
