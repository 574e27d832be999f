#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcrl/numerics.hpp"
#include "mcrl/selection.hpp"

namespace mcrl {

enum class BandwidthRule { median_heuristic, fixed };

// How a class's target weights are scaled before entering its MMD term.
//   per_class_sum:      w / sum(w) over the samples referencing the class
//   literal_inverse_nt: w / n_t  (n_t = target batch size)
enum class WeightScaling { per_class_sum, literal_inverse_nt };

// Gaussian multi-kernel family k(x,y) = mean_m exp(-|x-y|^2 / (2 * mult_m * sigma2)).
struct KernelConfig {
    BandwidthRule bandwidth_rule = BandwidthRule::median_heuristic;
    double fixed_sigma2 = 1.0;
    std::vector<double> multipliers{0.25, 0.5, 1.0, 2.0, 4.0};
    WeightScaling weight_scaling = WeightScaling::per_class_sum;
    std::size_t min_cluster_size = 2;

    void validate() const;
};

// Features plus nonnegative weights. When `normalize` is set the weights are
// rescaled to sum to one inside the estimator.
struct WeightedSet {
    Mat features;
    Vec weights;
    bool normalize = true;

    static WeightedSet uniform(Mat features);
};

// Median of pooled pairwise squared distances, zero distances excluded;
// 1.0 when every pair coincides.
double median_heuristic_bandwidth(const Mat& a, const Mat& b);
double median_heuristic_bandwidth(const Mat& pooled);

double resolve_bandwidth(const KernelConfig& cfg, const Mat& a, const Mat& b);

struct MmdResult {
    double value = 0.0;
    Mat grad_a;
    Mat grad_b;
};

// Biased (V-statistic) weighted MMD^2 between the two sets with the kernel
// bandwidth fixed at sigma2. Gradients treat weights and sigma2 as constants.
// Returns nullopt when either set has zero total weight.
std::optional<MmdResult> mmd2_weighted(const WeightedSet& a, const WeightedSet& b, const KernelConfig& cfg,
                                       double sigma2);
// Same, with sigma2 resolved from cfg over the pooled sets.
std::optional<MmdResult> mmd2_weighted(const WeightedSet& a, const WeightedSet& b, const KernelConfig& cfg);

struct ClassMmdResult {
    double loss = 0.0;
    Mat grad_target;
    Mat grad_source;
    std::size_t active_classes = 0;
    std::size_t skipped_classes = 0;
    double sigma2 = 0.0;

    // No class had both a large enough source cluster and target mass.
    bool degenerate() const { return active_classes == 0; }
};

// Mean over active classes c of MMD^2(source cluster c, target weighted by
// column c of `weights`). The bandwidth is resolved once over the pooled
// source and target features.
ClassMmdResult class_conditional_mmd(const Mat& source, std::span<const int> source_labels, const Mat& target,
                                     const ReferenceWeights& weights, const KernelConfig& cfg);

}  // namespace mcrl
