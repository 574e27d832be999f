#include "mcrl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcrl {

void KernelConfig::validate() const {
    check_arg(!multipliers.empty(), "kernel: multipliers must be nonempty");
    for (double m : multipliers) check_arg(std::isfinite(m) && m > 0.0, "kernel: multipliers must be > 0");
    if (bandwidth_rule == BandwidthRule::fixed)
        check_arg(std::isfinite(fixed_sigma2) && fixed_sigma2 > 0.0, "kernel: fixed sigma2 must be > 0");
    check_arg(min_cluster_size >= 1, "kernel: min_cluster_size must be >= 1");
}

WeightedSet WeightedSet::uniform(Mat features) {
    const std::size_t n = features.rows();
    return WeightedSet{std::move(features), Vec(n, 1.0), true};
}

namespace {

double sq_dist(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        s += d * d;
    }
    return s;
}

double median_of(std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

}  // namespace

double median_heuristic_bandwidth(const Mat& pooled) {
    check_arg(pooled.rows() >= 2, "median_heuristic_bandwidth: need at least 2 points");
    std::vector<double> d2;
    d2.reserve(pooled.rows() * (pooled.rows() - 1) / 2);
    for (std::size_t i = 0; i < pooled.rows(); ++i)
        for (std::size_t j = i + 1; j < pooled.rows(); ++j) {
            const double d = sq_dist(pooled.row(i), pooled.row(j));
            if (d > 0.0) d2.push_back(d);
        }
    if (d2.empty()) return 1.0;
    return median_of(d2);
}

double median_heuristic_bandwidth(const Mat& a, const Mat& b) {
    expects(a.cols() == b.cols() || a.rows() == 0 || b.rows() == 0, "median_heuristic_bandwidth: width mismatch");
    const std::size_t cols = a.rows() ? a.cols() : b.cols();
    Mat pooled(a.rows() + b.rows(), cols);
    std::copy(a.data().begin(), a.data().end(), pooled.data().begin());
    std::copy(b.data().begin(), b.data().end(), pooled.data().begin() + static_cast<std::ptrdiff_t>(a.size()));
    return median_heuristic_bandwidth(pooled);
}

double resolve_bandwidth(const KernelConfig& cfg, const Mat& a, const Mat& b) {
    if (cfg.bandwidth_rule == BandwidthRule::fixed) return cfg.fixed_sigma2;
    return median_heuristic_bandwidth(a, b);
}

std::optional<MmdResult> mmd2_weighted(const WeightedSet& a, const WeightedSet& b, const KernelConfig& cfg,
                                       double sigma2) {
    cfg.validate();
    check_arg(std::isfinite(sigma2) && sigma2 > 0.0, "mmd2_weighted: sigma2 must be > 0");
    expects(a.weights.size() == a.features.rows() && b.weights.size() == b.features.rows(),
            "mmd2_weighted: weight count != row count");
    expects(a.features.cols() == b.features.cols(), "mmd2_weighted: feature widths differ");
    const double sum_a = std::accumulate(a.weights.begin(), a.weights.end(), 0.0);
    const double sum_b = std::accumulate(b.weights.begin(), b.weights.end(), 0.0);
    if (!(sum_a > 0.0) || !(sum_b > 0.0)) return std::nullopt;

    // Pool both sets with signed coefficients s = (alpha, -beta); then
    // MMD^2 = s^T K s and d/dp_i = -2 s_i sum_j s_j G_ij (p_i - p_j) where
    // G_ij = mean_m k_m(p_i, p_j) / (mult_m * sigma2).
    const std::size_t ma = a.features.rows(), mb = b.features.rows(), m = ma + mb, d = a.features.cols();
    auto point = [&](std::size_t i) { return i < ma ? a.features.row(i) : b.features.row(i - ma); };
    Vec s(m);
    for (std::size_t i = 0; i < ma; ++i) s[i] = a.normalize ? a.weights[i] / sum_a : a.weights[i];
    for (std::size_t j = 0; j < mb; ++j) s[ma + j] = -(b.normalize ? b.weights[j] / sum_b : b.weights[j]);

    const std::size_t nk = cfg.multipliers.size();
    Vec inv_two_s2(nk), inv_s2(nk);
    for (std::size_t q = 0; q < nk; ++q) {
        inv_s2[q] = 1.0 / (cfg.multipliers[q] * sigma2);
        inv_two_s2[q] = 0.5 * inv_s2[q];
    }
    const double inv_nk = 1.0 / static_cast<double>(nk);

    Mat kbar(m, m), gmat(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        kbar(i, i) = 1.0;
        gmat(i, i) = 0.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const double d2 = sq_dist(point(i), point(j));
            double k = 0.0, g = 0.0;
            for (std::size_t q = 0; q < nk; ++q) {
                const double e = std::exp(-d2 * inv_two_s2[q]);
                k += e;
                g += e * inv_s2[q];
            }
            kbar(i, j) = kbar(j, i) = k * inv_nk;
            gmat(i, j) = gmat(j, i) = g * inv_nk;
        }
    }

    MmdResult r;
    double value = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        auto ki = kbar.row(i);
        for (std::size_t j = 0; j < m; ++j) acc += s[j] * ki[j];
        value += s[i] * acc;
    }
    r.value = value;

    r.grad_a = Mat(ma, d);
    r.grad_b = Mat(mb, d);
    Vec weighted(d);
    for (std::size_t i = 0; i < m; ++i) {
        if (s[i] == 0.0) continue;
        std::fill(weighted.begin(), weighted.end(), 0.0);
        double gsum = 0.0;
        auto gi = gmat.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double c = s[j] * gi[j];
            if (c == 0.0) continue;
            gsum += c;
            auto pj = point(j);
            for (std::size_t k = 0; k < d; ++k) weighted[k] += c * pj[k];
        }
        auto pi = point(i);
        auto out = i < ma ? r.grad_a.row(i) : r.grad_b.row(i - ma);
        for (std::size_t k = 0; k < d; ++k) out[k] = -2.0 * s[i] * (gsum * pi[k] - weighted[k]);
    }
    return r;
}

std::optional<MmdResult> mmd2_weighted(const WeightedSet& a, const WeightedSet& b, const KernelConfig& cfg) {
    return mmd2_weighted(a, b, cfg, resolve_bandwidth(cfg, a.features, b.features));
}

ClassMmdResult class_conditional_mmd(const Mat& source, std::span<const int> source_labels, const Mat& target,
                                     const ReferenceWeights& weights, const KernelConfig& cfg) {
    cfg.validate();
    expects(source_labels.size() == source.rows(), "class_conditional_mmd: label count != source rows");
    expects(weights.size() == target.rows(), "class_conditional_mmd: weights rows != target rows");
    expects(source.cols() == target.cols(), "class_conditional_mmd: feature widths differ");
    const std::size_t classes = weights.classes();
    for (int y : source_labels)
        check_arg(y >= 0 && static_cast<std::size_t>(y) < classes, "class_conditional_mmd: label out of range");

    ClassMmdResult r;
    r.grad_source = Mat(source.rows(), source.cols());
    r.grad_target = Mat(target.rows(), target.cols());

    std::vector<std::vector<std::size_t>> src_idx(classes);
    for (std::size_t i = 0; i < source_labels.size(); ++i) src_idx[static_cast<std::size_t>(source_labels[i])].push_back(i);
    std::vector<std::vector<std::size_t>> tgt_idx(classes);
    std::vector<Vec> tgt_w(classes);
    for (std::size_t j = 0; j < weights.size(); ++j)
        for (const auto& e : weights.row(j))
            if (e.weight > 0.0) {
                tgt_idx[static_cast<std::size_t>(e.cls)].push_back(j);
                tgt_w[static_cast<std::size_t>(e.cls)].push_back(e.weight);
            }

    struct Term {
        std::size_t cls;
        MmdResult mmd;
    };
    std::vector<Term> terms;
    bool have_sigma = false;
    for (std::size_t c = 0; c < classes; ++c) {
        if (src_idx[c].size() < cfg.min_cluster_size || tgt_idx[c].empty()) {
            ++r.skipped_classes;
            continue;
        }
        if (!have_sigma) {
            r.sigma2 = resolve_bandwidth(cfg, source, target);
            have_sigma = true;
        }
        WeightedSet s = WeightedSet::uniform(source.gather_rows(src_idx[c]));
        WeightedSet t{target.gather_rows(tgt_idx[c]), tgt_w[c], true};
        if (cfg.weight_scaling == WeightScaling::literal_inverse_nt) {
            t.normalize = false;
            for (double& w : t.weights) w /= static_cast<double>(target.rows());
        }
        auto m = mmd2_weighted(s, t, cfg, r.sigma2);
        if (!m) {
            ++r.skipped_classes;
            continue;
        }
        terms.push_back({c, std::move(*m)});
    }
    r.active_classes = terms.size();
    if (terms.empty()) return r;

    const double inv = 1.0 / static_cast<double>(terms.size());
    for (const auto& term : terms) {
        r.loss += term.mmd.value;
        const auto& si = src_idx[term.cls];
        for (std::size_t i = 0; i < si.size(); ++i) {
            auto dst = r.grad_source.row(si[i]);
            auto src = term.mmd.grad_a.row(i);
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += inv * src[k];
        }
        const auto& ti = tgt_idx[term.cls];
        for (std::size_t j = 0; j < ti.size(); ++j) {
            auto dst = r.grad_target.row(ti[j]);
            auto src = term.mmd.grad_b.row(j);
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += inv * src[k];
        }
    }
    r.loss *= inv;
    return r;
}

}  // namespace mcrl
