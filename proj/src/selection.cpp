#include "mcrl/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcrl {

void ReferenceWeights::add(std::size_t row, int cls, double weight) {
    expects(row < rows_.size(), "ReferenceWeights::add: row out of range");
    expects(cls >= 0 && static_cast<std::size_t>(cls) < classes_, "ReferenceWeights::add: class out of range");
    check_arg(std::isfinite(weight) && weight >= 0.0, "ReferenceWeights::add: weight must be finite and >= 0");
    auto& r = rows_[row];
    expects(std::none_of(r.begin(), r.end(), [cls](const Entry& e) { return e.cls == cls; }),
            "ReferenceWeights::add: duplicate class in row");
    r.push_back({cls, weight});
}

Vec ReferenceWeights::column(int cls) const {
    Vec col(rows_.size(), 0.0);
    for (std::size_t i = 0; i < rows_.size(); ++i)
        for (const auto& e : rows_[i])
            if (e.cls == cls) col[i] = e.weight;
    return col;
}

Vec ReferenceWeights::column_sums() const {
    Vec s(classes_, 0.0);
    for (const auto& r : rows_)
        for (const auto& e : r) s[static_cast<std::size_t>(e.cls)] += e.weight;
    return s;
}

std::size_t ReferenceWeights::max_row_nnz() const {
    std::size_t m = 0;
    for (const auto& r : rows_) m = std::max(m, r.size());
    return m;
}

ReferenceWeights ReferenceWeights::binarized() const {
    ReferenceWeights b = *this;
    for (auto& r : b.rows_)
        for (auto& e : r) e.weight = 1.0;
    return b;
}

PseudoLabels pseudo_labels(const Mat& logits) {
    check_arg(logits.cols() >= 2, "pseudo_labels: need at least 2 classes");
    check_arg(logits.all_finite(), "pseudo_labels: non-finite logits");
    PseudoLabels pl;
    pl.logits = logits;
    pl.probs = softmax_rows(logits);
    pl.argmax.resize(logits.rows());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        // Taken over P so it always agrees with top_k(P, 1); max_element keeps
        // the first maximum, i.e. the lowest index on ties.
        auto r = pl.probs.row(i);
        pl.argmax[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return pl;
}

std::vector<int> top_k(std::span<const double> probs, std::size_t k) {
    check_arg(k >= 1 && k <= probs.size(), "top_k: K=" + std::to_string(k) + " out of range for C=" +
                                               std::to_string(probs.size()));
    std::vector<int> idx(probs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](int a, int b) {
        const double pa = probs[static_cast<std::size_t>(a)], pb = probs[static_cast<std::size_t>(b)];
        return pa > pb || (pa == pb && a < b);
    });
    idx.resize(k);
    return idx;
}

std::size_t SelectionPolicy::max_clusters() const {
    switch (kind) {
        case Kind::single_label: return 1;
        case Kind::ratio: return 2;
        default: return k;
    }
}

void SelectionPolicy::validate(std::size_t classes) const {
    switch (kind) {
        case Kind::single_label: break;
        case Kind::hard:
        case Kind::soft:
            check_arg(k >= 1 && k <= classes, "policy: k=" + std::to_string(k) + " must be in [1, " +
                                                  std::to_string(classes) + "]");
            break;
        case Kind::ratio:
            check_arg(std::isfinite(threshold), "policy: ratio threshold must be finite");
            check_arg(classes >= 2, "policy: ratio needs at least 2 classes");
            break;
    }
}

std::string SelectionPolicy::name() const {
    switch (kind) {
        case Kind::single_label: return "single_label";
        case Kind::hard: return "hard(k=" + std::to_string(k) + ")";
        case Kind::soft: return "soft(k=" + std::to_string(k) + ")";
        case Kind::ratio: {
            std::string t = std::to_string(threshold);
            t.erase(t.find_last_not_of('0') + 1);
            if (t.back() == '.') t.pop_back();
            return "ratio(t=" + t + ")";
        }
    }
    return "?";
}

SelectionPolicy parse_policy(const std::string& kind, std::size_t k, double threshold) {
    if (kind == "single" || kind == "single_label") return SelectionPolicy::single_label();
    if (kind == "hard") return SelectionPolicy::hard(k);
    if (kind == "soft") return SelectionPolicy::soft(k);
    if (kind == "ratio") return SelectionPolicy::ratio(threshold);
    throw InvalidArgument("unknown policy '" + kind + "' (expected single|hard|soft|ratio)");
}

ReferenceWeights build_weights(const PseudoLabels& pl, const SelectionPolicy& policy) {
    const std::size_t n = pl.size(), classes = pl.probs.cols();
    policy.validate(classes);
    ReferenceWeights w(n, classes);
    for (std::size_t i = 0; i < n; ++i) {
        auto p = pl.probs.row(i);
        switch (policy.kind) {
            case SelectionPolicy::Kind::single_label:
                w.add(i, pl.argmax[i], 1.0);
                break;
            case SelectionPolicy::Kind::hard:
                for (int c : top_k(p, policy.k)) w.add(i, c, 1.0);
                break;
            case SelectionPolicy::Kind::soft:
                for (int c : top_k(p, policy.k)) w.add(i, c, sigmoid(pl.logits(i, static_cast<std::size_t>(c))));
                break;
            case SelectionPolicy::Kind::ratio: {
                const auto top = top_k(p, 2);
                const double p1 = p[static_cast<std::size_t>(top[0])], p2 = p[static_cast<std::size_t>(top[1])];
                w.add(i, top[0], 1.0);
                // p2 > 0 always (softmax clamp), so the ratio is well-defined.
                if (!(p1 / p2 > policy.threshold)) w.add(i, top[1], 1.0);
                break;
            }
        }
    }
    return w;
}

SelectionReport selection_report(const ReferenceWeights& w) {
    SelectionReport r;
    r.clusters_per_sample.assign(w.max_row_nnz() + 1, 0);
    for (std::size_t i = 0; i < w.size(); ++i) ++r.clusters_per_sample[w.row(i).size()];
    r.class_mass = w.column_sums();
    return r;
}

}  // namespace mcrl
