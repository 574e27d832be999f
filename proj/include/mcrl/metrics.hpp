#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mcrl/numerics.hpp"

namespace mcrl {

// Rows index the true class, columns the predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}
    ConfusionMatrix(std::size_t classes, std::vector<std::size_t> counts);

    std::size_t classes() const { return classes_; }
    std::size_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * classes_ + pred]; }
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
    std::size_t total() const;
    const std::vector<std::size_t>& counts() const { return counts_; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t classes_ = 0;
    std::vector<std::size_t> counts_;
};

struct MetricsReport {
    double top1 = 0.0;
    double top3 = 0.0;
    double macro_f1 = 0.0;
    ConfusionMatrix confusion;
    std::size_t n_eval = 0;
};

// Fraction of rows whose label is among top_k(softmax(row), k).
double topk_accuracy(const Mat& logits, std::span<const int> labels, std::size_t k);
ConfusionMatrix confusion_matrix(const Mat& logits, std::span<const int> labels);
// Unweighted mean of per-class F1; classes with P + R = 0 score 0.
double macro_f1(const ConfusionMatrix& cm);
// top3 uses k = min(3, C).
MetricsReport evaluate_logits(const Mat& logits, std::span<const int> labels);

}  // namespace mcrl
