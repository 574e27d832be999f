#include "mcrl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mcrl/selection.hpp"

namespace mcrl {

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::size_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
    expects(counts_.size() == classes_ * classes_, "ConfusionMatrix: counts must be C x C");
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

namespace {

void check_eval_inputs(const Mat& logits, std::span<const int> labels) {
    expects(labels.size() == logits.rows(), "metrics: label count != logit rows");
    for (int y : labels)
        check_arg(y >= 0 && static_cast<std::size_t>(y) < logits.cols(),
                  "metrics: label " + std::to_string(y) + " out of range");
}

}  // namespace

double topk_accuracy(const Mat& logits, std::span<const int> labels, std::size_t k) {
    check_arg(k >= 1 && k <= logits.cols(), "topk_accuracy: k out of range");
    check_eval_inputs(logits, labels);
    check_arg(!labels.empty(), "topk_accuracy: empty evaluation set");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto top = top_k(softmax(logits.row(i)), k);
        if (std::find(top.begin(), top.end(), labels[i]) != top.end()) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ConfusionMatrix confusion_matrix(const Mat& logits, std::span<const int> labels) {
    check_eval_inputs(logits, labels);
    ConfusionMatrix cm(logits.cols());
    const PseudoLabels pl = pseudo_labels(logits);
    for (std::size_t i = 0; i < labels.size(); ++i)
        ++cm.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(pl.argmax[i]));
    return cm;
}

double macro_f1(const ConfusionMatrix& cm) {
    check_arg(cm.classes() > 0 && cm.total() > 0, "macro_f1: empty confusion matrix");
    const std::size_t c = cm.classes();
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        std::size_t predicted = 0, actual = 0;
        for (std::size_t j = 0; j < c; ++j) {
            predicted += cm.at(j, k);
            actual += cm.at(k, j);
        }
        const double tp = static_cast<double>(cm.at(k, k));
        const double precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
        const double recall = actual ? tp / static_cast<double>(actual) : 0.0;
        if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
    }
    return sum / static_cast<double>(c);
}

MetricsReport evaluate_logits(const Mat& logits, std::span<const int> labels) {
    MetricsReport r;
    r.top1 = topk_accuracy(logits, labels, 1);
    r.top3 = topk_accuracy(logits, labels, std::min<std::size_t>(3, logits.cols()));
    r.confusion = confusion_matrix(logits, labels);
    r.macro_f1 = macro_f1(r.confusion);
    r.n_eval = labels.size();
    return r;
}

}  // namespace mcrl
