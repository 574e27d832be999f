#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcrl/numerics.hpp"

namespace mcrl {

// Sparse n_t x C matrix: which source-class clusters each target sample
// references, and with what weight.
class ReferenceWeights {
public:
    struct Entry {
        int cls;
        double weight;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    ReferenceWeights() = default;
    ReferenceWeights(std::size_t n, std::size_t classes) : classes_(classes), rows_(n) {}

    std::size_t size() const { return rows_.size(); }
    std::size_t classes() const { return classes_; }

    // Class must be in range and not already present in the row.
    void add(std::size_t row, int cls, double weight);

    std::span<const Entry> row(std::size_t i) const { return rows_[i]; }
    Vec column(int cls) const;
    Vec column_sums() const;
    std::size_t max_row_nnz() const;

    // Same sparsity, every weight replaced by 1.
    ReferenceWeights binarized() const;

    friend bool operator==(const ReferenceWeights&, const ReferenceWeights&) = default;

private:
    std::size_t classes_ = 0;
    std::vector<std::vector<Entry>> rows_;
};

struct PseudoLabels {
    std::vector<int> argmax;
    Mat probs;
    Mat logits;

    std::size_t size() const { return argmax.size(); }
};

PseudoLabels pseudo_labels(const Mat& logits);

// K most probable classes, descending; ties go to the lower index.
std::vector<int> top_k(std::span<const double> probs, std::size_t k);

struct SelectionPolicy {
    enum class Kind { single_label, hard, soft, ratio };

    Kind kind = Kind::single_label;
    std::size_t k = 1;
    double threshold = 1.0;

    static SelectionPolicy single_label() { return {Kind::single_label, 1, 1.0}; }
    static SelectionPolicy hard(std::size_t k) { return {Kind::hard, k, 1.0}; }
    static SelectionPolicy soft(std::size_t k) { return {Kind::soft, k, 1.0}; }
    static SelectionPolicy ratio(double threshold) { return {Kind::ratio, 2, threshold}; }

    // Upper bound on clusters referenced per sample.
    std::size_t max_clusters() const;
    void validate(std::size_t classes) const;
    std::string name() const;

    friend bool operator==(const SelectionPolicy&, const SelectionPolicy&) = default;
};

SelectionPolicy parse_policy(const std::string& kind, std::size_t k, double threshold);

ReferenceWeights build_weights(const PseudoLabels& pl, const SelectionPolicy& policy);

struct SelectionReport {
    // clusters_per_sample[j] = number of samples referencing exactly j clusters.
    std::vector<std::size_t> clusters_per_sample;
    Vec class_mass;
};

SelectionReport selection_report(const ReferenceWeights& w);

}  // namespace mcrl
