#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcrl/numerics.hpp"

namespace mcrl {

// n x d features with optional integer labels in [0, C).
//
// Labels can be hidden: a target-domain dataset keeps its ground truth for
// scoring, but `labels()` refuses to hand it out. Training code only ever
// calls `labels()`; metric code calls `evaluation_labels()`.
class EmbeddingDataset {
public:
    EmbeddingDataset() = default;
    EmbeddingDataset(Mat features, std::optional<std::vector<int>> labels, std::size_t classes,
                     std::string provenance = {});

    const Mat& features() const { return features_; }
    std::size_t size() const { return features_.rows(); }
    std::size_t dim() const { return features_.cols(); }
    std::size_t classes() const { return classes_; }
    const std::string& provenance() const { return provenance_; }

    bool has_labels() const { return labels_.has_value() && !hidden_; }
    std::span<const int> labels() const;

    bool has_evaluation_labels() const { return labels_.has_value(); }
    std::span<const int> evaluation_labels() const;

    bool labels_hidden() const { return hidden_; }
    EmbeddingDataset with_hidden_labels() const;
    EmbeddingDataset with_visible_labels() const;

    friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;

private:
    Mat features_;
    std::optional<std::vector<int>> labels_;
    std::size_t classes_ = 0;
    std::string provenance_;
    bool hidden_ = false;
};

// Parameters of the synthetic category-ambiguity benchmark.
struct ShiftSpec {
    std::string name = "custom";
    std::size_t classes = 16;
    std::size_t dims = 32;
    std::size_t n_per_class_source = 200;
    std::size_t n_per_class_target = 100;
    double source_sigma = 0.5;
    double target_sigma = 1.5;
    double rotation_angle = 0.3;
    double bias = 1.0;
    double class_overlap = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const ShiftSpec&, const ShiftSpec&) = default;
};

ShiftSpec preset_ambiguity16();
ShiftSpec preset_null16();
// "ambiguity-16" or "null-16".
ShiftSpec preset_by_name(const std::string& name);

std::string shift_spec_to_json(const ShiftSpec& spec);
ShiftSpec shift_spec_from_json(const std::string& text);

struct Benchmark {
    EmbeddingDataset source;
    EmbeddingDataset target;  // labels hidden
};

Benchmark generate_shift_benchmark(const ShiftSpec& spec);
// Fresh source-domain samples from the same class means (independent noise).
EmbeddingDataset generate_source_holdout(const ShiftSpec& spec, std::size_t n_per_class);

// ---------------------------------------------------------------------------
// CSV: header f0,...,f{d-1}[,label]; one sample per line.

class CsvError : public std::runtime_error {
public:
    enum class Kind { io, parse, schema };
    CsvError(Kind kind, std::size_t line, const std::string& what)
        : std::runtime_error(what), kind_(kind), line_(line) {}
    Kind kind() const { return kind_; }
    // 1-based physical line in the file; 0 when not tied to a line.
    std::size_t line() const { return line_; }

private:
    Kind kind_;
    std::size_t line_;
};

struct CsvSchema {
    enum class Labels { optional, required, forbidden };

    std::optional<std::size_t> dims;
    Labels labels = Labels::optional;
    // Class count when known; otherwise inferred as max(label) + 1 (at least 2).
    std::optional<std::size_t> classes;
};

std::string format_double(double v);
void save_csv(const EmbeddingDataset& ds, const std::filesystem::path& path);
std::string to_csv(const EmbeddingDataset& ds);
EmbeddingDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
EmbeddingDataset parse_csv(std::string_view text, const CsvSchema& schema = {}, const std::string& provenance = {});

// ---------------------------------------------------------------------------

// One epoch: a uniform permutation of [0, n) split into batches of
// batch_size. A final short batch of a single sample is merged into the
// previous batch.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, Rng& rng);
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t stream, std::uint64_t epoch);

}  // namespace mcrl
