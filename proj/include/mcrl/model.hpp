#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcrl/numerics.hpp"

namespace mcrl {

struct ModelDims {
    std::size_t d_in = 0;
    std::size_t hidden = 0;
    std::size_t d_feat = 0;
    std::size_t classes = 0;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// Feature transform g (x -> tanh(x W1 + b1) W2 + b2) followed by the linear
// head f (F -> F Wc + bc). The same struct doubles as a gradient container.
struct ModelParams {
    Mat w1;
    Vec b1;
    Mat w2;
    Vec b2;
    Mat wc;
    Vec bc;

    static ModelParams zeros(const ModelDims& dims);
    // Glorot-uniform weights, zero biases.
    static ModelParams init(const ModelDims& dims, Rng& rng);

    ModelDims dims() const;
    void validate() const;
    bool all_finite() const;

    // Flat views in the fixed order w1, b1, w2, b2, wc, bc.
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    std::size_t parameter_count() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct FeatureForward {
    Mat hidden;  // tanh activations, n x h
    Mat features;  // n x d_feat
};

FeatureForward forward_features_cached(const ModelParams& p, const Mat& x);
Mat forward_features(const ModelParams& p, const Mat& x);
Mat forward_logits(const ModelParams& p, const Mat& features);

struct HeadGrads {
    double loss = 0.0;
    Mat wc;
    Vec bc;
    Mat grad_features;
};

// Mean cross-entropy of the head on precomputed features.
HeadGrads ce_head_loss(const ModelParams& p, const Mat& features, std::span<const int> labels);

struct CeResult {
    double loss = 0.0;
    ModelParams grads;
    Mat grad_features;
};

CeResult ce_loss_and_grads(const ModelParams& p, const Mat& x, std::span<const int> labels);

// Gradients of w1, b1, w2, b2 for any scalar whose gradient with respect to
// the features g(x) is grad_features. Head blocks of the result are zero.
ModelParams backward_through_g(const ModelParams& p, const Mat& x, const Mat& grad_features);
ModelParams backward_through_g(const ModelParams& p, const Mat& x, const FeatureForward& fwd,
                               const Mat& grad_features);

// ---------------------------------------------------------------------------
// Checkpoints. Layout is documented in docs/checkpoint_format.md.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'M', 'C', 'R', 'L', 'C', 'K', 'P', 'T'};

struct Checkpoint {
    ModelParams params;
    std::uint64_t rng_seed = 0;
    std::uint64_t epoch = 0;
    std::uint32_t format_version = kCheckpointVersion;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

enum class CheckpointErrc { io, corrupt, version_mismatch, dimension_mismatch };

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(CheckpointErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    CheckpointErrc code() const { return code_; }

private:
    CheckpointErrc code_;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws CheckpointError(dimension_mismatch) when the model cannot consume
// d_in-dimensional inputs or its class count differs from `classes`.
void bind_checkpoint(const Checkpoint& ckpt, std::size_t d_in, std::size_t classes);

}  // namespace mcrl
