#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcrl/data.hpp"
#include "mcrl/kernels.hpp"
#include "mcrl/metrics.hpp"
#include "mcrl/model.hpp"
#include "mcrl/selection.hpp"

namespace mcrl {

enum class AdaptMode { end_to_end, two_stage };

struct AdaptConfig {
    double lr = 0.01;
    double momentum = 0.9;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double lambda = 0.5;
    // lambda(p) = lambda * (2 / (1 + exp(-10 p)) - 1), p = training progress.
    bool lambda_ramp = false;
    SelectionPolicy policy = SelectionPolicy::soft(3);
    KernelConfig kernel;
    AdaptMode mode = AdaptMode::two_stage;
    bool freeze_g = false;
    std::uint64_t seed = 0;
    // 0: one pass over the target (adapt) or the source (source-only).
    std::size_t steps_per_epoch = 0;
    // Source clusters drawn per step as a class-stratified sample of the whole
    // source set instead of taken from the source mini-batch.
    bool global_clusters = false;
    std::size_t cluster_samples_per_class = 4;
    // two_stage only: the incoming model is already source-trained, so stage 1
    // is skipped and the incoming model itself becomes the frozen labeler.
    bool pretrained = false;

    void validate() const;
    double lambda_at(double progress) const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double ce_loss = 0.0;
    double mcrl_loss = 0.0;
    // Mean over steps of active_classes / C.
    double active_class_rate = 0.0;
    std::size_t degenerate_steps = 0;
    std::optional<MetricsReport> target;
};

struct AdaptReport {
    std::string kind;  // "source_only" or "adapt"
    AdaptConfig config;
    std::vector<EpochRecord> trace;
    // two_stage: the source-only phase that produced the frozen labeler.
    std::vector<EpochRecord> stage1_trace;
    std::optional<MetricsReport> final_metrics;
    std::size_t total_steps = 0;
    std::size_t degenerate_steps = 0;
    double wall_clock_seconds = 0.0;
};

struct TrainResult {
    ModelParams model;
    AdaptReport report;
};

// Composite objective CE(source) + lambda * MCRL on one frozen batch; the
// reference weights and the kernel bandwidth are constants. When `cluster_x`
// is given, the source clusters come from it instead of `source_x`.
struct CompositeResult {
    double ce = 0.0;
    double mcrl = 0.0;
    double total = 0.0;
    std::size_t active_classes = 0;
    ModelParams grads;
};

CompositeResult composite_loss_and_grads(const ModelParams& p, const Mat& source_x, std::span<const int> source_y,
                                         const Mat& target_x, const ReferenceWeights& weights,
                                         const KernelConfig& kernel, double lambda, const Mat* cluster_x = nullptr,
                                         std::span<const int> cluster_y = {});

// Reference weights for a target batch under the policy, from `labeler`.
ReferenceWeights reference_weights(const ModelParams& labeler, const Mat& target_x, const SelectionPolicy& policy);

// `eval` (optional) is scored after every epoch using its evaluation labels.
TrainResult train_source_only(ModelParams model, const EmbeddingDataset& source, const AdaptConfig& cfg,
                              const EmbeddingDataset* eval = nullptr);

TrainResult adapt(ModelParams model, const EmbeddingDataset& source, const EmbeddingDataset& target,
                  const AdaptConfig& cfg, const EmbeddingDataset* eval = nullptr);

class StageError : public std::runtime_error {
public:
    StageError(std::size_t stage, const std::string& what)
        : std::runtime_error("chain stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
    std::size_t stage() const { return stage_; }

private:
    std::size_t stage_;
};

struct ChainResult {
    ModelParams model;
    std::vector<AdaptReport> reports;
    std::vector<std::filesystem::path> checkpoints;
};

// Adapts through `targets` in order. Each stage after the first starts from
// the previous stage's model with `pretrained` set. When checkpoint_dir is
// nonempty a checkpoint is written after every stage (stage_<i>.ckpt).
// Each target is also its own evaluation set when it carries labels.
ChainResult chain_adapt(ModelParams model, const EmbeddingDataset& source,
                        std::span<const EmbeddingDataset> targets, const AdaptConfig& cfg,
                        const std::filesystem::path& checkpoint_dir = {});

ModelParams init_model(const ModelDims& dims, std::uint64_t seed);
MetricsReport evaluate_model(const ModelParams& model, const EmbeddingDataset& data);

}  // namespace mcrl
