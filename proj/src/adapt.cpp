#include "mcrl/adapt.hpp"

#include <chrono>
#include <cmath>

namespace mcrl {

namespace {

enum Stream : std::uint64_t { kInit = 11, kSource = 12, kTarget = 13, kCluster = 14, kStage2 = 100 };

// Endless sequence of mini-batches: epoch e of the stream is the seeded
// permutation epoch_batches(n, bs, seed, stream, e).
class BatchCursor {
public:
    BatchCursor(std::size_t n, std::size_t batch_size, std::uint64_t seed, std::uint64_t stream)
        : n_(n), batch_size_(batch_size), seed_(seed), stream_(stream) {
        refill();
    }

    const std::vector<std::size_t>& next() {
        if (pos_ == current_.size()) {
            ++epoch_;
            refill();
        }
        return current_[pos_++];
    }

    std::size_t batches_per_epoch() const { return current_.size(); }

private:
    void refill() {
        current_ = epoch_batches(n_, batch_size_, seed_, stream_, epoch_);
        pos_ = 0;
    }

    std::size_t n_, batch_size_;
    std::uint64_t seed_, stream_;
    std::uint64_t epoch_ = 0;
    std::vector<std::vector<std::size_t>> current_;
    std::size_t pos_ = 0;
};

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

void add_scaled(Mat& dst, const Mat& src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += scale * src.data()[i];
}

void add_g_grads(ModelParams& dst, const ModelParams& src) {
    auto d = dst.blocks();
    auto s = src.blocks();
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t i = 0; i < d[b].size(); ++i) d[b][i] += s[b][i];
}

void zero_g_grads(ModelParams& g) {
    auto blocks = g.blocks();
    for (std::size_t b = 0; b < 4; ++b) std::fill(blocks[b].begin(), blocks[b].end(), 0.0);
}

void sgd_update(SgdState& sgd, ModelParams& model, const ModelParams& grads) {
    auto p = model.blocks();
    auto g = grads.blocks();
    sgd.step(p, g);
}

void check_dims(const ModelParams& model, const EmbeddingDataset& ds, const char* role) {
    expects(ds.dim() == model.dims().d_in, std::string(role) + " dataset has d=" + std::to_string(ds.dim()) +
                                               ", model expects " + std::to_string(model.dims().d_in));
    expects(ds.classes() <= model.dims().classes, std::string(role) + " dataset has more classes than the model");
}

// Class-stratified draw of up to `per_class` source rows per class.
std::vector<std::size_t> stratified_sample(const std::vector<std::vector<std::size_t>>& by_class, std::size_t per_class,
                                           Rng& rng) {
    std::vector<std::size_t> out;
    for (const auto& members : by_class) {
        std::vector<std::size_t> pool = members;
        const std::size_t take = std::min(per_class, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
            std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
            out.push_back(pool[i]);
        }
    }
    return out;
}

}  // namespace

void AdaptConfig::validate() const {
    check_arg(std::isfinite(lr) && lr >= 0.0, "config: lr must be finite and >= 0");
    check_arg(momentum >= 0.0 && momentum < 1.0, "config: momentum must be in [0,1)");
    check_arg(epochs >= 1, "config: epochs must be >= 1");
    check_arg(batch_size >= 2, "config: batch_size must be >= 2");
    check_arg(std::isfinite(lambda) && lambda >= 0.0, "config: lambda must be finite and >= 0");
    check_arg(!global_clusters || cluster_samples_per_class >= 1, "config: cluster_samples_per_class must be >= 1");
    kernel.validate();
}

double AdaptConfig::lambda_at(double progress) const {
    if (!lambda_ramp) return lambda;
    return lambda * (2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
}

ModelParams init_model(const ModelDims& dims, std::uint64_t seed) {
    Rng rng = Rng::derive(seed, kInit);
    return ModelParams::init(dims, rng);
}

MetricsReport evaluate_model(const ModelParams& model, const EmbeddingDataset& data) {
    check_dims(model, data, "evaluation");
    return evaluate_logits(forward_logits(model, forward_features(model, data.features())), data.evaluation_labels());
}

ReferenceWeights reference_weights(const ModelParams& labeler, const Mat& target_x, const SelectionPolicy& policy) {
    return build_weights(pseudo_labels(forward_logits(labeler, forward_features(labeler, target_x))), policy);
}

CompositeResult composite_loss_and_grads(const ModelParams& p, const Mat& source_x, std::span<const int> source_y,
                                         const Mat& target_x, const ReferenceWeights& weights,
                                         const KernelConfig& kernel, double lambda, const Mat* cluster_x,
                                         std::span<const int> cluster_y) {
    const FeatureForward fs = forward_features_cached(p, source_x);
    const FeatureForward ft = forward_features_cached(p, target_x);
    std::optional<FeatureForward> fc;
    if (cluster_x) fc = forward_features_cached(p, *cluster_x);

    const Mat& cluster_features = fc ? fc->features : fs.features;
    const std::span<const int> cluster_labels = fc ? cluster_y : source_y;
    const ClassMmdResult mmd = class_conditional_mmd(cluster_features, cluster_labels, ft.features, weights, kernel);

    HeadGrads head = ce_head_loss(p, fs.features, source_y);
    CompositeResult r;
    r.ce = head.loss;
    r.mcrl = mmd.loss;
    r.active_classes = mmd.active_classes;
    r.total = head.loss + lambda * mmd.loss;

    const bool use_mmd = lambda != 0.0 && !mmd.degenerate();
    if (use_mmd && !fc) add_scaled(head.grad_features, mmd.grad_source, lambda);
    r.grads = backward_through_g(p, source_x, fs, head.grad_features);
    if (use_mmd) {
        Mat gt = mmd.grad_target;
        for (double& v : gt.data()) v *= lambda;
        add_g_grads(r.grads, backward_through_g(p, target_x, ft, gt));
        if (fc) {
            Mat gc = mmd.grad_source;
            for (double& v : gc.data()) v *= lambda;
            add_g_grads(r.grads, backward_through_g(p, *cluster_x, *fc, gc));
        }
    }
    r.grads.wc = std::move(head.wc);
    r.grads.bc = std::move(head.bc);
    return r;
}

namespace {

struct EpochAccumulator {
    double ce = 0.0, mcrl = 0.0, active = 0.0;
    std::size_t steps = 0, mmd_steps = 0, degenerate = 0;

    EpochRecord finish(std::size_t epoch) const {
        EpochRecord e;
        e.epoch = epoch;
        e.ce_loss = steps ? ce / static_cast<double>(steps) : 0.0;
        e.mcrl_loss = mmd_steps ? mcrl / static_cast<double>(mmd_steps) : 0.0;
        e.active_class_rate = steps ? active / static_cast<double>(steps) : 0.0;
        e.degenerate_steps = degenerate;
        return e;
    }
};

void close_epoch(AdaptReport& report, EpochAccumulator& acc, std::size_t epoch, const ModelParams& model,
                 const EmbeddingDataset* eval) {
    EpochRecord rec = acc.finish(epoch);
    if (eval && eval->has_evaluation_labels()) rec.target = evaluate_model(model, *eval);
    report.degenerate_steps += rec.degenerate_steps;
    report.total_steps += acc.steps;
    report.trace.push_back(std::move(rec));
    acc = {};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TrainResult train_source_only(ModelParams model, const EmbeddingDataset& source, const AdaptConfig& cfg,
                              const EmbeddingDataset* eval) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    model.validate();
    check_dims(model, source, "source");
    const auto labels = source.labels();

    BatchCursor src(source.size(), cfg.batch_size, cfg.seed, kSource);
    const std::size_t steps = cfg.steps_per_epoch ? cfg.steps_per_epoch : src.batches_per_epoch();
    SgdState sgd(cfg.lr, cfg.momentum);

    TrainResult out;
    out.report.kind = "source_only";
    out.report.config = cfg;
    EpochAccumulator acc;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t s = 0; s < steps; ++s) {
            const auto& idx = src.next();
            const Mat xs = source.features().gather_rows(idx);
            const auto ys = gather_labels(labels, idx);
            CeResult ce = ce_loss_and_grads(model, xs, ys);
            if (cfg.freeze_g) zero_g_grads(ce.grads);
            sgd_update(sgd, model, ce.grads);
            acc.ce += ce.loss;
            ++acc.steps;
        }
        close_epoch(out.report, acc, epoch, model, eval);
    }
    if (!out.report.trace.empty()) out.report.final_metrics = out.report.trace.back().target;
    out.model = std::move(model);
    out.report.wall_clock_seconds = seconds_since(t0);
    return out;
}

TrainResult adapt(ModelParams model, const EmbeddingDataset& source, const EmbeddingDataset& target,
                  const AdaptConfig& cfg, const EmbeddingDataset* eval) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    model.validate();
    check_dims(model, source, "source");
    check_dims(model, target, "target");
    check_arg(target.size() > 0, "adapt: empty target dataset");
    cfg.policy.validate(model.dims().classes);
    const auto labels = source.labels();

    TrainResult out;
    out.report.kind = "adapt";
    out.report.config = cfg;

    std::uint64_t stream_offset = 0;
    std::optional<ModelParams> frozen;
    if (cfg.mode == AdaptMode::two_stage) {
        if (!cfg.pretrained) {
            TrainResult stage1 = train_source_only(std::move(model), source, cfg, eval);
            model = std::move(stage1.model);
            out.report.stage1_trace = std::move(stage1.report.trace);
        }
        frozen = model;
        stream_offset = kStage2;
    }

    BatchCursor src(source.size(), cfg.batch_size, cfg.seed, kSource + stream_offset);
    BatchCursor tgt(target.size(), cfg.batch_size, cfg.seed, kTarget + stream_offset);
    Rng cluster_rng = Rng::derive(cfg.seed, kCluster + stream_offset);
    std::vector<std::vector<std::size_t>> by_class;
    if (cfg.global_clusters) {
        by_class.resize(model.dims().classes);
        for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }

    const std::size_t steps = cfg.steps_per_epoch ? cfg.steps_per_epoch : tgt.batches_per_epoch();
    const double total_steps = static_cast<double>(steps * cfg.epochs);
    const double classes = static_cast<double>(model.dims().classes);
    SgdState sgd(cfg.lr, cfg.momentum);
    EpochAccumulator acc;
    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t s = 0; s < steps; ++s, ++global_step) {
            const auto& sidx = src.next();
            const Mat xs = source.features().gather_rows(sidx);
            const auto ys = gather_labels(labels, sidx);
            const Mat xt = target.features().gather_rows(tgt.next());

            const ReferenceWeights w = reference_weights(frozen ? *frozen : model, xt, cfg.policy);
            const double lam = cfg.lambda_at(static_cast<double>(global_step) / total_steps);

            CompositeResult step;
            if (cfg.global_clusters) {
                const auto cidx = stratified_sample(by_class, cfg.cluster_samples_per_class, cluster_rng);
                const Mat xc = source.features().gather_rows(cidx);
                const auto yc = gather_labels(labels, cidx);
                step = composite_loss_and_grads(model, xs, ys, xt, w, cfg.kernel, lam, &xc, yc);
            } else {
                step = composite_loss_and_grads(model, xs, ys, xt, w, cfg.kernel, lam);
            }
            if (cfg.freeze_g) zero_g_grads(step.grads);
            sgd_update(sgd, model, step.grads);

            acc.ce += step.ce;
            acc.active += static_cast<double>(step.active_classes) / classes;
            ++acc.steps;
            if (step.active_classes == 0) {
                ++acc.degenerate;
            } else {
                acc.mcrl += step.mcrl;
                ++acc.mmd_steps;
            }
        }
        close_epoch(out.report, acc, epoch, model, eval);
    }
    if (!out.report.trace.empty()) out.report.final_metrics = out.report.trace.back().target;
    expects(model.all_finite(), "adapt: parameters became non-finite");
    out.model = std::move(model);
    out.report.wall_clock_seconds = seconds_since(t0);
    return out;
}

ChainResult chain_adapt(ModelParams model, const EmbeddingDataset& source,
                        std::span<const EmbeddingDataset> targets, const AdaptConfig& cfg,
                        const std::filesystem::path& checkpoint_dir) {
    check_arg(!targets.empty(), "chain_adapt: need at least one target");
    ChainResult out;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        AdaptConfig stage_cfg = cfg;
        if (i > 0) stage_cfg.pretrained = true;
        try {
            const EmbeddingDataset* eval = targets[i].has_evaluation_labels() ? &targets[i] : nullptr;
            TrainResult r = adapt(std::move(model), source, targets[i], stage_cfg, eval);
            model = std::move(r.model);
            out.reports.push_back(std::move(r.report));
            if (!checkpoint_dir.empty()) {
                std::filesystem::create_directories(checkpoint_dir);
                const auto path = checkpoint_dir / ("stage_" + std::to_string(i) + ".ckpt");
                save_checkpoint(Checkpoint{model, cfg.seed, (i + 1) * cfg.epochs, kCheckpointVersion}, path);
                out.checkpoints.push_back(path);
            }
        } catch (const std::exception& e) {
            throw StageError(i, e.what());
        }
    }
    out.model = std::move(model);
    return out;
}

}  // namespace mcrl
