#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "mcrl/adapt.hpp"
#include "oracles.hpp"

using namespace mcrl;

namespace {

ShiftSpec small_spec(std::uint64_t seed) {
    ShiftSpec s = preset_ambiguity16();
    s.classes = 4;
    s.dims = 6;
    s.n_per_class_source = 24;
    s.n_per_class_target = 16;
    s.seed = seed;
    return s;
}

AdaptConfig quick_config(std::uint64_t seed) {
    AdaptConfig c;
    c.seed = seed;
    c.epochs = 3;
    c.batch_size = 16;
    return c;
}

const ModelDims kDims{6, 8, 5, 4};

}  // namespace

TEST_CASE("config validation names the field") {
    AdaptConfig c;
    c.lr = -1.0;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("lr"), InvalidArgument);
    c = {};
    c.batch_size = 1;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("batch_size"), InvalidArgument);
    c = {};
    c.lambda = NAN;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("lambda"), InvalidArgument);
    c = {};
    c.epochs = 0;
    CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("epochs"), InvalidArgument);
}

TEST_CASE("lambda ramp") {
    AdaptConfig c;
    c.lambda = 2.0;
    CHECK(c.lambda_at(0.3) == 2.0);
    c.lambda_ramp = true;
    CHECK(c.lambda_at(0.0) == 0.0);
    CHECK(c.lambda_at(1.0) == doctest::Approx(2.0 * (2.0 / (1.0 + std::exp(-10.0)) - 1.0)));
    CHECK(c.lambda_at(0.2) < c.lambda_at(0.6));
}

TEST_CASE("composite gradient matches finite differences on a frozen tiny instance") {
    Rng rng(70);
    for (int t = 0; t < 5; ++t) {
        ModelParams p = ModelParams::init({3, 4, 3, 3}, rng);
        for (auto b : p.blocks())
            for (double& v : b) v += 0.2 * rng.normal();
        const Mat xs = oracle::random_mat(6, 3, rng), xt = oracle::random_mat(6, 3, rng);
        const std::vector<int> ys{0, 1, 2, 0, 1, 2};
        const ReferenceWeights w = reference_weights(p, xt, SelectionPolicy::soft(2));
        KernelConfig kernel;
        kernel.bandwidth_rule = BandwidthRule::fixed;
        kernel.fixed_sigma2 = median_heuristic_bandwidth(forward_features(p, xs), forward_features(p, xt));
        const double lambda = 0.8;
        const CompositeResult r = composite_loss_and_grads(p, xs, ys, xt, w, kernel, lambda);
        CHECK(r.active_classes > 0);
        CHECK(r.total == doctest::Approx(r.ce + lambda * r.mcrl));
        auto pb = p.blocks();
        const auto gb = r.grads.blocks();
        for (std::size_t b = 0; b < pb.size(); ++b) {
            const auto num = oracle::central_diff(
                pb[b], [&] { return composite_loss_and_grads(p, xs, ys, xt, w, kernel, lambda).total; });
            CHECK(oracle::max_rel_err(gb[b], num) <= 1e-5);
        }
    }
}

TEST_CASE("composite with lambda zero is cross-entropy exactly") {
    Rng rng(71);
    const ModelParams p = ModelParams::init({3, 4, 3, 3}, rng);
    const Mat xs = oracle::random_mat(6, 3, rng), xt = oracle::random_mat(6, 3, rng);
    const std::vector<int> ys{0, 1, 2, 0, 1, 2};
    const ReferenceWeights w = reference_weights(p, xt, SelectionPolicy::hard(2));
    const CompositeResult r = composite_loss_and_grads(p, xs, ys, xt, w, KernelConfig{}, 0.0);
    const CeResult ce = ce_loss_and_grads(p, xs, ys);
    CHECK(r.ce == ce.loss);
    CHECK(r.grads == ce.grads);
}

TEST_CASE("source-only training") {
    SUBCASE("separable two-class blobs reach 99% training accuracy") {
        Rng rng(72);
        Mat x(200, 2);
        std::vector<int> y(200);
        for (std::size_t i = 0; i < 200; ++i) {
            y[i] = static_cast<int>(i % 2);
            x(i, 0) = (y[i] ? 3.0 : -3.0) + 0.5 * rng.normal();
            x(i, 1) = 0.5 * rng.normal();
        }
        const EmbeddingDataset ds(x, y, 2);
        AdaptConfig cfg;
        cfg.seed = 1;
        const TrainResult r = train_source_only(init_model({2, 8, 4, 2}, 1), ds, cfg, &ds);
        CHECK(r.report.final_metrics->top1 >= 0.99);
        CHECK(r.report.trace.size() == 20);
    }
    SUBCASE("zero learning rate leaves the model unchanged") {
        const Benchmark b = generate_shift_benchmark(small_spec(1));
        AdaptConfig cfg = quick_config(1);
        cfg.lr = 0.0;
        const ModelParams start = init_model(kDims, 1);
        const EmbeddingDataset eval = b.source.with_hidden_labels();
        const TrainResult r = train_source_only(start, b.source, cfg, &eval);
        CHECK(r.model == start);
        for (const auto& e : r.report.trace) CHECK(e.target->top1 == r.report.trace.front().target->top1);
    }
    SUBCASE("seeded runs are bitwise identical") {
        const Benchmark b = generate_shift_benchmark(small_spec(2));
        const TrainResult r1 = train_source_only(init_model(kDims, 3), b.source, quick_config(3));
        const TrainResult r2 = train_source_only(init_model(kDims, 3), b.source, quick_config(3));
        CHECK(r1.model == r2.model);
        const TrainResult r3 = train_source_only(init_model(kDims, 3), b.source, quick_config(4));
        CHECK_FALSE(r1.model == r3.model);
    }
    SUBCASE("refuses hidden labels and mismatched dims") {
        const Benchmark b = generate_shift_benchmark(small_spec(2));
        CHECK_THROWS_AS(train_source_only(init_model(kDims, 1), b.target, quick_config(1)), InvalidArgument);
        CHECK_THROWS_AS(train_source_only(init_model({5, 8, 5, 4}, 1), b.source, quick_config(1)), ContractViolation);
    }
}

TEST_CASE("adaptation identities") {
    const Benchmark b = generate_shift_benchmark(small_spec(5));

    SUBCASE("lambda zero reproduces source-only training") {
        AdaptConfig cfg = quick_config(5);
        cfg.mode = AdaptMode::end_to_end;
        cfg.lambda = 0.0;
        cfg.steps_per_epoch = 4;
        const TrainResult a = adapt(init_model(kDims, 5), b.source, b.target, cfg);
        const TrainResult s = train_source_only(init_model(kDims, 5), b.source, cfg);
        CHECK(a.model == s.model);
        REQUIRE(a.report.trace.size() == s.report.trace.size());
        for (std::size_t e = 0; e < a.report.trace.size(); ++e)
            CHECK(a.report.trace[e].ce_loss == s.report.trace[e].ce_loss);
    }
    SUBCASE("hard(1) and single_label give identical runs") {
        for (auto mode : {AdaptMode::end_to_end, AdaptMode::two_stage}) {
            AdaptConfig cfg = quick_config(6);
            cfg.mode = mode;
            cfg.policy = SelectionPolicy::hard(1);
            const TrainResult h = adapt(init_model(kDims, 6), b.source, b.target, cfg);
            cfg.policy = SelectionPolicy::single_label();
            const TrainResult s = adapt(init_model(kDims, 6), b.source, b.target, cfg);
            CHECK(h.model == s.model);
            for (std::size_t e = 0; e < h.report.trace.size(); ++e)
                CHECK(h.report.trace[e].mcrl_loss == s.report.trace[e].mcrl_loss);
        }
    }
    SUBCASE("no usable cluster means plain cross-entropy steps") {
        AdaptConfig cfg = quick_config(7);
        cfg.mode = AdaptMode::end_to_end;
        cfg.steps_per_epoch = 3;
        cfg.kernel.min_cluster_size = 1000;
        const TrainResult a = adapt(init_model(kDims, 7), b.source, b.target, cfg);
        CHECK(a.report.degenerate_steps == a.report.total_steps);
        cfg.lambda = 0.0;
        CHECK(a.model == adapt(init_model(kDims, 7), b.source, b.target, cfg).model);
    }
}

TEST_CASE("adaptation report") {
    const Benchmark b = generate_shift_benchmark(small_spec(8));
    AdaptConfig cfg = quick_config(8);
    const TrainResult r = adapt(init_model(kDims, 8), b.source, b.target, cfg, &b.target);
    CHECK(r.report.kind == "adapt");
    CHECK(r.report.trace.size() == cfg.epochs);
    CHECK(r.report.stage1_trace.size() == cfg.epochs);
    for (const auto& e : r.report.trace) {
        CHECK(e.mcrl_loss >= 0.0);
        CHECK(std::isfinite(e.ce_loss));
        CHECK(e.active_class_rate >= 0.0);
        CHECK(e.active_class_rate <= 1.0);
        REQUIRE(e.target);
    }
    REQUIRE(r.report.final_metrics);
    CHECK(r.report.final_metrics->top1 == evaluate_model(r.model, b.target).top1);

    const TrainResult again = adapt(init_model(kDims, 8), b.source, b.target, cfg, &b.target);
    CHECK(again.model == r.model);
}

TEST_CASE("two-stage from a pretrained model equals the full protocol") {
    const Benchmark b = generate_shift_benchmark(small_spec(9));
    AdaptConfig cfg = quick_config(9);
    const TrainResult full = adapt(init_model(kDims, 9), b.source, b.target, cfg);
    const TrainResult stage1 = train_source_only(init_model(kDims, 9), b.source, cfg);
    cfg.pretrained = true;
    const TrainResult resumed = adapt(stage1.model, b.source, b.target, cfg);
    CHECK(resumed.model == full.model);
}

TEST_CASE("freeze_g trains the head only") {
    const Benchmark b = generate_shift_benchmark(small_spec(10));
    AdaptConfig cfg = quick_config(10);
    cfg.freeze_g = true;
    const ModelParams start = init_model(kDims, 10);
    const TrainResult r = adapt(start, b.source, b.target, cfg);
    CHECK(r.model.w1 == start.w1);
    CHECK(r.model.b2 == start.b2);
    CHECK_FALSE(r.model.wc == start.wc);
}

TEST_CASE("global clusters") {
    const Benchmark b = generate_shift_benchmark(small_spec(11));
    AdaptConfig cfg = quick_config(11);
    cfg.global_clusters = true;
    cfg.cluster_samples_per_class = 3;
    const TrainResult r = adapt(init_model(kDims, 11), b.source, b.target, cfg);
    // Every class contributes a three-sample cluster, so no step is degenerate.
    CHECK(r.report.degenerate_steps == 0);
    CHECK(r.model == adapt(init_model(kDims, 11), b.source, b.target, cfg).model);
}

TEST_CASE("chain_adapt") {
    const Benchmark b = generate_shift_benchmark(small_spec(12));
    ShiftSpec other = small_spec(12);
    other.rotation_angle = 0.15;
    const EmbeddingDataset mid = generate_shift_benchmark(other).target;
    const AdaptConfig cfg = quick_config(12);

    SUBCASE("a single target is plain adapt") {
        const EmbeddingDataset only[] = {b.target};
        const ChainResult c = chain_adapt(init_model(kDims, 12), b.source, only, cfg);
        CHECK(c.model == adapt(init_model(kDims, 12), b.source, b.target, cfg, &b.target).model);
        CHECK(c.reports.size() == 1);
    }
    SUBCASE("the intermediate checkpoint reproduces the second stage") {
        const auto dir = std::filesystem::path(MCRL_TEST_TMPDIR) / "chain";
        std::filesystem::remove_all(dir);
        const EmbeddingDataset targets[] = {mid, b.target};
        const ChainResult c = chain_adapt(init_model(kDims, 12), b.source, targets, cfg, dir);
        REQUIRE(c.checkpoints.size() == 2);
        const Checkpoint ck = load_checkpoint(c.checkpoints[0]);
        CHECK(ck.epoch == cfg.epochs);
        AdaptConfig stage2 = cfg;
        stage2.pretrained = true;
        const TrainResult r = adapt(ck.params, b.source, b.target, stage2);
        CHECK(r.model == c.model);
        CHECK(load_checkpoint(c.checkpoints[1]).params == c.model);
    }
    SUBCASE("a failing stage reports its index") {
        ShiftSpec wide = small_spec(12);
        wide.dims = 7;
        const EmbeddingDataset targets[] = {mid, generate_shift_benchmark(wide).target};
        try {
            chain_adapt(init_model(kDims, 12), b.source, targets, cfg);
            FAIL("expected StageError");
        } catch (const StageError& e) {
            CHECK(e.stage() == 1);
        }
        CHECK_THROWS_AS(chain_adapt(init_model(kDims, 12), b.source, {}, cfg), InvalidArgument);
    }
}
