#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "mcrl/adapt.hpp"
#include "mcrl/data.hpp"
#include "oracles.hpp"

using namespace mcrl;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
    std::filesystem::create_directories(MCRL_TEST_TMPDIR);
    return std::filesystem::path(MCRL_TEST_TMPDIR) / name;
}

ShiftSpec small_spec(std::uint64_t seed) {
    ShiftSpec s = preset_ambiguity16();
    s.classes = 4;
    s.dims = 6;
    s.n_per_class_source = 30;
    s.n_per_class_target = 20;
    s.seed = seed;
    return s;
}

int csv_error_line(std::string_view text, const CsvSchema& schema = {}) {
    try {
        parse_csv(text, schema);
    } catch (const CsvError& e) {
        return static_cast<int>(e.line());
    }
    return -1;
}

CsvError::Kind csv_error_kind(std::string_view text, const CsvSchema& schema = {}) {
    try {
        parse_csv(text, schema);
    } catch (const CsvError& e) {
        return e.kind();
    }
    FAIL("expected a CsvError");
    return CsvError::Kind::io;
}

}  // namespace

TEST_CASE("presets") {
    const ShiftSpec a = preset_ambiguity16();
    CHECK(a.classes == 16);
    CHECK(a.dims == 32);
    CHECK(a.source_sigma == 0.5);
    CHECK(a.target_sigma == 1.5);
    CHECK(a.rotation_angle == 0.3);
    CHECK(a.bias == 1.0);
    CHECK(a.class_overlap == 0.25);
    CHECK(a.n_per_class_source == 200);
    CHECK(a.n_per_class_target == 100);
    const ShiftSpec n = preset_null16();
    CHECK(n.target_sigma == n.source_sigma);
    CHECK(n.rotation_angle == 0.0);
    CHECK(n.bias == 0.0);
    CHECK(n.class_overlap == 0.0);
    CHECK(preset_by_name("null-16") == n);
    CHECK_THROWS_AS(preset_by_name("nope"), InvalidArgument);
}

TEST_CASE("shift spec JSON") {
    ShiftSpec s = small_spec(9);
    CHECK(shift_spec_from_json(shift_spec_to_json(s)) == s);
    const ShiftSpec p = shift_spec_from_json(R"({"preset": "ambiguity-16", "seed": 7})");
    ShiftSpec expect = preset_ambiguity16();
    expect.seed = 7;
    CHECK(p == expect);
    CHECK_THROWS_AS(shift_spec_from_json(R"({"clases": 3})"), InvalidArgument);
    CHECK_THROWS_AS(shift_spec_from_json(R"({"classes": "many"})"), InvalidArgument);
    CHECK_THROWS_AS(shift_spec_from_json("{"), InvalidArgument);
    CHECK_THROWS_AS(shift_spec_from_json(R"({"target_sigma": 0.1})"), InvalidArgument);
}

TEST_CASE("generator label marginals and determinism") {
    const ShiftSpec s = small_spec(3);
    const Benchmark a = generate_shift_benchmark(s), b = generate_shift_benchmark(s);
    CHECK(a.source == b.source);
    CHECK(a.target == b.target);
    CHECK(to_csv(a.target.with_visible_labels()) == to_csv(b.target.with_visible_labels()));
    CHECK(a.source.size() == 4 * 30);
    CHECK(a.target.size() == 4 * 20);
    CHECK_FALSE(a.target.has_labels());
    CHECK(a.target.has_evaluation_labels());
    CHECK_THROWS_AS(a.target.labels(), InvalidArgument);
    for (int c = 0; c < 4; ++c) {
        CHECK(std::count(a.source.labels().begin(), a.source.labels().end(), c) == 30);
        CHECK(std::count(a.target.evaluation_labels().begin(), a.target.evaluation_labels().end(), c) == 20);
    }
    const Benchmark other = generate_shift_benchmark(small_spec(4));
    CHECK_FALSE(other.source == a.source);
}

TEST_CASE("no-shift generator: per-class means agree") {
    ShiftSpec s = small_spec(5);
    s.target_sigma = s.source_sigma;
    s.rotation_angle = 0.0;
    s.bias = 0.0;
    s.class_overlap = 0.0;
    s.n_per_class_source = 400;
    s.n_per_class_target = 400;
    const Benchmark b = generate_shift_benchmark(s);
    const auto mean_of = [&](const EmbeddingDataset& ds, std::span<const int> y, int c, std::size_t j) {
        double sum = 0.0, n = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (y[i] == c) {
                sum += ds.features()(i, j);
                n += 1.0;
            }
        return sum / n;
    };
    // Each sample mean has standard error sigma / sqrt(n); their difference sqrt(2) times that.
    const double tol = 3.0 * s.source_sigma / std::sqrt(400.0) * std::sqrt(2.0);
    std::size_t outside = 0;
    for (int c = 0; c < 4; ++c)
        for (std::size_t j = 0; j < s.dims; ++j)
            outside += std::abs(mean_of(b.source, b.source.labels(), c, j) -
                                mean_of(b.target, b.target.evaluation_labels(), c, j)) > tol;
    // 24 coordinates at a 3-sigma band: at most one excursion expected.
    CHECK(outside <= 1);
}

TEST_CASE("ambiguity-16 forces a transfer gap") {
    ShiftSpec s = preset_ambiguity16();
    s.seed = 1;
    const Benchmark b = generate_shift_benchmark(s);
    const EmbeddingDataset holdout = generate_source_holdout(s, 50);
    AdaptConfig cfg;
    cfg.seed = 1;
    cfg.epochs = 5;
    const TrainResult r = train_source_only(init_model({32, 64, 32, 16}, 1), b.source, cfg);
    CHECK(evaluate_model(r.model, b.target).top1 < evaluate_model(r.model, holdout).top1);
}

TEST_CASE("CSV round trips") {
    const EmbeddingDataset hand(Mat(2, 2, std::vector<double>{0.1, -2.5, 1e-300, 3.0}), std::vector<int>{1, 0}, 2);
    const auto path = tmp_path("hand.csv");
    save_csv(hand, path);
    CHECK(load_csv(path).features() == hand.features());
    CHECK(to_csv(hand) == "f0,f1,label\n0.1,-2.5,1\n1e-300,3,0\n");

    ShiftSpec s = preset_ambiguity16();
    s.seed = 2;
    s.n_per_class_source = 625;  // 10^4 rows
    const EmbeddingDataset big = generate_shift_benchmark(s).source;
    REQUIRE(big.size() == 10000);
    const EmbeddingDataset back = parse_csv(to_csv(big), {}, big.provenance());
    CHECK(back.features() == big.features());
    CHECK(std::equal(back.labels().begin(), back.labels().end(), big.labels().begin()));
    CHECK(back.classes() == big.classes());

    const EmbeddingDataset unlabeled(Mat(1, 3, 0.5), std::nullopt, 2);
    CHECK_FALSE(parse_csv(to_csv(unlabeled)).has_evaluation_labels());
}

TEST_CASE("CSV errors carry kind and line") {
    CHECK(csv_error_line("f0,f1\n1,2\n3,abc\n") == 3);
    CHECK(csv_error_kind("f0,f1\n1,2\n3,abc\n") == CsvError::Kind::parse);
    CHECK(csv_error_line("f0,f1\n1,2,3\n") == 2);
    CHECK(csv_error_kind("f0,f1\n1,2,3\n") == CsvError::Kind::schema);
    CHECK(csv_error_kind("f0,f2\n1,2\n") == CsvError::Kind::schema);
    CHECK(csv_error_kind("f0,f1\n1,nan\n") == CsvError::Kind::parse);
    CHECK(csv_error_kind("f0,f1\ninf,1\n") == CsvError::Kind::parse);
    CHECK(csv_error_kind("f0,label\n1,-1\n") == CsvError::Kind::parse);
    CHECK(csv_error_kind("f0,label\n1,2\n", CsvSchema{std::nullopt, CsvSchema::Labels::optional, 2}) ==
          CsvError::Kind::parse);
    CHECK(csv_error_kind("f0\n1\n", CsvSchema{std::nullopt, CsvSchema::Labels::required, std::nullopt}) ==
          CsvError::Kind::schema);
    CHECK(csv_error_kind("f0,f1\n1,2\n", CsvSchema{3, CsvSchema::Labels::optional, std::nullopt}) ==
          CsvError::Kind::schema);
    CHECK(csv_error_kind("") == CsvError::Kind::schema);
    try {
        load_csv(tmp_path("missing.csv"));
        FAIL("expected io error");
    } catch (const CsvError& e) {
        CHECK(e.kind() == CsvError::Kind::io);
    }
}

TEST_CASE("batches partition the dataset") {
    Rng rng(60);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng.index(100), bs = 1 + rng.index(40);
        const auto bt = batches(n, bs, rng);
        std::vector<std::size_t> all;
        for (const auto& b : bt) {
            all.insert(all.end(), b.begin(), b.end());
            if (bt.size() > 1 && bs >= 2) CHECK(b.size() >= 2);
        }
        std::sort(all.begin(), all.end());
        REQUIRE(all.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);
    }
    // 33 = 32 + 1: the lone sample joins the first batch.
    const auto merged = epoch_batches(33, 32, 1, 1, 0);
    CHECK(merged.size() == 1);
    CHECK(merged[0].size() == 33);
    CHECK(epoch_batches(34, 32, 1, 1, 0).size() == 2);
    const auto single = epoch_batches(10, 64, 1, 1, 0);
    CHECK(single.size() == 1);
    CHECK(epoch_batches(50, 8, 3, 2, 0) == epoch_batches(50, 8, 3, 2, 0));
    CHECK(epoch_batches(50, 8, 3, 2, 0) != epoch_batches(50, 8, 3, 2, 1));
    Rng r2(1);
    CHECK_THROWS_AS(batches(0, 4, r2), InvalidArgument);
}

TEST_CASE("dataset contract") {
    CHECK_THROWS_AS(EmbeddingDataset(Mat(2, 1, 0.0), std::vector<int>{0}, 2), InvalidArgument);
    CHECK_THROWS_AS(EmbeddingDataset(Mat(1, 1, 0.0), std::vector<int>{2}, 2), InvalidArgument);
    CHECK_THROWS_AS(EmbeddingDataset(Mat(1, 1, NAN), std::nullopt, 2), InvalidArgument);
    const EmbeddingDataset d(Mat(1, 1, 0.0), std::nullopt, 2);
    CHECK_THROWS_AS(d.labels(), InvalidArgument);
    CHECK_THROWS_AS(d.evaluation_labels(), InvalidArgument);
}
