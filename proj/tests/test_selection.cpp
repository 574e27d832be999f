#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcrl/selection.hpp"
#include "oracles.hpp"

using namespace mcrl;

namespace {

Mat random_logits(Rng& rng, std::size_t n, std::size_t c, double scale = 3.0) {
    return oracle::random_mat(n, c, rng, scale);
}

std::vector<int> sort_then_truncate(std::span<const double> p, std::size_t k) {
    std::vector<int> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return p[a] > p[b]; });
    idx.resize(k);
    return idx;
}

std::vector<int> row_classes(const ReferenceWeights& w, std::size_t i) {
    std::vector<int> c;
    for (const auto& e : w.row(i)) c.push_back(e.cls);
    std::sort(c.begin(), c.end());
    return c;
}

}  // namespace

TEST_CASE("pseudo_labels argmax") {
    CHECK(pseudo_labels(Mat(1, 3, std::vector<double>{3, 1, 2})).argmax[0] == 0);
    CHECK(pseudo_labels(Mat(1, 3, std::vector<double>{5, 5, 0})).argmax[0] == 0);
    CHECK(pseudo_labels(Mat(1, 3, std::vector<double>{0, 5, 5})).argmax[0] == 1);
    CHECK_THROWS_AS(pseudo_labels(Mat(1, 2, std::vector<double>{NAN, 0})), InvalidArgument);
    CHECK_THROWS_AS(pseudo_labels(Mat(2, 1)), InvalidArgument);

    Rng rng(40);
    const Mat z = random_logits(rng, 100, 7);
    const PseudoLabels pl = pseudo_labels(z);
    for (std::size_t i = 0; i < z.rows(); ++i) {
        int best = 0;
        for (std::size_t c = 1; c < 7; ++c)
            if (z(i, c) > z(i, static_cast<std::size_t>(best))) best = static_cast<int>(c);
        CHECK(pl.argmax[i] == best);
        double s = 0.0;
        for (double v : pl.probs.row(i)) s += v;
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("top_k") {
    const Vec p{0.5, 0.3, 0.2};
    CHECK(top_k(p, 2) == std::vector<int>{0, 1});
    CHECK(top_k(p, 3) == std::vector<int>{0, 1, 2});
    CHECK(top_k(Vec{0.25, 0.25, 0.5}, 3) == std::vector<int>{2, 0, 1});
    CHECK_THROWS_AS(top_k(p, 0), InvalidArgument);
    CHECK_THROWS_AS(top_k(p, 4), InvalidArgument);

    Rng rng(41);
    for (int t = 0; t < 100; ++t) {
        Vec q(8);
        for (double& v : q) v = std::round(rng.uniform() * 10.0);  // coarse values force ties
        CHECK(top_k(q, 3) == sort_then_truncate(q, 3));
    }
}

TEST_CASE("selection sets are invariant to logit shifts") {
    Rng rng(42);
    for (int t = 0; t < 100; ++t) {
        Mat z = random_logits(rng, 1, 6);
        const double shift = rng.uniform(-50.0, 50.0);
        Mat shifted = z;
        for (double& v : shifted.data()) v += shift;
        const PseudoLabels a = pseudo_labels(z), b = pseudo_labels(shifted);
        CHECK(a.argmax == b.argmax);
        for (auto pol : {SelectionPolicy::hard(3), SelectionPolicy::soft(3), SelectionPolicy::ratio(1.2),
                         SelectionPolicy::single_label()}) {
            CHECK(row_classes(build_weights(a, pol), 0) == row_classes(build_weights(b, pol), 0));
        }
    }
}

TEST_CASE("policy weights") {
    Rng rng(43);
    const Mat z = random_logits(rng, 60, 5);
    const PseudoLabels pl = pseudo_labels(z);

    SUBCASE("hard(1) equals single_label") {
        CHECK(build_weights(pl, SelectionPolicy::hard(1)) == build_weights(pl, SelectionPolicy::single_label()));
    }
    SUBCASE("hard(K) is soft(K) with every weight set to one") {
        for (std::size_t k = 1; k <= 5; ++k) {
            const ReferenceWeights soft = build_weights(pl, SelectionPolicy::soft(k));
            CHECK(soft.binarized() == build_weights(pl, SelectionPolicy::hard(k)));
            for (std::size_t i = 0; i < soft.size(); ++i)
                for (const auto& e : soft.row(i))
                    CHECK(e.weight == sigmoid(z(i, static_cast<std::size_t>(e.cls))));
        }
    }
    SUBCASE("row sparsity never exceeds the policy bound") {
        for (auto pol : {SelectionPolicy::single_label(), SelectionPolicy::hard(2), SelectionPolicy::soft(4),
                         SelectionPolicy::ratio(1.1), SelectionPolicy::ratio(1e9), SelectionPolicy::ratio(0.5)}) {
            const ReferenceWeights w = build_weights(pl, pol);
            CHECK(w.max_row_nnz() <= pol.max_clusters());
        }
    }
    SUBCASE("soft weights with zero logits are all one half") {
        const PseudoLabels zero = pseudo_labels(Mat(4, 5, 0.0));
        const ReferenceWeights w = build_weights(zero, SelectionPolicy::soft(3));
        for (std::size_t i = 0; i < w.size(); ++i)
            for (const auto& e : w.row(i)) CHECK(e.weight == 0.5);
        CHECK(w.binarized() == build_weights(zero, SelectionPolicy::hard(3)));
    }
}

TEST_CASE("ratio rule") {
    // p1 / p2 = 0.6 / 0.5 = 1.2 after normalization.
    const Mat z(1, 3, std::vector<double>{std::log(0.6), std::log(0.5), std::log(0.01)});
    const PseudoLabels pl = pseudo_labels(z);
    CHECK(build_weights(pl, SelectionPolicy::ratio(1.1)).row(0).size() == 1);
    CHECK(build_weights(pl, SelectionPolicy::ratio(1.5)).row(0).size() == 2);
    CHECK(row_classes(build_weights(pl, SelectionPolicy::ratio(1.5)), 0) == std::vector<int>{0, 1});

    // Because p1/p2 >= 1, a threshold below one always takes the single-cluster
    // branch, and a huge threshold always takes the two-cluster branch.
    Rng rng(44);
    const PseudoLabels many = pseudo_labels(random_logits(rng, 200, 6));
    CHECK(build_weights(many, SelectionPolicy::ratio(0.9)) == build_weights(many, SelectionPolicy::single_label()));
    CHECK(build_weights(many, SelectionPolicy::ratio(1e9)) == build_weights(many, SelectionPolicy::hard(2)));
    CHECK_THROWS_AS(build_weights(many, SelectionPolicy::ratio(INFINITY)), InvalidArgument);
}

TEST_CASE("selection_report") {
    Rng rng(45);
    const PseudoLabels pl = pseudo_labels(random_logits(rng, 30, 6));
    const SelectionReport hard = selection_report(build_weights(pl, SelectionPolicy::hard(3)));
    CHECK(hard.clusters_per_sample == std::vector<std::size_t>{0, 0, 0, 30});
    const double mass = std::accumulate(hard.class_mass.begin(), hard.class_mass.end(), 0.0);
    CHECK(mass == 90.0);

    // Five samples counted by hand: ratios 3.0, 1.05, 1.0 (tie), 1.5, 1.25 at t = 1.2.
    const Mat z(5, 3, std::vector<double>{std::log(3.0), 0.0, -9.0,
                                          std::log(1.05), 0.0, -9.0,
                                          0.0, 0.0, -9.0,
                                          -9.0, std::log(1.5), 0.0,
                                          0.0, -9.0, std::log(1.25)});
    const ReferenceWeights w = build_weights(pseudo_labels(z), SelectionPolicy::ratio(1.2));
    const SelectionReport r = selection_report(w);
    CHECK(r.clusters_per_sample == std::vector<std::size_t>{0, 3, 2});
    CHECK(r.class_mass == Vec{3.0, 3.0, 1.0});
}

TEST_CASE("policy validation and parsing") {
    CHECK_THROWS_AS(SelectionPolicy::hard(0).validate(4), InvalidArgument);
    CHECK_THROWS_AS(SelectionPolicy::soft(5).validate(4), InvalidArgument);
    CHECK_NOTHROW(SelectionPolicy::soft(4).validate(4));
    CHECK(parse_policy("soft", 3, 0) == SelectionPolicy::soft(3));
    CHECK(parse_policy("ratio", 0, 1.5) == SelectionPolicy::ratio(1.5));
    CHECK(parse_policy("single", 7, 0) == SelectionPolicy::single_label());
    CHECK_THROWS_AS(parse_policy("fuzzy", 1, 1), InvalidArgument);
    CHECK(SelectionPolicy::ratio(1.1).name() == "ratio(t=1.1)");
    CHECK(SelectionPolicy::soft(3).name() == "soft(k=3)");
}

TEST_CASE("reference weights reject malformed entries") {
    ReferenceWeights w(2, 3);
    w.add(0, 1, 0.5);
    CHECK_THROWS_AS(w.add(0, 1, 0.5), ContractViolation);
    CHECK_THROWS_AS(w.add(1, 3, 0.5), ContractViolation);
    CHECK_THROWS_AS(w.add(1, 0, -1.0), InvalidArgument);
    CHECK_THROWS_AS(w.add(1, 0, NAN), InvalidArgument);
    CHECK(w.column(1) == Vec{0.5, 0.0});
}
