#include "mcrl/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "mcrl/adapt.hpp"

namespace mcrl {

namespace {

enum Stream : std::uint64_t { kCe = 21, kMmd = 22, kComposite = 23 };

class Checker {
public:
    Checker(const GradcheckOptions& opts, std::string name) : opts_(opts) { suite_.name = std::move(name); }

    // Compares analytic[i] against the central difference of f in x[i].
    void compare(std::span<double> x, std::span<const double> analytic, const std::function<double()>& f) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double keep = x[i];
            x[i] = keep + opts_.eps;
            const double up = f();
            x[i] = keep - opts_.eps;
            const double down = f();
            x[i] = keep;
            const double numeric = (up - down) / (2.0 * opts_.eps);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), opts_.floor});
            suite_.max_rel_error = std::max(suite_.max_rel_error, std::abs(analytic[i] - numeric) / denom);
            ++suite_.partials;
        }
    }

    void next_instance() { ++suite_.instances; }

    GradcheckSuite finish() {
        suite_.passed = suite_.instances > 0 && suite_.max_rel_error <= opts_.tolerance;
        return suite_;
    }

private:
    const GradcheckOptions& opts_;
    GradcheckSuite suite_;
};

std::size_t between(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.index(hi - lo + 1); }

Mat gaussian(std::size_t r, std::size_t c, Rng& rng) {
    Mat m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

ModelParams random_model(const ModelDims& dims, Rng& rng) {
    ModelParams p = ModelParams::init(dims, rng);
    // Nonzero biases so their partials are exercised.
    for (auto block : p.blocks())
        for (double& v : block) v += 0.3 * rng.normal();
    return p;
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.index(classes));
    return y;
}

GradcheckSuite check_ce(const GradcheckOptions& opts) {
    Checker chk(opts, "cross_entropy");
    Rng rng = Rng::derive(opts.seed, kCe);
    for (std::size_t t = 0; t < opts.instances; ++t) {
        const ModelDims dims{between(rng, 1, 4), between(rng, 1, 4), between(rng, 1, 4), between(rng, 2, 4)};
        ModelParams p = random_model(dims, rng);
        const std::size_t n = between(rng, 1, 6);
        const Mat x = gaussian(n, dims.d_in, rng);
        const auto y = random_labels(n, dims.classes, rng);
        const CeResult r = ce_loss_and_grads(p, x, y);
        auto pb = p.blocks();
        const auto gb = r.grads.blocks();
        for (std::size_t b = 0; b < pb.size(); ++b)
            chk.compare(pb[b], gb[b], [&] { return ce_loss_and_grads(p, x, y).loss; });
        chk.next_instance();
    }
    return chk.finish();
}

GradcheckSuite check_mmd(const GradcheckOptions& opts) {
    Checker chk(opts, "weighted_mmd2");
    Rng rng = Rng::derive(opts.seed, kMmd);
    KernelConfig cfg;
    for (std::size_t t = 0; t < opts.instances; ++t) {
        const std::size_t d = between(rng, 1, 4);
        WeightedSet a{gaussian(between(rng, 1, 6), d, rng), {}, true};
        WeightedSet b{gaussian(between(rng, 1, 6), d, rng), {}, true};
        for (std::size_t i = 0; i < a.features.rows(); ++i) a.weights.push_back(rng.uniform(0.1, 1.0));
        for (std::size_t i = 0; i < b.features.rows(); ++i) b.weights.push_back(rng.uniform(0.1, 1.0));
        const double sigma2 = rng.uniform(0.5, 3.0);
        const MmdResult r = *mmd2_weighted(a, b, cfg, sigma2);
        const auto value = [&] { return mmd2_weighted(a, b, cfg, sigma2)->value; };
        chk.compare(a.features.data(), r.grad_a.data(), value);
        chk.compare(b.features.data(), r.grad_b.data(), value);
        chk.next_instance();
    }
    return chk.finish();
}

GradcheckSuite check_composite(const GradcheckOptions& opts) {
    Checker chk(opts, "composite");
    Rng rng = Rng::derive(opts.seed, kComposite);
    for (std::size_t t = 0; t < opts.instances; ++t) {
        const ModelDims dims{between(rng, 2, 4), between(rng, 2, 4), between(rng, 2, 4), 3};
        ModelParams p = random_model(dims, rng);
        const Mat xs = gaussian(6, dims.d_in, rng);
        const Mat xt = gaussian(6, dims.d_in, rng);
        // Every class gets at least two source samples so all clusters are active.
        std::vector<int> ys{0, 0, 1, 1, 2, 2};
        for (std::size_t i = ys.size(); i > 1; --i) std::swap(ys[i - 1], ys[rng.index(i)]);
        const ReferenceWeights w = reference_weights(p, xt, SelectionPolicy::soft(2));
        const double lambda = rng.uniform(0.2, 2.0);

        // The bandwidth is a constant of the objective: freeze it at the
        // median heuristic of the unperturbed features.
        KernelConfig kernel;
        kernel.bandwidth_rule = BandwidthRule::fixed;
        kernel.fixed_sigma2 = median_heuristic_bandwidth(forward_features(p, xs), forward_features(p, xt));

        const CompositeResult r = composite_loss_and_grads(p, xs, ys, xt, w, kernel, lambda);
        auto pb = p.blocks();
        const auto gb = r.grads.blocks();
        for (std::size_t b = 0; b < pb.size(); ++b)
            chk.compare(pb[b], gb[b], [&] { return composite_loss_and_grads(p, xs, ys, xt, w, kernel, lambda).total; });
        chk.next_instance();
    }
    return chk.finish();
}

}  // namespace

bool GradcheckReport::passed() const {
    return !suites.empty() && std::all_of(suites.begin(), suites.end(), [](const auto& s) { return s.passed; });
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
    check_arg(opts.instances >= 1, "gradcheck: instances must be >= 1");
    check_arg(opts.eps > 0.0 && opts.tolerance > 0.0 && opts.floor > 0.0, "gradcheck: eps, tolerance, floor must be > 0");
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckReport rep;
    rep.suites.push_back(check_ce(opts));
    rep.suites.push_back(check_mmd(opts));
    rep.suites.push_back(check_composite(opts));
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace mcrl
