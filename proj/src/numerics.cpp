#include "mcrl/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mcrl {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    expects(data_.size() == rows_ * cols_, "Mat: data length " + std::to_string(data_.size()) +
                                               " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Mat::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat Mat::gather_rows(std::span<const std::size_t> idx) const {
    Mat out(idx.size(), cols_);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        expects(idx[i] < rows_, "gather_rows: index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols_), cols_,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
}

Mat matmul(const Mat& a, const Mat& b) {
    expects(a.cols() == b.rows(), "matmul: inner dimensions differ");
    Mat c(a.rows(), b.cols());
    const std::size_t n = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a(i, k);
            auto bk = b.row(k);
            for (std::size_t j = 0; j < m; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    expects(a.rows() == b.rows(), "matmul_tn: row counts differ");
    Mat c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto ak = a.row(k);
        auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    expects(a.cols() == b.cols(), "matmul_nt: column counts differ");
    Mat c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void add_row_vector(Mat& m, std::span<const double> v) {
    expects(v.size() == m.cols(), "add_row_vector: length mismatch");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < v.size(); ++j) r[j] += v[j];
    }
}

Vec column_sums(const Mat& m) {
    Vec s(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) s[j] += r[j];
    }
    return s;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    expects(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff: shape mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

Vec softmax(std::span<const double> logits) {
    check_arg(!logits.empty(), "softmax: empty input");
    for (double z : logits) check_arg(std::isfinite(z), "softmax: non-finite logit");
    const double mx = *std::max_element(logits.begin(), logits.end());
    Vec p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(std::max(logits[i] - mx, -kExpClamp));
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

Mat softmax_rows(const Mat& logits) {
    Mat p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        Vec r = softmax(logits.row(i));
        std::copy(r.begin(), r.end(), p.row(i).begin());
    }
    return p;
}

double sigmoid(double x) {
    check_arg(std::isfinite(x), "sigmoid: non-finite input");
    x = std::clamp(x, -kExpClamp, kExpClamp);
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    return std::min(s, std::nextafter(1.0, 0.0));
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
    h = splitmix64(h ^ splitmix64(index + 0x85157AF5ULL));
    return Rng(h);
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::size_t Rng::index(std::size_t n) {
    check_arg(n > 0, "Rng::index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[index(i)]);
    return p;
}

SgdState::SgdState(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {
    check_arg(std::isfinite(learning_rate) && learning_rate >= 0.0, "sgd: learning_rate must be >= 0");
    check_arg(momentum >= 0.0 && momentum < 1.0, "sgd: momentum must be in [0,1)");
}

void SgdState::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
    expects(params.size() == grads.size(), "sgd_step: block count mismatch");
    if (velocity_.empty()) {
        velocity_.reserve(params.size());
        for (auto p : params) velocity_.emplace_back(p.size(), 0.0);
    }
    expects(velocity_.size() == params.size(), "sgd_step: block count changed");
    for (std::size_t b = 0; b < params.size(); ++b) {
        expects(params[b].size() == grads[b].size() && velocity_[b].size() == params[b].size(),
                "sgd_step: block " + std::to_string(b) + " shape mismatch");
        for (double g : grads[b]) check_arg(std::isfinite(g), "sgd_step: non-finite gradient");
        auto& v = velocity_[b];
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = momentum_ * v[i] + grads[b][i];
            params[b][i] -= lr_ * v[i];
        }
    }
}

}  // namespace mcrl
