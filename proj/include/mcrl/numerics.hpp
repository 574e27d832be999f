#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mcrl/errors.hpp"

namespace mcrl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Mat identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

    // Rows picked by index, in the given order.
    Mat gather_rows(std::span<const std::size_t> idx) const;

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
// a^T * b
Mat matmul_tn(const Mat& a, const Mat& b);
// a * b^T
Mat matmul_nt(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);

void add_row_vector(Mat& m, std::span<const double> v);
Vec column_sums(const Mat& m);
double max_abs_diff(const Mat& a, const Mat& b);

// Inputs are clamped to +-kExpClamp before exponentiation.
inline constexpr double kExpClamp = 500.0;

Vec softmax(std::span<const double> logits);
Mat softmax_rows(const Mat& logits);
double sigmoid(double x);

// Seeded generator. The engine is std::mt19937_64, whose output sequence is
// fixed by the standard; all distributions are implemented here so that the
// derived streams do not depend on the standard library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    // Independent stream keyed on (seed, stream, index), mixed through splitmix64.
    static Rng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return engine_(); }
    // [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Standard normal via the Marsaglia polar method.
    double normal();
    // Uniform integer in [0, n) by rejection sampling.
    std::size_t index(std::size_t n);

    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

// Classic heavy-ball momentum: v <- momentum*v + g; p <- p - lr*v.
class SgdState {
public:
    SgdState(double learning_rate, double momentum);

    double learning_rate() const { return lr_; }
    double momentum() const { return momentum_; }
    const std::vector<Vec>& velocity() const { return velocity_; }

    // params[i] and grads[i] are flat parameter blocks. Velocity buffers are
    // created lazily on first call and their shapes fixed afterwards.
    void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);

private:
    double lr_;
    double momentum_;
    std::vector<Vec> velocity_;
};

}  // namespace mcrl
