#include "mcrl/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace mcrl {

namespace {

Mat glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Mat m(fan_in, fan_out);
    for (double& v : m.data()) v = rng.uniform(-a, a);
    return m;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& d) {
    expects(d.d_in > 0 && d.hidden > 0 && d.d_feat > 0, "model dims must be positive");
    expects(d.classes >= 2, "model needs at least 2 classes");
    return ModelParams{Mat(d.d_in, d.hidden), Vec(d.hidden, 0.0), Mat(d.hidden, d.d_feat),
                       Vec(d.d_feat, 0.0),    Mat(d.d_feat, d.classes), Vec(d.classes, 0.0)};
}

ModelParams ModelParams::init(const ModelDims& d, Rng& rng) {
    ModelParams p = zeros(d);
    p.w1 = glorot(d.d_in, d.hidden, rng);
    p.w2 = glorot(d.hidden, d.d_feat, rng);
    p.wc = glorot(d.d_feat, d.classes, rng);
    return p;
}

ModelDims ModelParams::dims() const { return {w1.rows(), w1.cols(), w2.cols(), wc.cols()}; }

void ModelParams::validate() const {
    const ModelDims d = dims();
    expects(d.d_in > 0 && d.hidden > 0 && d.d_feat > 0 && d.classes >= 2, "model dims must be positive, C >= 2");
    expects(b1.size() == d.hidden && w2.rows() == d.hidden && b2.size() == d.d_feat && wc.rows() == d.d_feat &&
                bc.size() == d.classes,
            "model parameter blocks have inconsistent shapes");
}

bool ModelParams::all_finite() const {
    for (auto b : blocks())
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

std::vector<std::span<double>> ModelParams::blocks() {
    return {w1.data(), b1, w2.data(), b2, wc.data(), bc};
}

std::vector<std::span<const double>> ModelParams::blocks() const {
    return {w1.data(), b1, w2.data(), b2, wc.data(), bc};
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (auto b : blocks()) n += b.size();
    return n;
}

FeatureForward forward_features_cached(const ModelParams& p, const Mat& x) {
    expects(x.cols() == p.w1.rows(), "forward_features: input has " + std::to_string(x.cols()) +
                                         " columns, model expects " + std::to_string(p.w1.rows()));
    FeatureForward out;
    out.hidden = matmul(x, p.w1);
    add_row_vector(out.hidden, p.b1);
    for (double& v : out.hidden.data()) v = std::tanh(v);
    out.features = matmul(out.hidden, p.w2);
    add_row_vector(out.features, p.b2);
    return out;
}

Mat forward_features(const ModelParams& p, const Mat& x) { return forward_features_cached(p, x).features; }

Mat forward_logits(const ModelParams& p, const Mat& features) {
    expects(features.cols() == p.wc.rows(), "forward_logits: feature width mismatch");
    Mat z = matmul(features, p.wc);
    add_row_vector(z, p.bc);
    return z;
}

HeadGrads ce_head_loss(const ModelParams& p, const Mat& features, std::span<const int> labels) {
    expects(labels.size() == features.rows(), "ce_loss: label count != sample count");
    expects(!labels.empty(), "ce_loss: empty batch");
    const std::size_t n = features.rows(), c = p.wc.cols();
    for (int y : labels)
        check_arg(y >= 0 && static_cast<std::size_t>(y) < c, "ce_loss: label " + std::to_string(y) + " out of range");

    const Mat z = forward_logits(p, features);
    Mat dz(n, c);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto zi = z.row(i);
        const double mx = *std::max_element(zi.begin(), zi.end());
        double sum = 0.0;
        for (double v : zi) sum += std::exp(std::max(v - mx, -kExpClamp));
        const double log_sum = std::log(sum);
        const auto yi = static_cast<std::size_t>(labels[i]);
        loss -= std::max(zi[yi] - mx, -kExpClamp) - log_sum;
        auto di = dz.row(i);
        for (std::size_t k = 0; k < c; ++k) {
            const double prob = std::exp(std::max(zi[k] - mx, -kExpClamp)) / sum;
            di[k] = (prob - (k == yi ? 1.0 : 0.0)) * inv_n;
        }
    }
    HeadGrads g;
    g.loss = loss * inv_n;
    g.wc = matmul_tn(features, dz);
    g.bc = column_sums(dz);
    g.grad_features = matmul_nt(dz, p.wc);
    return g;
}

ModelParams backward_through_g(const ModelParams& p, const Mat& x, const FeatureForward& fwd,
                               const Mat& grad_features) {
    expects(grad_features.rows() == x.rows() && grad_features.cols() == p.w2.cols(),
            "backward_through_g: grad_features shape mismatch");
    ModelParams g = ModelParams::zeros(p.dims());
    g.w2 = matmul_tn(fwd.hidden, grad_features);
    g.b2 = column_sums(grad_features);
    Mat da = matmul_nt(grad_features, p.w2);
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double h = fwd.hidden.data()[i];
        da.data()[i] *= 1.0 - h * h;
    }
    g.w1 = matmul_tn(x, da);
    g.b1 = column_sums(da);
    return g;
}

ModelParams backward_through_g(const ModelParams& p, const Mat& x, const Mat& grad_features) {
    return backward_through_g(p, x, forward_features_cached(p, x), grad_features);
}

CeResult ce_loss_and_grads(const ModelParams& p, const Mat& x, std::span<const int> labels) {
    const FeatureForward fwd = forward_features_cached(p, x);
    HeadGrads head = ce_head_loss(p, fwd.features, labels);
    CeResult r;
    r.loss = head.loss;
    r.grads = backward_through_g(p, x, fwd, head.grad_features);
    r.grads.wc = std::move(head.wc);
    r.grads.bc = std::move(head.bc);
    r.grad_features = std::move(head.grad_features);
    return r;
}

// ---------------------------------------------------------------------------

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint64_t u(int width) {
        if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
            throw CheckpointError(CheckpointErrc::corrupt, "checkpoint truncated at byte " + std::to_string(pos_));
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    void doubles(std::span<double> out) {
        for (double& d : out) d = std::bit_cast<double>(u(8));
    }

    std::string_view take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw CheckpointError(CheckpointErrc::corrupt, "checkpoint truncated");
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
    ckpt.params.validate();
    const ModelDims d = ckpt.params.dims();
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put_u32(out, ckpt.format_version);
    put_u32(out, 0);
    put_u64(out, d.d_in);
    put_u64(out, d.hidden);
    put_u64(out, d.d_feat);
    put_u64(out, d.classes);
    put_u64(out, ckpt.rng_seed);
    put_u64(out, ckpt.epoch);
    for (auto block : ckpt.params.blocks())
        for (double v : block) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.remaining() < sizeof kCheckpointMagic ||
        r.take(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic))
        throw CheckpointError(CheckpointErrc::corrupt, "not a checkpoint (bad magic)");
    Checkpoint ck;
    ck.format_version = static_cast<std::uint32_t>(r.u(4));
    if (ck.format_version != kCheckpointVersion)
        throw CheckpointError(CheckpointErrc::version_mismatch,
                              "checkpoint format_version " + std::to_string(ck.format_version) + ", expected " +
                                  std::to_string(kCheckpointVersion));
    r.u(4);
    ModelDims d;
    d.d_in = r.u(8);
    d.hidden = r.u(8);
    d.d_feat = r.u(8);
    d.classes = r.u(8);
    ck.rng_seed = r.u(8);
    ck.epoch = r.u(8);
    constexpr std::uint64_t kMaxDim = 1u << 20;
    if (d.d_in == 0 || d.hidden == 0 || d.d_feat == 0 || d.classes < 2 || d.d_in > kMaxDim ||
        d.hidden > kMaxDim || d.d_feat > kMaxDim || d.classes > kMaxDim)
        throw CheckpointError(CheckpointErrc::corrupt, "checkpoint has invalid dims");
    const std::size_t expected = 8 * (d.d_in * d.hidden + d.hidden + d.hidden * d.d_feat + d.d_feat +
                                      d.d_feat * d.classes + d.classes);
    if (r.remaining() != expected)
        throw CheckpointError(CheckpointErrc::corrupt, "checkpoint payload is " + std::to_string(r.remaining()) +
                                                           " bytes, expected " + std::to_string(expected));
    ck.params = ModelParams::zeros(d);
    for (auto block : ck.params.blocks()) r.doubles(block);
    if (!ck.params.all_finite()) throw CheckpointError(CheckpointErrc::corrupt, "checkpoint holds non-finite values");
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::string bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointErrc::io, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointErrc::io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointErrc::io, "cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw CheckpointError(CheckpointErrc::io, "read failed: " + path.string());
    return decode_checkpoint(bytes);
}

void bind_checkpoint(const Checkpoint& ckpt, std::size_t d_in, std::size_t classes) {
    const ModelDims d = ckpt.params.dims();
    if (d.d_in != d_in)
        throw CheckpointError(CheckpointErrc::dimension_mismatch, "checkpoint expects d_in=" + std::to_string(d.d_in) +
                                                                      ", data has " + std::to_string(d_in));
    if (d.classes != classes)
        throw CheckpointError(CheckpointErrc::dimension_mismatch, "checkpoint has C=" + std::to_string(d.classes) +
                                                                      ", data has " + std::to_string(classes));
}

}  // namespace mcrl
