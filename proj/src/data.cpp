#include "mcrl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mcrl {

namespace {

void check_labels(std::span<const int> labels, std::size_t n, std::size_t classes) {
    check_arg(labels.size() == n, "dataset: label count " + std::to_string(labels.size()) + " != rows " +
                                      std::to_string(n));
    for (int y : labels)
        check_arg(y >= 0 && static_cast<std::size_t>(y) < classes,
                  "dataset: label " + std::to_string(y) + " outside [0," + std::to_string(classes) + ")");
}

}  // namespace

EmbeddingDataset::EmbeddingDataset(Mat features, std::optional<std::vector<int>> labels, std::size_t classes,
                                   std::string provenance)
    : features_(std::move(features)), labels_(std::move(labels)), classes_(classes), provenance_(std::move(provenance)) {
    check_arg(features_.all_finite(), "dataset: non-finite feature value");
    if (labels_) check_labels(*labels_, features_.rows(), classes_);
}

std::span<const int> EmbeddingDataset::labels() const {
    check_arg(labels_.has_value(), "dataset '" + provenance_ + "' has no labels");
    check_arg(!hidden_, "dataset '" + provenance_ + "': labels are reserved for evaluation");
    return *labels_;
}

std::span<const int> EmbeddingDataset::evaluation_labels() const {
    check_arg(labels_.has_value(), "dataset '" + provenance_ + "' has no labels");
    return *labels_;
}

EmbeddingDataset EmbeddingDataset::with_hidden_labels() const {
    EmbeddingDataset d = *this;
    d.hidden_ = true;
    return d;
}

EmbeddingDataset EmbeddingDataset::with_visible_labels() const {
    EmbeddingDataset d = *this;
    d.hidden_ = false;
    return d;
}

// ---------------------------------------------------------------------------

void ShiftSpec::validate() const {
    check_arg(classes >= 2, "shift spec: classes must be >= 2");
    check_arg(dims >= 1, "shift spec: dims must be >= 1");
    check_arg(n_per_class_source >= 1, "shift spec: n_per_class_source must be >= 1");
    check_arg(n_per_class_target >= 1, "shift spec: n_per_class_target must be >= 1");
    check_arg(std::isfinite(source_sigma) && source_sigma > 0.0, "shift spec: source_sigma must be > 0");
    check_arg(std::isfinite(target_sigma) && target_sigma >= source_sigma,
              "shift spec: target_sigma must be >= source_sigma");
    check_arg(std::isfinite(rotation_angle), "shift spec: rotation_angle must be finite");
    check_arg(std::isfinite(bias) && bias >= 0.0, "shift spec: bias must be >= 0");
    check_arg(class_overlap >= 0.0 && class_overlap <= 1.0, "shift spec: class_overlap must be in [0,1]");
}

ShiftSpec preset_ambiguity16() {
    ShiftSpec s;
    s.name = "ambiguity-16";
    return s;
}

ShiftSpec preset_null16() {
    ShiftSpec s;
    s.name = "null-16";
    s.source_sigma = 0.5;
    s.target_sigma = 0.5;
    s.rotation_angle = 0.0;
    s.bias = 0.0;
    s.class_overlap = 0.0;
    return s;
}

ShiftSpec preset_by_name(const std::string& name) {
    if (name == "ambiguity-16") return preset_ambiguity16();
    if (name == "null-16") return preset_null16();
    throw InvalidArgument("unknown preset '" + name + "' (expected ambiguity-16 or null-16)");
}

std::string shift_spec_to_json(const ShiftSpec& s) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["classes"] = s.classes;
    j["dims"] = s.dims;
    j["n_per_class_source"] = s.n_per_class_source;
    j["n_per_class_target"] = s.n_per_class_target;
    j["source_sigma"] = s.source_sigma;
    j["target_sigma"] = s.target_sigma;
    j["rotation_angle"] = s.rotation_angle;
    j["bias"] = s.bias;
    j["class_overlap"] = s.class_overlap;
    j["seed"] = s.seed;
    return j.dump(2) + "\n";
}

ShiftSpec shift_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("shift spec: invalid JSON: ") + e.what());
    }
    check_arg(j.is_object(), "shift spec: expected a JSON object");
    ShiftSpec s;
    if (j.contains("preset")) s = preset_by_name(j.at("preset").get<std::string>());
    static const char* kKnown[] = {"preset",       "name",          "classes", "dims",  "n_per_class_source",
                                   "n_per_class_target", "source_sigma", "target_sigma", "rotation_angle",
                                   "bias",          "class_overlap", "seed"};
    for (const auto& [key, _] : j.items())
        check_arg(std::find(std::begin(kKnown), std::end(kKnown), key) != std::end(kKnown),
                  "shift spec: unknown field '" + key + "'");
    auto field = [&](const char* key, auto& out) {
        if (!j.contains(key)) return;
        try {
            out = j.at(key).get<std::decay_t<decltype(out)>>();
        } catch (const nlohmann::json::exception&) {
            throw InvalidArgument(std::string("shift spec: field '") + key + "' has the wrong type");
        }
    };
    field("name", s.name);
    field("classes", s.classes);
    field("dims", s.dims);
    field("n_per_class_source", s.n_per_class_source);
    field("n_per_class_target", s.n_per_class_target);
    field("source_sigma", s.source_sigma);
    field("target_sigma", s.target_sigma);
    field("rotation_angle", s.rotation_angle);
    field("bias", s.bias);
    field("class_overlap", s.class_overlap);
    field("seed", s.seed);
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------

namespace {

enum Stream : std::uint64_t { kMeans = 1, kOverlap = 2, kBias = 3, kSourceNoise = 4, kTargetNoise = 5, kHoldout = 6 };

struct Geometry {
    Mat source_means;
    Mat target_means;
};

Geometry benchmark_geometry(const ShiftSpec& spec) {
    const std::size_t c = spec.classes, d = spec.dims;
    // 4 * sigma_s * sqrt(d / 4)
    const double radius = 2.0 * spec.source_sigma * std::sqrt(static_cast<double>(d));

    Geometry g;
    g.source_means = Mat(c, d);
    Rng means_rng = Rng::derive(spec.seed, kMeans);
    for (std::size_t k = 0; k < c; ++k) {
        auto row = g.source_means.row(k);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& v : row) {
                v = means_rng.normal();
                norm += v * v;
            }
        } while (norm == 0.0);
        norm = std::sqrt(norm);
        for (double& v : row) v *= radius / norm;
    }

    // Rotate each consecutive coordinate pair by the same angle, then
    // translate along a random unit direction.
    g.target_means = g.source_means;
    const double cs = std::cos(spec.rotation_angle), sn = std::sin(spec.rotation_angle);
    for (std::size_t k = 0; k < c; ++k) {
        auto row = g.target_means.row(k);
        for (std::size_t a = 0; a + 1 < d; a += 2) {
            const double x = row[a], y = row[a + 1];
            row[a] = cs * x - sn * y;
            row[a + 1] = sn * x + cs * y;
        }
    }
    Rng bias_rng = Rng::derive(spec.seed, kBias);
    Vec dir(d);
    double norm = 0.0;
    for (double& v : dir) {
        v = bias_rng.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : dir) v *= spec.bias / (norm > 0.0 ? norm : 1.0);
    add_row_vector(g.target_means, dir);

    // Classes are paired at random; round(overlap * C/2) of the pairs have
    // the distance between their target means halved.
    Rng overlap_rng = Rng::derive(spec.seed, kOverlap);
    const auto perm = overlap_rng.permutation(c);
    const auto pulled = static_cast<std::size_t>(std::lround(spec.class_overlap * static_cast<double>(c / 2)));
    for (std::size_t p = 0; p < pulled; ++p) {
        auto ra = g.target_means.row(perm[2 * p]);
        auto rb = g.target_means.row(perm[2 * p + 1]);
        for (std::size_t k = 0; k < d; ++k) {
            const double a = ra[k], b = rb[k];
            ra[k] = a + 0.25 * (b - a);
            rb[k] = b + 0.25 * (a - b);
        }
    }
    return g;
}

EmbeddingDataset sample_around(const Mat& means, std::size_t n_per_class, double sigma, Rng& rng,
                               std::string provenance) {
    const std::size_t c = means.rows(), d = means.cols();
    Mat x(c * n_per_class, d);
    std::vector<int> y(c * n_per_class);
    std::size_t r = 0;
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t i = 0; i < n_per_class; ++i, ++r) {
            auto row = x.row(r);
            auto mu = means.row(k);
            for (std::size_t j = 0; j < d; ++j) row[j] = mu[j] + sigma * rng.normal();
            y[r] = static_cast<int>(k);
        }
    return EmbeddingDataset(std::move(x), std::move(y), c, std::move(provenance));
}

}  // namespace

Benchmark generate_shift_benchmark(const ShiftSpec& spec) {
    spec.validate();
    const Geometry g = benchmark_geometry(spec);
    Rng src_rng = Rng::derive(spec.seed, kSourceNoise);
    Rng tgt_rng = Rng::derive(spec.seed, kTargetNoise);
    const std::string tag = spec.name + "/seed=" + std::to_string(spec.seed);
    Benchmark b;
    b.source = sample_around(g.source_means, spec.n_per_class_source, spec.source_sigma, src_rng, tag + "/source");
    b.target = sample_around(g.target_means, spec.n_per_class_target, spec.target_sigma, tgt_rng, tag + "/target")
                   .with_hidden_labels();
    return b;
}

EmbeddingDataset generate_source_holdout(const ShiftSpec& spec, std::size_t n_per_class) {
    spec.validate();
    check_arg(n_per_class >= 1, "holdout: n_per_class must be >= 1");
    const Geometry g = benchmark_geometry(spec);
    Rng rng = Rng::derive(spec.seed, kHoldout);
    return sample_around(g.source_means, n_per_class, spec.source_sigma, rng,
                         spec.name + "/seed=" + std::to_string(spec.seed) + "/source-holdout");
}

// ---------------------------------------------------------------------------

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string to_csv(const EmbeddingDataset& ds) {
    std::string out;
    const bool labeled = ds.has_evaluation_labels();
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        if (j) out += ',';
        out += 'f' + std::to_string(j);
    }
    if (labeled) out += ",label";
    out += '\n';
    const auto labels = labeled ? ds.evaluation_labels() : std::span<const int>{};
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto row = ds.features().row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += format_double(row[j]);
        }
        if (labeled) {
            out += ',';
            out += std::to_string(labels[i]);
        }
        out += '\n';
    }
    return out;
}

void save_csv(const EmbeddingDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CsvError(CsvError::Kind::io, 0, "cannot open " + path.string() + " for writing");
    const std::string text = to_csv(ds);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw CsvError(CsvError::Kind::io, 0, "write failed: " + path.string());
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

EmbeddingDataset parse_csv(std::string_view text, const CsvSchema& schema, const std::string& provenance) {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::size_t line_no = 0, pos = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size()) return false;
        const auto nl = text.find('\n', pos);
        line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        return true;
    };

    std::string_view header;
    if (!next_line(header)) throw CsvError(CsvError::Kind::schema, 0, "CSV is empty (missing header)");
    auto cols = split_commas(trim(header));
    for (auto& c : cols) c = trim(c);
    bool labeled = !cols.empty() && cols.back() == "label";
    const std::size_t d = cols.size() - (labeled ? 1 : 0);
    for (std::size_t j = 0; j < d; ++j)
        if (cols[j] != "f" + std::to_string(j))
            throw CsvError(CsvError::Kind::schema, 1,
                           "header column " + std::to_string(j + 1) + " is '" + std::string(cols[j]) + "', expected f" +
                               std::to_string(j));
    if (d == 0) throw CsvError(CsvError::Kind::schema, 1, "header has no feature columns");
    if (schema.dims && *schema.dims != d)
        throw CsvError(CsvError::Kind::schema, 1,
                       "header has " + std::to_string(d) + " feature columns, expected " + std::to_string(*schema.dims));
    if (schema.labels == CsvSchema::Labels::required && !labeled)
        throw CsvError(CsvError::Kind::schema, 1, "header lacks the required label column");
    if (schema.labels == CsvSchema::Labels::forbidden && labeled)
        throw CsvError(CsvError::Kind::schema, 1, "unexpected label column");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t rows = 0;
    std::string_view line;
    while (next_line(line)) {
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split_commas(line);
        if (cells.size() != cols.size())
            throw CsvError(CsvError::Kind::schema, line_no,
                           "line " + std::to_string(line_no) + ": " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(cols.size()));
        for (std::size_t j = 0; j < d; ++j) {
            const auto cell = trim(cells[j]);
            double v = 0.0;
            const char* first = cell.data();
            if (!cell.empty() && cell.front() == '+') ++first;
            const auto res = std::from_chars(first, cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw CsvError(CsvError::Kind::parse, line_no,
                               "line " + std::to_string(line_no) + ", column f" + std::to_string(j) +
                                   ": not a finite number: '" + std::string(cell) + "'");
            values.push_back(v);
        }
        if (labeled) {
            const auto cell = trim(cells.back());
            int y = 0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), y);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || y < 0)
                throw CsvError(CsvError::Kind::parse, line_no,
                               "line " + std::to_string(line_no) + ": invalid label '" + std::string(cell) + "'");
            if (schema.classes && static_cast<std::size_t>(y) >= *schema.classes)
                throw CsvError(CsvError::Kind::parse, line_no,
                               "line " + std::to_string(line_no) + ": label " + std::to_string(y) + " >= C=" +
                                   std::to_string(*schema.classes));
            labels.push_back(y);
        }
        ++rows;
    }

    std::size_t classes = schema.classes.value_or(0);
    if (!schema.classes && labeled && !labels.empty())
        classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
    classes = std::max<std::size_t>(classes, 2);
    std::optional<std::vector<int>> lab;
    if (labeled) lab = std::move(labels);
    return EmbeddingDataset(Mat(rows, d, std::move(values)), std::move(lab), classes, provenance);
}

EmbeddingDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CsvError(CsvError::Kind::io, 0, "cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_csv(text, schema, path.string());
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, Rng& rng) {
    check_arg(n > 0, "batches: empty dataset");
    check_arg(batch_size >= 1, "batches: batch_size must be >= 1");
    const auto perm = rng.permutation(n);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (out.size() >= 2 && out.back().size() < 2 && batch_size >= 2) {
        auto tail = std::move(out.back());
        out.pop_back();
        out.back().insert(out.back().end(), tail.begin(), tail.end());
    }
    return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t stream, std::uint64_t epoch) {
    Rng rng = Rng::derive(seed, stream, epoch);
    return batches(n, batch_size, rng);
}

}  // namespace mcrl
