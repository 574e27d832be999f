#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mcrl/adapt.hpp"
#include "mcrl/cli.hpp"
#include "mcrl/report.hpp"

namespace py = pybind11;
using namespace mcrl;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Mat to_mat(const Array& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
    const auto* p = a.data();
    return Mat(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
               std::vector<double>(p, p + a.size()));
}

Array to_array(const Mat& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::dict dataset_dict(const EmbeddingDataset& d) {
    py::dict out;
    out["x"] = to_array(d.features());
    if (d.has_evaluation_labels()) {
        const auto y = d.evaluation_labels();
        out["y"] = py::array_t<int>(static_cast<py::ssize_t>(y.size()), y.data());
    } else {
        out["y"] = py::none();
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multi-cluster reference learning core";
    m.attr("__version__") = kLibraryVersion;

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

    m.def(
        "generate",
        [](const std::string& preset, std::uint64_t seed) {
            ShiftSpec spec = preset_by_name(preset);
            spec.seed = seed;
            const Benchmark b = generate_shift_benchmark(spec);
            py::dict out;
            out["source"] = dataset_dict(b.source);
            out["target"] = dataset_dict(b.target);
            out["classes"] = spec.classes;
            return out;
        },
        py::arg("preset"), py::arg("seed"), "Synthetic source/target pair as numpy arrays.");

    m.def(
        "mmd2",
        [](const Array& a, const Array& b, std::optional<double> sigma2) {
            const WeightedSet sa = WeightedSet::uniform(to_mat(a)), sb = WeightedSet::uniform(to_mat(b));
            const KernelConfig cfg;
            const auto r = sigma2 ? mmd2_weighted(sa, sb, cfg, *sigma2) : mmd2_weighted(sa, sb, cfg);
            return r->value;
        },
        py::arg("a"), py::arg("b"), py::arg("sigma2") = py::none(),
        "Biased multi-kernel MMD^2; median-heuristic bandwidth unless sigma2 is given.");

    m.def(
        "median_bandwidth", [](const Array& a, const Array& b) { return median_heuristic_bandwidth(to_mat(a), to_mat(b)); },
        py::arg("a"), py::arg("b"));

    m.def(
        "macro_f1",
        [](const py::array_t<std::size_t, py::array::c_style | py::array::forcecast>& cm) {
            if (cm.ndim() != 2 || cm.shape(0) != cm.shape(1)) throw py::value_error("expected a square matrix");
            const auto* p = cm.data();
            return macro_f1(ConfusionMatrix(static_cast<std::size_t>(cm.shape(0)),
                                            std::vector<std::size_t>(p, p + cm.size())));
        },
        py::arg("confusion"));

    m.def(
        "topk_accuracy",
        [](const Array& logits, const std::vector<int>& labels, std::size_t k) {
            return topk_accuracy(to_mat(logits), labels, k);
        },
        py::arg("logits"), py::arg("labels"), py::arg("k"));

    m.def(
        "run",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a command-line invocation in-process; returns (exit_code, stdout, stderr).");
}
