#include "vdn/annotations.hpp"
#include "vdn/assignment.hpp"
#include "vdn/config.hpp"
#include "vdn/dataset.hpp"
#include "vdn/decode.hpp"
#include "vdn/error.hpp"
#include "vdn/geometry.hpp"
#include "vdn/gradcheck.hpp"
#include "vdn/metrics.hpp"
#include "vdn/model.hpp"
#include "vdn/pipeline.hpp"
#include "vdn/synth.hpp"
#include "vdn/targets.hpp"

#include <nlohmann/json.hpp>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace vdn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// Python objects cross the boundary as JSON text.
nlohmann::json json_of(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object py_of(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::array_t<double> to_numpy(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    std::memcpy(out.mutable_data(), t.data(), t.numel() * sizeof(double));
    return out;
}

Tensor from_numpy(const Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Image image_from_numpy(const ImageArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("image must be an H x W x 3 uint8 array");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
    return img;
}

py::array_t<std::uint8_t> image_to_numpy(const Image& img) {
    py::array_t<std::uint8_t> out({img.height, img.width, 3});
    std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
    return out;
}

std::vector<GroundTruthVector> vectors_from(const std::vector<std::array<double, 4>>& v) {
    std::vector<GroundTruthVector> out;
    for (const auto& e : v) out.push_back({e[0], e[1], e[2], e[3]});
    return out;
}

py::dict detection_dict(const VectorDetection& d) {
    py::dict out;
    out["x"] = d.x;
    out["y"] = d.y;
    out["alpha"] = d.alpha;
    out["beta"] = d.beta;
    out["confidence"] = d.confidence;
    out["degenerate"] = d.degenerate_direction;
    return out;
}

DecodeConfig decode_config(double threshold, double nms_radius, bool subpixel) {
    DecodeConfig c;
    c.threshold = threshold;
    c.nms_radius = nms_radius;
    c.subpixel = subpixel;
    return c;
}

}  // namespace

PYBIND11_MODULE(_vdn, m) {
    m.doc() = "Vector detection network: targets, decoding, metrics, geometry and the trained model";
    m.attr("CHECKPOINT_VERSION") = kCheckpointVersion;
    m.attr("TEMPLATE_VERSION") = kTemplateVersion;

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

    m.def(
        "encode_heatmap",
        [](const std::vector<std::array<double, 4>>& v, std::size_t w, std::size_t h, double lambda, double sigma) {
            return to_numpy(encode_heatmap(vectors_from(v), w, h, lambda, sigma));
        },
        py::arg("vectors"), py::arg("width"), py::arg("height"), py::arg("lam") = 0.25, py::arg("sigma") = 3.0,
        "Gaussian tip heatmap for (x, y, alpha, beta) vectors in input pixels.");
    m.def(
        "encode_scalarmap",
        [](const std::vector<std::array<double, 4>>& v, std::size_t w, std::size_t h, double lambda, double sigma) {
            return to_numpy(encode_scalarmap(vectors_from(v), w, h, lambda, sigma));
        },
        py::arg("vectors"), py::arg("width"), py::arg("height"), py::arg("lam") = 0.25, py::arg("sigma") = 3.0);
    m.def(
        "decode",
        [](const Array& heatmap, const Array& scalarmap, double lambda, double threshold, double nms_radius,
           bool subpixel) {
            py::list out;
            for (const VectorDetection& d : decode(from_numpy(heatmap), from_numpy(scalarmap), lambda,
                                                   decode_config(threshold, nms_radius, subpixel)))
                out.append(detection_dict(d));
            return out;
        },
        py::arg("heatmap"), py::arg("scalarmap"), py::arg("lam") = 0.25, py::arg("threshold") = 0.5,
        py::arg("nms_radius") = 6.0, py::arg("subpixel") = true);

    m.def("oks_pair", &oks_pair, py::arg("d"), py::arg("area"), py::arg("tau") = 0.1);
    m.def("vds_pair", &vds_pair, py::arg("theta"), py::arg("scale"), py::arg("kappa") = 0.2);

    m.def(
        "hungarian",
        [](const Array& cost) {
            if (cost.ndim() != 2) throw ShapeError("cost must be a 2D array");
            return hungarian(std::span<const double>(cost.data(), static_cast<std::size_t>(cost.size())),
                             static_cast<std::size_t>(cost.shape(0)), static_cast<std::size_t>(cost.shape(1)));
        },
        py::arg("cost"), "Per row, the assigned column or -1.");
    m.def(
        "estimate_homography",
        [](const std::vector<std::array<double, 2>>& src, const std::vector<std::array<double, 2>>& dst) {
            if (src.size() != dst.size()) throw DataError("source and target counts differ");
            std::vector<Correspondence> pairs;
            for (std::size_t i = 0; i < src.size(); ++i)
                pairs.push_back({{src[i][0], src[i][1]}, {dst[i][0], dst[i][1]}});
            const HomographyFit fit = estimate_homography(pairs);
            py::array_t<double> h({3, 3});
            std::memcpy(h.mutable_data(), fit.homography.m.data(), 9 * sizeof(double));
            return h;
        },
        py::arg("source"), py::arg("target"));

    m.def(
        "read_meter",
        [](const py::list& detections, const py::object& tmpl, const Array& homography) {
            std::vector<VectorDetection> dets;
            for (const auto& o : detections) {
                const py::dict d = o.cast<py::dict>();
                VectorDetection v;
                v.x = d["x"].cast<double>();
                v.y = d["y"].cast<double>();
                v.alpha = d["alpha"].cast<double>();
                v.beta = d["beta"].cast<double>();
                v.confidence = d.contains("confidence") ? d["confidence"].cast<double>() : 1.0;
                v.degenerate_direction = d.contains("degenerate") && d["degenerate"].cast<bool>();
                dets.push_back(v);
            }
            if (homography.size() != 9) throw ShapeError("homography must be 3 x 3");
            Homography h;
            std::copy(homography.data(), homography.data() + 9, h.m.begin());
            py::list out;
            for (const PointerReading& r : read_meter(dets, json_of(tmpl).get<MeterTemplate>(), h)) {
                py::dict e;
                e["pointer"] = r.pointer;
                e["dial"] = r.dial;
                e["value"] = r.reading ? py::cast(r.reading->value) : py::none();
                out.append(e);
            }
            return out;
        },
        py::arg("detections"), py::arg("template"), py::arg("homography"),
        "Readings for detections in image pixels; template is a meter-template-1 dict.");

    m.def(
        "render_dial",
        [](std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            const DialSpec spec = sample_spec(rng);
            const RenderedDial r = render_dial(spec);
            AnnotationSet set;
            set.images.push_back(r.record);
            return py::make_tuple(image_to_numpy(r.image), py_of(annotations_to_json(set)),
                                  py_of(nlohmann::json(canonical_template(spec))));
        },
        py::arg("seed"), "Random synthetic dial: (image, COCO annotations, canonical template).");

    m.def(
        "config_hash", [](const py::object& cfg) { return json_of(cfg).get<RunConfig>().hash(); },
        py::arg("config") = py::dict(), "Hash of a run config dict; unknown keys raise ValueError.");

    m.def(
        "gradcheck",
        [](std::uint64_t seed) {
            py::list out;
            auto rows = gradcheck_ops(seed);
            const auto e2e = gradcheck_end_to_end(seed);
            rows.insert(rows.end(), e2e.begin(), e2e.end());
            for (const GradCheckRow& r : rows) out.append(py::make_tuple(r.op, r.wrt, r.rel_error, r.tolerance));
            return out;
        },
        py::arg("seed") = 1, "(op, wrt, relative error, tolerance) for every gradient check.");

    py::class_<VdnModel>(m, "Model")
        .def(py::init([](const py::object& cfg, std::uint64_t seed) {
                 return VdnModel(json_of(cfg).get<ModelConfig>(), seed);
             }),
             py::arg("config") = py::dict(), py::arg("seed") = 0)
        .def_static("load", [](const std::string& path) { return load(path); }, py::arg("path"))
        .def("save", [](const VdnModel& m, const std::string& path) { save(m, path); }, py::arg("path"))
        .def_property_readonly("config", [](const VdnModel& m) { return py_of(nlohmann::json(m.config())); })
        .def_property_readonly("num_params", &VdnModel::count_params)
        .def(
            "forward",
            [](const VdnModel& m, const ImageArray& patch) {
                const ModelOutput o = m.forward(to_tensor(image_from_numpy(patch)));
                return py::make_tuple(to_numpy(o.heatmap.value()), to_numpy(o.scalarmap.value()));
            },
            py::arg("patch"), "Heatmap (1 x 1 x h x w) and scalarmap (1 x 2 x h x w) for one uint8 patch.")
        .def(
            "detect",
            [](const VdnModel& m, const ImageArray& patch, double threshold, double nms_radius) {
                const std::vector<Image> one{image_from_numpy(patch)};
                const auto dets = detect(m, one, decode_config(threshold, nms_radius, true));
                py::list out;
                for (const VectorDetection& d : dets[0])
                    out.append(detection_dict(d));
                return out;
            },
            py::arg("patch"), py::arg("threshold") = 0.5, py::arg("nms_radius") = 6.0,
            "Pointer vectors in patch pixels.");
}
