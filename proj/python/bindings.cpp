#include "cli.hpp"

#include "vpl/codec.hpp"
#include "vpl/conformance.hpp"
#include "vpl/error.hpp"
#include "vpl/ingest.hpp"
#include "vpl/manifest.hpp"
#include "vpl/pipeline.hpp"
#include "vpl/rng.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

namespace py = pybind11;
using namespace vpl;

namespace {

BBox corner_box(const std::array<double, 4>& v) { return BBox::abs_corner(v[0], v[1], v[2], v[3]); }

std::string extract(const std::string& detectorOutput, double tau, int width, int height) {
    const DetectionOutput out = parse_detection_output(detectorOutput);
    ojson items = ojson::array();
    for (const auto& pg : extract_pseudo_gts(out, tau, {width, height})) items.push_back(pseudo_gt_to_json(pg));
    return items.dump();
}

std::string prompt_for(const std::array<double, 4>& box, const std::string& name, const std::string& imageId,
                       int width, int height) {
    const PseudoGT pg{{0, name, corner_box(box), imageId, false}, 1.0, 0, Verification::Unverified};
    return format_prompt(pg, {imageId, "", width, height, {}}).promptText;
}

std::vector<std::vector<int>> mask_for(const std::array<double, 4>& box, int width, int height, int gridW,
                                       int gridH) {
    const BinaryMask m = make_binary_mask(corner_box(box), {width, height}, gridW, gridH);
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(m.height));
    for (int i = 0; i < m.height; ++i) {
        for (int j = 0; j < m.width; ++j) rows[static_cast<std::size_t>(i)].push_back(m.at(i, j));
    }
    return rows;
}

using ResultRow = std::tuple<std::string, int, std::array<double, 4>, double>;

std::string evaluate_results(const std::string& gtCoco, const std::vector<ResultRow>& results,
                             const std::string& mode, std::size_t maxDets) {
    const Dataset gt = parse_coco(gtCoco);
    DetectionsByImage dets;
    for (const auto& [image, category, xywh, score] : results) {
        dets[image].push_back(
            {BBox::abs_corner(xywh[0], xywh[1], xywh[0] + xywh[2], xywh[1] + xywh[3]), category, score});
    }
    EvalConfig cfg;
    if (mode == "coco") {
        cfg.mode = EvalMode::Coco;
    } else if (mode != "voc") {
        throw ValidationError("mode must be 'voc' or 'coco'");
    }
    cfg.maxDetsPerImage = maxDets;
    return report_to_json(evaluate(dets, gt, cfg), gt.categories);
}

std::string simulate(std::uint64_t seed, const std::string& scenario, int imagesPerTask, double tau,
                     double flipProb, int jobs) {
    SimulationConfig cfg;
    cfg.world.seed = seed;
    cfg.world.scenario = scenario;
    cfg.world.imagesPerTask = imagesPerTask;
    cfg.tau = tau;
    cfg.oracle.flipProb = flipProb;
    cfg.oracle.seed = derive_seed(seed, "oracle");
    cfg.jobs = jobs;
    return simulation_to_json(run_simulation(cfg));
}

std::tuple<int, std::string, std::string> run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
        py::gil_scoped_release release;
        code = cli::run_cli(args, out, err);
    }
    return {code, out.str(), err.str()};
}

std::string check_fixture(const std::string& endpoint, const std::string& request, bool expectAccepted) {
    ConformanceCase c;
    c.name = "python";
    c.endpoint = endpoint;
    c.request = nlohmann::json::parse(request);
    c.expectAccepted = expectAccepted;
    return check_request_fixture(c);
}

}  // namespace

PYBIND11_MODULE(_vpl, m) {
    m.doc() = "Native core of the vpl pseudo-labeling pipeline; the vpl package wraps it with dict/JSON I/O.";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<ProtocolError>(m, "ProtocolError", validation.ptr());
    py::register_exception<BackendError>(m, "BackendError", base.ptr());

    m.def("iou", [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
        return iou(corner_box(a), corner_box(b));
    }, py::arg("a"), py::arg("b"));
    m.def("norm_center_to_corner", [](const std::array<double, 4>& v, int width, int height) {
        return convert_box(BBox::norm_center(v[0], v[1], v[2], v[3]), BoxFormat::AbsCorner, {width, height}).v;
    }, py::arg("box"), py::arg("width"), py::arg("height"));
    m.def("corner_to_norm_center", [](const std::array<double, 4>& v, int width, int height) {
        return convert_box(corner_box(v), BoxFormat::NormCenter, {width, height}).v;
    }, py::arg("box"), py::arg("width"), py::arg("height"));

    m.def("normalize_coco", [](const std::string& text) { return serialize_coco(parse_coco(text)); },
          py::arg("text"), "Parse a COCO document and serialize it back.");
    m.def("split_scenario", [](const std::string& spec, const std::vector<CategoryId>& universe) {
        return parse_scenario(spec, universe).taskCategorySets;
    }, py::arg("spec"), py::arg("universe"));

    m.def("extract_pseudo_gts", &extract, py::arg("detector_output"), py::arg("tau"), py::arg("width"),
          py::arg("height"));
    m.def("format_prompt", &prompt_for, py::arg("box"), py::arg("category_name"), py::arg("image_id"),
          py::arg("width"), py::arg("height"));
    m.def("binary_mask", &mask_for, py::arg("box"), py::arg("width"), py::arg("height"),
          py::arg("grid_w") = kDefaultGridSide, py::arg("grid_h") = kDefaultGridSide);
    m.def("parse_verdict", [](const std::string& text) { return std::string(to_string(parse_verdict(text).answer)); },
          py::arg("text"));

    m.def("evaluate", &evaluate_results, py::arg("gt_coco"), py::arg("results"), py::arg("mode") = "voc",
          py::arg("max_dets") = 100);
    m.def("simulate", &simulate, py::arg("seed") = 0, py::arg("scenario") = "5+5+5+5",
          py::arg("images_per_task") = 20, py::arg("tau") = kDefaultTau, py::arg("flip_prob") = 0.05,
          py::arg("jobs") = 1);
    m.def("check_request_fixture", &check_fixture, py::arg("endpoint"), py::arg("request"),
          py::arg("expect_accepted"));
    m.def("sha256_hex", [](const std::string& data) { return sha256_hex(data); }, py::arg("data"));
    m.def("run_cli", &run_cli, py::arg("args"));

    m.attr("DEFAULT_TAU") = kDefaultTau;
    m.attr("__version__") = std::string(kToolVersion);
}
