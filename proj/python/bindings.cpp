#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bgreplace/attention.hpp"
#include "bgreplace/fixtures.hpp"
#include "bgreplace/pipeline.hpp"
#include "bgreplace/rpa.hpp"
#include "bgreplace/toy_backends.hpp"
#include "bgreplace/verify.hpp"

namespace py = pybind11;
using namespace bgreplace;

namespace {

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

Shape4 shape4(const py::buffer_info& b, const char* what) {
    if (b.ndim != 4) throw_invalid(std::string(what) + ": expected a 4-d array (frames, height, width, channels)");
    return {static_cast<std::size_t>(b.shape[0]), static_cast<std::size_t>(b.shape[1]),
            static_cast<std::size_t>(b.shape[2]), static_cast<std::size_t>(b.shape[3])};
}

template <typename T, typename A>
Array4<T> to_array(const A& a, const char* what) {
    const py::buffer_info b = a.request();
    const Shape4 s = shape4(b, what);
    const T* p = static_cast<const T*>(b.ptr);
    return Array4<T>(s, std::vector<T>(p, p + s.size()));
}

template <typename T>
py::array_t<T> to_numpy(const Array4<T>& a) {
    const Shape4& s = a.shape();
    py::array_t<T> out({s.frames, s.height, s.width, s.channels});
    std::copy(a.data().begin(), a.data().end(), out.mutable_data());
    return out;
}

VideoClip clip(const F32& a) { return VideoClip(to_array<float>(a, "clip")); }

// masks come in as (F, H, W) or (F, H, W, 1)
MaskClip mask(const F32& a) {
    py::buffer_info b = a.request();
    if (b.ndim == 3) {
        const auto* p = static_cast<const float*>(b.ptr);
        const Shape4 s{static_cast<std::size_t>(b.shape[0]), static_cast<std::size_t>(b.shape[1]),
                       static_cast<std::size_t>(b.shape[2]), 1};
        return MaskClip(Array4<float>(s, std::vector<float>(p, p + s.size())));
    }
    return MaskClip(to_array<float>(a, "mask"));
}

py::array_t<float> mask_numpy(const MaskClip& m) {
    const Shape4& s = m.shape();
    py::array_t<float> out({s.frames, s.height, s.width});
    std::copy(m.values().data().begin(), m.values().data().end(), out.mutable_data());
    return out;
}

LatentTensor latent(const F64& a) { return LatentTensor(to_array<double>(a, "latent")); }

py::object json_to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
nlohmann::json py_to_json(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

BlurSpec blur_spec(double sigma, std::optional<int> radius) { return BlurSpec{sigma, radius}; }

py::dict fixture_dict(const Fixture& fx) {
    py::dict d;
    d["clip"] = to_numpy(fx.clip.pixels());
    d["mask"] = mask_numpy(fx.mask);
    d["background_image"] = to_numpy(fx.background_image.pixels());
    std::vector<std::pair<int, int>> bg, fg;
    for (const Offset& o : fx.bg_offsets) bg.emplace_back(o.dy, o.dx);
    for (const Offset& o : fx.fg_offsets) fg.emplace_back(o.dy, o.dx);
    d["bg_offsets"] = bg;
    d["fg_offsets"] = fg;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Latent video diffusion background replacement engine";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    static py::exception<Error> config_error(m, "ConfigError", base.ptr());
    static py::exception<Error> backend_error(m, "BackendError", base.ptr());
    static py::exception<Error> io_error(m, "IOError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            switch (e.kind()) {
                case ErrorKind::kInvalidArgument: PyErr_SetString(PyExc_ValueError, e.what()); return;
                case ErrorKind::kConfig: config_error(e.what()); return;
                case ErrorKind::kBackend: backend_error(e.what()); return;
                case ErrorKind::kIo: io_error(e.what()); return;
            }
            base(e.what());
        }
    });

    // schedule
    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_property_readonly("train_steps", &NoiseSchedule::train_steps)
        .def_property_readonly("inference_steps", &NoiseSchedule::inference_steps)
        .def_property_readonly("alpha_bar", [](const NoiseSchedule& s) {
            const auto t = s.alpha_bar_table();
            return py::array_t<double>(static_cast<py::ssize_t>(t.size()), t.data());
        })
        .def("timestep_for_remaining", &NoiseSchedule::timestep_for_remaining, py::arg("remaining"))
        .def("previous_timestep", &NoiseSchedule::previous_timestep, py::arg("t"));
    m.def("make_schedule", py::overload_cast<int, int, double, double>(&make_schedule),
          py::arg("t_train") = kDefaultTrainSteps, py::arg("t_infer") = kDefaultInferenceSteps,
          py::arg("beta_start") = kDefaultBetaStart, py::arg("beta_end") = kDefaultBetaEnd);
    m.def("add_noise", [](const F64& x0, const F64& eps, int t, const NoiseSchedule& s) {
        return to_numpy(add_noise(latent(x0), latent(eps), t, s).data());
    }, py::arg("x0"), py::arg("eps"), py::arg("t"), py::arg("schedule"));
    m.def("pred_x0", [](const F64& xt, const F64& eps, int t, const NoiseSchedule& s) {
        return to_numpy(pred_x0(latent(xt), latent(eps), t, s).data());
    }, py::arg("x_t"), py::arg("eps"), py::arg("t"), py::arg("schedule"));
    m.def("ddim_step", [](const F64& x0, const F64& eps, int t_prev, const NoiseSchedule& s) {
        return to_numpy(ddim_step(latent(x0), latent(eps), t_prev, s).data());
    }, py::arg("x0_hat"), py::arg("eps"), py::arg("t_prev"), py::arg("schedule"));
    m.def("steps_from_fraction", &steps_from_fraction, py::arg("fraction"), py::arg("total_steps"));

    // frequency
    m.def("gaussian_blur", [](const F32& c, double sigma, std::optional<int> radius) {
        return to_numpy(gaussian_blur(clip(c), blur_spec(sigma, radius)).pixels());
    }, py::arg("clip"), py::arg("sigma") = kDefaultBlurSigma, py::arg("radius") = py::none());
    m.def("split_bands", [](const F32& c, double sigma, std::optional<int> radius) {
        const Bands b = split_bands(clip(c), blur_spec(sigma, radius));
        return py::make_tuple(to_numpy(b.low.pixels()), to_numpy(b.high.pixels()));
    }, py::arg("clip"), py::arg("sigma") = kDefaultBlurSigma, py::arg("radius") = py::none());

    // attention: lists of 2-d float64 matrices, one per frame
    m.def("self_attention", [](std::vector<Matrix> q, std::vector<Matrix> k, std::vector<Matrix> v) {
        return self_attention(AttentionBatch{std::move(q), std::move(k), std::move(v)});
    }, py::arg("q"), py::arg("k"), py::arg("v"));
    m.def("cross_frame_attention", [](std::vector<Matrix> q, std::vector<Matrix> k, std::vector<Matrix> v) {
        return cross_frame_attention(AttentionBatch{std::move(q), std::move(k), std::move(v)});
    }, py::arg("q"), py::arg("k"), py::arg("v"));

    // toy codec and the projection
    py::class_<ToyCodec>(m, "ToyCodec")
        .def(py::init<double, double>(), py::arg("sigma_min") = kDefaultSigmaMin, py::arg("spread") = 0.05)
        .def("encode", [](ToyCodec& c, const F32& x) {
            const Posterior p = c.encode(clip(x));
            return py::make_tuple(to_numpy(p.mean.data()), to_numpy(p.stddev.data()));
        }, py::arg("clip"))
        .def("decode", [](ToyCodec& c, const F64& z) { return to_numpy(c.decode(latent(z)).pixels()); },
             py::arg("latent"));
    m.def("project", [](const F64& x0t, const F32& refined, ToyCodec& codec) {
        return to_numpy(project(latent(x0t), clip(refined), codec).data());
    }, py::arg("x0t"), py::arg("refined"), py::arg("codec"));
    m.def("refine", [](const F32& i0t, const F32& input, const F32& fg_mask, double sigma,
                       std::optional<F32> background, int mask_dilate_px) {
        RefineConfig cfg;
        cfg.blur.sigma = sigma;
        cfg.fg_masks = mask(fg_mask);
        cfg.mask_dilate_px = mask_dilate_px;
        if (background) {
            cfg.bg_fill = BgFill::kPrecomputed;
            cfg.background = clip(*background);
        }
        LaplacianInpainter inpainter;
        return to_numpy(refine(clip(i0t), clip(input), cfg, &inpainter).pixels());
    }, py::arg("i0t"), py::arg("input"), py::arg("mask"), py::arg("sigma") = kDefaultBlurSigma,
       py::arg("background") = py::none(), py::arg("mask_dilate_px") = 2);
    m.def("verify_alignment", [](int trials, std::uint64_t seed, double tolerance) {
        return json_to_py(verify_alignment("toy", trials, seed, tolerance).to_json());
    }, py::arg("trials") = 1000, py::arg("seed") = 0, py::arg("tolerance") = 1e-6);

    // inpainting and motion
    m.def("laplacian_fill", [](const F32& c, const F32& m_) { return to_numpy(laplacian_fill(clip(c), mask(m_)).pixels()); },
          py::arg("clip"), py::arg("mask"));
    m.def("synthetic_background", [](const F32& input, const F32& first, std::optional<F32> fg) {
        std::optional<MaskClip> fm;
        if (fg) fm = mask(*fg);
        return to_numpy(synthetic_background(clip(input), clip(first), 0, fm ? &*fm : nullptr).pixels());
    }, py::arg("input"), py::arg("first_frame"), py::arg("foreground") = py::none());

    // metrics
    m.def("tem_con", [](const F32& c) { return tem_con(clip(c)); }, py::arg("clip"));
    m.def("bg_psnr", [](const F32& out, const F32& ref, const F32& m_) { return bg_psnr(clip(out), clip(ref), mask(m_)); },
          py::arg("out"), py::arg("ref"), py::arg("mask"));
    m.def("fg_hf_corr", [](const F32& out, const F32& input, const F32& m_, double sigma) {
        return fg_hf_corr(clip(out), clip(input), mask(m_), BlurSpec{sigma, std::nullopt});
    }, py::arg("out"), py::arg("input"), py::arg("mask"), py::arg("sigma") = kDefaultBlurSigma);

    // fixtures and clip files
    m.def("make_fixture", [](std::uint64_t seed, bool closeup, bool still) {
        const FixtureParams p = closeup ? closeup_params() : FixtureParams{};
        return fixture_dict(still ? make_static_fixture(seed, p) : make_fixture(seed, p));
    }, py::arg("seed") = 0, py::arg("closeup") = false, py::arg("static") = false);
    m.def("write_fixture", [](std::uint64_t seed, const std::filesystem::path& dir, bool closeup) {
        write_fixture(make_fixture(seed, closeup ? closeup_params() : FixtureParams{}), dir);
    }, py::arg("seed"), py::arg("dir"), py::arg("closeup") = false);
    m.def("load_clip", [](const std::filesystem::path& p) { return to_numpy(load_clip(p).pixels()); }, py::arg("manifest"));
    m.def("load_mask", [](const std::filesystem::path& p) { return mask_numpy(load_mask(p)); }, py::arg("manifest"));
    m.def("save_clip", [](const F32& c, const std::filesystem::path& dir, const std::string& format) {
        save_clip(clip(c), dir, parse_pixel_format(format));
    }, py::arg("clip"), py::arg("dir"), py::arg("format") = "raw32");

    // pipeline
    m.def("resolve_config", [](const py::object& doc, const std::filesystem::path& base_dir) {
        return json_to_py(to_json(parse_config(py_to_json(doc), base_dir)));
    }, py::arg("config"), py::arg("base_dir") = ".");
    m.def("run_pipeline", [](const py::object& doc, const std::filesystem::path& base_dir,
                             std::optional<std::string> preset) {
        PipelineConfig cfg = parse_config(py_to_json(doc), base_dir);
        if (preset) apply_preset(cfg, *preset);
        PipelineResult r;
        {
            py::gil_scoped_release release;
            r = run_pipeline(cfg);
        }
        py::dict d;
        d["background"] = to_numpy(r.background.pixels());
        d["foreground"] = to_numpy(r.foreground.pixels());
        d["harmonized"] = to_numpy(r.harmonized.pixels());
        d["output"] = to_numpy(r.output.pixels());
        d["report"] = json_to_py(r.report);
        d["metrics_path"] = r.artifacts.metrics;
        return d;
    }, py::arg("config"), py::arg("base_dir") = ".", py::arg("preset") = py::none());
}
