#include "bgreplace/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <set>

#include "bgreplace/remote.hpp"
#include "bgreplace/rng.hpp"
#include "bgreplace/toy_backends.hpp"

namespace bgreplace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw_config(where + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw_config("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

std::string key_path(const std::string& where, const char* key) { return where.empty() ? key : where + "." + key; }

int get_int(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw_config(key_path(where, key) + " must be an integer");
    return v.get<int>();
}

double get_number(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_number()) throw_config(key_path(where, key) + " must be a number");
    return v.get<double>();
}

bool get_bool(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw_config(key_path(where, key) + " must be true or false");
    return v.get<bool>();
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if (!v.is_string()) throw_config(key_path(where, key) + " must be a string");
    return v.get<std::string>();
}

fs::path get_path(const json& obj, const char* key, const std::string& where, const fs::path& base) {
    fs::path p = get_string(obj, key, where);
    if (p.empty()) throw_config(key_path(where, key) + " must not be empty");
    return p.is_absolute() ? p.lexically_normal() : (base / p).lexically_normal();
}

BackendKind parse_kind(const std::string& name, const std::string& key) {
    if (name == "toy") return BackendKind::kToy;
    if (name == "remote") return BackendKind::kRemote;
    throw_config(key + " must be 'toy' or 'remote' (got '" + name + "')");
}

const char* kind_name(BackendKind k) { return k == BackendKind::kToy ? "toy" : "remote"; }

}  // namespace

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
    check_keys(doc,
               {"input", "masks", "prompt", "background_image", "output_dir", "seed", "t_train", "t_infer",
                "beta_start", "beta_end", "t0", "t1", "t0_frac", "t1_frac", "blur", "backend", "harmonize", "rpa",
                "start_stage", "artifact_format"},
               "");
    const fs::path base = fs::absolute(base_dir);
    PipelineConfig cfg;
    for (const char* required : {"input", "masks", "output_dir"}) {
        if (!doc.contains(required)) throw_config(std::string("missing required config key '") + required + "'");
    }
    cfg.input = get_path(doc, "input", "", base);
    cfg.masks = get_path(doc, "masks", "", base);
    cfg.output_dir = get_path(doc, "output_dir", "", base);
    if (doc.contains("prompt")) cfg.prompt = get_string(doc, "prompt", "");
    if (doc.contains("background_image")) cfg.background_image = get_path(doc, "background_image", "", base);
    if (cfg.prompt.has_value() == cfg.background_image.has_value()) {
        throw_config("exactly one of 'prompt' and 'background_image' must be given");
    }
    if (doc.contains("seed")) {
        const json& s = doc["seed"];
        if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
            throw_config("seed must be a non-negative integer");
        }
        cfg.seed = s.get<std::uint64_t>();
    }
    if (doc.contains("t_train")) cfg.t_train = get_int(doc, "t_train", "");
    if (doc.contains("t_infer")) cfg.t_infer = get_int(doc, "t_infer", "");
    if (doc.contains("beta_start")) cfg.beta_start = get_number(doc, "beta_start", "");
    if (doc.contains("beta_end")) cfg.beta_end = get_number(doc, "beta_end", "");
    if (cfg.t_infer < 1 || cfg.t_train < cfg.t_infer) throw_config("need 1 <= t_infer <= t_train");
    if (!(cfg.beta_start > 0.0 && cfg.beta_start <= cfg.beta_end && cfg.beta_end < 1.0)) {
        throw_config("need 0 < beta_start <= beta_end < 1");
    }

    const auto steps = [&](const char* key, const char* frac_key) {
        if (doc.contains(key) && doc.contains(frac_key)) {
            throw_config(std::string("give only one of '") + key + "' and '" + frac_key + "'");
        }
        int v = steps_from_fraction(0.7, cfg.t_infer);
        if (doc.contains(key)) v = get_int(doc, key, "");
        if (doc.contains(frac_key)) {
            const double f = get_number(doc, frac_key, "");
            if (!(f >= 0.0 && f <= 1.0)) throw_config(std::string(frac_key) + " must lie in [0, 1]");
            v = steps_from_fraction(f, cfg.t_infer);
        }
        if (v < 0 || v > cfg.t_infer) {
            throw_config(std::string(key) + " = " + std::to_string(v) + " outside [0, " + std::to_string(cfg.t_infer) + "]");
        }
        return v;
    };
    cfg.t0 = steps("t0", "t0_frac");
    cfg.t1 = steps("t1", "t1_frac");

    if (doc.contains("blur")) {
        const json& b = doc["blur"];
        check_keys(b, {"sigma", "radius"}, "blur");
        if (b.contains("sigma")) cfg.blur.sigma = get_number(b, "sigma", "blur");
        if (b.contains("radius")) cfg.blur.radius = get_int(b, "radius", "blur");
        if (!(cfg.blur.sigma > 0.0)) throw_config("blur.sigma must be positive");
        if (cfg.blur.radius && *cfg.blur.radius < 0) throw_config("blur.radius must be non-negative");
    }

    bool any_remote = false;
    if (doc.contains("backend")) {
        const json& b = doc["backend"];
        check_keys(b, {"codec", "denoiser", "relighter", "inpainter", "background", "url", "timeout_s"}, "backend");
        const auto slot = [&](const char* key, BackendKind& out) {
            if (b.contains(key)) out = parse_kind(get_string(b, key, "backend"), key_path("backend", key));
            any_remote = any_remote || out == BackendKind::kRemote;
        };
        slot("codec", cfg.backend.codec);
        slot("denoiser", cfg.backend.denoiser);
        slot("relighter", cfg.backend.relighter);
        slot("inpainter", cfg.backend.inpainter);
        slot("background", cfg.backend.background);
        if (b.contains("url")) cfg.backend.url = get_string(b, "url", "backend");
        if (b.contains("timeout_s")) cfg.backend.timeout_s = get_number(b, "timeout_s", "backend");
        if (!(cfg.backend.timeout_s > 0.0)) throw_config("backend.timeout_s must be positive");
    }
    if (any_remote && cfg.backend.url.empty()) throw_config("backend.url is required when a backend is remote");

    if (doc.contains("harmonize")) {
        const json& h = doc["harmonize"];
        check_keys(h, {"cross_frame"}, "harmonize");
        if (h.contains("cross_frame")) cfg.cross_frame = get_bool(h, "cross_frame", "harmonize");
    }

    if (doc.contains("rpa")) {
        const json& r = doc["rpa"];
        check_keys(r, {"enabled", "sigma_min", "mask_dilate_px", "trace_path", "bg_fill", "background"}, "rpa");
        if (r.contains("enabled")) cfg.rpa.enabled = get_bool(r, "enabled", "rpa");
        if (r.contains("sigma_min")) cfg.rpa.sigma_min = get_number(r, "sigma_min", "rpa");
        if (r.contains("mask_dilate_px")) cfg.rpa.mask_dilate_px = get_int(r, "mask_dilate_px", "rpa");
        if (r.contains("trace_path")) cfg.rpa.trace_path = get_path(r, "trace_path", "rpa", base);
        if (r.contains("bg_fill")) cfg.rpa.bg_fill = parse_bg_fill(get_string(r, "bg_fill", "rpa"));
        if (r.contains("background")) cfg.rpa.background = get_path(r, "background", "rpa", base);
        if (!(cfg.rpa.sigma_min > 0.0)) throw_config("rpa.sigma_min must be positive");
        if (cfg.rpa.mask_dilate_px < 0) throw_config("rpa.mask_dilate_px must be non-negative");
        if (cfg.rpa.background && cfg.rpa.bg_fill != BgFill::kPrecomputed) {
            throw_config("rpa.background only applies with rpa.bg_fill = precomputed");
        }
    }

    if (doc.contains("start_stage")) cfg.start_stage = get_int(doc, "start_stage", "");
    if (cfg.start_stage < 1 || cfg.start_stage > 3) throw_config("start_stage must be 1, 2 or 3");
    if (doc.contains("artifact_format")) {
        try {
            cfg.artifact_format = parse_pixel_format(get_string(doc, "artifact_format", ""));
        } catch (const Error& e) {
            throw_config(std::string("artifact_format: ") + e.what());
        }
    }
    return cfg;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw_io("cannot open config " + path.string());
    json doc = json::parse(is, nullptr, false);
    if (doc.is_discarded()) throw_config("config " + path.string() + " is not valid JSON");
    return parse_config(doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

void apply_preset(PipelineConfig& cfg, const std::string& preset) {
    double frac;
    if (preset == "strong") frac = 0.7;
    else if (preset == "weak") frac = 0.4;
    else throw_config("unknown preset '" + preset + "' (expected strong or weak)");
    cfg.t0 = cfg.t1 = steps_from_fraction(frac, cfg.t_infer);
}

json to_json(const PipelineConfig& cfg) {
    json j = {
        {"input", cfg.input.string()},
        {"masks", cfg.masks.string()},
        {"output_dir", cfg.output_dir.string()},
        {"seed", cfg.seed},
        {"t_train", cfg.t_train},
        {"t_infer", cfg.t_infer},
        {"beta_start", cfg.beta_start},
        {"beta_end", cfg.beta_end},
        {"t0", cfg.t0},
        {"t1", cfg.t1},
        {"blur", {{"sigma", cfg.blur.sigma}, {"radius", cfg.blur.effective_radius()}}},
        {"backend",
         {{"codec", kind_name(cfg.backend.codec)},
          {"denoiser", kind_name(cfg.backend.denoiser)},
          {"relighter", kind_name(cfg.backend.relighter)},
          {"inpainter", kind_name(cfg.backend.inpainter)},
          {"background", kind_name(cfg.backend.background)},
          {"url", cfg.backend.url},
          {"timeout_s", cfg.backend.timeout_s}}},
        {"harmonize", {{"cross_frame", cfg.cross_frame}}},
        {"rpa",
         {{"enabled", cfg.rpa.enabled},
          {"sigma_min", cfg.rpa.sigma_min},
          {"mask_dilate_px", cfg.rpa.mask_dilate_px},
          {"bg_fill", to_string(cfg.rpa.bg_fill)}}},
        {"start_stage", cfg.start_stage},
        {"artifact_format", to_string(cfg.artifact_format)},
    };
    if (cfg.prompt) j["prompt"] = *cfg.prompt;
    if (cfg.background_image) j["background_image"] = cfg.background_image->string();
    if (cfg.rpa.trace_path) j["rpa"]["trace_path"] = cfg.rpa.trace_path->string();
    if (cfg.rpa.background) j["rpa"]["background"] = cfg.rpa.background->string();
    return j;
}

NoiseSchedule make_schedule(const PipelineConfig& cfg) {
    return make_schedule(cfg.t_train, cfg.t_infer, cfg.beta_start, cfg.beta_end);
}

BackendSet make_backends(const PipelineConfig& cfg, const NoiseSchedule& sched) {
    BackendSet set = make_toy_backends(sched, cfg.blur, cfg.rpa.sigma_min);
    std::shared_ptr<RemoteClient> client;
    const auto remote = [&]() {
        if (!client) client = std::make_shared<RemoteClient>(cfg.backend.url, cfg.backend.timeout_s);
        return client;
    };
    if (cfg.backend.codec == BackendKind::kRemote) set.codec = std::make_unique<RemoteCodec>(remote(), cfg.rpa.sigma_min);
    if (cfg.backend.denoiser == BackendKind::kRemote) set.denoiser = std::make_unique<RemoteDenoiser>(remote());
    if (cfg.backend.relighter == BackendKind::kRemote) set.relighter = std::make_unique<RemoteRelighter>(remote());
    if (cfg.backend.inpainter == BackendKind::kRemote) set.inpainter = std::make_unique<RemoteInpainter>(remote());
    if (cfg.backend.background == BackendKind::kRemote) set.background = std::make_unique<RemoteBackground>(remote());
    return set;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

MaskClip max_masks(const MaskClip& a, const Array4<double>& b) {
    Array4<float> out = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], static_cast<float>(b[i]));
    return MaskClip(std::move(out));
}

VideoClip fit_to(const VideoClip& image, std::size_t height, std::size_t width) {
    if (image.height() == height && image.width() == width) return image.frame_clip(0);
    const Array4<double> one = image.frame_clip(0).pixels().cast<double>();
    return VideoClip(resample_bilinear(one, height, width).cast<float>(), image.fps());
}

}  // namespace

VideoClip stage1_background(const VideoClip& input, const MaskClip& masks,
                            const std::optional<VideoClip>& background_image, const std::string& prompt,
                            int mask_dilate_px, const NoiseSchedule& sched, BackendSet& backends, std::uint64_t seed) {
    require_mask_matches(masks, input, "stage 1");
    // the foreground moves on its own; keep it (and its soft edge) out of the camera estimate
    const MaskClip moving = dilate(masks, mask_dilate_px);
    if (background_image) {
        const VideoClip first = fit_to(*background_image, input.height(), input.width());
        return backends.background->generate(input, first, seed, &moving);
    }

    const VideoClip frame0 = input.frame_clip(0);
    const int steps = sched.inference_count();
    const LatentTensor noise(gaussian_noise(frame0.shape(), stream_seed(seed, rng_stage::kBackground)));
    const VideoClip noisy = to_clip(add_noise(to_tensor(frame0), noise, sched.timestep_for_remaining(steps), sched),
                                    input.fps());
    const VideoClip first = backends.relighter->relight_text_guided_denoise(noisy, frame0, prompt, steps, false);
    const VideoClip panned = backends.background->generate(input, first, seed, &moving);

    // The relit first frame still carries the frame-0 foreground, which the
    // pan drags along; remove it together with the current foreground.
    const std::vector<Offset> offsets =
        estimate_motion(input.pixels().cast<double>(), default_motion_step(input.height(), input.width()), &moving);
    const auto first_mask = masks.values().frame(0);
    Array4<double> m0(masks.shape());
    for (std::size_t f = 0; f < input.frames(); ++f) std::copy(first_mask.begin(), first_mask.end(), m0.frame(f).begin());
    const Array4<double> carried = translate_frames(m0, offsets);
    const MaskClip hole = dilate(max_masks(masks, carried), mask_dilate_px);
    return backends.inpainter->fill(panned, hole);
}

Stage2Result stage2_harmonize(const VideoClip& input, const MaskClip& masks, const VideoClip& background,
                              const std::string& prompt, int t0, bool cross_frame, const NoiseSchedule& sched,
                              BackendSet& backends, std::uint64_t seed) {
    require_mask_matches(masks, input, "stage 2");
    require_same_shape(input.pixels(), background.pixels(), "stage 2 background");
    Stage2Result r;
    const VideoClip grey = VideoClip::constant(input.frames(), input.height(), input.width(), 0.5f, input.fps());
    r.foreground = composite(input, grey, masks);
    const VideoClip relit = backends.relighter->relight_image_guided(r.foreground, background);
    r.step1 = composite(relit, background, masks);
    if (t0 == 0) {
        r.harmonized = r.step1;
        return r;
    }
    const Shape4& s = input.shape();
    const Array4<double> field =
        gaussian_noise(Shape4{1, s.height, s.width, s.channels}, stream_seed(seed, rng_stage::kHarmonize));
    Array4<double> noise(s);
    for (std::size_t f = 0; f < s.frames; ++f) std::copy(field.data().begin(), field.data().end(), noise.frame(f).begin());
    const int t = sched.timestep_for_remaining(t0);
    const VideoClip noisy = to_clip(add_noise(to_tensor(r.step1), LatentTensor(std::move(noise)), t, sched), input.fps());
    r.harmonized = backends.relighter->relight_text_guided_denoise(noisy, r.step1, prompt, t0, cross_frame);
    return r;
}

Stage3Result stage3_enhance(const VideoClip& harmonized, const VideoClip& input, const MaskClip& masks,
                            const Stage3Options& options, const NoiseSchedule& sched, BackendSet& backends,
                            std::uint64_t seed) {
    require_same_shape(harmonized.pixels(), input.pixels(), "stage 3");
    require_mask_matches(masks, input, "stage 3");
    const LatentTensor clean = backends.codec->encode(harmonized).mean;
    Stage3Result r;
    if (options.t1 == 0) {
        r.output = backends.codec->decode(clean);
        return r;
    }
    backends.denoiser->begin_run(clean);
    const LatentTensor noise(gaussian_noise(clean.shape(), stream_seed(seed, rng_stage::kEnhance)));
    const LatentTensor x_start = add_noise(clean, noise, sched.timestep_for_remaining(options.t1), sched);

    RefineConfig refine_cfg;
    refine_cfg.blur = options.blur;
    refine_cfg.fg_masks = masks;
    refine_cfg.bg_fill = options.rpa.bg_fill;
    refine_cfg.mask_dilate_px = options.rpa.mask_dilate_px;
    if (options.rpa.bg_fill == BgFill::kPrecomputed) {
        if (!options.precomputed_background) throw_invalid("stage 3: bg_fill = precomputed without a background clip");
        refine_cfg.background = options.precomputed_background;
    }
    RpaOptions rpa_opts;
    rpa_opts.enabled = options.rpa.enabled;
    rpa_opts.reencode = options.rpa.reencode;
    rpa_opts.seed = seed;
    const Conditioning c{options.prompt, {}};
    DenoiseResult d = denoise_with_rpa(x_start, input, c, options.t1, sched, *backends.denoiser, *backends.codec,
                                       refine_cfg, backends.inpainter.get(), rpa_opts);
    r.output = std::move(d.clip);
    r.trace = std::move(d.trace);
    return r;
}

// ---------------------------------------------------------------------------
// Full run

namespace {

template <typename Fn>
auto tagged(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(stage) + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(stage) + ": " + e.what());
    }
}

VideoClip load_stage(const fs::path& manifest, const VideoClip& like, const char* what) {
    if (!fs::exists(manifest)) throw_io(std::string("cannot resume: missing ") + what + " " + manifest.string());
    VideoClip clip = load_clip(manifest);
    if (!(clip.shape() == like.shape())) {
        throw_io(std::string("cannot resume: ") + what + " has shape " + to_string(clip.shape()) + ", input is " +
                 to_string(like.shape()));
    }
    return clip;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    const NoiseSchedule sched = make_schedule(cfg);
    BackendSet backends = make_backends(cfg, sched);
    return run_pipeline(cfg, backends);
}

PipelineResult run_pipeline(const PipelineConfig& cfg, BackendSet& backends) {
    using clock = std::chrono::steady_clock;
    const auto t_start = clock::now();
    const NoiseSchedule sched = make_schedule(cfg);
    json timings = json::object();

    const VideoClip input = load_clip(cfg.input);
    const MaskClip masks = load_mask(cfg.masks);
    require_mask_matches(masks, input, "input masks");
    std::optional<VideoClip> bg_image;
    if (cfg.background_image) bg_image = load_image(*cfg.background_image);
    const std::string prompt = cfg.prompt_or_empty();

    PipelineResult r;
    StageArtifacts& art = r.artifacts;
    art.background = cfg.output_dir / "stage1_background" / "manifest.json";
    art.foreground = cfg.output_dir / "stage2_foreground" / "manifest.json";
    art.harmonized = cfg.output_dir / "stage2_harmonized" / "manifest.json";
    art.output = cfg.output_dir / "stage3_output" / "manifest.json";
    art.metrics = cfg.output_dir / "metrics.json";

    auto t = clock::now();
    if (cfg.start_stage <= 1) {
        r.background = tagged("stage 1 (background)", [&] {
            return stage1_background(input, masks, bg_image, prompt, cfg.rpa.mask_dilate_px, sched, backends, cfg.seed);
        });
        save_clip(r.background, art.background.parent_path(), cfg.artifact_format);
    } else {
        r.background = load_stage(art.background, input, "stage-1 background");
    }
    timings["stage1"] = elapsed_ms(t);

    t = clock::now();
    if (cfg.start_stage <= 2) {
        Stage2Result s2 = tagged("stage 2 (harmonize)", [&] {
            return stage2_harmonize(input, masks, r.background, prompt, cfg.t0, cfg.cross_frame, sched, backends,
                                    cfg.seed);
        });
        r.foreground = std::move(s2.foreground);
        r.harmonized = std::move(s2.harmonized);
        save_clip(r.foreground, art.foreground.parent_path(), cfg.artifact_format);
        save_clip(r.harmonized, art.harmonized.parent_path(), cfg.artifact_format);
    } else {
        r.foreground = load_stage(art.foreground, input, "stage-2 foreground");
        r.harmonized = load_stage(art.harmonized, input, "stage-2 harmonized clip");
    }
    timings["stage2"] = elapsed_ms(t);

    t = clock::now();
    Stage3Options s3;
    s3.t1 = cfg.t1;
    s3.blur = cfg.blur;
    s3.rpa = cfg.rpa;
    s3.prompt = prompt;
    if (cfg.rpa.bg_fill == BgFill::kPrecomputed) {
        s3.precomputed_background = cfg.rpa.background ? load_clip(*cfg.rpa.background) : r.background;
    }
    Stage3Result out = tagged("stage 3 (enhance)", [&] {
        return stage3_enhance(r.harmonized, input, masks, s3, sched, backends, cfg.seed);
    });
    r.output = std::move(out.output);
    r.trace = std::move(out.trace);
    save_clip(r.output, art.output.parent_path(), cfg.artifact_format);
    if (cfg.rpa.trace_path) {
        r.trace.write_jsonl(*cfg.rpa.trace_path);
        art.trace = cfg.rpa.trace_path;
    }
    timings["stage3"] = elapsed_ms(t);

    t = clock::now();
    r.metrics = tagged("metrics", [&] { return evaluate(r.output, r.harmonized, input, masks, cfg.blur); });
    r.report = to_json(r.metrics);
    r.report["harmonized_tem_con"] = tem_con(r.harmonized);
    r.report["config"] = to_json(cfg);
    timings["metrics"] = elapsed_ms(t);
    timings["total"] = elapsed_ms(t_start);
    r.report["timings_ms"] = timings;

    std::ofstream os(art.metrics);
    if (!os) throw_io("cannot write " + art.metrics.string());
    os << r.report.dump(2) << '\n';
    if (!os) throw_io("failed writing " + art.metrics.string());
    return r;
}

}  // namespace bgreplace
