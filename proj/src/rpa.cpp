#include "bgreplace/rpa.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bgreplace/rng.hpp"

namespace bgreplace {

std::string to_string(BgFill fill) {
    return fill == BgFill::kInpaintInput ? "inpaint_input" : "precomputed";
}

BgFill parse_bg_fill(const std::string& name) {
    if (name == "inpaint_input") return BgFill::kInpaintInput;
    if (name == "precomputed") return BgFill::kPrecomputed;
    throw_config("unknown rpa.bg_fill '" + name + "' (expected inpaint_input or precomputed)");
}

namespace {

bool all_foreground(const MaskClip& mask) {
    for (float m : mask.values().data())
        if (m != 1.0f) return false;
    return true;
}

}  // namespace

VideoClip refine(const VideoClip& i0t, const VideoClip& input, const RefineConfig& cfg, Inpainter* inpainter) {
    require_same_shape(i0t.pixels(), input.pixels(), "refine");
    require_mask_matches(cfg.fg_masks, i0t, "refine");
    const Shape4& s = i0t.shape();

    const Array4<double> lf_gen = blur_frames(i0t.pixels(), cfg.blur);
    const Array4<double> lf_in = blur_frames(input.pixels(), cfg.blur);
    Array4<double> fg(s);
    for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = (input.pixels()[i] - lf_in[i]) + lf_gen[i];

    Array4<double> bg(s);
    if (!all_foreground(cfg.fg_masks)) {
        if (cfg.bg_fill == BgFill::kPrecomputed) {
            if (!cfg.background) throw_invalid("refine: bg_fill = precomputed but no background clip was given");
            require_same_shape(cfg.background->pixels(), i0t.pixels(), "refine background");
            bg = cfg.background->pixels().cast<double>();
        } else {
            if (inpainter == nullptr) throw_invalid("refine: bg_fill = inpaint_input needs an inpainter");
            bg = inpainter->fill(i0t, dilate(cfg.fg_masks, cfg.mask_dilate_px)).pixels().cast<double>();
        }
    }
    return VideoClip(composite(fg, bg, cfg.fg_masks).cast<float>(), i0t.fps());
}

LatentTensor project(const LatentTensor& x0t, const VideoClip& refined, LatentCodec& codec) {
    return project(x0t, codec.decode(x0t), refined, codec);
}

LatentTensor project(const LatentTensor& x0t, const VideoClip& decoded, const VideoClip& refined, LatentCodec& codec) {
    const Posterior base = codec.encode(decoded);
    require_same_shape(base.mean.data(), x0t.data(), "project");
    const Posterior next = codec.encode(refined);
    require_same_shape(next.mean.data(), x0t.data(), "project (refined)");
    Array4<double> out(x0t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double eps_hat = (x0t[i] - base.mean[i]) / base.stddev[i];
        out[i] = next.mean[i] + eps_hat * next.stddev[i];
    }
    return LatentTensor(std::move(out));
}

LatentTensor resample(const VideoClip& refined, const Array4<double>& eps, LatentCodec& codec) {
    const Posterior next = codec.encode(refined);
    require_same_shape(next.mean.data(), eps, "resample");
    Array4<double> out(eps.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = next.mean[i] + eps[i] * next.stddev[i];
    return LatentTensor(std::move(out));
}

std::vector<std::uint8_t> background_cells(const MaskClip& mask, const Shape4& ls) {
    const std::size_t F = mask.frames(), H = mask.height(), W = mask.width();
    std::vector<std::uint8_t> out(ls.frames * ls.height * ls.width, 0);
    if (ls.frames == 0 || ls.height == 0 || ls.width == 0) return out;
    for (std::size_t f = 0; f < ls.frames; ++f) {
        const std::size_t f0 = f * F / ls.frames;
        const std::size_t f1 = std::max(f0 + 1, (f + 1) * F / ls.frames);
        for (std::size_t y = 0; y < ls.height; ++y) {
            const std::size_t y0 = (y == 0 ? 0 : (y - 1) * H / ls.height);
            const std::size_t y1 = std::min(H, (y + 2) * H / ls.height);
            for (std::size_t x = 0; x < ls.width; ++x) {
                const std::size_t x0 = (x == 0 ? 0 : (x - 1) * W / ls.width);
                const std::size_t x1 = std::min(W, (x + 2) * W / ls.width);
                bool clear = true;
                for (std::size_t mf = f0; mf < f1 && clear; ++mf)
                    for (std::size_t my = y0; my < y1 && clear; ++my)
                        for (std::size_t mx = x0; mx < x1 && clear; ++mx) clear = mask.at(mf, my, mx) == 0.0f;
                out[(f * ls.height + y) * ls.width + x] = clear ? 1 : 0;
            }
        }
    }
    return out;
}

std::string RpaTrace::to_jsonl() const {
    std::string out;
    for (const RpaStep& s : steps) {
        nlohmann::json j = {{"step", s.index},       {"t", s.t},
                            {"recon_rms", s.recon_rms}, {"bg_rms", s.bg_rms},
                            {"bg_cells", s.bg_cells}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

void RpaTrace::write_jsonl(const std::filesystem::path& path) const {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw_io("cannot write RPA trace " + path.string());
    os << to_jsonl();
    if (!os) throw_io("failed writing RPA trace " + path.string());
}

DenoiseResult denoise_with_rpa(const LatentTensor& x_start, const VideoClip& input, const Conditioning& c, int steps,
                               const NoiseSchedule& sched, Denoiser& denoiser, LatentCodec& codec,
                               const RefineConfig& cfg, Inpainter* inpainter, const RpaOptions& options) {
    if (steps < 0 || steps > sched.inference_count()) {
        throw_invalid("denoise_with_rpa: step count " + std::to_string(steps) + " outside [0, " +
                      std::to_string(sched.inference_count()) + "]");
    }
    if (options.enabled) require_mask_matches(cfg.fg_masks, input, "denoise_with_rpa");

    DenoiseResult result;
    std::vector<std::uint8_t> bg_cells;
    if (options.enabled) bg_cells = background_cells(cfg.fg_masks, x_start.shape());

    LatentTensor x = x_start;
    int index = 0;
    for (int t = sched.timestep_for_remaining(steps); t > 0; ++index) {
        const int t_prev = sched.previous_timestep(t);
        const LatentTensor eps = denoiser.eps(x, c, t);
        const LatentTensor x0t = pred_x0(x, eps, t, sched);
        LatentTensor x0_hat = x0t;
        if (options.enabled) {
            const VideoClip decoded = codec.decode(x0t);
            const VideoClip refined = refine(decoded, input, cfg, inpainter);
            RpaStep rec;
            rec.index = index;
            rec.t = t;
            if (options.reencode == Reencode::kProject) {
                x0_hat = project(x0t, decoded, refined, codec);
            } else {
                const auto stream = stream_seed(options.seed, rng_stage::kResample, 0, static_cast<std::uint64_t>(t));
                x0_hat = resample(refined, gaussian_noise(x0t.shape(), stream), codec);
            }
            const Posterior round_trip = codec.encode(decoded);
            double recon = 0.0;
            for (std::size_t i = 0; i < x0t.size(); ++i) {
                const double d = round_trip.mean[i] - x0t[i];
                recon += d * d;
            }
            rec.recon_rms = x0t.size() ? std::sqrt(recon / static_cast<double>(x0t.size())) : 0.0;
            const std::size_t ch = x0t.shape().channels;
            double dev = 0.0;
            for (std::size_t cell = 0; cell < bg_cells.size(); ++cell) {
                if (!bg_cells[cell]) continue;
                ++rec.bg_cells;
                for (std::size_t k = 0; k < ch; ++k) {
                    const double d = x0_hat[cell * ch + k] - x0t[cell * ch + k];
                    dev += d * d;
                }
            }
            rec.bg_rms = rec.bg_cells ? std::sqrt(dev / static_cast<double>(rec.bg_cells * ch)) : 0.0;
            result.trace.steps.push_back(rec);
        }
        x = ddim_step(x0_hat, eps, t_prev, sched);
        t = t_prev;
    }
    result.clip = codec.decode(x);
    result.latent = std::move(x);
    return result;
}

}  // namespace bgreplace
