#include "bgreplace/toy_backends.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bgreplace/attention.hpp"

namespace bgreplace {

// ---------------------------------------------------------------------------
// ToyCodec

ToyCodec::ToyCodec(double sigma_min, double spread) : LatentCodec(sigma_min), m_spread(spread) {
    if (spread < 0.0) throw_invalid("ToyCodec: spread must be non-negative");
}

std::optional<Shape4> ToyCodec::latent_shape(const Shape4& s) const {
    return Shape4{s.frames, s.height / 2, s.width / 2, s.channels};
}

Posterior ToyCodec::encode_impl(const VideoClip& clip) {
    const Shape4& s = clip.shape();
    if (s.height % 2 != 0 || s.width % 2 != 0) {
        throw_invalid("ToyCodec: frame dimensions must be even, got " + to_string(s));
    }
    const Shape4 ls{s.frames, s.height / 2, s.width / 2, s.channels};
    Array4<double> mean(ls);
    Array4<double> sd(ls);
    const Array4<float>& px = clip.pixels();
    for (std::size_t f = 0; f < ls.frames; ++f)
        for (std::size_t y = 0; y < ls.height; ++y)
            for (std::size_t x = 0; x < ls.width; ++x)
                for (std::size_t c = 0; c < ls.channels; ++c) {
                    const double v[4] = {px.at(f, 2 * y, 2 * x, c), px.at(f, 2 * y, 2 * x + 1, c),
                                         px.at(f, 2 * y + 1, 2 * x, c), px.at(f, 2 * y + 1, 2 * x + 1, c)};
                    const double m = (v[0] + v[1] + v[2] + v[3]) / 4.0;
                    double var = 0.0;
                    for (double vi : v) var += (vi - m) * (vi - m);
                    mean.at(f, y, x, c) = m;
                    sd.at(f, y, x, c) = sigma_min() + m_spread * std::sqrt(var / 4.0);
                }
    return {LatentTensor(std::move(mean)), LatentTensor(std::move(sd))};
}

VideoClip ToyCodec::decode_impl(const LatentTensor& latent) {
    const Shape4& s = latent.shape();
    if (s.channels != kClipChannels) throw_invalid("ToyCodec: latent must have 3 channels");
    return VideoClip(resample_bilinear(latent.data(), 2 * s.height, 2 * s.width).cast<float>());
}

// ---------------------------------------------------------------------------
// Denoisers

LatentTensor oracle_eps(const LatentTensor& x_t, const LatentTensor& target, int t, const NoiseSchedule& sched) {
    require_same_shape(x_t.data(), target.data(), "oracle_eps");
    const double ab = sched.alpha_bar(t);
    if (ab >= 1.0) throw_invalid("oracle_eps: undefined at a timestep with alpha_bar = 1 (t = 0)");
    const double a = std::sqrt(ab);
    const double inv = 1.0 / std::sqrt(1.0 - ab);
    Array4<double> out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - a * target[i]) * inv;
    return LatentTensor(std::move(out));
}

OracleDenoiser::OracleDenoiser(LatentTensor target, NoiseSchedule sched)
    : m_target(std::move(target)), m_sched(std::move(sched)) {}

LatentTensor OracleDenoiser::eps_impl(const LatentTensor& x_t, const Conditioning&, int t) {
    return oracle_eps(x_t, m_target, t, m_sched);
}

namespace {

std::vector<double> luminance(const Array4<double>& frames, std::size_t f) {
    const Shape4& s = frames.shape();
    std::vector<double> lum(s.height * s.width);
    for (std::size_t p = 0; p < lum.size(); ++p) {
        double acc = 0.0;
        for (std::size_t c = 0; c < s.channels; ++c) acc += frames[f * s.frame_size() + p * s.channels + c];
        lum[p] = acc / static_cast<double>(s.channels);
    }
    return lum;
}

// Copy of frame f of `src` with content moved by +d (reflect at borders).
void shifted_frame(const Array4<double>& src, std::size_t f, Offset d, std::vector<double>& out) {
    const Shape4& s = src.shape();
    const int h = static_cast<int>(s.height);
    const int w = static_cast<int>(s.width);
    out.resize(s.frame_size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = reflect_index(y - d.dy, h);
            const int sx = reflect_index(x - d.dx, w);
            for (std::size_t c = 0; c < s.channels; ++c)
                out[(static_cast<std::size_t>(y) * s.width + x) * s.channels + c] = src.at(f, sy, sx, c);
        }
}

}  // namespace

MotionSmoothingDenoiser::MotionSmoothingDenoiser(NoiseSchedule sched, int max_shift)
    : m_sched(std::move(sched)), m_max_shift(max_shift) {}

void MotionSmoothingDenoiser::begin_run(const LatentTensor& clean_start) {
    const Array4<double>& a = clean_start.data();
    const Shape4& s = a.shape();
    if (s.frames < 2) {
        m_target = clean_start;
        return;
    }
    // step[i] = translation of frame i relative to frame i-1
    std::vector<Offset> step(s.frames);
    std::vector<double> prev_lum = luminance(a, 0);
    for (std::size_t f = 1; f < s.frames; ++f) {
        std::vector<double> lum = luminance(a, f);
        step[f] = estimate_translation(prev_lum, lum, s.height, s.width, m_max_shift);
        prev_lum = std::move(lum);
    }
    Array4<double> out(s);
    std::vector<double> prev, next;
    for (std::size_t f = 0; f < s.frames; ++f) {
        const auto cur = a.frame(f);
        if (f > 0) shifted_frame(a, f - 1, step[f], prev);
        else prev.assign(cur.begin(), cur.end());
        if (f + 1 < s.frames) shifted_frame(a, f + 1, Offset{-step[f + 1].dy, -step[f + 1].dx}, next);
        else next.assign(cur.begin(), cur.end());
        auto dst = out.frame(f);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 0.25 * prev[i] + 0.5 * cur[i] + 0.25 * next[i];
    }
    m_target = LatentTensor(std::move(out));
}

LatentTensor MotionSmoothingDenoiser::eps_impl(const LatentTensor& x_t, const Conditioning&, int t) {
    if (m_target.size() == 0) throw_backend("MotionSmoothingDenoiser: begin_run was not called");
    return oracle_eps(x_t, m_target, t, m_sched);
}

// ---------------------------------------------------------------------------
// Motion

Offset estimate_translation(std::span<const double> ref, std::span<const double> cur, std::size_t height,
                            std::size_t width, int max_shift, Offset around, std::span<const float> ref_ignore,
                            std::span<const float> cur_ignore) {
    if (ref.size() != height * width || cur.size() != height * width) {
        throw_invalid("estimate_translation: plane size mismatch");
    }
    if ((!ref_ignore.empty() && ref_ignore.size() != ref.size()) ||
        (!cur_ignore.empty() && cur_ignore.size() != cur.size())) {
        throw_invalid("estimate_translation: ignore mask size mismatch");
    }
    const auto used = [&](int ci, int ri) {
        return (cur_ignore.empty() || !(cur_ignore[ci] > 0.0f)) && (ref_ignore.empty() || !(ref_ignore[ri] > 0.0f));
    };
    const int h = static_cast<int>(height);
    const int w = static_cast<int>(width);
    max_shift = std::max(0, max_shift);

    std::vector<Offset> candidates;
    for (int dy = around.dy - max_shift; dy <= around.dy + max_shift; ++dy)
        for (int dx = around.dx - max_shift; dx <= around.dx + max_shift; ++dx) candidates.push_back({dy, dx});
    std::stable_sort(candidates.begin(), candidates.end(), [&](const Offset& a, const Offset& b) {
        return std::abs(a.dy - around.dy) + std::abs(a.dx - around.dx) <
               std::abs(b.dy - around.dy) + std::abs(b.dx - around.dx);
    });

    const std::size_t min_overlap = std::max<std::size_t>(height * width / 4, 1);
    Offset best = around;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const Offset& d : candidates) {
        const int y0 = std::max(0, d.dy), y1 = std::min(h, h + d.dy);
        const int x0 = std::max(0, d.dx), x1 = std::min(w, w + d.dx);
        if (y1 <= y0 || x1 <= x0) continue;
        std::size_t n = 0;
        double sa = 0, sb = 0;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                if (!used(y * w + x, (y - d.dy) * w + (x - d.dx))) continue;
                sa += cur[y * w + x];
                sb += ref[(y - d.dy) * w + (x - d.dx)];
                ++n;
            }
        if (n < min_overlap) continue;
        const double ma = sa / n, mb = sb / n;
        double cov = 0, va = 0, vb = 0;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                if (!used(y * w + x, (y - d.dy) * w + (x - d.dx))) continue;
                const double a = cur[y * w + x] - ma;
                const double b = ref[(y - d.dy) * w + (x - d.dx)] - mb;
                cov += a * b;
                va += a * a;
                vb += b * b;
            }
        const double score = (va > 1e-18 && vb > 1e-18) ? cov / std::sqrt(va * vb) : 0.0;
        if (score > best_score + 1e-12) {
            best_score = score;
            best = d;
        }
    }
    return best;
}

std::vector<Offset> estimate_motion(const Array4<double>& frames, int max_step, const MaskClip* ignore) {
    const Shape4& s = frames.shape();
    if (ignore && !(ignore->shape() == Shape4{s.frames, s.height, s.width, 1})) {
        throw_invalid("estimate_motion: ignore mask " + to_string(ignore->shape()) + " does not match frames " +
                      to_string(s));
    }
    const auto plane = [&](std::size_t f) { return ignore ? ignore->values().frame(f) : std::span<const float>{}; };
    std::vector<Offset> out(s.frames);
    const std::vector<double> ref = luminance(frames, 0);
    for (std::size_t f = 1; f < s.frames; ++f) {
        out[f] = estimate_translation(ref, luminance(frames, f), s.height, s.width, max_step, out[f - 1], plane(0),
                                      plane(f));
    }
    return out;
}

Array4<double> translate_frames(const Array4<double>& frames, const std::vector<Offset>& offsets) {
    const Shape4& s = frames.shape();
    if (offsets.size() != s.frames) throw_invalid("translate_frames: one offset per frame required");
    Array4<double> out(s);
    std::vector<double> buf;
    for (std::size_t f = 0; f < s.frames; ++f) {
        shifted_frame(frames, f, offsets[f], buf);
        std::copy(buf.begin(), buf.end(), out.frame(f).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Relighting

VideoClip toy_relight_image_guided(const VideoClip& fg, const VideoClip& bg, const BlurSpec& blur) {
    require_same_shape(fg.pixels(), bg.pixels(), "toy_relight_image_guided");
    const Array4<double> lf_fg = blur_frames(fg.pixels(), blur);
    const Array4<double> lf_bg = blur_frames(bg.pixels(), blur);
    const Shape4& s = fg.shape();
    const std::size_t n = s.height * s.width;
    Array4<float> out(s);
    for (std::size_t f = 0; f < s.frames; ++f)
        for (std::size_t c = 0; c < s.channels; ++c) {
            double mf = 0, mb = 0;
            for (std::size_t p = 0; p < n; ++p) {
                mf += lf_fg[f * s.frame_size() + p * s.channels + c];
                mb += lf_bg[f * s.frame_size() + p * s.channels + c];
            }
            mf /= n;
            mb /= n;
            double vf = 0, vb = 0;
            for (std::size_t p = 0; p < n; ++p) {
                const double a = lf_fg[f * s.frame_size() + p * s.channels + c] - mf;
                const double b = lf_bg[f * s.frame_size() + p * s.channels + c] - mb;
                vf += a * a;
                vb += b * b;
            }
            const double sf = std::sqrt(vf / n);
            const double sb = std::sqrt(vb / n);
            const double scale = sf < 1e-12 ? 1.0 : sb / sf;
            for (std::size_t p = 0; p < n; ++p) {
                const std::size_t i = f * s.frame_size() + p * s.channels + c;
                const double high = fg.pixels()[i] - lf_fg[i];
                out[i] = static_cast<float>(high + (lf_fg[i] - mf) * scale + mb);
            }
        }
    return VideoClip(std::move(out), fg.fps());
}

std::array<double, 3> prompt_tint(const std::string& prompt, double amplitude) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char ch : prompt) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    if (h % 2 == 0) return {amplitude, 0.5 * amplitude, -0.5 * amplitude};
    return {-0.5 * amplitude, 0.1 * amplitude, amplitude};
}

Array4<double> toy_tint_target(const VideoClip& anchor, const std::string& prompt, bool cross_frame,
                               const TextRelightParams& params) {
    const Shape4& s = anchor.shape();
    const std::size_t stride = std::max<std::size_t>(params.token_stride, 1);
    const std::size_t th = (s.height + stride - 1) / stride;
    const std::size_t tw = (s.width + stride - 1) / stride;
    const Array4<double> px = anchor.pixels().cast<double>();
    const Array4<double> tokens = resample_area(px, th, tw);

    const auto n = static_cast<Eigen::Index>(th * tw);
    AttentionBatch batch;
    for (std::size_t f = 0; f < s.frames; ++f) {
        Matrix feats(n, 3);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) feats(i, c) = tokens[f * th * tw * 3 + i * 3 + c];
        batch.q.push_back(params.attention_sharpness * feats);
        batch.k.push_back(params.attention_sharpness * feats);
        batch.v.push_back(feats);
    }
    const std::vector<Matrix> styled = cross_frame ? cross_frame_attention(batch) : self_attention(batch);

    Array4<double> style(tokens.shape());
    for (std::size_t f = 0; f < s.frames; ++f)
        for (Eigen::Index i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) style[f * th * tw * 3 + i * 3 + c] = styled[f](i, c);

    const Array4<double> up_style = resample_bilinear(style, s.height, s.width);
    const Array4<double> up_tokens = resample_bilinear(tokens, s.height, s.width);
    const auto tint = prompt_tint(prompt, params.tint_amplitude);
    Array4<double> out(s);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = px[i] + tint[i % 3] + params.style_weight * (up_style[i] - up_tokens[i]);
    }
    return out;
}

ToyRelighter::ToyRelighter(NoiseSchedule sched, BlurSpec blur, TextRelightParams params)
    : m_sched(std::move(sched)), m_blur(blur), m_params(params) {}

VideoClip ToyRelighter::relight_image_guided_impl(const VideoClip& fg, const VideoClip& bg) {
    return toy_relight_image_guided(fg, bg, m_blur);
}

VideoClip ToyRelighter::relight_text_guided_denoise_impl(const VideoClip& noisy, const VideoClip& fg,
                                                         const std::string& prompt, int steps, bool cross_frame) {
    if (steps == 0) return noisy;
    const int t_start = m_sched.timestep_for_remaining(steps);
    const double strength = 1.0 - m_sched.alpha_bar(t_start);
    const Array4<double> tinted = toy_tint_target(fg, prompt, cross_frame, m_params);
    Array4<double> target(fg.shape());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double a = fg.pixels()[i];
        target[i] = a + strength * (tinted[i] - a);
    }
    const LatentTensor clean(std::move(target));

    LatentTensor x = to_tensor(noisy);
    for (int t = t_start; t > 0;) {
        const int t_prev = m_sched.previous_timestep(t);
        const LatentTensor eps = oracle_eps(x, clean, t, m_sched);
        x = ddim_step(pred_x0(x, eps, t, m_sched), eps, t_prev, m_sched);
        t = t_prev;
    }
    return to_clip(x, noisy.fps());
}

// ---------------------------------------------------------------------------
// Inpainting

VideoClip laplacian_fill(const VideoClip& clip, const MaskClip& mask, const HarmonicFillParams& params) {
    require_mask_matches(mask, clip, "laplacian_fill");
    const Shape4& s = clip.shape();
    const int h = static_cast<int>(s.height);
    const int w = static_cast<int>(s.width);
    const std::size_t ch = s.channels;
    const double omega = 2.0 / (1.0 + std::sin(std::numbers::pi / (std::max(h, w) + 1)));

    Array4<float> out = clip.pixels();
    std::vector<double> u(s.frame_size());
    std::vector<std::size_t> unknown;
    for (std::size_t f = 0; f < s.frames; ++f) {
        unknown.clear();
        std::array<double, 3> known_sum{0, 0, 0};
        std::size_t known = 0;
        for (std::size_t p = 0; p < s.height * s.width; ++p) {
            if (mask.values()[f * s.height * s.width + p] > 0.0f) {
                unknown.push_back(p);
            } else {
                ++known;
                for (std::size_t c = 0; c < ch; ++c) known_sum[c] += clip.pixels()[f * s.frame_size() + p * ch + c];
            }
        }
        if (unknown.empty()) continue;
        if (known == 0) {
            throw_invalid("laplacian_fill: frame " + std::to_string(f) + " is fully masked, nothing to anchor the fill");
        }
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = clip.pixels()[f * s.frame_size() + i];
        for (std::size_t p : unknown)
            for (std::size_t c = 0; c < ch; ++c) u[p * ch + c] = known_sum[c] / static_cast<double>(known);

        for (int iter = 0; iter < params.max_iterations; ++iter) {
            double max_update = 0.0;
            for (std::size_t p : unknown) {
                const int y = static_cast<int>(p) / w;
                const int x = static_cast<int>(p) % w;
                int count = 0;
                std::array<double, 3> acc{0, 0, 0};
                const auto add = [&](int yy, int xx) {
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return;
                    const std::size_t q = static_cast<std::size_t>(yy) * w + xx;
                    for (std::size_t c = 0; c < ch; ++c) acc[c] += u[q * ch + c];
                    ++count;
                };
                add(y - 1, x);
                add(y + 1, x);
                add(y, x - 1);
                add(y, x + 1);
                for (std::size_t c = 0; c < ch; ++c) {
                    const double delta = omega * (acc[c] / count - u[p * ch + c]);
                    u[p * ch + c] += delta;
                    max_update = std::max(max_update, std::abs(delta));
                }
            }
            if (max_update < params.tolerance) break;
        }
        for (std::size_t p : unknown) {
            const double m = mask.values()[f * s.height * s.width + p];
            for (std::size_t c = 0; c < ch; ++c) {
                const std::size_t i = f * s.frame_size() + p * ch + c;
                out[i] = static_cast<float>(m * u[p * ch + c] + (1.0 - m) * clip.pixels()[i]);
            }
        }
    }
    return VideoClip(std::move(out), clip.fps());
}

VideoClip LaplacianInpainter::fill_impl(const VideoClip& clip, const MaskClip& mask) {
    return laplacian_fill(clip, mask, m_params);
}

// ---------------------------------------------------------------------------
// Background

int default_motion_step(std::size_t height, std::size_t width) {
    return static_cast<int>(std::min(height, width) / 4);
}

VideoClip synthetic_background(const VideoClip& input, const VideoClip& first_frame, std::uint64_t /*seed*/,
                               const MaskClip* foreground, int max_step) {
    if (max_step < 0) max_step = default_motion_step(input.height(), input.width());
    const std::vector<Offset> offsets = estimate_motion(input.pixels().cast<double>(), max_step, foreground);
    const Array4<double> canvas = first_frame.repeat_frame(0, input.frames()).pixels().cast<double>();
    return VideoClip(translate_frames(canvas, offsets).cast<float>(), input.fps());
}

VideoClip PanningBackground::generate_impl(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                                           const MaskClip* foreground) {
    return synthetic_background(input, first_frame, seed, foreground, m_max_step);
}

BackendSet make_toy_backends(const NoiseSchedule& sched, const BlurSpec& blur, double sigma_min) {
    BackendSet set;
    set.codec = std::make_unique<ToyCodec>(sigma_min);
    set.denoiser = std::make_unique<MotionSmoothingDenoiser>(sched);
    set.relighter = std::make_unique<ToyRelighter>(sched, blur);
    set.inpainter = std::make_unique<LaplacianInpainter>();
    set.background = std::make_unique<PanningBackground>();
    return set;
}

}  // namespace bgreplace
