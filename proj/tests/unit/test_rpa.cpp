#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "bgreplace/metrics.hpp"
#include "bgreplace/rng.hpp"
#include "bgreplace/rpa.hpp"
#include "bgreplace/toy_backends.hpp"
#include "../support.hpp"

using namespace bgreplace;

namespace {

// Codec whose posterior is read off two marker pixels, so the projection
// formula can be exercised with hand-picked (mu, sigma) pairs.
class ScriptedCodec final : public LatentCodec {
public:
    ScriptedCodec(double mu, double sigma) : LatentCodec(1e-4), m_mu(mu), m_sigma(sigma) {}

protected:
    Posterior encode_impl(const VideoClip& clip) override {
        Array4<double> mean({1, 1, 1, 3}), sd({1, 1, 1, 3});
        for (std::size_t c = 0; c < 3; ++c) {
            mean[c] = clip.at(0, 0, 0, c);
            sd[c] = clip.at(0, 0, 1, c);
        }
        return {LatentTensor(mean), LatentTensor(sd)};
    }
    VideoClip decode_impl(const LatentTensor&) override {
        Array4<float> px({1, 8, 8, 3}, 0.0f);
        for (std::size_t c = 0; c < 3; ++c) {
            px.at(0, 0, 0, c) = static_cast<float>(m_mu);
            px.at(0, 0, 1, c) = static_cast<float>(m_sigma);
        }
        return VideoClip(px);
    }

private:
    double m_mu, m_sigma;
};

VideoClip marker_clip(float mu, float sigma) {
    Array4<float> px({1, 8, 8, 3}, 0.0f);
    for (std::size_t c = 0; c < 3; ++c) {
        px.at(0, 0, 0, c) = mu;
        px.at(0, 0, 1, c) = sigma;
    }
    return VideoClip(px);
}

// Smooth texture with detail at a few pixels' scale.
VideoClip textured(std::size_t frames, std::size_t h, std::size_t w, std::uint64_t seed) {
    Array4<float> px({frames, h, w, 3});
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 6.283);
    const double p0 = u(gen), p1 = u(gen);
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t c = 0; c < 3; ++c)
                    px.at(f, y, x, c) = static_cast<float>(0.5 + 0.15 * std::sin(6.283 * x / 8.0 + p0 + c) +
                                                           0.1 * std::cos(6.283 * (y + f) / 7.0 + p1));
    return VideoClip(px);
}

// Independent toy codec pieces for the hand oracle.
Array4<double> up2(const Array4<double>& l) {
    const Shape4& s = l.shape();
    Array4<double> out({s.frames, 2 * s.height, 2 * s.width, s.channels});
    const auto tap = [](std::size_t j, std::size_t n) {
        const double pos = std::clamp((j + 0.5) / 2.0 - 0.5, 0.0, n - 1.0);
        const auto lo = static_cast<std::size_t>(pos);
        return std::tuple{lo, std::min(lo + 1, n - 1), pos - lo};
    };
    for (std::size_t f = 0; f < s.frames; ++f)
        for (std::size_t y = 0; y < 2 * s.height; ++y)
            for (std::size_t x = 0; x < 2 * s.width; ++x)
                for (std::size_t c = 0; c < s.channels; ++c) {
                    const auto [y0, y1, wy] = tap(y, s.height);
                    const auto [x0, x1, wx] = tap(x, s.width);
                    out.at(f, y, x, c) = (1 - wy) * ((1 - wx) * l.at(f, y0, x0, c) + wx * l.at(f, y0, x1, c)) +
                                         wy * ((1 - wx) * l.at(f, y1, x0, c) + wx * l.at(f, y1, x1, c));
                }
    return out;
}

std::pair<Array4<double>, Array4<double>> pool2(const Array4<float>& px, double sigma_min, double spread) {
    const Shape4& s = px.shape();
    Array4<double> mu({s.frames, s.height / 2, s.width / 2, 3}), sd(mu.shape());
    for (std::size_t f = 0; f < s.frames; ++f)
        for (std::size_t y = 0; y < s.height / 2; ++y)
            for (std::size_t x = 0; x < s.width / 2; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    const double a = px.at(f, 2 * y, 2 * x, c), b = px.at(f, 2 * y, 2 * x + 1, c),
                                 d = px.at(f, 2 * y + 1, 2 * x, c), e = px.at(f, 2 * y + 1, 2 * x + 1, c);
                    const double m = (a + b + d + e) / 4;
                    const double v = ((a - m) * (a - m) + (b - m) * (b - m) + (d - m) * (d - m) + (e - m) * (e - m)) / 4;
                    mu.at(f, y, x, c) = m;
                    sd.at(f, y, x, c) = std::max(sigma_min, sigma_min + spread * std::sqrt(v));
                }
    return {mu, sd};
}

RefineConfig full_mask_config(const VideoClip& clip, BlurSpec blur = {}) {
    RefineConfig cfg;
    cfg.blur = blur;
    cfg.fg_masks = MaskClip::constant(clip.frames(), clip.height(), clip.width(), 1.0f);
    return cfg;
}

}  // namespace

TEST_CASE("refine with identical input and full mask returns i0t exactly") {
    const VideoClip clip = testing::random_clip(2, 12, 12, 1);
    const VideoClip out = refine(clip, clip, full_mask_config(clip), nullptr);
    CHECK(max_abs_diff(out.pixels(), clip.pixels()) == 0.0);
}

TEST_CASE("refine with an empty mask returns the background") {
    const VideoClip gen = testing::random_clip(2, 12, 12, 2), in = testing::random_clip(2, 12, 12, 3);
    const VideoClip bg = testing::random_clip(2, 12, 12, 4);
    RefineConfig cfg;
    cfg.fg_masks = MaskClip::constant(2, 12, 12, 0.0f);
    cfg.bg_fill = BgFill::kPrecomputed;
    cfg.background = bg;
    CHECK(max_abs_diff(refine(gen, in, cfg, nullptr).pixels(), bg.pixels()) == 0.0);
    cfg.background.reset();
    CHECK_THROWS_AS(refine(gen, in, cfg, nullptr), Error);
    cfg.bg_fill = BgFill::kInpaintInput;
    CHECK_THROWS_AS(refine(gen, in, cfg, nullptr), Error);
}

TEST_CASE("refine with a flat input returns the low band of i0t") {
    const VideoClip gen = testing::random_clip(2, 12, 12, 5);
    const VideoClip flat = VideoClip::constant(2, 12, 12, 0.4f);
    const VideoClip out = refine(gen, flat, full_mask_config(gen), nullptr);
    CHECK(max_abs_diff(out.pixels(), gaussian_blur(gen, {}).pixels()) <= 1e-6);
}

TEST_CASE("refine inpaints i0t under the dilated mask") {
    const VideoClip gen = testing::random_clip(1, 16, 16, 6), in = testing::random_clip(1, 16, 16, 7);
    RefineConfig cfg;
    cfg.fg_masks = testing::box_mask(1, 16, 16, 5, 10, 5, 10);
    cfg.mask_dilate_px = 2;
    LaplacianInpainter inp;
    const VideoClip out = refine(gen, in, cfg, &inp);
    const VideoClip fill = laplacian_fill(gen, dilate(cfg.fg_masks, 2));
    const Array4<double> lf_gen = blur_frames(gen.pixels(), cfg.blur), lf_in = blur_frames(in.pixels(), cfg.blur);
    for (std::size_t p = 0; p < 256; ++p)
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t i = p * 3 + c;
            const double expected = cfg.fg_masks.values()[p] > 0 ? in.pixels()[i] - lf_in[i] + lf_gen[i] : fill.pixels()[i];
            CHECK(out.pixels()[i] == doctest::Approx(expected).epsilon(1e-6));
        }
    CHECK(parse_bg_fill("precomputed") == BgFill::kPrecomputed);
    CHECK(to_string(BgFill::kInpaintInput) == "inpaint_input");
    CHECK_THROWS_AS(parse_bg_fill("nope"), Error);
}

TEST_CASE("scalar-cell projection") {
    ScriptedCodec codec(0.8, 0.1);
    const LatentTensor x0t(Array4<double>({1, 1, 1, 3}, 0.9));
    const LatentTensor out = project(x0t, marker_clip(0.5f, 0.2f), codec);
    for (std::size_t c = 0; c < 3; ++c) CHECK(out[c] == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("identity refinement reproduces x0t") {
    ToyCodec codec;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const LatentTensor x0t(testing::random_doubles({2, 5, 6, 3}, seed, -0.5, 1.5));
        const VideoClip dec = codec.decode(x0t);
        CHECK(max_abs_diff(project(x0t, dec, codec).data(), x0t.data()) <= 1e-6);
    }
}

TEST_CASE("additive refinement shifts the projection by the same amount") {
    ToyCodec codec(1e-4, 0.0);  // sigma constant, so sigma' = sigma
    const LatentTensor x0t(testing::random_doubles({1, 4, 4, 3}, 8));
    const VideoClip dec = codec.decode(x0t);
    Array4<float> shifted = dec.pixels();
    for (float& v : shifted.data()) v += 0.125f;
    const LatentTensor out = project(x0t, VideoClip(shifted), codec);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(x0t[i] + 0.125).epsilon(1e-6));
}

TEST_CASE("resample uses the given noise") {
    ToyCodec codec;
    const VideoClip clip = VideoClip::constant(1, 8, 8, 0.5f);
    const LatentTensor z = resample(clip, Array4<double>({1, 4, 4, 3}, 2.0), codec);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == doctest::Approx(0.5 + 2.0 * 1e-4));
}

TEST_CASE("rpa off with the oracle denoiser decodes the target") {
    const NoiseSchedule s = make_schedule();
    ToyCodec codec;
    const LatentTensor target(testing::random_doubles({2, 8, 8, 3}, 9));
    OracleDenoiser d(target, s);
    const VideoClip input = testing::random_clip(2, 16, 16, 10);
    const LatentTensor x = add_noise(target, LatentTensor(gaussian_noise(target.shape(), 11)), 700, s);
    const DenoiseResult r = denoise_with_rpa(x, input, {}, 14, s, d, codec, full_mask_config(input), nullptr,
                                             RpaOptions{false});
    CHECK(max_abs_diff(r.clip.pixels(), codec.decode(target).pixels()) <= 1e-5);
    CHECK(r.trace.steps.empty());
}

TEST_CASE("rpa with an identity refinement equals the plain run") {
    const NoiseSchedule s = make_schedule();
    ToyCodec codec;
    const LatentTensor target(testing::random_doubles({2, 8, 8, 3}, 12));
    OracleDenoiser d(target, s);
    const VideoClip input = codec.decode(target);  // refine(decode(x0t), input) = decode(x0t) under M = 1
    const LatentTensor x = add_noise(target, LatentTensor(gaussian_noise(target.shape(), 13)), 1000, s);
    const auto cfg = full_mask_config(input);
    const DenoiseResult off = denoise_with_rpa(x, input, {}, 20, s, d, codec, cfg, nullptr, RpaOptions{false});
    const DenoiseResult on = denoise_with_rpa(x, input, {}, 20, s, d, codec, cfg, nullptr, RpaOptions{true});
    CHECK(max_abs_diff(on.latent.data(), off.latent.data()) <= 1e-6);
    CHECK(max_abs_diff(on.clip.pixels(), off.clip.pixels()) <= 1e-5);
    REQUIRE(on.trace.steps.size() == 20);
    CHECK(on.trace.steps.front().t == 1000);
    CHECK(on.trace.steps.back().t == 50);
    for (const RpaStep& st : on.trace.steps) CHECK(st.bg_cells == 0);
}

TEST_CASE("single-step run matches a hand-computed oracle") {
    const NoiseSchedule s = make_schedule();
    ToyCodec codec;
    const BlurSpec blur{1.0, std::nullopt};
    // target: the codec mean of a smooth ramp, so the generated low band is plausible
    Array4<float> ramp({2, 8, 8, 3});
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 8; ++x)
                for (std::size_t c = 0; c < 3; ++c) ramp.at(f, y, x, c) = static_cast<float>(0.3 + 0.04 * x + 0.02 * y + 0.05 * c);
    const LatentTensor target = codec.encode(VideoClip(ramp)).mean;
    const VideoClip input = textured(2, 8, 8, 15);
    OracleDenoiser d(target, s);
    const LatentTensor x = add_noise(target, LatentTensor(gaussian_noise(target.shape(), 16)), 50, s);
    const DenoiseResult r =
        denoise_with_rpa(x, input, {}, 1, s, d, codec, full_mask_config(input, blur), nullptr, RpaOptions{true});

    // hand oracle
    const double ab = s.alpha_bar(50);
    Array4<double> x0t(target.shape());
    for (std::size_t i = 0; i < x0t.size(); ++i) {
        const double eps = (x[i] - std::sqrt(ab) * target[i]) / std::sqrt(1 - ab);
        x0t[i] = (x[i] - std::sqrt(1 - ab) * eps) / std::sqrt(ab);
    }
    const Array4<float> decoded = up2(x0t).cast<float>();
    const Array4<double> lf_dec = blur_frames(decoded, blur), lf_in = blur_frames(input.pixels(), blur);
    Array4<float> refined(decoded.shape());
    for (std::size_t i = 0; i < refined.size(); ++i)
        refined[i] = static_cast<float>(input.pixels()[i] - lf_in[i] + lf_dec[i]);
    const auto [mu, sd] = pool2(decoded, 1e-4, 0.05);
    const auto [mu2, sd2] = pool2(refined, 1e-4, 0.05);
    Array4<double> xhat(x0t.shape());
    for (std::size_t i = 0; i < xhat.size(); ++i) xhat[i] = mu2[i] + (x0t[i] - mu[i]) / sd[i] * sd2[i];
    const Array4<float> expected = up2(xhat).cast<float>();

    CHECK(max_abs_diff(r.latent.data(), xhat) <= 1e-6);
    CHECK(max_abs_diff(r.clip.pixels(), expected) <= 1e-6);
    REQUIRE(r.trace.steps.size() == 1);
    CHECK(r.trace.steps[0].t == 50);

    const MaskClip all = MaskClip::constant(2, 8, 8, 1.0f);
    const DenoiseResult plain =
        denoise_with_rpa(x, input, {}, 1, s, d, codec, full_mask_config(input, blur), nullptr, RpaOptions{false});
    const double with_rpa = fg_hf_corr(r.clip, input, all, blur);
    const double without = fg_hf_corr(plain.clip, input, all, blur);
    MESSAGE("single-step fg_hf_corr with rpa " << with_rpa << ", without " << without);
    CHECK(with_rpa > without);
}

TEST_CASE("background latent cells are untouched when I_BG is the decode-path background") {
    const NoiseSchedule s = make_schedule();
    ToyCodec codec;
    const LatentTensor target(testing::random_doubles({2, 8, 12, 3}, 17));
    OracleDenoiser d(target, s);
    const VideoClip input = textured(2, 16, 24, 18);
    RefineConfig cfg;
    cfg.fg_masks = testing::box_mask(2, 16, 24, 4, 12, 6, 14);
    cfg.bg_fill = BgFill::kPrecomputed;
    cfg.background = codec.decode(target);
    const LatentTensor x = add_noise(target, LatentTensor(gaussian_noise(target.shape(), 19)), 700, s);
    const DenoiseResult on = denoise_with_rpa(x, input, {}, 14, s, d, codec, cfg, nullptr, RpaOptions{true});
    const DenoiseResult off = denoise_with_rpa(x, input, {}, 14, s, d, codec, cfg, nullptr, RpaOptions{false});
    const auto cells = background_cells(cfg.fg_masks, target.shape());
    std::size_t counted = 0;
    double worst = 0.0;
    for (std::size_t cell = 0; cell < cells.size(); ++cell) {
        if (!cells[cell]) continue;
        ++counted;
        for (std::size_t c = 0; c < 3; ++c)
            worst = std::max(worst, std::abs(on.latent[cell * 3 + c] - off.latent[cell * 3 + c]));
    }
    CHECK(counted > 0);
    CHECK(worst <= 1e-5);
    for (const RpaStep& st : on.trace.steps) {
        CHECK(st.bg_cells == counted);
        CHECK(st.bg_rms <= 1e-5);
    }
}

TEST_CASE("background_cells marks cells clear of the grown footprint") {
    // 8x8 clip, 4x4 latent; foreground pixel at (3,3) lives in cell (1,1)
    Array4<float> m({1, 8, 8, 1}, 0.0f);
    m.at(0, 3, 3, 0) = 1.0f;
    const auto cells = background_cells(MaskClip(m), {1, 4, 4, 3});
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
            const bool near = y <= 2 && x <= 2;  // cell (1,1) grown by one cell
            CHECK(cells[y * 4 + x] == (near ? 0 : 1));
        }
}

TEST_CASE("rpa traces are deterministic and serialise as json lines") {
    const NoiseSchedule s = make_schedule();
    const VideoClip input = textured(2, 16, 16, 20);
    RefineConfig cfg;
    cfg.fg_masks = testing::box_mask(2, 16, 16, 4, 12, 4, 12);
    const auto run = [&](Reencode mode) {
        ToyCodec codec;
        MotionSmoothingDenoiser d(s);
        LaplacianInpainter inp;
        const LatentTensor clean = codec.encode(input).mean;
        d.begin_run(clean);
        const LatentTensor x = add_noise(clean, LatentTensor(gaussian_noise(clean.shape(), 21)), 700, s);
        return denoise_with_rpa(x, input, {}, 14, s, d, codec, cfg, &inp, RpaOptions{true, mode, 5});
    };
    const DenoiseResult a = run(Reencode::kProject), b = run(Reencode::kProject);
    CHECK(a.trace.to_jsonl() == b.trace.to_jsonl());
    CHECK(max_abs_diff(a.clip.pixels(), b.clip.pixels()) == 0.0);
    const DenoiseResult c = run(Reencode::kRandom), e = run(Reencode::kRandom);
    CHECK(max_abs_diff(c.clip.pixels(), e.clip.pixels()) == 0.0);
    CHECK(max_abs_diff(c.clip.pixels(), a.clip.pixels()) > 0.0);

    const std::string lines = a.trace.to_jsonl();
    CHECK(std::count(lines.begin(), lines.end(), '\n') == 14);
    const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
    CHECK(first["step"] == 0);
    CHECK(first["t"] == 700);
    for (const char* key : {"recon_rms", "bg_rms", "bg_cells"}) CHECK(first.contains(key));

    const auto dir = testing::scratch_dir("rpa_trace");
    a.trace.write_jsonl(dir / "nested" / "trace.jsonl");
    std::ifstream is(dir / "nested" / "trace.jsonl");
    std::string contents((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(contents == lines);
}

TEST_CASE("denoise_with_rpa validates its step count") {
    const NoiseSchedule s = make_schedule();
    ToyCodec codec;
    const LatentTensor target(testing::random_doubles({1, 4, 4, 3}, 22));
    OracleDenoiser d(target, s);
    const VideoClip input = testing::random_clip(1, 8, 8, 23);
    CHECK_THROWS_AS(denoise_with_rpa(target, input, {}, 21, s, d, codec, full_mask_config(input), nullptr), Error);
    const DenoiseResult zero = denoise_with_rpa(target, input, {}, 0, s, d, codec, full_mask_config(input), nullptr);
    CHECK(max_abs_diff(zero.latent.data(), target.data()) == 0.0);
}
