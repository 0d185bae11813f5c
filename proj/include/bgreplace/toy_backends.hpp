#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "bgreplace/backends.hpp"
#include "bgreplace/frequency.hpp"
#include "bgreplace/scheduler.hpp"

namespace bgreplace {

// ---------------------------------------------------------------------------
// Codec

/// 2x2 average-pool encoder / bilinear 2x decoder.
///
/// mean   = 2x2 block average per frame and channel
/// stddev = sigma_min + spread * (population stddev of the block)
///
/// Lossless on constants, lossy on anything with spatial detail.
class ToyCodec final : public LatentCodec {
public:
    explicit ToyCodec(double sigma_min = kDefaultSigmaMin, double spread = 0.05);

    std::optional<Shape4> latent_shape(const Shape4& clip_shape) const override;
    double spread() const { return m_spread; }

protected:
    Posterior encode_impl(const VideoClip& clip) override;
    VideoClip decode_impl(const LatentTensor& latent) override;

private:
    double m_spread;
};

// ---------------------------------------------------------------------------
// Denoisers

/// Noise that makes pred_x0 return `target` exactly: (x_t - sqrt(ab) target) / sqrt(1 - ab).
/// Undefined at t = 0.
LatentTensor oracle_eps(const LatentTensor& x_t, const LatentTensor& target, int t, const NoiseSchedule& sched);

/// Always predicts the noise pointing at a fixed clean target.
class OracleDenoiser final : public Denoiser {
public:
    OracleDenoiser(LatentTensor target, NoiseSchedule sched);

protected:
    LatentTensor eps_impl(const LatentTensor& x_t, const Conditioning& c, int t) override;

private:
    LatentTensor m_target;
    NoiseSchedule m_sched;
};

/// Stand-in video prior: the clean estimate is the starting latent smoothed
/// along time with a [1 2 1]/4 filter after aligning neighbours by their
/// estimated global translation. Removes frame-to-frame jitter; anything that
/// moves differently from the camera is smeared.
class MotionSmoothingDenoiser final : public Denoiser {
public:
    explicit MotionSmoothingDenoiser(NoiseSchedule sched, int max_shift = 4);

    void begin_run(const LatentTensor& clean_start) override;
    const LatentTensor& target() const { return m_target; }

protected:
    LatentTensor eps_impl(const LatentTensor& x_t, const Conditioning& c, int t) override;

private:
    NoiseSchedule m_sched;
    int m_max_shift;
    LatentTensor m_target;
};

// ---------------------------------------------------------------------------
// Motion

struct Offset {
    int dy = 0;
    int dx = 0;
    friend bool operator==(const Offset&, const Offset&) = default;
};

/// Integer translation d maximizing the normalized cross-correlation between
/// cur(y, x) and ref(y - dy, x - dx) over their overlap (at least a quarter of
/// the frame). Candidates lie within max_shift (per axis) of `around`; ties
/// favour the candidate closest to `around` in |dy| + |dx|.
/// Pixels where ref_ignore / cur_ignore are > 0 drop out of the sums (and of
/// the overlap count); empty spans ignore nothing.
Offset estimate_translation(std::span<const double> ref, std::span<const double> cur, std::size_t height,
                            std::size_t width, int max_shift, Offset around = {},
                            std::span<const float> ref_ignore = {}, std::span<const float> cur_ignore = {});

/// Translation of every frame against frame 0 (channel-mean luminance). The
/// search for frame f is centred on the estimate for frame f - 1, so
/// `max_step` bounds the motion between consecutive frames, not the total.
/// With `ignore`, masked pixels (> 0) take no part in the match.
std::vector<Offset> estimate_motion(const Array4<double>& frames, int max_step, const MaskClip* ignore = nullptr);

// ---------------------------------------------------------------------------
// Relighting

/// Moment-matching relight: fg's low band is affinely mapped so its per-frame,
/// per-channel mean and stddev match bg's low band; fg's high band is kept.
/// A zero-variance channel keeps unit scale (only the mean moves).
VideoClip toy_relight_image_guided(const VideoClip& fg, const VideoClip& bg, const BlurSpec& blur);

struct TextRelightParams {
    double tint_amplitude = 0.1;
    double style_weight = 0.5;
    double attention_sharpness = 2.0;  // scales queries and keys
    std::size_t token_stride = 4;      // tokens are pixels of a stride-x downsampled frame
};

/// Per-channel colour offset derived from a stable hash of the prompt: warm
/// (red up, blue down) for even hashes, cool otherwise.
std::array<double, 3> prompt_tint(const std::string& prompt, double amplitude);

/// Fully relit target for `anchor`: anchor + tint + style_weight * (up(A) - up(tokens)),
/// where A is self- or cross-frame attention over downsampled colour tokens.
Array4<double> toy_tint_target(const VideoClip& anchor, const std::string& prompt, bool cross_frame,
                               const TextRelightParams& params = {});

/// Toy relighter. The text-guided path runs real DDIM steps in pixel space
/// with an oracle noise model whose clean target is
///   anchor + (1 - ab(t_start)) * (tint_target(anchor) - anchor),
/// so the relighting strength grows with the SDEdit start step.
class ToyRelighter final : public Relighter {
public:
    ToyRelighter(NoiseSchedule sched, BlurSpec blur, TextRelightParams params = {});

protected:
    VideoClip relight_image_guided_impl(const VideoClip& fg, const VideoClip& bg) override;
    VideoClip relight_text_guided_denoise_impl(const VideoClip& noisy, const VideoClip& fg, const std::string& prompt,
                                               int steps, bool cross_frame) override;

private:
    NoiseSchedule m_sched;
    BlurSpec m_blur;
    TextRelightParams m_params;
};

// ---------------------------------------------------------------------------
// Inpainting

struct HarmonicFillParams {
    double tolerance = 1e-4;
    int max_iterations = 2000;
};

/// Harmonic fill of every pixel with mask > 0 (4-neighbour averaging, solved
/// with over-relaxed Gauss-Seidel sweeps), blended back as
/// mask * fill + (1 - mask) * clip. Each frame needs a pixel with mask == 0.
VideoClip laplacian_fill(const VideoClip& clip, const MaskClip& mask, const HarmonicFillParams& params = {});

class LaplacianInpainter final : public Inpainter {
public:
    explicit LaplacianInpainter(HarmonicFillParams params = {}) : m_params(params) {}

protected:
    VideoClip fill_impl(const VideoClip& clip, const MaskClip& mask) override;

private:
    HarmonicFillParams m_params;
};

// ---------------------------------------------------------------------------
// Background

/// Per-frame motion bound used when none is given: a quarter of the shorter side.
int default_motion_step(std::size_t height, std::size_t width);

/// Pans a reflect-extended copy of `first_frame` by the global translation
/// estimated for each input frame against input frame 0. Pixels where
/// `foreground` > 0 are left out of the estimate.
VideoClip synthetic_background(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                               const MaskClip* foreground = nullptr, int max_step = -1);

class PanningBackground final : public BackgroundProvider {
public:
    explicit PanningBackground(int max_step = -1) : m_max_step(max_step) {}

protected:
    VideoClip generate_impl(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                            const MaskClip* foreground) override;

private:
    int m_max_step;
};

/// Translates each frame by `offsets[f]` (content moves by +offset), reflecting at borders.
Array4<double> translate_frames(const Array4<double>& frames, const std::vector<Offset>& offsets);

BackendSet make_toy_backends(const NoiseSchedule& sched, const BlurSpec& blur, double sigma_min = kDefaultSigmaMin);

}  // namespace bgreplace
