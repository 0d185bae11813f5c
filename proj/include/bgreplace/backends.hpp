#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bgreplace/scheduler.hpp"
#include "bgreplace/video.hpp"

namespace bgreplace {

/// Prompt plus an opaque payload (e.g. edge maps for a control branch).
/// The engine forwards `aux` untouched; only backends may interpret it.
struct Conditioning {
    std::string prompt;
    std::vector<std::uint8_t> aux;
};

inline constexpr double kDefaultSigmaMin = 1e-4;

struct Posterior {
    LatentTensor mean;
    LatentTensor stddev;
};

/// Video autoencoder contract. encode() always returns a stddev clamped to
/// at least sigma_min, whatever the implementation produced.
class LatentCodec {
public:
    explicit LatentCodec(double sigma_min = kDefaultSigmaMin);
    virtual ~LatentCodec() = default;

    Posterior encode(const VideoClip& clip);
    VideoClip decode(const LatentTensor& latent);

    /// Latent extent for a clip extent, when the implementation can state it up front.
    virtual std::optional<Shape4> latent_shape(const Shape4& /*clip_shape*/) const { return std::nullopt; }

    double sigma_min() const { return m_sigma_min; }

protected:
    virtual Posterior encode_impl(const VideoClip& clip) = 0;
    virtual VideoClip decode_impl(const LatentTensor& latent) = 0;

private:
    double m_sigma_min;
};

/// Noise predictor eps_theta(x_t, c, t).
class Denoiser {
public:
    virtual ~Denoiser() = default;

    LatentTensor eps(const LatentTensor& x_t, const Conditioning& c, int t);

    /// Called once before an SDEdit-style denoising run with the clean latent
    /// the run starts from. Learned models ignore it.
    virtual void begin_run(const LatentTensor& /*clean_start*/) {}

protected:
    virtual LatentTensor eps_impl(const LatentTensor& x_t, const Conditioning& c, int t) = 0;
};

/// Image- and text-guided relighting models, applied frame by frame.
class Relighter {
public:
    virtual ~Relighter() = default;

    VideoClip relight_image_guided(const VideoClip& fg, const VideoClip& bg);

    /// Denoises `noisy` (a pixel clip noised to the timestep with `steps`
    /// remaining) for `steps` steps, conditioned on `fg` and `prompt`. With
    /// `cross_frame` set, attention layers read keys/values from frame 0.
    VideoClip relight_text_guided_denoise(const VideoClip& noisy, const VideoClip& fg, const std::string& prompt,
                                          int steps, bool cross_frame);

protected:
    virtual VideoClip relight_image_guided_impl(const VideoClip& fg, const VideoClip& bg) = 0;
    virtual VideoClip relight_text_guided_denoise_impl(const VideoClip& noisy, const VideoClip& fg,
                                                       const std::string& prompt, int steps, bool cross_frame) = 0;
};

/// Video inpainting. mask = 1 marks pixels to replace. fill() restores the
/// input exactly wherever mask == 0, for every implementation.
class Inpainter {
public:
    virtual ~Inpainter() = default;

    VideoClip fill(const VideoClip& clip, const MaskClip& mask);

protected:
    virtual VideoClip fill_impl(const VideoClip& clip, const MaskClip& mask) = 0;
};

/// Generates a background video that follows the camera motion of `input`,
/// starting from `first_frame` (a one-frame clip). `foreground`, when given,
/// marks input pixels that move on their own and should not steer the
/// camera estimate.
class BackgroundProvider {
public:
    virtual ~BackgroundProvider() = default;

    VideoClip generate(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                       const MaskClip* foreground = nullptr);

protected:
    virtual VideoClip generate_impl(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                                    const MaskClip* foreground) = 0;
};

struct BackendSet {
    std::unique_ptr<LatentCodec> codec;
    std::unique_ptr<Denoiser> denoiser;
    std::unique_ptr<Relighter> relighter;
    std::unique_ptr<Inpainter> inpainter;
    std::unique_ptr<BackgroundProvider> background;
};

}  // namespace bgreplace
