#pragma once

#include <cstddef>

#include "bgreplace/tensor.hpp"

namespace bgreplace {

inline constexpr std::size_t kClipChannels = 3;
inline constexpr std::size_t kMinClipSide = 8;

/// Dense F x H x W x 3 frame sequence with nominal values in [0,1].
///
/// Values are 32-bit reals and are not clamped between stages; clamping only
/// happens when frames are written to a quantized raster format. Instances
/// are immutable once constructed.
class VideoClip {
public:
    VideoClip() = default;
    explicit VideoClip(Array4<float> pixels, double fps = 24.0);

    static VideoClip constant(std::size_t frames, std::size_t height, std::size_t width, float value,
                              double fps = 24.0);

    const Shape4& shape() const { return m_pixels.shape(); }
    std::size_t frames() const { return shape().frames; }
    std::size_t height() const { return shape().height; }
    std::size_t width() const { return shape().width; }
    double fps() const { return m_fps; }

    const Array4<float>& pixels() const { return m_pixels; }
    float at(std::size_t f, std::size_t y, std::size_t x, std::size_t c) const {
        return m_pixels.at(f, y, x, c);
    }

    /// Single-frame clip holding frame `f`.
    VideoClip frame_clip(std::size_t f) const;

    /// Clip whose every frame is a copy of this clip's frame `f`.
    VideoClip repeat_frame(std::size_t f, std::size_t count) const;

    bool empty() const { return m_pixels.size() == 0; }

private:
    Array4<float> m_pixels;
    double m_fps = 24.0;
};

/// Per-frame soft masks, F x H x W (stored with one channel), values in [0,1].
class MaskClip {
public:
    MaskClip() = default;
    /// Values are clamped into [0,1]; the array must have exactly one channel.
    explicit MaskClip(Array4<float> values);

    static MaskClip constant(std::size_t frames, std::size_t height, std::size_t width, float value);

    const Shape4& shape() const { return m_values.shape(); }
    std::size_t frames() const { return shape().frames; }
    std::size_t height() const { return shape().height; }
    std::size_t width() const { return shape().width; }

    const Array4<float>& values() const { return m_values; }
    float at(std::size_t f, std::size_t y, std::size_t x) const { return m_values.at(f, y, x, 0); }

    bool matches(const VideoClip& clip) const {
        return frames() == clip.frames() && height() == clip.height() && width() == clip.width();
    }

    bool empty() const { return m_values.size() == 0; }

private:
    Array4<float> m_values;
};

void require_mask_matches(const MaskClip& mask, const VideoClip& clip, const char* what);

/// out = mask * fg + (1 - mask) * bg, per channel.
VideoClip composite(const VideoClip& fg, const VideoClip& bg, const MaskClip& mask);

/// Double-precision variant used where several blend terms must be rounded once.
Array4<double> composite(const Array4<double>& fg, const Array4<double>& bg, const MaskClip& mask);

/// Area-weighted resampling of every frame to (out_h, out_w). Handles both
/// down- and up-sampling with fractional pixel overlap.
Array4<double> resample_area(const Array4<double>& src, std::size_t out_h, std::size_t out_w);

/// Bilinear resampling (pixel-centre aligned, edge clamped) of every frame.
Array4<double> resample_bilinear(const Array4<double>& src, std::size_t out_h, std::size_t out_w);

/// Grey-level dilation of each mask frame with a Euclidean disk of `radius` pixels.
MaskClip dilate(const MaskClip& mask, int radius);

}  // namespace bgreplace
