#include "bgreplace/video.hpp"

#include <algorithm>
#include <cmath>

namespace bgreplace {

std::string to_string(const Shape4& s) {
    return "[" + std::to_string(s.frames) + "x" + std::to_string(s.height) + "x" +
           std::to_string(s.width) + "x" + std::to_string(s.channels) + "]";
}

VideoClip::VideoClip(Array4<float> pixels, double fps) : m_pixels(std::move(pixels)), m_fps(fps) {
    const Shape4& s = m_pixels.shape();
    if (s.frames < 1) {
        throw_invalid("VideoClip: needs at least one frame");
    }
    if (s.height < kMinClipSide || s.width < kMinClipSide) {
        throw_invalid("VideoClip: frames must be at least 8x8, got " + to_string(s));
    }
    if (s.channels != kClipChannels) {
        throw_invalid("VideoClip: expected 3 channels, got " + to_string(s));
    }
    for (float v : m_pixels.data()) {
        if (!std::isfinite(v)) {
            throw_invalid("VideoClip: non-finite pixel value");
        }
    }
}

VideoClip VideoClip::constant(std::size_t frames, std::size_t height, std::size_t width, float value,
                              double fps) {
    return VideoClip(Array4<float>({frames, height, width, kClipChannels}, value), fps);
}

VideoClip VideoClip::frame_clip(std::size_t f) const {
    Shape4 s = shape();
    s.frames = 1;
    auto src = m_pixels.frame(f);
    return VideoClip(Array4<float>(s, std::vector<float>(src.begin(), src.end())), m_fps);
}

VideoClip VideoClip::repeat_frame(std::size_t f, std::size_t count) const {
    Shape4 s = shape();
    s.frames = count;
    std::vector<float> out;
    out.reserve(s.size());
    auto src = m_pixels.frame(f);
    for (std::size_t i = 0; i < count; ++i) {
        out.insert(out.end(), src.begin(), src.end());
    }
    return VideoClip(Array4<float>(s, std::move(out)), m_fps);
}

MaskClip::MaskClip(Array4<float> values) : m_values(std::move(values)) {
    if (m_values.shape().channels != 1) {
        throw_invalid("MaskClip: expected a single channel, got " + to_string(m_values.shape()));
    }
    for (float& v : m_values.data()) {
        if (!std::isfinite(v)) {
            throw_invalid("MaskClip: non-finite mask value");
        }
        v = std::clamp(v, 0.0f, 1.0f);
    }
}

MaskClip MaskClip::constant(std::size_t frames, std::size_t height, std::size_t width, float value) {
    return MaskClip(Array4<float>({frames, height, width, 1}, value));
}

void require_mask_matches(const MaskClip& mask, const VideoClip& clip, const char* what) {
    if (!mask.matches(clip)) {
        throw_invalid(std::string(what) + ": mask " + to_string(mask.shape()) +
                      " does not match clip " + to_string(clip.shape()));
    }
}

VideoClip composite(const VideoClip& fg, const VideoClip& bg, const MaskClip& mask) {
    require_same_shape(fg.pixels(), bg.pixels(), "composite");
    require_mask_matches(mask, fg, "composite");
    const Shape4& s = fg.shape();
    Array4<float> out(s);
    const std::size_t pixels = s.frames * s.height * s.width;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double m = mask.values()[p];
        for (std::size_t c = 0; c < s.channels; ++c) {
            const std::size_t i = p * s.channels + c;
            out[i] = static_cast<float>(m * fg.pixels()[i] + (1.0 - m) * bg.pixels()[i]);
        }
    }
    return VideoClip(std::move(out), fg.fps());
}

Array4<double> composite(const Array4<double>& fg, const Array4<double>& bg, const MaskClip& mask) {
    require_same_shape(fg, bg, "composite");
    const Shape4& s = fg.shape();
    if (mask.frames() != s.frames || mask.height() != s.height || mask.width() != s.width) {
        throw_invalid("composite: mask " + to_string(mask.shape()) + " does not match " + to_string(s));
    }
    Array4<double> out(s);
    const std::size_t pixels = s.frames * s.height * s.width;
    for (std::size_t p = 0; p < pixels; ++p) {
        const double m = mask.values()[p];
        for (std::size_t c = 0; c < s.channels; ++c) {
            const std::size_t i = p * s.channels + c;
            out[i] = m * fg[i] + (1.0 - m) * bg[i];
        }
    }
    return out;
}

namespace {

// Overlap weights of destination cells [j*scale, (j+1)*scale) with unit source cells.
struct AreaTap {
    std::size_t src;
    double weight;
};

std::vector<std::vector<AreaTap>> area_taps(std::size_t src_n, std::size_t dst_n) {
    std::vector<std::vector<AreaTap>> taps(dst_n);
    const double scale = static_cast<double>(src_n) / static_cast<double>(dst_n);
    for (std::size_t j = 0; j < dst_n; ++j) {
        const double lo = j * scale;
        const double hi = (j + 1) * scale;
        double total = 0.0;
        for (auto i = static_cast<std::size_t>(std::floor(lo)); i < src_n && static_cast<double>(i) < hi;
             ++i) {
            const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
            if (w > 0) {
                taps[j].push_back({i, w});
                total += w;
            }
        }
        for (auto& t : taps[j]) t.weight /= total;
    }
    return taps;
}

struct LinearTap {
    std::size_t lo, hi;
    double w_hi;
};

std::vector<LinearTap> linear_taps(std::size_t src_n, std::size_t dst_n) {
    std::vector<LinearTap> taps(dst_n);
    const double scale = static_cast<double>(src_n) / static_cast<double>(dst_n);
    for (std::size_t j = 0; j < dst_n; ++j) {
        double pos = (j + 0.5) * scale - 0.5;
        pos = std::clamp(pos, 0.0, static_cast<double>(src_n - 1));
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, src_n - 1);
        taps[j] = {lo, hi, pos - static_cast<double>(lo)};
    }
    return taps;
}

}  // namespace

Array4<double> resample_area(const Array4<double>& src, std::size_t out_h, std::size_t out_w) {
    const Shape4& s = src.shape();
    const auto ty = area_taps(s.height, out_h);
    const auto tx = area_taps(s.width, out_w);
    Array4<double> out({s.frames, out_h, out_w, s.channels});
    for (std::size_t f = 0; f < s.frames; ++f)
        for (std::size_t y = 0; y < out_h; ++y)
            for (std::size_t x = 0; x < out_w; ++x)
                for (std::size_t c = 0; c < s.channels; ++c) {
                    double acc = 0.0;
                    for (const auto& a : ty[y])
                        for (const auto& b : tx[x]) acc += a.weight * b.weight * src.at(f, a.src, b.src, c);
                    out.at(f, y, x, c) = acc;
                }
    return out;
}

Array4<double> resample_bilinear(const Array4<double>& src, std::size_t out_h, std::size_t out_w) {
    const Shape4& s = src.shape();
    const auto ty = linear_taps(s.height, out_h);
    const auto tx = linear_taps(s.width, out_w);
    Array4<double> out({s.frames, out_h, out_w, s.channels});
    for (std::size_t f = 0; f < s.frames; ++f)
        for (std::size_t y = 0; y < out_h; ++y)
            for (std::size_t x = 0; x < out_w; ++x)
                for (std::size_t c = 0; c < s.channels; ++c) {
                    const auto& a = ty[y];
                    const auto& b = tx[x];
                    const double top = (1.0 - b.w_hi) * src.at(f, a.lo, b.lo, c) + b.w_hi * src.at(f, a.lo, b.hi, c);
                    const double bot = (1.0 - b.w_hi) * src.at(f, a.hi, b.lo, c) + b.w_hi * src.at(f, a.hi, b.hi, c);
                    out.at(f, y, x, c) = (1.0 - a.w_hi) * top + a.w_hi * bot;
                }
    return out;
}

MaskClip dilate(const MaskClip& mask, int radius) {
    if (radius <= 0) return mask;
    const Shape4& s = mask.shape();
    Array4<float> out(s);
    const int h = static_cast<int>(s.height);
    const int w = static_cast<int>(s.width);
    const int r2 = radius * radius;
    for (std::size_t f = 0; f < s.frames; ++f)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float best = 0.0f;
                for (int dy = -radius; dy <= radius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= h) continue;
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= w || dy * dy + dx * dx > r2) continue;
                        best = std::max(best, mask.at(f, yy, xx));
                    }
                }
                out.at(f, y, x, 0) = best;
            }
    return MaskClip(std::move(out));
}

}  // namespace bgreplace
