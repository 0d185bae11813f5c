#pragma once

#include <optional>
#include <vector>

#include "bgreplace/video.hpp"

namespace bgreplace {

inline constexpr double kDefaultBlurSigma = 3.0;

struct BlurSpec {
    double sigma = kDefaultBlurSigma;
    std::optional<int> radius;  // defaults to ceil(3 * sigma)

    int effective_radius() const;
};

/// Sampled 1D Gaussian at integer offsets -r..r, normalized to unit sum.
std::vector<double> gaussian_kernel(const BlurSpec& spec);

/// Half-sample symmetric reflection (d c b a | a b c d | d c b a) of an index
/// into [0, n); valid for any offset, including kernels wider than the frame.
int reflect_index(int i, int n);

/// Per-frame separable Gaussian blur with reflect padding, no temporal mixing.
Array4<double> blur_frames(const Array4<double>& frames, const BlurSpec& spec);
Array4<double> blur_frames(const Array4<float>& frames, const BlurSpec& spec);

VideoClip gaussian_blur(const VideoClip& clip, const BlurSpec& spec);

struct Bands {
    VideoClip low;
    VideoClip high;
};

/// low = blur(clip), high = clip - low.
Bands split_bands(const VideoClip& clip, const BlurSpec& spec);

}  // namespace bgreplace
