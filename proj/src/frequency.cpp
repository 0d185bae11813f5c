#include "bgreplace/frequency.hpp"

#include <cmath>

namespace bgreplace {

int BlurSpec::effective_radius() const {
    if (!(sigma > 0.0)) throw_invalid("BlurSpec: sigma must be positive");
    const int r = radius ? *radius : static_cast<int>(std::ceil(3.0 * sigma));
    if (r < 1) throw_invalid("BlurSpec: radius must be at least 1");
    return r;
}

std::vector<double> gaussian_kernel(const BlurSpec& spec) {
    const int r = spec.effective_radius();
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * (i * i) / (spec.sigma * spec.sigma));
        sum += k[i + r];
    }
    for (double& v : k) v /= sum;
    return k;
}

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

namespace {

template <typename T>
Array4<double> blur_impl(const Array4<T>& in, const BlurSpec& spec) {
    const Shape4& s = in.shape();
    if (s.height < 2 || s.width < 2) {
        throw_invalid("gaussian_blur: frame " + to_string(s) + " is smaller than 2 px on an axis");
    }
    const std::vector<double> k = gaussian_kernel(spec);
    const int r = static_cast<int>(k.size() / 2);
    const int h = static_cast<int>(s.height);
    const int w = static_cast<int>(s.width);
    const std::size_t ch = s.channels;

    // Reflected source index for every (position, tap), computed once per axis.
    const auto taps = [r](int n) {
        std::vector<int> t(static_cast<std::size_t>(n) * (2 * r + 1));
        for (int i = 0; i < n; ++i)
            for (int d = -r; d <= r; ++d) t[static_cast<std::size_t>(i) * (2 * r + 1) + (d + r)] = reflect_index(i + d, n);
        return t;
    };
    const std::vector<int> tx = taps(w);
    const std::vector<int> ty = taps(h);
    const std::size_t nk = k.size();

    Array4<double> rows(s);
    Array4<double> out(s);
    for (std::size_t f = 0; f < s.frames; ++f) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int* src = &tx[static_cast<std::size_t>(x) * nk];
                for (std::size_t c = 0; c < ch; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < nk; ++j) acc += k[j] * static_cast<double>(in.at(f, y, src[j], c));
                    rows.at(f, y, x, c) = acc;
                }
            }
        for (int y = 0; y < h; ++y) {
            const int* src = &ty[static_cast<std::size_t>(y) * nk];
            for (int x = 0; x < w; ++x)
                for (std::size_t c = 0; c < ch; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < nk; ++j) acc += k[j] * rows.at(f, src[j], x, c);
                    out.at(f, y, x, c) = acc;
                }
        }
    }
    return out;
}

}  // namespace

Array4<double> blur_frames(const Array4<double>& frames, const BlurSpec& spec) { return blur_impl(frames, spec); }
Array4<double> blur_frames(const Array4<float>& frames, const BlurSpec& spec) { return blur_impl(frames, spec); }

VideoClip gaussian_blur(const VideoClip& clip, const BlurSpec& spec) {
    return VideoClip(blur_frames(clip.pixels(), spec).cast<float>(), clip.fps());
}

Bands split_bands(const VideoClip& clip, const BlurSpec& spec) {
    const Array4<double> low = blur_frames(clip.pixels(), spec);
    Array4<float> lo(clip.shape());
    Array4<float> hi(clip.shape());
    for (std::size_t i = 0; i < lo.size(); ++i) {
        lo[i] = static_cast<float>(low[i]);
        // Residual taken against the rounded low band so lo + hi reconstructs the clip.
        hi[i] = static_cast<float>(static_cast<double>(clip.pixels()[i]) - static_cast<double>(lo[i]));
    }
    return {VideoClip(std::move(lo), clip.fps()), VideoClip(std::move(hi), clip.fps())};
}

}  // namespace bgreplace
