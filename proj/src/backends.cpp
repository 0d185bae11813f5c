#include "bgreplace/backends.hpp"

#include <algorithm>

namespace bgreplace {

LatentCodec::LatentCodec(double sigma_min) : m_sigma_min(sigma_min) {
    if (!(sigma_min > 0.0)) throw_invalid("codec sigma_min must be positive");
}

Posterior LatentCodec::encode(const VideoClip& clip) {
    Posterior p = encode_impl(clip);
    require_same_shape(p.mean.data(), p.stddev.data(), "codec encode");
    if (auto declared = latent_shape(clip.shape()); declared && !(*declared == p.mean.shape())) {
        throw_backend("codec produced latent " + to_string(p.mean.shape()) + ", declared " + to_string(*declared));
    }
    Array4<double> sd = p.stddev.data();
    for (double& v : sd.data()) v = std::max(v, m_sigma_min);
    return {std::move(p.mean), LatentTensor(std::move(sd))};
}

VideoClip LatentCodec::decode(const LatentTensor& latent) { return decode_impl(latent); }

LatentTensor Denoiser::eps(const LatentTensor& x_t, const Conditioning& c, int t) {
    LatentTensor out = eps_impl(x_t, c, t);
    if (!(out.shape() == x_t.shape())) {
        throw_backend("denoiser returned " + to_string(out.shape()) + " for input " + to_string(x_t.shape()));
    }
    return out;
}

VideoClip Relighter::relight_image_guided(const VideoClip& fg, const VideoClip& bg) {
    require_same_shape(fg.pixels(), bg.pixels(), "relight_image_guided");
    VideoClip out = relight_image_guided_impl(fg, bg);
    if (!(out.shape() == fg.shape())) throw_backend("image-guided relighter changed the clip shape");
    return out;
}

VideoClip Relighter::relight_text_guided_denoise(const VideoClip& noisy, const VideoClip& fg,
                                                 const std::string& prompt, int steps, bool cross_frame) {
    require_same_shape(noisy.pixels(), fg.pixels(), "relight_text_guided_denoise");
    if (steps < 0) throw_invalid("relight_text_guided_denoise: negative step count");
    VideoClip out = relight_text_guided_denoise_impl(noisy, fg, prompt, steps, cross_frame);
    if (!(out.shape() == fg.shape())) throw_backend("text-guided relighter changed the clip shape");
    return out;
}

VideoClip Inpainter::fill(const VideoClip& clip, const MaskClip& mask) {
    require_mask_matches(mask, clip, "inpaint");
    VideoClip filled = fill_impl(clip, mask);
    if (!(filled.shape() == clip.shape())) throw_backend("inpainter changed the clip shape");
    Array4<float> out = filled.pixels();
    const Shape4& s = clip.shape();
    const std::size_t pixels = s.frames * s.height * s.width;
    for (std::size_t p = 0; p < pixels; ++p) {
        if (mask.values()[p] == 0.0f) {
            for (std::size_t c = 0; c < s.channels; ++c) out[p * s.channels + c] = clip.pixels()[p * s.channels + c];
        }
    }
    return VideoClip(std::move(out), clip.fps());
}

VideoClip BackgroundProvider::generate(const VideoClip& input, const VideoClip& first_frame, std::uint64_t seed,
                                       const MaskClip* foreground) {
    if (first_frame.frames() != 1 || first_frame.height() != input.height() || first_frame.width() != input.width()) {
        throw_invalid("background provider: first frame " + to_string(first_frame.shape()) +
                      " does not match input frames " + to_string(input.shape()));
    }
    if (foreground) require_mask_matches(*foreground, input, "background provider");
    VideoClip out = generate_impl(input, first_frame, seed, foreground);
    if (!(out.shape() == input.shape())) {
        throw_backend("background provider returned " + to_string(out.shape()) + " for input " + to_string(input.shape()));
    }
    return out;
}

}  // namespace bgreplace
