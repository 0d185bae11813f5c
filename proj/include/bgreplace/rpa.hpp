#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bgreplace/backends.hpp"
#include "bgreplace/frequency.hpp"
#include "bgreplace/scheduler.hpp"

namespace bgreplace {

enum class BgFill { kInpaintInput, kPrecomputed };

std::string to_string(BgFill fill);
BgFill parse_bg_fill(const std::string& name);

struct RefineConfig {
    BlurSpec blur;
    MaskClip fg_masks;                 // M, segmentation of the input video
    BgFill bg_fill = BgFill::kInpaintInput;
    std::optional<VideoClip> background;  // required for kPrecomputed
    int mask_dilate_px = 2;            // grows M before inpainting the generated frames
};

/// Foreground refinement:
///   out = M * (HF(input) + LF(i0t)) + (1 - M) * I_BG
/// I_BG is the precomputed background, or i0t inpainted under the dilated
/// mask. The blend is evaluated in double and rounded once, so input == i0t
/// with M == 1 returns i0t bit for bit. `inpainter` may be null when it is
/// not needed (precomputed background, or M == 1 everywhere).
VideoClip refine(const VideoClip& i0t, const VideoClip& input, const RefineConfig& cfg, Inpainter* inpainter);

/// Deterministic projection of a refined clip back to the latent space:
///   (mu, sigma)   = encode(decode(x0t))
///   eps_hat       = (x0t - mu) / sigma
///   (mu', sigma') = encode(refined)
///   return mu' + eps_hat * sigma'
/// `decoded` must be decode(x0t); pass it when the caller already has it.
LatentTensor project(const LatentTensor& x0t, const VideoClip& refined, LatentCodec& codec);
LatentTensor project(const LatentTensor& x0t, const VideoClip& decoded, const VideoClip& refined, LatentCodec& codec);

/// Plain reparameterized re-encode, mu' + eps * sigma' with the given noise.
/// This is what the projection replaces.
LatentTensor resample(const VideoClip& refined, const Array4<double>& eps, LatentCodec& codec);

enum class Reencode {
    kProject,  // deterministic eps_hat
    kRandom,   // fresh Gaussian eps each step (ablation)
};

struct RpaOptions {
    bool enabled = true;
    Reencode reencode = Reencode::kProject;
    std::uint64_t seed = 0;  // only used by Reencode::kRandom
};

struct RpaStep {
    int index = 0;          // 0 for the first denoising step
    int t = 0;
    double recon_rms = 0;   // RMS of encode-mean(decode(x0t)) - x0t
    double bg_rms = 0;      // RMS of x0t_hat - x0t over background latent cells
    std::size_t bg_cells = 0;
};

struct RpaTrace {
    std::vector<RpaStep> steps;

    std::string to_jsonl() const;
    void write_jsonl(const std::filesystem::path& path) const;
};

struct DenoiseResult {
    VideoClip clip;
    LatentTensor latent;
    RpaTrace trace;
};

/// DDIM denoising from x_start, which sits at the timestep with `steps`
/// remaining. At each step the noise estimate is computed once and reused
/// for both pred_x0 and the update. With RPA enabled, x0t is decoded,
/// refined against `input`, and re-encoded before the update.
DenoiseResult denoise_with_rpa(const LatentTensor& x_start, const VideoClip& input, const Conditioning& c, int steps,
                               const NoiseSchedule& sched, Denoiser& denoiser, LatentCodec& codec,
                               const RefineConfig& cfg, Inpainter* inpainter, const RpaOptions& options = {});

/// Latent cells whose footprint (at the latent/clip scale ratio, grown by
/// one cell) contains no foreground pixel. Returned as a 0/1 plane per frame.
std::vector<std::uint8_t> background_cells(const MaskClip& mask, const Shape4& latent_shape);

}  // namespace bgreplace
