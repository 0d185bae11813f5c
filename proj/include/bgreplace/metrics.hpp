#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "bgreplace/frequency.hpp"
#include "bgreplace/video.hpp"

namespace bgreplace {

inline constexpr std::size_t kTemConSide = 16;
inline constexpr double kPsnrCap = 99.0;

/// A scalar metric with its per-frame (or per-pair) breakdown. Series entries
/// that are undefined for a frame are NaN.
struct MetricSeries {
    double value = 0.0;
    std::vector<double> series;
    std::size_t excluded = 0;  // tem_con only: pairs skipped for a blank frame
};

/// Mean cosine similarity of consecutive frames, each reduced to a
/// mean-centred 16x16x3 area-downsampled vector. Two blank (zero-norm)
/// vectors count as 1; a pair with exactly one blank vector is excluded.
MetricSeries tem_con_series(const VideoClip& clip);
double tem_con(const VideoClip& clip);

/// PSNR (peak 1.0, capped at 99 dB) over pixels with mask < 0.5.
MetricSeries bg_psnr_series(const VideoClip& out, const VideoClip& ref, const MaskClip& mask);
double bg_psnr(const VideoClip& out, const VideoClip& ref, const MaskClip& mask);

/// Pearson correlation of out - blur(out) and input - blur(input) over pixels
/// with mask >= 0.5 (all channels pooled).
MetricSeries fg_hf_corr_series(const VideoClip& out, const VideoClip& input, const MaskClip& mask,
                               const BlurSpec& blur);
double fg_hf_corr(const VideoClip& out, const VideoClip& input, const MaskClip& mask, const BlurSpec& blur);

struct MetricReport {
    MetricSeries tem_con;
    MetricSeries bg_psnr;
    MetricSeries fg_hf_corr;
};

/// tem_con on `out`, bg_psnr of `out` against `bg_ref`, fg_hf_corr of `out` against `input`.
MetricReport evaluate(const VideoClip& out, const VideoClip& bg_ref, const VideoClip& input, const MaskClip& mask,
                      const BlurSpec& blur);

/// {"tem_con": .., "bg_psnr": .., "fg_hf_corr": .., "series": {...}}; NaN becomes null.
nlohmann::json to_json(const MetricReport& report);

}  // namespace bgreplace
