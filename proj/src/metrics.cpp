#include "bgreplace/metrics.hpp"

#include <cmath>
#include <limits>

namespace bgreplace {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> frame_feature(const Array4<double>& small, std::size_t f) {
    const auto fr = small.frame(f);
    std::vector<double> v(fr.begin(), fr.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double& x : v) x -= mean;
    return v;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) return kNaN;
    return cov / std::sqrt(va * vb);
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json series_json(const std::vector<double>& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : s) arr.push_back(number_or_null(v));
    return arr;
}

}  // namespace

MetricSeries tem_con_series(const VideoClip& clip) {
    if (clip.frames() < 2) throw_invalid("tem_con needs at least 2 frames");
    const Array4<double> small = resample_area(clip.pixels().cast<double>(), kTemConSide, kTemConSide);
    MetricSeries out;
    double sum = 0.0;
    std::size_t used = 0;
    std::vector<double> prev = frame_feature(small, 0);
    for (std::size_t f = 1; f < clip.frames(); ++f) {
        std::vector<double> cur = frame_feature(small, f);
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            dot += prev[i] * cur[i];
            na += prev[i] * prev[i];
            nb += cur[i] * cur[i];
        }
        double sim = kNaN;
        if (na == 0.0 && nb == 0.0) sim = 1.0;
        else if (na > 0.0 && nb > 0.0) sim = dot / std::sqrt(na * nb);
        out.series.push_back(sim);
        if (std::isnan(sim)) {
            ++out.excluded;
        } else {
            sum += sim;
            ++used;
        }
        prev = std::move(cur);
    }
    if (used == 0) throw_invalid("tem_con: every frame pair has a blank frame");
    out.value = sum / static_cast<double>(used);
    return out;
}

double tem_con(const VideoClip& clip) { return tem_con_series(clip).value; }

MetricSeries bg_psnr_series(const VideoClip& out, const VideoClip& ref, const MaskClip& mask) {
    require_same_shape(out.pixels(), ref.pixels(), "bg_psnr");
    require_mask_matches(mask, out, "bg_psnr");
    const Shape4& s = out.shape();
    const std::size_t plane = s.height * s.width;
    MetricSeries res;
    double total = 0.0;
    std::size_t total_n = 0;
    for (std::size_t f = 0; f < s.frames; ++f) {
        double acc = 0.0;
        std::size_t n = 0;
        for (std::size_t p = 0; p < plane; ++p) {
            if (!(mask.values()[f * plane + p] < 0.5f)) continue;
            for (std::size_t c = 0; c < s.channels; ++c) {
                const std::size_t i = (f * plane + p) * s.channels + c;
                const double d = static_cast<double>(out.pixels()[i]) - ref.pixels()[i];
                acc += d * d;
            }
            n += s.channels;
        }
        res.series.push_back(n ? psnr_from_mse(acc / static_cast<double>(n)) : kNaN);
        total += acc;
        total_n += n;
    }
    if (total_n == 0) throw_invalid("bg_psnr: the mask leaves no background pixels");
    res.value = psnr_from_mse(total / static_cast<double>(total_n));
    return res;
}

double bg_psnr(const VideoClip& out, const VideoClip& ref, const MaskClip& mask) {
    return bg_psnr_series(out, ref, mask).value;
}

MetricSeries fg_hf_corr_series(const VideoClip& out, const VideoClip& input, const MaskClip& mask,
                               const BlurSpec& blur) {
    require_same_shape(out.pixels(), input.pixels(), "fg_hf_corr");
    require_mask_matches(mask, out, "fg_hf_corr");
    const Array4<double> lo_out = blur_frames(out.pixels(), blur);
    const Array4<double> lo_in = blur_frames(input.pixels(), blur);
    const Shape4& s = out.shape();
    const std::size_t plane = s.height * s.width;
    MetricSeries res;
    std::vector<double> all_a, all_b, a, b;
    for (std::size_t f = 0; f < s.frames; ++f) {
        a.clear();
        b.clear();
        for (std::size_t p = 0; p < plane; ++p) {
            if (!(mask.values()[f * plane + p] >= 0.5f)) continue;
            for (std::size_t c = 0; c < s.channels; ++c) {
                const std::size_t i = (f * plane + p) * s.channels + c;
                a.push_back(out.pixels()[i] - lo_out[i]);
                b.push_back(input.pixels()[i] - lo_in[i]);
            }
        }
        res.series.push_back(a.empty() ? kNaN : pearson(a, b));
        all_a.insert(all_a.end(), a.begin(), a.end());
        all_b.insert(all_b.end(), b.begin(), b.end());
    }
    if (all_a.empty()) throw_invalid("fg_hf_corr: the mask selects no foreground pixels");
    res.value = pearson(all_a, all_b);
    if (std::isnan(res.value)) throw_invalid("fg_hf_corr: high-frequency band has zero variance");
    return res;
}

double fg_hf_corr(const VideoClip& out, const VideoClip& input, const MaskClip& mask, const BlurSpec& blur) {
    return fg_hf_corr_series(out, input, mask, blur).value;
}

MetricReport evaluate(const VideoClip& out, const VideoClip& bg_ref, const VideoClip& input, const MaskClip& mask,
                      const BlurSpec& blur) {
    return {tem_con_series(out), bg_psnr_series(out, bg_ref, mask), fg_hf_corr_series(out, input, mask, blur)};
}

nlohmann::json to_json(const MetricReport& r) {
    return {
        {"tem_con", number_or_null(r.tem_con.value)},
        {"bg_psnr", number_or_null(r.bg_psnr.value)},
        {"fg_hf_corr", number_or_null(r.fg_hf_corr.value)},
        {"series",
         {{"tem_con", series_json(r.tem_con.series)},
          {"bg_psnr", series_json(r.bg_psnr.series)},
          {"fg_hf_corr", series_json(r.fg_hf_corr.series)}}},
        {"tem_con_excluded_pairs", r.tem_con.excluded},
    };
}

}  // namespace bgreplace
