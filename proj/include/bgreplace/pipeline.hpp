#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "bgreplace/backends.hpp"
#include "bgreplace/clip_io.hpp"
#include "bgreplace/frequency.hpp"
#include "bgreplace/metrics.hpp"
#include "bgreplace/rpa.hpp"
#include "bgreplace/scheduler.hpp"

namespace bgreplace {

enum class BackendKind { kToy, kRemote };

struct BackendConfig {
    BackendKind codec = BackendKind::kToy;
    BackendKind denoiser = BackendKind::kToy;
    BackendKind relighter = BackendKind::kToy;
    BackendKind inpainter = BackendKind::kToy;
    BackendKind background = BackendKind::kToy;
    std::string url;  // required when any slot is remote
    double timeout_s = 300.0;
};

struct RpaSettings {
    bool enabled = true;
    double sigma_min = kDefaultSigmaMin;
    int mask_dilate_px = 2;
    BgFill bg_fill = BgFill::kInpaintInput;
    std::optional<std::filesystem::path> background;  // precomputed I_BG manifest; stage-1 output when absent
    std::optional<std::filesystem::path> trace_path;
    Reencode reencode = Reencode::kProject;  // kRandom is the ablation, not exposed in the config
};

struct PipelineConfig {
    std::filesystem::path input;
    std::filesystem::path masks;
    std::optional<std::string> prompt;
    std::optional<std::filesystem::path> background_image;
    std::filesystem::path output_dir;
    std::uint64_t seed = 0;

    int t_train = kDefaultTrainSteps;
    int t_infer = kDefaultInferenceSteps;
    double beta_start = kDefaultBetaStart;
    double beta_end = kDefaultBetaEnd;
    int t0 = 14;
    int t1 = 14;

    BlurSpec blur;
    BackendConfig backend;
    bool cross_frame = true;
    RpaSettings rpa;
    int start_stage = 1;
    PixelFormat artifact_format = PixelFormat::kRaw32;

    std::string prompt_or_empty() const { return prompt.value_or(""); }
};

/// Parses and validates a config document. Unknown keys are rejected;
/// relative paths resolve against `base_dir`. Throws Error(kConfig).
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// `strong` = (0.7T, 0.7T), `weak` = (0.4T, 0.4T), rounded to whole steps.
void apply_preset(PipelineConfig& cfg, const std::string& preset);

/// The fully resolved config (defaults filled in, absolute paths).
nlohmann::json to_json(const PipelineConfig& cfg);

NoiseSchedule make_schedule(const PipelineConfig& cfg);
BackendSet make_backends(const PipelineConfig& cfg, const NoiseSchedule& sched);

// ---------------------------------------------------------------------------
// Stages

/// Text mode (no background image): the first input frame is relit by the
/// text-guided relighter over the full schedule, extended along the input's
/// camera motion, and the foreground it carries is inpainted away. Image
/// mode: the image (resized to the frame size) is extended directly.
VideoClip stage1_background(const VideoClip& input, const MaskClip& masks,
                            const std::optional<VideoClip>& background_image, const std::string& prompt,
                            int mask_dilate_px, const NoiseSchedule& sched, BackendSet& backends, std::uint64_t seed);

struct Stage2Result {
    VideoClip foreground;  // I_f: input foreground over mid grey
    VideoClip step1;       // image-guided relight composited over the background
    VideoClip harmonized;  // I_L
};

/// Two-step harmonization. The step-1 clip is noised to the timestep with
/// `t0` steps remaining (one noise field shared by all frames) and denoised
/// by the text-guided relighter. t0 = 0 returns step 1 unchanged.
Stage2Result stage2_harmonize(const VideoClip& input, const MaskClip& masks, const VideoClip& background,
                              const std::string& prompt, int t0, bool cross_frame, const NoiseSchedule& sched,
                              BackendSet& backends, std::uint64_t seed);

struct Stage3Options {
    int t1 = 14;
    BlurSpec blur;
    RpaSettings rpa;
    std::optional<VideoClip> precomputed_background;  // used when rpa.bg_fill = precomputed
    std::string prompt;
};

struct Stage3Result {
    VideoClip output;  // I'
    RpaTrace trace;
};

/// Encodes I_L (mean path), noises it to `t1` remaining steps and runs
/// denoise_with_rpa against the original input.
Stage3Result stage3_enhance(const VideoClip& harmonized, const VideoClip& input, const MaskClip& masks,
                            const Stage3Options& options, const NoiseSchedule& sched, BackendSet& backends,
                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Full run

struct StageArtifacts {
    std::filesystem::path background;  // stage1_background/manifest.json
    std::filesystem::path foreground;  // stage2_foreground/manifest.json
    std::filesystem::path harmonized;  // stage2_harmonized/manifest.json
    std::filesystem::path output;      // stage3_output/manifest.json
    std::filesystem::path metrics;     // metrics.json
    std::optional<std::filesystem::path> trace;
};

struct PipelineResult {
    VideoClip background;
    VideoClip foreground;
    VideoClip harmonized;
    VideoClip output;
    MetricReport metrics;
    nlohmann::json report;
    RpaTrace trace;
    StageArtifacts artifacts;
};

PipelineResult run_pipeline(const PipelineConfig& cfg);
PipelineResult run_pipeline(const PipelineConfig& cfg, BackendSet& backends);

}  // namespace bgreplace
