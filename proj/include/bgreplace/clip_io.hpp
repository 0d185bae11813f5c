#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bgreplace/video.hpp"

namespace bgreplace {

/// On-disk frame encoding.
///  - raster8 / raster16: PNG, 8 or 16 bits per channel, values quantized as round(v * max).
///  - raw32: "RPA1" magic, little-endian u32 H, W, C, then H*W*C little-endian f32, row-major,
///    channel-interleaved. Bit-exact.
enum class PixelFormat { kRaster8, kRaster16, kRaw32 };

std::string to_string(PixelFormat format);
PixelFormat parse_pixel_format(const std::string& tag);

struct ClipManifest {
    std::vector<std::string> frames;  // relative to the manifest's directory
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t count = 0;
    double fps = 24.0;
    PixelFormat format = PixelFormat::kRaw32;
};

ClipManifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const ClipManifest& manifest, const std::filesystem::path& manifest_path);

/// Loads every frame listed in the manifest. Grayscale frames are replicated to
/// three channels. Errors name the offending file.
VideoClip load_clip(const std::filesystem::path& manifest_path);

/// Loads a mask sequence. Multi-channel frames are averaged to one channel.
MaskClip load_mask(const std::filesystem::path& manifest_path);

/// Writes `manifest.json` plus one file per frame into `out_dir` (created if needed).
ClipManifest save_clip(const VideoClip& clip, const std::filesystem::path& out_dir, PixelFormat format);
ClipManifest save_mask(const MaskClip& mask, const std::filesystem::path& out_dir, PixelFormat format,
                       double fps = 24.0);

struct FrameFile {
    Array4<float> values;  // F=1, channels as stored
    PixelFormat format;
};

/// Single frame file; PNG or raw32 is detected from the file's magic bytes.
FrameFile read_frame_file(const std::filesystem::path& path);
void write_frame_file(const std::filesystem::path& path, std::span<const float> values, std::size_t height,
                      std::size_t width, std::size_t channels, PixelFormat format);

/// Loads a single image as a one-frame clip.
VideoClip load_image(const std::filesystem::path& path);

/// Quantizer used by raster writers: round(clamp(v, 0, 1) * max_code).
unsigned quantize(float value, unsigned max_code);

}  // namespace bgreplace
