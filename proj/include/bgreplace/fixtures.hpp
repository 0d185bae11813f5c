#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bgreplace/toy_backends.hpp"
#include "bgreplace/video.hpp"

namespace bgreplace {

struct FixtureParams {
    std::size_t frames = 8;
    std::size_t height = 32;
    std::size_t width = 48;
    Offset bg_step{0, 2};  // background content moves by this much per frame
    Offset fg_step{0, 1};  // foreground object moves by this much per frame
    double fg_radius_y = 0.3;   // ellipse semi-axes as fractions of height / width
    double fg_radius_x = 0.22;
    double fg_center_x = 0.4;   // fraction of width
};

/// Synthetic clip with known motion: a striped background panning under a
/// textured elliptical foreground that moves at its own rate. Both layers have
/// mean close to 0.5, so band splits at the seam carry little DC step.
struct Fixture {
    VideoClip clip;
    MaskClip mask;
    VideoClip background_image;  // one frame, smooth, for image-guided runs
    std::vector<Offset> bg_offsets;  // cumulative, relative to frame 0
    std::vector<Offset> fg_offsets;
};

Fixture make_fixture(std::uint64_t seed, const FixtureParams& params = {});

/// Larger frames with a foreground filling much of the frame. The band split
/// (blur sigma 3) and the 2x codec both smear a few pixels around the mask
/// edge; at this size that seam is a small share of the foreground.
FixtureParams closeup_params();

/// Same layers with no motion at all.
Fixture make_static_fixture(std::uint64_t seed, const FixtureParams& params = {});

/// Writes input/, masks/, background/ (raw32 manifests) under `dir`.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

}  // namespace bgreplace
