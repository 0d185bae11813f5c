#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "bgreplace/video.hpp"

namespace testing {

inline bgreplace::Array4<float> random_floats(const bgreplace::Shape4& shape, std::uint64_t seed, float lo = 0.0f,
                                              float hi = 1.0f) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    bgreplace::Array4<float> a(shape);
    for (float& v : a.data()) v = u(gen);
    return a;
}

inline bgreplace::Array4<double> random_doubles(const bgreplace::Shape4& shape, std::uint64_t seed, double lo = 0.0,
                                                double hi = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    bgreplace::Array4<double> a(shape);
    for (double& v : a.data()) v = u(gen);
    return a;
}

inline bgreplace::VideoClip random_clip(std::size_t f, std::size_t h, std::size_t w, std::uint64_t seed) {
    return bgreplace::VideoClip(random_floats({f, h, w, 3}, seed));
}

inline bgreplace::MaskClip box_mask(std::size_t f, std::size_t h, std::size_t w, std::size_t y0, std::size_t y1,
                                    std::size_t x0, std::size_t x1) {
    bgreplace::Array4<float> m({f, h, w, 1});
    for (std::size_t k = 0; k < f; ++k)
        for (std::size_t y = y0; y < y1; ++y)
            for (std::size_t x = x0; x < x1; ++x) m.at(k, y, x, 0) = 1.0f;
    return bgreplace::MaskClip(std::move(m));
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("bgreplace_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
