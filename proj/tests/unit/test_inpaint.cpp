#include <doctest.h>

#include <memory>

#include <Eigen/Dense>

#include "bgreplace/toy_backends.hpp"
#include "../support.hpp"

using namespace bgreplace;

namespace {

MaskClip disk_mask(std::size_t h, std::size_t w, double cy, double cx, double r) {
    Array4<float> m({1, h, w, 1});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m.at(0, y, x, 0) = 1.0f;
    return MaskClip(std::move(m));
}

// Dense discrete Laplace solve on the masked pixels of frame 0, channel c:
// every unknown equals the mean of its in-frame 4-neighbours.
Eigen::VectorXd dense_fill(const VideoClip& clip, const MaskClip& mask, std::size_t c, std::vector<int>& index) {
    const int h = static_cast<int>(clip.height()), w = static_cast<int>(clip.width());
    index.assign(h * w, -1);
    int n = 0;
    for (int p = 0; p < h * w; ++p)
        if (mask.values()[p] > 0.0f) index[p] = n++;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    for (int p = 0; p < h * w; ++p) {
        if (index[p] < 0) continue;
        const int y = p / w, x = p % w, row = index[p];
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
            if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
            a(row, row) += 1.0;
            const int q = ny[k] * w + nx[k];
            if (index[q] >= 0) a(row, index[q]) -= 1.0;
            else b(row) += clip.at(0, ny[k], nx[k], c);
        }
    }
    return a.partialPivLu().solve(b);
}

}  // namespace

TEST_CASE("empty mask leaves the clip untouched") {
    const VideoClip clip = testing::random_clip(2, 10, 12, 1);
    const VideoClip out = laplacian_fill(clip, MaskClip::constant(2, 10, 12, 0.0f));
    CHECK(max_abs_diff(out.pixels(), clip.pixels()) == 0.0);
}

TEST_CASE("constant boundary fills with the constant") {
    Array4<float> px({1, 20, 20, 3}, 0.35f);
    const MaskClip m = disk_mask(20, 20, 9.5, 9.5, 6.0);
    for (std::size_t y = 0; y < 20; ++y)
        for (std::size_t x = 0; x < 20; ++x)
            if (m.at(0, y, x) > 0) px.at(0, y, x, 1) = 0.9f;  // garbage under the mask
    const VideoClip out = laplacian_fill(VideoClip(px), m);
    for (float v : out.pixels().data()) CHECK(v == doctest::Approx(0.35f).epsilon(1e-5));
}

TEST_CASE("linear-gradient boundary matches the dense Laplace solve") {
    Array4<float> px({1, 24, 32, 3});
    for (std::size_t y = 0; y < 24; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
            px.at(0, y, x, 0) = static_cast<float>(0.02 * x + 0.01 * y);
            px.at(0, y, x, 1) = static_cast<float>(1.0 - 0.03 * y);
            px.at(0, y, x, 2) = static_cast<float>(0.5 + 0.01 * x - 0.01 * y);
        }
    const VideoClip clip(px);
    const MaskClip m = disk_mask(24, 32, 11.0, 14.0, 8.0);
    const VideoClip out = laplacian_fill(clip, m);
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<int> index;
        const Eigen::VectorXd u = dense_fill(clip, m, c, index);
        double worst = 0.0;
        for (std::size_t p = 0; p < index.size(); ++p)
            if (index[p] >= 0) worst = std::max(worst, std::abs(out.pixels()[p * 3 + c] - u(index[p])));
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("irregular boundary touching the frame edge matches the dense solve") {
    const VideoClip clip = testing::random_clip(1, 16, 16, 2);
    const MaskClip m = testing::box_mask(1, 16, 16, 0, 9, 3, 12);
    const VideoClip out = laplacian_fill(clip, m);
    for (std::size_t c = 0; c < 3; ++c) {
        std::vector<int> index;
        const Eigen::VectorXd u = dense_fill(clip, m, c, index);
        double worst = 0.0;
        for (std::size_t p = 0; p < index.size(); ++p)
            if (index[p] >= 0) worst = std::max(worst, std::abs(out.pixels()[p * 3 + c] - u(index[p])));
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("soft mask blends fill and original") {
    Array4<float> px({1, 8, 8, 3}, 0.2f);
    px.at(0, 4, 4, 0) = 1.0f;
    Array4<float> m({1, 8, 8, 1}, 0.0f);
    m.at(0, 4, 4, 0) = 0.25f;
    const VideoClip out = laplacian_fill(VideoClip(px), MaskClip(m));
    CHECK(out.at(0, 4, 4, 0) == doctest::Approx(0.25 * 0.2 + 0.75 * 1.0).epsilon(1e-6));
}

TEST_CASE("fully masked frame is an error") {
    const VideoClip clip = testing::random_clip(2, 8, 8, 3);
    Array4<float> m({2, 8, 8, 1}, 0.0f);
    for (float& v : m.frame(1)) v = 1.0f;
    CHECK_THROWS_AS(laplacian_fill(clip, MaskClip(m)), Error);
}

namespace {

// Deliberately writes garbage everywhere; fill() must restore unmasked pixels.
class ScribbleInpainter final : public Inpainter {
protected:
    VideoClip fill_impl(const VideoClip& clip, const MaskClip&) override {
        return VideoClip::constant(clip.frames(), clip.height(), clip.width(), -5.0f);
    }
};

}  // namespace

TEST_CASE("inpainter contract restores unmasked pixels for any implementation") {
    const VideoClip clip = testing::random_clip(2, 8, 8, 4);
    const MaskClip m = testing::box_mask(2, 8, 8, 2, 5, 2, 5);
    std::vector<std::unique_ptr<Inpainter>> impls;
    impls.push_back(std::make_unique<ScribbleInpainter>());
    impls.push_back(std::make_unique<LaplacianInpainter>());
    for (const auto& inp : impls) {
        const VideoClip out = inp->fill(clip, m);
        for (std::size_t p = 0; p < 2 * 64; ++p)
            if (m.values()[p] == 0.0f)
                for (std::size_t c = 0; c < 3; ++c) CHECK(out.pixels()[p * 3 + c] == clip.pixels()[p * 3 + c]);
    }
    LaplacianInpainter lap;
    CHECK_THROWS_AS(lap.fill(clip, MaskClip::constant(2, 8, 9, 0.0f)), Error);
}
