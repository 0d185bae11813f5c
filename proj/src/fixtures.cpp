#include "bgreplace/fixtures.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "bgreplace/clip_io.hpp"
#include "bgreplace/rng.hpp"

namespace bgreplace {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wave {
    double period_x = 0, period_y = 0, amplitude = 0;
    double phase[3] = {0, 0, 0};

    double operator()(double y, double x, std::size_t c) const {
        double arg = phase[c];
        if (period_x != 0) arg += kTwoPi * x / period_x;
        if (period_y != 0) arg += kTwoPi * y / period_y;
        return amplitude * std::sin(arg);
    }
};

struct Layers {
    std::vector<Wave> bg;
    std::vector<Wave> fg;
};

Layers make_layers(std::uint64_t seed) {
    std::mt19937_64 gen(stream_seed(seed, rng_stage::kFixture));
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    auto wave = [&](double px, double py, double a) {
        Wave w{px, py, a};
        for (double& p : w.phase) p = phase(gen);
        return w;
    };
    Layers l;
    // background periods 4-8 px, foreground periods 10-14 px
    l.bg = {wave(5.0, 0.0, 0.12), wave(0.0, 7.0, 0.10), wave(4.3, 4.3, 0.06), wave(8.0, -6.0, 0.05)};
    l.fg = {wave(12.0, 0.0, 0.14), wave(0.0, 10.0, 0.12), wave(14.0, -14.0, 0.08)};
    return l;
}

Fixture build(std::uint64_t seed, const FixtureParams& p) {
    if (p.frames == 0 || p.height < kMinClipSide || p.width < kMinClipSide) {
        throw_invalid("fixture: need at least one frame of 8x8 or larger");
    }
    const Layers layers = make_layers(seed);
    const double base[3] = {0.46, 0.50, 0.54};
    const double cy = 0.5 * static_cast<double>(p.height);
    const double cx = p.fg_center_x * static_cast<double>(p.width);
    const double ry = p.fg_radius_y * static_cast<double>(p.height);
    const double rx = p.fg_radius_x * static_cast<double>(p.width);

    Fixture fx;
    const Shape4 shape{p.frames, p.height, p.width, 3};
    Array4<float> px(shape);
    Array4<float> mk(Shape4{p.frames, p.height, p.width, 1});
    for (std::size_t f = 0; f < p.frames; ++f) {
        const int n = static_cast<int>(f);
        const Offset bo{p.bg_step.dy * n, p.bg_step.dx * n};
        const Offset fo{p.fg_step.dy * n, p.fg_step.dx * n};
        fx.bg_offsets.push_back(bo);
        fx.fg_offsets.push_back(fo);
        for (std::size_t y = 0; y < p.height; ++y)
            for (std::size_t x = 0; x < p.width; ++x) {
                const double by = static_cast<double>(y) - bo.dy, bx = static_cast<double>(x) - bo.dx;
                const double fy = static_cast<double>(y) - fo.dy, fxx = static_cast<double>(x) - fo.dx;
                const double ey = (fy + 0.5 - cy) / ry, ex = (fxx + 0.5 - cx) / rx;
                const bool inside = ey * ey + ex * ex <= 1.0;
                mk.at(f, y, x, 0) = inside ? 1.0f : 0.0f;
                for (std::size_t c = 0; c < 3; ++c) {
                    double v = base[c];
                    if (inside) {
                        for (const Wave& w : layers.fg) v += w(fy, fxx, c);
                    } else {
                        for (const Wave& w : layers.bg) v += w(by, bx, c);
                    }
                    px.at(f, y, x, c) = static_cast<float>(v);
                }
            }
    }
    fx.clip = VideoClip(std::move(px));
    fx.mask = MaskClip(std::move(mk));

    Array4<float> img(Shape4{1, p.height, p.width, 3});
    for (std::size_t y = 0; y < p.height; ++y)
        for (std::size_t x = 0; x < p.width; ++x) {
            const double u = static_cast<double>(y) / static_cast<double>(p.height - 1);
            const double v = static_cast<double>(x) / static_cast<double>(p.width - 1);
            img.at(0, y, x, 0) = static_cast<float>(0.75 - 0.2 * u);
            img.at(0, y, x, 1) = static_cast<float>(0.55 - 0.1 * u + 0.05 * v);
            img.at(0, y, x, 2) = static_cast<float>(0.30 + 0.2 * v);
        }
    fx.background_image = VideoClip(std::move(img));
    return fx;
}

}  // namespace

Fixture make_fixture(std::uint64_t seed, const FixtureParams& params) { return build(seed, params); }

FixtureParams closeup_params() {
    FixtureParams p;
    p.height = 128;
    p.width = 192;
    p.fg_radius_y = 0.4;
    p.fg_radius_x = 0.3;
    p.fg_center_x = 0.45;
    return p;
}

Fixture make_static_fixture(std::uint64_t seed, const FixtureParams& params) {
    FixtureParams p = params;
    p.bg_step = {0, 0};
    p.fg_step = {0, 0};
    return build(seed, p);
}

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir) {
    save_clip(fixture.clip, dir / "input", PixelFormat::kRaw32);
    save_mask(fixture.mask, dir / "masks", PixelFormat::kRaw32, fixture.clip.fps());
    save_clip(fixture.background_image, dir / "background", PixelFormat::kRaw32);
}

}  // namespace bgreplace
