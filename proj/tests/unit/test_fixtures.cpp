#include <doctest.h>

#include "bgreplace/clip_io.hpp"
#include "bgreplace/fixtures.hpp"
#include "../support.hpp"

using namespace bgreplace;

TEST_CASE("pan fixture: background pixels follow the stated offsets") {
    const Fixture fx = make_fixture(4);
    CHECK(fx.clip.shape() == Shape4{8, 32, 48, 3});
    CHECK(fx.mask.shape() == Shape4{8, 32, 48, 1});
    CHECK(fx.background_image.shape() == Shape4{1, 32, 48, 3});
    REQUIRE(fx.bg_offsets.size() == 8);
    std::size_t compared = 0;
    for (std::size_t f = 1; f < 8; ++f) {
        const Offset o = fx.bg_offsets[f];
        CHECK(o == Offset{0, 2 * static_cast<int>(f)});
        CHECK(fx.fg_offsets[f] == Offset{0, static_cast<int>(f)});
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = static_cast<std::size_t>(o.dx); x < 48; ++x) {
                const std::size_t x0 = x - static_cast<std::size_t>(o.dx);
                if (fx.mask.values().at(f, y, x, 0) > 0.0f || fx.mask.values().at(0, y, x0, 0) > 0.0f) continue;
                for (std::size_t c = 0; c < 3; ++c) {
                    // same background coordinate, same arithmetic
                    REQUIRE(fx.clip.pixels().at(f, y, x, c) == fx.clip.pixels().at(0, y, x0, c));
                }
                ++compared;
            }
    }
    CHECK(compared > 1000);
}

TEST_CASE("pan fixture: the foreground ellipse moves one pixel per frame") {
    const Fixture fx = make_fixture(1);
    const auto area = [&](std::size_t f) {
        double s = 0.0;
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 48; ++x) s += fx.mask.values().at(f, y, x, 0);
        return s;
    };
    for (std::size_t f = 1; f < 8; ++f) {
        CHECK(area(f) == area(0));
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = f; x < 48; ++x)
                REQUIRE(fx.mask.values().at(f, y, x, 0) == fx.mask.values().at(0, y, x - f, 0));
    }
    CHECK(area(0) > 0.15 * 32 * 48);
}

TEST_CASE("static fixture repeats its first frame") {
    const Fixture fx = make_static_fixture(2);
    for (std::size_t f = 1; f < fx.clip.frames(); ++f) {
        CHECK(fx.bg_offsets[f] == Offset{});
        CHECK(max_abs_diff(fx.clip.frame_clip(f).pixels(), fx.clip.frame_clip(0).pixels()) == 0.0);
    }
}

TEST_CASE("fixtures are deterministic per seed") {
    CHECK(make_fixture(9).clip.pixels().vector() == make_fixture(9).clip.pixels().vector());
    CHECK(make_fixture(9).clip.pixels().vector() != make_fixture(10).clip.pixels().vector());
    const FixtureParams p = closeup_params();
    CHECK(make_fixture(0, p).clip.shape() == Shape4{8, 128, 192, 3});
    CHECK_THROWS_AS(make_fixture(0, FixtureParams{0, 32, 48}), Error);
    CHECK_THROWS_AS(make_fixture(0, FixtureParams{4, 6, 48}), Error);
}

TEST_CASE("written fixtures load back bit-exact") {
    const auto dir = testing::scratch_dir("fixture_write");
    const Fixture fx = make_fixture(5);
    write_fixture(fx, dir);
    CHECK(load_clip(dir / "input" / "manifest.json").pixels().vector() == fx.clip.pixels().vector());
    CHECK(load_mask(dir / "masks" / "manifest.json").values().vector() == fx.mask.values().vector());
    CHECK(load_clip(dir / "background" / "manifest.json").pixels().vector() == fx.background_image.pixels().vector());
}
