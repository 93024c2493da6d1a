#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "slidereg/image.hpp"
#include "slidereg/pnm_io.hpp"
#include "slidereg/random.hpp"

using namespace slidereg;

namespace {

Image constant_raster(double value, int w = 4, int h = 4) {
    RasterData r;
    r.width = w;
    r.height = h;
    r.channels = 1;
    r.samples.assign(static_cast<std::size_t>(w) * h, value);
    return Image(Domain2::unit_square(), std::move(r));
}

Image ramp_x_analytic() {
    AnalyticSource s;
    s.channels = 1;
    s.value = [](Vec2 x) { return Color{x.x, 0.0, 0.0}; };
    s.gradient = [](Vec2) {
        ColorGrad g;
        g.g[0] = {1.0, 0.0};
        return g;
    };
    return Image(Domain2::unit_square(), std::move(s));
}

} // namespace

TEST_CASE("sample_intensity basics") {
    const Image c = constant_raster(0.5);
    CHECK(c.sample({0.3, 0.8})[0] == Catch::Approx(0.5).margin(1e-15));

    const Image ramp = ramp_x_analytic();
    CHECK(ramp.sample({0.25, 0.9})[0] == Catch::Approx(0.25).margin(1e-15));

    // 2x2 raster, corner values {0,1,1,0}; the domain center sits midway
    // between all four pixel centers, so bilinear gives (0+1+1+0)/4 = 0.5.
    RasterData r;
    r.width = r.height = 2;
    r.channels = 1;
    r.samples = {0.0, 1.0, 1.0, 0.0};
    const Image img(Domain2::unit_square(), std::move(r));
    CHECK(img.sample({0.5, 0.5})[0] == Catch::Approx(0.5).margin(1e-15));

    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(img.sample({nan, 0.0}), InvalidInputError);
}

TEST_CASE("sampling is a convex combination of raster values") {
    RasterData r;
    r.width = 5;
    r.height = 4;
    r.channels = 1;
    Rng rng(3);
    for (int i = 0; i < 20; ++i) r.samples.push_back(rng.uniform(0.2, 0.9));
    const double lo = *std::min_element(r.samples.begin(), r.samples.end());
    const double hi = *std::max_element(r.samples.begin(), r.samples.end());
    const Image img(Domain2::unit_square(), std::move(r));
    for (int i = 0; i < 300; ++i) {
        const Vec2 p = rng.uniform_vec(-0.5, 1.5); // includes out-of-domain probes
        const double v = img.sample(p)[0];
        CHECK(v >= lo - 1e-15);
        CHECK(v <= hi + 1e-15);
    }
}

TEST_CASE("raster gradient differentiates the interpolant") {
    RasterData r;
    r.width = 6;
    r.height = 5;
    r.channels = 1;
    Rng rng(11);
    for (int i = 0; i < 30; ++i) r.samples.push_back(rng.uniform(0.0, 1.0));
    const Image img(Domain2({0.0, 0.0}, 2.0, 1.0), std::move(r));
    for (int i = 0; i < 100; ++i) {
        const Vec2 p{rng.uniform(0.3, 1.7), rng.uniform(0.15, 0.85)};
        const double h = 1e-7;
        const double fdx = (img.sample({p.x + h, p.y})[0] - img.sample({p.x - h, p.y})[0]) / (2 * h);
        const double fdy = (img.sample({p.x, p.y + h})[0] - img.sample({p.x, p.y - h})[0]) / (2 * h);
        const ColorGrad g = img.sample_gradient(p);
        CHECK(g.g[0].x == Catch::Approx(fdx).margin(2e-6));
        CHECK(g.g[0].y == Catch::Approx(fdy).margin(2e-6));
    }
}

TEST_CASE("transform_image identity and scaling") {
    const Image ramp = ramp_x_analytic();
    const Image same = transform_image(ramp, AffineMap2{});
    CHECK(same.sample({0.7, 0.1})[0] == Catch::Approx(0.7).margin(1e-15));

    const Image scaled = transform_image(ramp, {Mat2::identity() * 2.0, {0.0, 0.0}});
    CHECK(scaled.domain().width == Catch::Approx(2.0));
    CHECK(scaled.domain().height == Catch::Approx(2.0));
    // c'(2x) = c(x)
    CHECK(scaled.sample({1.0, 0.4})[0] == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("transform_image rotation composes pointwise") {
    AnalyticSource s;
    s.channels = 1;
    s.value = [](Vec2 x) { return Color{std::sin(3 * x.x) * std::cos(2 * x.y), 0.0, 0.0}; };
    const Image img(Domain2::unit_square(), std::move(s));
    const AffineMap2 T = AffineMap2::rotation_about(0.7, {0.5, 0.5});
    const Image out = transform_image(img, T);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        // stay inside a ball that remains in both domains under T
        const Vec2 x = Vec2{0.5, 0.5} + rng.uniform_vec(-0.2, 0.2);
        CHECK(out.sample(T(x))[0] == Catch::Approx(img.sample(x)[0]).margin(1e-12));
    }
}

TEST_CASE("transform_image is functorial and invertible on analytic sources") {
    AnalyticSource s;
    s.channels = 1;
    s.value = [](Vec2 x) { return Color{0.5 + 0.5 * std::sin(2 * x.x + 3 * x.y), 0.0, 0.0}; };
    const Image img(Domain2::unit_square(), std::move(s));

    const AffineMap2 T1{Mat2::rotation(1.5707963267948966), {0.3, 0.0}}; // axis-preserving
    const AffineMap2 T2{Mat2::identity() * 0.5, {-0.1, 0.2}};

    const Image two_step = transform_image(transform_image(img, T1), T2);
    const Image one_step = transform_image(img, T2.compose(T1));
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const Vec2 q = two_step.domain().origin +
                       Vec2{rng.uniform() * two_step.domain().width,
                            rng.uniform() * two_step.domain().height};
        CHECK(two_step.sample(q)[0] == Catch::Approx(one_step.sample(q)[0]).margin(1e-12));
    }

    const Image round = transform_image(transform_image(img, T1), T1.inverse());
    CHECK(round.domain().origin.x == Catch::Approx(0.0).margin(1e-12));
    CHECK(round.domain().width == Catch::Approx(1.0).margin(1e-12));
    for (int i = 0; i < 100; ++i) {
        const Vec2 q{rng.uniform(), rng.uniform()};
        CHECK(round.sample(q)[0] == Catch::Approx(img.sample(q)[0]).margin(1e-12));
    }
}

TEST_CASE("raster transform restrictions") {
    const Image c = constant_raster(0.25);
    CHECK_THROWS_AS(transform_image(c, AffineMap2::rotation_about(0.3, {0.5, 0.5})),
                    UnsupportedTransformError);
    CHECK_THROWS_AS(transform_image(c, {Mat2::diag(1.0, -1.0), {0.0, 0.0}}), InvalidInputError);

    // quarter-turn re-indexing is exact
    RasterData r;
    r.width = 3;
    r.height = 2;
    r.channels = 1;
    r.samples = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    const Image img(Domain2({0.0, 0.0}, 1.5, 1.0), std::move(r));
    const AffineMap2 quarter = AffineMap2::rotation_about(1.5707963267948966, {0.0, 0.0});
    const Image rot = transform_image(img, quarter);
    CHECK(rot.raster().width == 2);
    CHECK(rot.raster().height == 3);
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const Vec2 x{rng.uniform(0.1, 1.4), rng.uniform(0.1, 0.9)};
        CHECK(rot.sample(quarter(x))[0] == Catch::Approx(img.sample(x)[0]).margin(1e-12));
    }
}

TEST_CASE("synthetic image patterns") {
    const Domain2 dom = Domain2::unit_square();

    const Image blob = synthetic_image("smooth-blob", dom);
    CHECK(blob.sample(dom.center())[0] == Catch::Approx(1.0).margin(1e-15));

    const Image checker = synthetic_image("checker", dom);
    CHECK(checker.sample({0.25, 0.25})[0] == 0.0);
    CHECK(checker.sample({0.75, 0.25})[0] == 1.0);
    CHECK(checker.sample({0.25, 0.75})[0] == 1.0);
    CHECK(checker.sample({0.75, 0.75})[0] == 0.0);

    const Image radial = synthetic_image("radial-gradient", dom);
    const double R = 0.5;
    Rng rng(17);
    for (int i = 0; i < 20; ++i) {
        const Vec2 p{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
        const double r = (p - dom.center()).norm();
        CHECK(radial.sample(p)[0] ==
              Catch::Approx(clamp(1.0 - r / R, 0.0, 1.0)).margin(1e-14));
    }

    const Image disk = synthetic_image("piecewise-constant-disk", dom);
    CHECK(disk.sample(dom.center())[0] == 1.0);
    CHECK(disk.sample({0.02, 0.02})[0] == 0.0);

    CHECK_THROWS_AS(synthetic_image("mystery", dom), UnknownPatternError);
}

TEST_CASE("pnm round trip and error paths") {
    const auto dir = std::filesystem::temp_directory_path() / "slidereg_pnm_test";
    std::filesystem::create_directories(dir);

    SECTION("pgm round trip") {
        RasterData r;
        r.width = 7;
        r.height = 5;
        r.channels = 1;
        Rng rng(23);
        for (int i = 0; i < 35; ++i)
            r.samples.push_back(std::round(rng.uniform() * 255.0) / 255.0);
        const auto path = (dir / "gray.pgm").string();
        write_pnm(path, r);
        const RasterData back = read_pnm(path);
        REQUIRE(back.width == 7);
        REQUIRE(back.height == 5);
        REQUIRE(back.channels == 1);
        for (std::size_t i = 0; i < r.samples.size(); ++i)
            CHECK(back.samples[i] == Catch::Approx(r.samples[i]).margin(1e-12));
    }

    SECTION("ppm round trip with comments") {
        RasterData r;
        r.width = 3;
        r.height = 2;
        r.channels = 3;
        for (int i = 0; i < 18; ++i) r.samples.push_back((i % 256) / 255.0);
        const auto path = (dir / "color.ppm").string();
        write_pnm(path, r);
        const RasterData back = read_pnm(path);
        REQUIRE(back.channels == 3);
        for (std::size_t i = 0; i < r.samples.size(); ++i)
            CHECK(back.samples[i] == Catch::Approx(r.samples[i]).margin(1e-12));
    }

    SECTION("corrupt header") {
        const auto path = (dir / "bad.pgm").string();
        std::ofstream(path) << "P5\n3 nope\n255\n";
        CHECK_THROWS_AS(read_pnm(path), IoError);
        try {
            read_pnm(path);
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("bad.pgm") != std::string::npos);
        }
    }

    SECTION("truncated data") {
        const auto path = (dir / "short.pgm").string();
        std::ofstream(path, std::ios::binary) << "P5\n4 4\n255\nab";
        CHECK_THROWS_AS(read_pnm(path), IoError);
    }

    SECTION("missing file") { CHECK_THROWS_AS(read_pnm((dir / "absent.pgm").string()), IoError); }

    SECTION("load_image default domain is unit height, aspect width") {
        RasterData r;
        r.width = 8;
        r.height = 4;
        r.channels = 1;
        r.samples.assign(32, 0.5);
        const auto path = (dir / "aspect.pgm").string();
        write_pnm(path, r);
        const Image img = load_image(path);
        CHECK(img.domain().height == Catch::Approx(1.0));
        CHECK(img.domain().width == Catch::Approx(2.0));
    }
}
