#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "slidereg/errors.hpp"
#include "slidereg/geometry.hpp"

namespace slidereg {

/// Up to 3 channels; unused channels stay 0 so norms and differences are
/// channel-count agnostic.
using Color = std::array<double, 3>;

inline Color color_sub(const Color& a, const Color& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline double color_dot(const Color& a, const Color& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double color_squared_norm(const Color& a) { return color_dot(a, a); }

/// Per-channel spatial gradient of an intensity map.
struct ColorGrad {
    std::array<Vec2, 3> g{Vec2{}, Vec2{}, Vec2{}};
};

/// Axis-aligned rectangular image domain.
struct Domain2 {
    Vec2 origin{0.0, 0.0};
    double width = 1.0;
    double height = 1.0;

    Domain2() = default;
    Domain2(Vec2 origin_, double width_, double height_)
        : origin(origin_), width(width_), height(height_) {
        if (!(width > 0.0) || !(height > 0.0) || !origin.finite())
            throw InvalidInputError("Domain2: degenerate rectangle");
    }

    static Domain2 unit_square() { return Domain2({0.0, 0.0}, 1.0, 1.0); }

    Vec2 center() const { return origin + Vec2{0.5 * width, 0.5 * height}; }
    Vec2 max_corner() const { return origin + Vec2{width, height}; }
    double area() const { return width * height; }
    double diameter() const { return std::hypot(width, height); }

    Vec2 clamp_point(Vec2 p) const {
        return {clamp(p.x, origin.x, origin.x + width),
                clamp(p.y, origin.y, origin.y + height)};
    }

    bool contains(Vec2 p, double tol = 0.0) const {
        return p.x >= origin.x - tol && p.x <= origin.x + width + tol &&
               p.y >= origin.y - tol && p.y <= origin.y + height + tol;
    }

    /// Corners in CCW order starting at origin.
    std::array<Vec2, 4> corners() const {
        return {origin, origin + Vec2{width, 0.0}, origin + Vec2{width, height},
                origin + Vec2{0.0, height}};
    }
};

/// Grid of channel-interleaved samples in [0,1], row 0 at the domain bottom.
struct RasterData {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> samples; // size = width*height*channels

    double at(int i, int j, int k) const {
        return samples[static_cast<std::size_t>((j * width + i) * channels + k)];
    }
    double& at(int i, int j, int k) {
        return samples[static_cast<std::size_t>((j * width + i) * channels + k)];
    }
};

struct AnalyticSource {
    int channels = 1;
    std::function<Color(Vec2)> value;
    /// Optional closed-form spatial gradient; when absent a central difference
    /// of `value` is used.
    std::function<ColorGrad(Vec2)> gradient;
};

/// An image P = (domain, intensity). Immutable after construction; all
/// sampling is a pure read.
class Image {
  public:
    Image(Domain2 domain, RasterData raster)
        : domain_(domain), channels_(raster.channels),
          raster_(std::make_shared<const RasterData>(std::move(raster))) {
        if (raster_->width < 1 || raster_->height < 1)
            throw InvalidInputError("Image: empty raster");
        if (channels_ != 1 && channels_ != 3)
            throw InvalidInputError("Image: channels must be 1 or 3");
        if (raster_->samples.size() !=
            static_cast<std::size_t>(raster_->width) * raster_->height * channels_)
            throw InvalidInputError("Image: raster size mismatch");
        for (double s : raster_->samples)
            if (!std::isfinite(s)) throw InvalidInputError("Image: non-finite raster sample");
    }

    Image(Domain2 domain, AnalyticSource analytic)
        : domain_(domain), channels_(analytic.channels),
          analytic_(std::make_shared<const AnalyticSource>(std::move(analytic))) {
        if (channels_ != 1 && channels_ != 3)
            throw InvalidInputError("Image: channels must be 1 or 3");
        if (!analytic_->value) throw InvalidInputError("Image: analytic source without value");
    }

    const Domain2& domain() const { return domain_; }
    int channels() const { return channels_; }
    bool is_raster() const { return raster_ != nullptr; }
    const RasterData& raster() const { return *raster_; }

    /// Intensity at x. Points outside the closed domain are clamped to the
    /// nearest boundary point so the registration energy stays defined on
    /// optimizer probes of the closure.
    Color sample(Vec2 x) const {
        if (!x.finite()) throw InvalidInputError("Image::sample: non-finite coordinate");
        const Vec2 p = domain_.clamp_point(x);
        if (raster_) return sample_raster(p);
        return analytic_->value(p);
    }

    /// Spatial gradient of the intensity at x (per channel). Raster sources
    /// differentiate the bilinear interpolant exactly; analytic sources use
    /// the supplied gradient or a central difference.
    ColorGrad sample_gradient(Vec2 x) const {
        if (!x.finite()) throw InvalidInputError("Image::sample_gradient: non-finite coordinate");
        const Vec2 p = domain_.clamp_point(x);
        if (raster_) return raster_gradient(p);
        if (analytic_->gradient) return analytic_->gradient(p);
        // central difference fallback
        const double h = 1e-6 * std::max(domain_.width, domain_.height);
        ColorGrad out;
        const Color xp = sample({p.x + h, p.y}), xm = sample({p.x - h, p.y});
        const Color yp = sample({p.x, p.y + h}), ym = sample({p.x, p.y - h});
        for (int k = 0; k < channels_; ++k)
            out.g[static_cast<std::size_t>(k)] = {(xp[static_cast<std::size_t>(k)] - xm[static_cast<std::size_t>(k)]) / (2 * h),
                                                  (yp[static_cast<std::size_t>(k)] - ym[static_cast<std::size_t>(k)]) / (2 * h)};
        return out;
    }

  private:
    // Pixel (i,j) sits at the center of cell (i,j); clamp-to-edge beyond the
    // band of pixel centers, which keeps every sample a convex combination.
    Color sample_raster(Vec2 p) const {
        const RasterData& r = *raster_;
        const double u = (p.x - domain_.origin.x) / domain_.width * r.width - 0.5;
        const double v = (p.y - domain_.origin.y) / domain_.height * r.height - 0.5;
        const double uc = clamp(u, 0.0, r.width - 1.0);
        const double vc = clamp(v, 0.0, r.height - 1.0);
        const int i0 = static_cast<int>(std::floor(uc));
        const int j0 = static_cast<int>(std::floor(vc));
        const int i1 = std::min(i0 + 1, r.width - 1);
        const int j1 = std::min(j0 + 1, r.height - 1);
        const double s = uc - i0;
        const double t = vc - j0;
        Color out{0.0, 0.0, 0.0};
        for (int k = 0; k < channels_; ++k) {
            const double c00 = r.at(i0, j0, k), c10 = r.at(i1, j0, k);
            const double c01 = r.at(i0, j1, k), c11 = r.at(i1, j1, k);
            out[static_cast<std::size_t>(k)] =
                (1 - s) * ((1 - t) * c00 + t * c01) + s * ((1 - t) * c10 + t * c11);
        }
        return out;
    }

    ColorGrad raster_gradient(Vec2 p) const {
        const RasterData& r = *raster_;
        const double u = (p.x - domain_.origin.x) / domain_.width * r.width - 0.5;
        const double v = (p.y - domain_.origin.y) / domain_.height * r.height - 0.5;
        const double uc = clamp(u, 0.0, r.width - 1.0);
        const double vc = clamp(v, 0.0, r.height - 1.0);
        const int i0 = static_cast<int>(std::floor(uc));
        const int j0 = static_cast<int>(std::floor(vc));
        const int i1 = std::min(i0 + 1, r.width - 1);
        const int j1 = std::min(j0 + 1, r.height - 1);
        const double s = uc - i0;
        const double t = vc - j0;
        const double dudx = (u > 0.0 && u < r.width - 1.0) ? r.width / domain_.width : 0.0;
        const double dvdy = (v > 0.0 && v < r.height - 1.0) ? r.height / domain_.height : 0.0;
        ColorGrad out;
        for (int k = 0; k < channels_; ++k) {
            const double c00 = r.at(i0, j0, k), c10 = r.at(i1, j0, k);
            const double c01 = r.at(i0, j1, k), c11 = r.at(i1, j1, k);
            const double dcu = (1 - t) * (c10 - c00) + t * (c11 - c01);
            const double dcv = (1 - s) * (c01 - c00) + s * (c11 - c10);
            out.g[static_cast<std::size_t>(k)] = {dcu * dudx, dcv * dvdy};
        }
        return out;
    }

    Domain2 domain_;
    int channels_ = 1;
    std::shared_ptr<const RasterData> raster_;
    std::shared_ptr<const AnalyticSource> analytic_;
};

namespace detail {

/// Decompose M = lambda * R with R a multiple-of-90-degree rotation.
/// Returns {lambda, quarter_turns} or lambda <= 0 if M is not of that form.
inline std::pair<double, int> axis_preserving_factor(const Mat2& M) {
    const double tol = 1e-12 * (1.0 + M.norm());
    const double lambda = std::hypot(M.a, M.c);
    if (lambda <= tol) return {-1.0, 0};
    for (int k = 0; k < 4; ++k) {
        const double ang = k * 1.5707963267948966;
        const Mat2 cand = Mat2::rotation(ang) * lambda;
        if ((M - cand).norm() <= 4 * tol) return {lambda, k};
    }
    return {-1.0, 0};
}

inline Domain2 bounding_box(const std::array<Vec2, 4>& pts) {
    double xmin = pts[0].x, xmax = pts[0].x, ymin = pts[0].y, ymax = pts[0].y;
    for (const Vec2& p : pts) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    return Domain2({xmin, ymin}, xmax - xmin, ymax - ymin);
}

} // namespace detail

/// P' = (T(domain), c ∘ T^{-1}). Raster sources only support axis-preserving
/// T (uniform scaling composed with multiples of 90 degrees), which re-index
/// the grid exactly; analytic sources accept any T with det > 0, and the
/// stored domain becomes the axis-aligned bounding box of the mapped corners.
inline Image transform_image(const Image& img, const AffineMap2& T) {
    if (!T.M.finite() || !T.a.finite())
        throw InvalidInputError("transform_image: non-finite transform");
    if (!(T.M.det() > 0.0))
        throw InvalidInputError("transform_image: transform must have positive determinant");

    const Domain2& dom = img.domain();
    const std::array<Vec2, 4> mapped = {T(dom.corners()[0]), T(dom.corners()[1]),
                                        T(dom.corners()[2]), T(dom.corners()[3])};
    const Domain2 new_dom = detail::bounding_box(mapped);

    if (!img.is_raster()) {
        const AffineMap2 Tinv = T.inverse();
        const Image src = img; // value copy shares the immutable source
        AnalyticSource out;
        out.channels = img.channels();
        out.value = [src, Tinv](Vec2 x) { return src.sample(Tinv(x)); };
        const Mat2 MinvT = Tinv.M.transpose();
        out.gradient = [src, Tinv, MinvT](Vec2 x) {
            const ColorGrad gi = src.sample_gradient(Tinv(x));
            ColorGrad go;
            for (std::size_t k = 0; k < 3; ++k) go.g[k] = MinvT * gi.g[k];
            return go;
        };
        return Image(new_dom, std::move(out));
    }

    const auto [lambda, quarter] = detail::axis_preserving_factor(T.M);
    if (lambda <= 0.0)
        throw UnsupportedTransformError(
            "transform_image: raster sources support only uniform scalings "
            "composed with multiples of 90-degree rotations");

    const RasterData& r = img.raster();
    RasterData out;
    out.channels = r.channels;
    out.width = (quarter % 2 == 0) ? r.width : r.height;
    out.height = (quarter % 2 == 0) ? r.height : r.width;
    out.samples.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
    // Map each new pixel center back to a source pixel center.
    const AffineMap2 Tinv = T.inverse();
    for (int j = 0; j < out.height; ++j) {
        for (int i = 0; i < out.width; ++i) {
            const Vec2 ctr{new_dom.origin.x + (i + 0.5) * new_dom.width / out.width,
                           new_dom.origin.y + (j + 0.5) * new_dom.height / out.height};
            const Vec2 s = Tinv(ctr);
            const double ui = (s.x - dom.origin.x) / dom.width * r.width - 0.5;
            const double vj = (s.y - dom.origin.y) / dom.height * r.height - 0.5;
            const int si = static_cast<int>(std::lround(ui));
            const int sj = static_cast<int>(std::lround(vj));
            if (si < 0 || si >= r.width || sj < 0 || sj >= r.height ||
                std::abs(ui - si) > 1e-6 || std::abs(vj - sj) > 1e-6)
                throw UnsupportedTransformError("transform_image: raster grids do not align");
            for (int k = 0; k < out.channels; ++k) out.at(i, j, k) = r.at(si, sj, k);
        }
    }
    return Image(new_dom, std::move(out));
}

/// Deterministic analytic test patterns.
inline Image synthetic_image(const std::string& kind, const Domain2& domain, int channels = 1) {
    const Vec2 ctr = domain.center();
    const double scale = std::min(domain.width, domain.height);
    AnalyticSource src;
    src.channels = channels;

    auto broadcast = [channels](double v) {
        Color c{0.0, 0.0, 0.0};
        for (int k = 0; k < channels; ++k) c[static_cast<std::size_t>(k)] = v;
        return c;
    };
    auto broadcast_grad = [channels](Vec2 g) {
        ColorGrad cg;
        for (int k = 0; k < channels; ++k) cg.g[static_cast<std::size_t>(k)] = g;
        return cg;
    };

    if (kind == "smooth-blob") {
        const double sigma = 0.25 * scale;
        src.value = [ctr, sigma, broadcast](Vec2 x) {
            const double r2 = (x - ctr).squared_norm();
            return broadcast(std::exp(-r2 / (2 * sigma * sigma)));
        };
        src.gradient = [ctr, sigma, broadcast_grad](Vec2 x) {
            const double r2 = (x - ctr).squared_norm();
            const double v = std::exp(-r2 / (2 * sigma * sigma));
            return broadcast_grad((x - ctr) * (-v / (sigma * sigma)));
        };
    } else if (kind == "checker") {
        // 2x2 cells alternating {0,1}; value 0 at the origin cell.
        const Domain2 dom = domain;
        src.value = [dom, broadcast](Vec2 x) {
            const int kx = std::min(1, static_cast<int>((x.x - dom.origin.x) / dom.width * 2.0));
            const int ky = std::min(1, static_cast<int>((x.y - dom.origin.y) / dom.height * 2.0));
            return broadcast(static_cast<double>((kx + ky) % 2));
        };
        src.gradient = [broadcast_grad](Vec2) { return broadcast_grad({0.0, 0.0}); };
    } else if (kind == "radial-gradient") {
        const double R = 0.5 * scale;
        src.value = [ctr, R, broadcast](Vec2 x) {
            const double r = (x - ctr).norm();
            return broadcast(clamp(1.0 - r / R, 0.0, 1.0));
        };
        src.gradient = [ctr, R, broadcast_grad](Vec2 x) {
            const double r = (x - ctr).norm();
            if (r <= 0.0 || r >= R) return broadcast_grad({0.0, 0.0});
            return broadcast_grad((x - ctr) * (-1.0 / (R * r)));
        };
    } else if (kind == "piecewise-constant-disk") {
        const double R = 0.3 * scale;
        src.value = [ctr, R, broadcast](Vec2 x) {
            return broadcast((x - ctr).squared_norm() <= R * R ? 1.0 : 0.0);
        };
        src.gradient = [broadcast_grad](Vec2) { return broadcast_grad({0.0, 0.0}); };
    } else {
        throw UnknownPatternError("synthetic_image: unknown pattern '" + kind + "'");
    }
    return Image(domain, std::move(src));
}

/// Rasterize an image onto a w x h grid over its own domain.
inline RasterData rasterize(const Image& img, int w, int h) {
    RasterData out;
    out.width = w;
    out.height = h;
    out.channels = img.channels();
    out.samples.resize(static_cast<std::size_t>(w) * h * out.channels);
    const Domain2& d = img.domain();
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            const Vec2 p{d.origin.x + (i + 0.5) * d.width / w,
                         d.origin.y + (j + 0.5) * d.height / h};
            const Color c = img.sample(p);
            for (int k = 0; k < out.channels; ++k)
                out.at(i, j, k) = clamp(c[static_cast<std::size_t>(k)], 0.0, 1.0);
        }
    return out;
}

} // namespace slidereg
