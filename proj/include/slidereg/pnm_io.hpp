#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "slidereg/errors.hpp"
#include "slidereg/image.hpp"

namespace slidereg {

namespace detail {

// Skips whitespace and '#' comments, then reads one nonnegative integer.
inline int pnm_read_int(std::istream& in, const std::string& path) {
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw IoError(path + ": truncated header");
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value) || value < 0) throw IoError(path + ": malformed header field");
    return value;
}

} // namespace detail

/// Reads a binary PGM (P5) or PPM (P6), 8-bit. Samples are normalized to
/// [0,1] by maxval; file row 0 (top) becomes the highest grid row so the
/// domain's y axis points up.
inline RasterData read_pnm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    char p = 0, n = 0;
    in.get(p);
    in.get(n);
    if (p != 'P' || (n != '5' && n != '6'))
        throw IoError(path + ": not a binary PGM/PPM (want P5 or P6)");
    const int channels = (n == '5') ? 1 : 3;
    const int w = detail::pnm_read_int(in, path);
    const int h = detail::pnm_read_int(in, path);
    const int maxval = detail::pnm_read_int(in, path);
    if (w < 1 || h < 1) throw IoError(path + ": bad dimensions");
    if (maxval < 1 || maxval > 255) throw IoError(path + ": unsupported maxval (8-bit only)");
    in.get(); // single whitespace before the pixel block
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw IoError(path + ": truncated pixel data");

    RasterData r;
    r.width = w;
    r.height = h;
    r.channels = channels;
    r.samples.resize(buf.size());
    for (int j = 0; j < h; ++j) {
        const int src_row = h - 1 - j; // flip: store bottom-up
        for (int i = 0; i < w; ++i)
            for (int k = 0; k < channels; ++k)
                r.at(i, j, k) =
                    buf[static_cast<std::size_t>((src_row * w + i) * channels + k)] /
                    static_cast<double>(maxval);
    }
    return r;
}

inline void write_pnm(const std::string& path, const RasterData& r) {
    if (r.channels != 1 && r.channels != 3)
        throw IoError(path + ": only 1- or 3-channel rasters can be written");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path + ": cannot open for writing");
    out << (r.channels == 1 ? "P5" : "P6") << "\n"
        << r.width << " " << r.height << "\n255\n";
    std::vector<unsigned char> buf(static_cast<std::size_t>(r.width) * r.height * r.channels);
    for (int j = 0; j < r.height; ++j) {
        const int dst_row = r.height - 1 - j;
        for (int i = 0; i < r.width; ++i)
            for (int k = 0; k < r.channels; ++k) {
                const double v = clamp(r.at(i, j, k), 0.0, 1.0);
                buf[static_cast<std::size_t>((dst_row * r.width + i) * r.channels + k)] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError(path + ": write failed");
}

/// Loads an image file with the conventional physical domain: unit height,
/// width equal to the pixel aspect ratio (overridable via config).
inline Image load_image(const std::string& path, double width = 0.0, double height = 1.0) {
    RasterData r = read_pnm(path);
    const double w = width > 0.0 ? width : height * static_cast<double>(r.width) / r.height;
    return Image(Domain2({0.0, 0.0}, w, height), std::move(r));
}

} // namespace slidereg
