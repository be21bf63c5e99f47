#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "moco/errors.hpp"
#include "moco/hash.hpp"

namespace moco {

// Dense row-major 2-D scalar grid with isotropic physical spacing.
// Values are held in 64-bit floats; files store 32-bit (see write_image).
struct Image {
    int height = 0;
    int width = 0;
    double spacing = 1.0;  // mm per pixel
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, double sp, double fill = 0.0)
        : height(h), width(w), spacing(sp), data(static_cast<std::size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0 || !(sp > 0.0))
            throw std::invalid_argument("Image: dimensions and spacing must be positive");
    }

    std::size_t size() const { return data.size(); }
    double& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
    double at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }

    bool same_shape(const Image& o) const { return height == o.height && width == o.width; }

    Image like(double fill = 0.0) const { return Image(height, width, spacing, fill); }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // Physical coordinates: x right, y up, isocenter at the grid center.
    double px_to_x(double col) const { return (col - (width - 1) / 2.0) * spacing; }
    double px_to_y(double row) const { return ((height - 1) / 2.0 - row) * spacing; }
    double x_to_col(double x) const { return x / spacing + (width - 1) / 2.0; }
    double y_to_row(double y) const { return (height - 1) / 2.0 - y / spacing; }

    // Bilinear sample at physical (x, y); zero outside the grid.
    double sample_bilinear(double x, double y) const {
        const double cf = x_to_col(x);
        const double rf = y_to_row(y);
        const int c0 = static_cast<int>(std::floor(cf));
        const int r0 = static_cast<int>(std::floor(rf));
        const double fc = cf - c0;
        const double fr = rf - r0;
        double acc = 0.0;
        for (int dr = 0; dr < 2; ++dr) {
            const int r = r0 + dr;
            if (r < 0 || r >= height) continue;
            const double wr = dr ? fr : 1.0 - fr;
            for (int dc = 0; dc < 2; ++dc) {
                const int c = c0 + dc;
                if (c < 0 || c >= width) continue;
                const double wc = dc ? fc : 1.0 - fc;
                acc += wr * wc * at(r, c);
            }
        }
        return acc;
    }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// ---------------------------------------------------------------------------
// File I/O: raw little-endian f32 payload plus a JSON sidecar header.
// The sidecar path is payload path with extension replaced by ".json".

inline std::string sidecar_path(const std::string& raw_path) {
    const auto dot = raw_path.find_last_of('.');
    const auto slash = raw_path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return raw_path + ".json";
    return raw_path.substr(0, dot) + ".json";
}

namespace detail {

inline void write_f32_le(std::ofstream& os, const std::vector<double>& vals) {
    std::vector<unsigned char> buf(vals.size() * 4);
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const float f = static_cast<float>(vals[i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        buf[4 * i + 0] = static_cast<unsigned char>(u & 0xff);
        buf[4 * i + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        buf[4 * i + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        buf[4 * i + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<double> read_f32_le(std::ifstream& is, std::size_t count) {
    std::vector<unsigned char> buf(count * 4);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size())
        throw format_error("payload shorter than header-declared size");
    // must be at end: one extra readable byte means size mismatch
    if (is.peek() != std::ifstream::traits_type::eof())
        throw format_error("payload longer than header-declared size");
    std::vector<double> vals(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(buf[4 * i]) |
                          (static_cast<std::uint32_t>(buf[4 * i + 1]) << 8) |
                          (static_cast<std::uint32_t>(buf[4 * i + 2]) << 16) |
                          (static_cast<std::uint32_t>(buf[4 * i + 3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        vals[i] = static_cast<double>(f);
    }
    return vals;
}

}  // namespace detail

// extra: additional sidecar fields (e.g. sinogram geometry); merged into the header.
inline void write_image(const Image& img, const std::string& raw_path,
                        const nlohmann::json& extra = nlohmann::json::object()) {
    if (!img.all_finite()) throw std::invalid_argument("write_image: non-finite values");
    nlohmann::json hdr = {
        {"height", img.height}, {"width", img.width},   {"spacing_mm", img.spacing},
        {"dtype", "f32"},       {"byte_order", "le"},
    };
    for (auto it = extra.begin(); it != extra.end(); ++it) hdr[it.key()] = it.value();
    std::ofstream os(raw_path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + raw_path);
    detail::write_f32_le(os, img.data);
    if (!os) throw io_error("write failed: " + raw_path);
    std::ofstream hs(sidecar_path(raw_path));
    if (!hs) throw io_error("cannot open for write: " + sidecar_path(raw_path));
    hs << hdr.dump(2) << "\n";
}

inline Image read_image(const std::string& raw_path, nlohmann::json* header_out = nullptr) {
    std::ifstream hs(sidecar_path(raw_path));
    if (!hs) throw io_error("missing sidecar header: " + sidecar_path(raw_path));
    nlohmann::json hdr;
    try {
        hs >> hdr;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("bad sidecar JSON: ") + e.what());
    }
    if (!hdr.contains("height") || !hdr.contains("width") || !hdr.contains("spacing_mm"))
        throw format_error("sidecar missing height/width/spacing_mm");
    if (hdr.value("dtype", "f32") != "f32" || hdr.value("byte_order", "le") != "le")
        throw format_error("unsupported dtype/byte_order");
    const int h = hdr["height"].get<int>();
    const int w = hdr["width"].get<int>();
    const double sp = hdr["spacing_mm"].get<double>();
    if (h <= 0 || w <= 0 || !(sp > 0.0)) throw format_error("invalid header dimensions");
    std::ifstream is(raw_path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + raw_path);
    Image img(h, w, sp);
    img.data = detail::read_f32_le(is, static_cast<std::size_t>(h) * w);
    if (header_out) *header_out = hdr;
    return img;
}

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    char buf[65536];
    std::uint64_t h = 0xcbf29ce484222325ULL;
    while (is) {
        is.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// 8-bit grayscale PNG export (windowed), for inspection only; never read back.

namespace detail {

inline void png_chunk(std::vector<unsigned char>& out, const char type[4],
                      const std::vector<unsigned char>& payload) {
    auto push_u32 = [&out](std::uint32_t v) {
        out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
        out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
        out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
        out.push_back(static_cast<unsigned char>(v & 0xff));
    };
    push_u32(static_cast<std::uint32_t>(payload.size()));
    std::vector<unsigned char> td;
    td.insert(td.end(), type, type + 4);
    td.insert(td.end(), payload.begin(), payload.end());
    out.insert(out.end(), td.begin(), td.end());
    push_u32(static_cast<std::uint32_t>(crc32(0, td.data(), static_cast<uInt>(td.size()))));
}

}  // namespace detail

inline void write_png(const Image& img, const std::string& path, double window_lo,
                      double window_hi) {
    if (!(window_hi > window_lo)) throw std::invalid_argument("write_png: empty window");
    const int h = img.height, w = img.width;
    std::vector<unsigned char> scan(static_cast<std::size_t>(h) * (w + 1));
    for (int r = 0; r < h; ++r) {
        scan[static_cast<std::size_t>(r) * (w + 1)] = 0;  // filter: none
        for (int c = 0; c < w; ++c) {
            double v = (img.at(r, c) - window_lo) / (window_hi - window_lo);
            v = std::clamp(v, 0.0, 1.0);
            scan[static_cast<std::size_t>(r) * (w + 1) + 1 + c] =
                static_cast<unsigned char>(std::lround(v * 255.0));
        }
    }
    uLongf zlen = compressBound(static_cast<uLong>(scan.size()));
    std::vector<unsigned char> zdata(zlen);
    if (compress2(zdata.data(), &zlen, scan.data(), static_cast<uLong>(scan.size()), 9) != Z_OK)
        throw io_error("png deflate failed");
    zdata.resize(zlen);

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<unsigned char> ihdr(13);
    auto put_u32 = [](unsigned char* p, std::uint32_t v) {
        p[0] = static_cast<unsigned char>((v >> 24) & 0xff);
        p[1] = static_cast<unsigned char>((v >> 16) & 0xff);
        p[2] = static_cast<unsigned char>((v >> 8) & 0xff);
        p[3] = static_cast<unsigned char>(v & 0xff);
    };
    put_u32(ihdr.data(), static_cast<std::uint32_t>(w));
    put_u32(ihdr.data() + 4, static_cast<std::uint32_t>(h));
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 0;   // grayscale
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", zdata);
    detail::png_chunk(out, "IEND", {});
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + path);
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) throw io_error("write failed: " + path);
}

}  // namespace moco
