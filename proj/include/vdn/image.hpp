#pragma once

#include "vdn/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace vdn {

/// 2D point in pixel coordinates: x right, y down, pixel (i, j) centered at (i, j).
struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
double norm(Point p);
double distance(Point a, Point b);

/// Axis-aligned box, COCO convention [x, y, width, height].
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double width = 0.0;
    double height = 0.0;

    double area() const { return width * height; }
    Point center() const { return {x + width / 2.0, y + height / 2.0}; }
    friend bool operator==(const BBox&, const BBox&) = default;
};

/// 2x3 affine map p -> A p + t.
struct Affine {
    std::array<double, 6> m{1, 0, 0, 0, 1, 0};  // row-major [a b tx; c d ty]

    Point apply(Point p) const { return {m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5]}; }
    /// Linear part only (for direction vectors).
    Point apply_linear(Point v) const { return {m[0] * v.x + m[1] * v.y, m[3] * v.x + m[4] * v.y}; }
    Affine inverse() const;
    /// (this * other)(p) = this(other(p))
    Affine compose(const Affine& other) const;

    static Affine similarity(double scale, double angle_rad, Point center);
};

/// 8-bit RGB image, interleaved.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // size width*height*3

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0);

    std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Bilinear sample of channel c at a real position; zero outside the image.
double sample_bilinear(const Image& img, double x, double y, int c);

/// out(q) = src(dst_to_src(q)), bilinear, zero fill.
Image warp_affine(const Image& src, const Affine& dst_to_src, int out_width, int out_height);

/// Stack images into an N x 3 x H x W tensor scaled to [0, 1].
Tensor to_tensor(std::span<const Image> images);
Tensor to_tensor(const Image& image);

void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace vdn
