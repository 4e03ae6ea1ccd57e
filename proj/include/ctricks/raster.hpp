#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctricks/scene_gen.hpp"

namespace ctricks {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    Rgb at(int x, int y) const {
        const auto i = 3 * (static_cast<std::size_t>(y) * width + x);
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    bool operator==(const Image&) const = default;
};

struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;  // 0/1, row-major

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

    bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool on = true) { bits[static_cast<std::size_t>(y) * width + x] = on ? 1 : 0; }
    std::size_t area() const;

    bool operator==(const Mask&) const = default;
};

// Pixel-edge coordinates: the box covers pixels [x0, x1) x [y0, y1).
struct Box {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int area() const { return (x1 - x0) * (y1 - y0); }
    bool operator==(const Box&) const = default;
};

struct RenderedSample {
    std::string id;
    Scene scene;
    Image image;
    std::vector<Mask> instance_masks;
    std::vector<Box> boxes;

    bool operator==(const RenderedSample&) const = default;
};

// A pixel belongs to a shape iff its center (x+0.5, y+0.5) lies inside it.
bool covers_pixel(const ObjectSpec& object, int x, int y);

Mask rasterize(const ObjectSpec& object, int image_size);
Box tight_box(const Mask& mask);

RenderedSample render(const Scene& scene, std::string id);

// Row-major run lengths alternating zeros/ones, starting with a zeros run.
std::string rle_encode_mask(const Mask& mask);
// Throws Error(MalformedRLE) when the runs do not add up to width*height.
Mask rle_decode_mask(std::string_view text, int width, int height);

// Manifest text exactly as written to disk.
std::string manifest_text(const RenderedSample& sample);

struct SamplePaths {
    std::filesystem::path image;
    std::filesystem::path manifest;
};

SamplePaths sample_paths(const std::filesystem::path& dir, std::string_view id);
SamplePaths write_sample(const RenderedSample& sample, const std::filesystem::path& dir);
RenderedSample read_sample(const std::filesystem::path& dir, std::string_view id);

// Scene + masks from a manifest, without touching the image.
struct ManifestData {
    std::string id;
    Scene scene;
    std::vector<Box> boxes;
    std::vector<Mask> instance_masks;
};
ManifestData parse_manifest(std::string_view text, const std::filesystem::path& origin);

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

}  // namespace ctricks
