#include "ctricks/raster.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "ctricks/error.hpp"
#include "json.hpp"

namespace ctricks {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::size_t Mask::area() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

bool covers_pixel(const ObjectSpec& o, int x, int y) {
    const double px = x + 0.5;
    const double py = y + 0.5;
    const double r = o.diameter / 2.0;
    switch (o.shape) {
        case Shape::Circle: {
            const double dx = px - o.center.x;
            const double dy = py - o.center.y;
            return dx * dx + dy * dy <= r * r;
        }
        case Shape::Square:
            return std::abs(px - o.center.x) <= r && std::abs(py - o.center.y) <= r;
        case Shape::Triangle: {
            const Extent e = silhouette_extent(o.shape, o.diameter);
            const double apex_y = o.center.y - e.half_h;
            const double depth = py - apex_y;
            if (depth < 0.0 || py > o.center.y + e.half_h) return false;
            return std::abs(px - o.center.x) <= depth / std::sqrt(3.0);
        }
    }
    return false;
}

Mask rasterize(const ObjectSpec& o, int image_size) {
    Mask m(image_size, image_size);
    const Extent e = silhouette_extent(o.shape, o.diameter);
    const int x_lo = std::max(0, static_cast<int>(std::floor(o.center.x - e.half_w)) - 1);
    const int x_hi = std::min(image_size - 1, static_cast<int>(std::ceil(o.center.x + e.half_w)) + 1);
    const int y_lo = std::max(0, static_cast<int>(std::floor(o.center.y - e.half_h)) - 1);
    const int y_hi = std::min(image_size - 1, static_cast<int>(std::ceil(o.center.y + e.half_h)) + 1);
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            if (covers_pixel(o, x, y)) m.set(x, y);
        }
    }
    return m;
}

Box tight_box(const Mask& mask) {
    Box b{mask.width, mask.height, 0, 0};
    bool any = false;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.get(x, y)) continue;
            any = true;
            b.x0 = std::min(b.x0, x);
            b.y0 = std::min(b.y0, y);
            b.x1 = std::max(b.x1, x + 1);
            b.y1 = std::max(b.y1, y + 1);
        }
    }
    return any ? b : Box{};
}

RenderedSample render(const Scene& scene, std::string id) {
    if (scene.objects.empty()) {
        throw Error(ErrorKind::InvalidArgument, "cannot render a scene without objects");
    }
    const int size = scene.grid.image_size;
    RenderedSample out;
    out.id = std::move(id);
    out.scene = scene;
    out.image.width = size;
    out.image.height = size;
    out.image.rgb.assign(static_cast<std::size_t>(size) * size * 3, 255);

    // Draw order is object order.
    for (const auto& o : scene.objects) {
        Mask m = rasterize(o, size);
        const Rgb c = kPalette.at(static_cast<std::size_t>(o.color));
        for (std::size_t i = 0; i < m.bits.size(); ++i) {
            if (!m.bits[i]) continue;
            out.image.rgb[3 * i] = c.r;
            out.image.rgb[3 * i + 1] = c.g;
            out.image.rgb[3 * i + 2] = c.b;
        }
        out.boxes.push_back(tight_box(m));
        out.instance_masks.push_back(std::move(m));
    }
    return out;
}

std::string rle_encode_mask(const Mask& mask) {
    std::string out;
    std::uint8_t current = 0;
    std::size_t run = 0;
    const auto emit = [&](std::size_t n) {
        if (!out.empty()) out.push_back(' ');
        out += std::to_string(n);
    };
    for (std::uint8_t b : mask.bits) {
        const std::uint8_t v = b ? 1 : 0;
        if (v == current) {
            ++run;
            continue;
        }
        emit(run);
        current = v;
        run = 1;
    }
    if (run > 0 || out.empty()) emit(run);
    return out;
}

Mask rle_decode_mask(std::string_view text, int width, int height) {
    if (width < 0 || height < 0) throw Error(ErrorKind::MalformedRLE, "negative mask dimensions");
    Mask m(width, height);
    const std::size_t total = m.bits.size();
    std::size_t pos = 0;
    std::uint8_t value = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == ' ') {
            ++i;
            continue;
        }
        std::size_t run = 0;
        const auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), run);
        if (ec != std::errc{} || (ptr != text.data() + text.size() && *ptr != ' ')) {
            throw Error(ErrorKind::MalformedRLE, "bad run token at offset " + std::to_string(i));
        }
        i = static_cast<std::size_t>(ptr - text.data());
        if (run > total - pos) {
            throw Error(ErrorKind::MalformedRLE, "runs exceed " + std::to_string(total) + " pixels");
        }
        std::fill_n(m.bits.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
        pos += run;
        value ^= 1;
    }
    if (pos != total) {
        throw Error(ErrorKind::MalformedRLE,
                    "runs cover " + std::to_string(pos) + " of " + std::to_string(total) + " pixels");
    }
    return m;
}

std::string manifest_text(const RenderedSample& s) {
    ojson j;
    j["id"] = s.id;
    j["case_code"] = s.scene.code.str();
    j["seed"] = s.scene.seed;
    j["image_size"] = s.scene.grid.image_size;
    j["patch_size"] = s.scene.grid.patch_size;
    j["count"] = s.scene.count;
    ojson objects = ojson::array();
    for (const auto& o : s.scene.objects) {
        ojson jo;
        jo["shape"] = to_string(o.shape);
        jo["color"] = o.color;
        jo["cx"] = o.center.x;
        jo["cy"] = o.center.y;
        jo["diameter"] = o.diameter;
        objects.push_back(std::move(jo));
    }
    j["objects"] = std::move(objects);
    ojson boxes = ojson::array();
    for (const auto& b : s.boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
    j["boxes"] = std::move(boxes);
    ojson masks = ojson::array();
    for (const auto& m : s.instance_masks) masks.push_back(rle_encode_mask(m));
    j["masks_rle"] = std::move(masks);
    return j.dump() + "\n";
}

ManifestData parse_manifest(std::string_view text, const fs::path& origin) {
    const auto corrupt = [&](const std::string& why) {
        return Error(ErrorKind::CorruptManifest, origin.string() + ": " + why);
    };
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw corrupt(e.what());
    }

    ManifestData out;
    try {
        out.id = j.at("id").get<std::string>();
        out.scene.code = parse_case_code(j.at("case_code").get<std::string>());
        out.scene.seed = j.at("seed").get<std::uint64_t>();
        out.scene.grid.image_size = j.at("image_size").get<int>();
        out.scene.grid.patch_size = j.at("patch_size").get<int>();
        out.scene.count = j.at("count").get<int>();
        for (const auto& jo : j.at("objects")) {
            ObjectSpec o;
            o.shape = parse_shape(jo.at("shape").get<std::string>());
            o.color = jo.at("color").get<int>();
            o.center = {jo.at("cx").get<double>(), jo.at("cy").get<double>()};
            o.diameter = jo.at("diameter").get<double>();
            out.scene.objects.push_back(o);
        }
        for (const auto& jb : j.at("boxes")) {
            if (jb.size() != 4) throw corrupt("box needs 4 coordinates");
            out.boxes.push_back({jb[0].get<int>(), jb[1].get<int>(), jb[2].get<int>(), jb[3].get<int>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw corrupt(e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::CorruptManifest) throw;
        throw corrupt(e.what());
    }
    if (!j.contains("masks_rle")) {
        throw Error(ErrorKind::MissingArtifact, origin.string() + ": masks_rle missing");
    }

    const int size = out.scene.grid.image_size;
    try {
        out.scene.grid.validate();
    } catch (const Error& e) {
        throw corrupt(e.what());
    }
    for (const auto& jm : j.at("masks_rle")) {
        if (!jm.is_string()) throw corrupt("mask entry is not a string");
        out.instance_masks.push_back(rle_decode_mask(jm.get<std::string>(), size, size));
    }

    const auto n = static_cast<std::size_t>(out.scene.count);
    if (out.scene.objects.size() != n) {
        throw corrupt("count " + std::to_string(n) + " but " + std::to_string(out.scene.objects.size()) + " objects");
    }
    if (out.instance_masks.size() != n) {
        throw corrupt("count " + std::to_string(n) + " but " + std::to_string(out.instance_masks.size()) + " masks");
    }
    if (out.boxes.size() != n) {
        throw corrupt("count " + std::to_string(n) + " but " + std::to_string(out.boxes.size()) + " boxes");
    }
    return out;
}

SamplePaths sample_paths(const fs::path& dir, std::string_view id) {
    return {dir / (std::string(id) + ".png"), dir / (std::string(id) + ".json")};
}

SamplePaths write_sample(const RenderedSample& sample, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, dir.string() + ": " + ec.message());
    const SamplePaths paths = sample_paths(dir, sample.id);
    write_png(sample.image, paths.image);
    std::ofstream out(paths.manifest, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + paths.manifest.string() + " for writing");
    out << manifest_text(sample);
    if (!out) throw Error(ErrorKind::Io, "write failed for " + paths.manifest.string());
    return paths;
}

RenderedSample read_sample(const fs::path& dir, std::string_view id) {
    const SamplePaths paths = sample_paths(dir, id);
    for (const auto& p : {paths.manifest, paths.image}) {
        if (!fs::exists(p)) throw Error(ErrorKind::MissingArtifact, p.string() + " not found");
    }
    std::ifstream in(paths.manifest, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + paths.manifest.string());
    std::stringstream ss;
    ss << in.rdbuf();

    ManifestData m = parse_manifest(ss.str(), paths.manifest);
    RenderedSample s;
    s.id = std::move(m.id);
    s.scene = std::move(m.scene);
    s.boxes = std::move(m.boxes);
    s.instance_masks = std::move(m.instance_masks);
    s.image = read_png(paths.image);
    if (s.image.width != s.scene.grid.image_size || s.image.height != s.scene.grid.image_size) {
        throw Error(ErrorKind::CorruptManifest, paths.image.string() + ": image size disagrees with manifest");
    }
    return s;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const Image& image, const fs::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "libpng init failed for " + path.string());
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::Io, "PNG encoding failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    for (int y = 0; y < image.height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(image.rgb.data() + static_cast<std::size_t>(y) * image.width * 3);
    }
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const fs::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error(ErrorKind::MissingArtifact, path.string() + " not readable");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "libpng init failed for " + path.string());
    }
    Image img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::Io, "PNG decoding failed for " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)] = img.rgb.data() + static_cast<std::size_t>(y) * img.width * 3;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace ctricks
