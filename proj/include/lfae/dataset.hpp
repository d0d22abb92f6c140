#pragma once

// On-disk light fields: one 8-bit RGB PNG per view, named by a zero-padded
// row-major view index (HCI benchmark convention).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <system_error>
#include <vector>

#include <fmt/args.h>
#include <fmt/format.h>
#include <png.h>

#include "lfae/errors.hpp"
#include "lfae/light_field.hpp"

namespace lfae {

struct DatasetLayout {
    std::filesystem::path root;
    /// fmt-style pattern with a named `index` argument.
    std::string pattern = "input_Cam{index:03}.png";
    std::size_t rows = 9;
    std::size_t cols = 9;
};

inline std::string view_filename(const std::string& pattern, std::size_t index)
{
    try {
        return fmt::format(fmt::runtime(pattern), fmt::arg("index", index));
    } catch (const fmt::format_error& e) {
        throw ConfigError("invalid view filename pattern '" + pattern + "': " + e.what());
    }
}

inline std::filesystem::path view_path(const DatasetLayout& layout, const std::string& name, std::size_t index)
{
    return layout.root / name / view_filename(layout.pattern, index);
}

/// Decodes any PNG to 8-bit RGB and scales to [0,1] by division by 255.
inline Image read_png(const std::filesystem::path& path)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot decode PNG " + path.string() + ": " + msg);
    }
    Image out(img.height, img.width);
    std::transform(buffer.begin(), buffer.end(), out.pixels.begin(),
                   [](png_byte v) { return static_cast<float>(v) / 255.0f; });
    return out;
}

/// Quantizes to 8 bits with round-half-to-even after clamping to [0,1].
inline std::uint8_t quantize_pixel(float v)
{
    const float scaled = std::clamp(v, 0.0f, 1.0f) * 255.0f;
    return static_cast<std::uint8_t>(std::nearbyint(scaled));
}

inline void write_png(const Image& image, const std::filesystem::path& path)
{
    std::vector<png_byte> buffer(image.pixels.size());
    std::transform(image.pixels.begin(), image.pixels.end(), buffer.begin(), quantize_pixel);
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw IoError("cannot write PNG " + path.string() + ": " + msg);
    }
}

inline LightField load_light_field(const DatasetLayout& layout, const std::string& name)
{
    const std::filesystem::path dir = layout.root / name;
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("light field directory not found: " + dir.string());
    }
    const std::size_t count = layout.rows * layout.cols;
    for (std::size_t k = 0; k < count; ++k) {
        const auto path = view_path(layout, name, k);
        if (!std::filesystem::exists(path)) {
            throw MissingViewError(k, path.string());
        }
    }
    LightField lf;
    lf.rows = layout.rows;
    lf.cols = layout.cols;
    lf.views.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto path = view_path(layout, name, k);
        Image view = read_png(path);
        if (view.height != view.width) {
            throw ShapeError("view " + std::to_string(k) + " (" + path.string() + ") is not square: " +
                             std::to_string(view.height) + "x" + std::to_string(view.width));
        }
        if (!lf.views.empty() && (view.height != lf.height() || view.width != lf.width())) {
            throw ShapeError("view " + std::to_string(k) + " (" + path.string() + ") is " +
                             std::to_string(view.height) + "x" + std::to_string(view.width) + ", expected " +
                             std::to_string(lf.height()) + "x" + std::to_string(lf.width()));
        }
        lf.views.push_back(std::move(view));
    }
    return lf;
}

/// Writes one PNG per view into `dir`, view index row-major over the grid.
inline void save_light_field(const LightField& lf, const std::filesystem::path& dir,
                             const std::string& pattern = DatasetLayout{}.pattern)
{
    validate(lf);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    }
    for (std::size_t k = 0; k < lf.views.size(); ++k) {
        write_png(lf.views[k], dir / view_filename(pattern, k));
    }
}

/// Relative names of every directory under the layout root that holds view 0.
inline std::vector<std::string> list_light_fields(const DatasetLayout& layout)
{
    if (!std::filesystem::is_directory(layout.root)) {
        throw IoError("dataset root not found: " + layout.root.string());
    }
    const std::string first = view_filename(layout.pattern, 0);
    std::vector<std::string> names;
    if (std::filesystem::exists(layout.root / first)) {
        names.emplace_back(".");
    }
    for (const auto& entry : std::filesystem::recursive_directory_iterator(layout.root)) {
        if (entry.is_directory() && std::filesystem::exists(entry.path() / first)) {
            names.push_back(std::filesystem::relative(entry.path(), layout.root).generic_string());
        }
    }
    std::sort(names.begin(), names.end());
    return names;
}

} // namespace lfae
