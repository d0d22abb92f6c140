#pragma once

// Light fields as grids of RGB views, and the channel-stacked tensor view
// the network consumes.

#include <cmath>
#include <cstddef>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "lfae/errors.hpp"
#include "lfae/tensor.hpp"

namespace lfae {

inline constexpr std::size_t kRgb = 3;

/// Interleaved RGB image, row-major (height, width, 3).
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), pixels(h * w * kRgb, fill) {}

    float& at(std::size_t y, std::size_t x, std::size_t ch) noexcept { return pixels[(y * width + x) * kRgb + ch]; }
    float at(std::size_t y, std::size_t x, std::size_t ch) const noexcept
    {
        return pixels[(y * width + x) * kRgb + ch];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

inline bool bit_equal(const Image& a, const Image& b)
{
    return a.height == b.height && a.width == b.width && a.pixels.size() == b.pixels.size() &&
           (a.pixels.empty() || std::memcmp(a.pixels.data(), b.pixels.data(), a.pixels.size() * sizeof(float)) == 0);
}

/// Grid of views; (row, col) index the angular axes, pixels the spatial axes.
/// Views are stored row-major over the grid.
struct LightField {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Image> views;

    LightField() = default;
    LightField(std::size_t r, std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
        : rows(r), cols(c), views(r * c, Image(h, w, fill))
    {}

    Image& view(std::size_t r, std::size_t c) noexcept { return views[r * cols + c]; }
    const Image& view(std::size_t r, std::size_t c) const noexcept { return views[r * cols + c]; }
    std::size_t height() const noexcept { return views.empty() ? 0 : views.front().height; }
    std::size_t width() const noexcept { return views.empty() ? 0 : views.front().width; }
    std::size_t view_count() const noexcept { return rows * cols; }
    std::size_t channels() const noexcept { return rows * cols * kRgb; }

    friend bool operator==(const LightField&, const LightField&) = default;
};

inline bool bit_equal(const LightField& a, const LightField& b)
{
    if (a.rows != b.rows || a.cols != b.cols || a.views.size() != b.views.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.views.size(); ++i) {
        if (!bit_equal(a.views[i], b.views[i])) {
            return false;
        }
    }
    return true;
}

/// Throws ShapeError unless every view has the same square dimensions.
/// With `check_range`, also requires every pixel in [0, 1].
inline void validate(const LightField& lf, bool check_range = false)
{
    if (lf.rows == 0 || lf.cols == 0 || lf.views.size() != lf.rows * lf.cols) {
        throw ShapeError("light field grid " + std::to_string(lf.rows) + "x" + std::to_string(lf.cols) + " holds " +
                         std::to_string(lf.views.size()) + " views");
    }
    const std::size_t h = lf.height();
    const std::size_t w = lf.width();
    if (h == 0 || h != w) {
        throw ShapeError("light field views must be square and non-empty, got " + std::to_string(h) + "x" +
                         std::to_string(w));
    }
    for (std::size_t i = 0; i < lf.views.size(); ++i) {
        const Image& v = lf.views[i];
        if (v.height != h || v.width != w || v.pixels.size() != h * w * kRgb) {
            throw ShapeError("view " + std::to_string(i) + " is " + std::to_string(v.height) + "x" +
                             std::to_string(v.width) + ", expected " + std::to_string(h) + "x" + std::to_string(w));
        }
        if (check_range) {
            for (float p : v.pixels) {
                if (!(p >= 0.0f && p <= 1.0f)) {
                    throw ShapeError("view " + std::to_string(i) + " has pixel value outside [0,1]");
                }
            }
        }
    }
}

/// Channel index of (row, col, rgb) in the stacked tensor.
constexpr std::size_t stacked_channel(std::size_t row, std::size_t col, std::size_t cols, std::size_t rgb) noexcept
{
    return (row * cols + col) * kRgb + rgb;
}

/// Writes `lf` into batch slot `b` of a [B, rows*cols*3, H, W] tensor.
template <class T>
void stack_into(const LightField& lf, Tensor<T>& out, std::size_t b)
{
    const std::size_t h = lf.height();
    const std::size_t w = lf.width();
    const Shape& s = out.shape();
    if (s.c != lf.channels() || s.h != h || s.w != w || b >= s.n) {
        throw ShapeError("stack_views: light field " + std::to_string(lf.rows) + "x" + std::to_string(lf.cols) +
                         " of " + std::to_string(h) + "x" + std::to_string(w) + " views does not fit " +
                         to_string(s) + " at slot " + std::to_string(b));
    }
    for (std::size_t r = 0; r < lf.rows; ++r) {
        for (std::size_t c = 0; c < lf.cols; ++c) {
            const Image& v = lf.view(r, c);
            for (std::size_t rgb = 0; rgb < kRgb; ++rgb) {
                auto plane = out.channel(b, stacked_channel(r, c, lf.cols, rgb));
                for (std::size_t i = 0; i < h * w; ++i) {
                    plane[i] = static_cast<T>(v.pixels[i * kRgb + rgb]);
                }
            }
        }
    }
}

/// [1, rows*cols*3, H, W] with channel (row*cols + col)*3 + rgb.
template <class T = float>
Tensor<T> stack_views(const LightField& lf)
{
    validate(lf);
    Tensor<T> out({1, lf.channels(), lf.height(), lf.width()});
    stack_into(lf, out, 0);
    return out;
}

template <class T = float>
Tensor<T> stack_batch(const std::vector<LightField>& batch)
{
    if (batch.empty()) {
        throw ShapeError("stack_batch: empty batch");
    }
    validate(batch.front());
    Tensor<T> out({batch.size(), batch.front().channels(), batch.front().height(), batch.front().width()});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        validate(batch[b]);
        stack_into(batch[b], out, b);
    }
    return out;
}

/// Inverse of stack_views for an explicit grid.
template <class T>
LightField unstack_views(const Tensor<T>& t, std::size_t rows, std::size_t cols, std::size_t b = 0)
{
    const Shape& s = t.shape();
    if (rows == 0 || cols == 0 || s.c != rows * cols * kRgb || b >= s.n) {
        throw ShapeError("unstack_views: tensor " + to_string(s) + " does not hold a " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " grid at slot " + std::to_string(b));
    }
    LightField lf(rows, cols, s.h, s.w);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            Image& v = lf.view(r, c);
            for (std::size_t rgb = 0; rgb < kRgb; ++rgb) {
                const auto plane = t.channel(b, stacked_channel(r, c, cols, rgb));
                for (std::size_t i = 0; i < s.h * s.w; ++i) {
                    v.pixels[i * kRgb + rgb] = static_cast<float>(plane[i]);
                }
            }
        }
    }
    return lf;
}

/// Inverse of stack_views for a square n x n grid inferred from the channel count.
template <class T>
LightField unstack_views(const Tensor<T>& t)
{
    const std::size_t c = t.shape().c;
    const std::size_t views = c / kRgb;
    const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(views))));
    if (c == 0 || c % kRgb != 0 || n * n != views) {
        throw ShapeError("unstack_views: channel count " + std::to_string(c) + " is not of the form 3*n^2");
    }
    return unstack_views(t, n, n);
}

/// Index (row, col) of the central view; requires odd grid dimensions.
inline std::pair<std::size_t, std::size_t> center_index(std::size_t rows, std::size_t cols)
{
    if (rows % 2 == 0 || cols % 2 == 0) {
        throw UnsupportedGridError("center view undefined for even grid " + std::to_string(rows) + "x" +
                                   std::to_string(cols));
    }
    return {rows / 2, cols / 2};
}

inline const Image& center_view(const LightField& lf)
{
    const auto [r, c] = center_index(lf.rows, lf.cols);
    return lf.view(r, c);
}

} // namespace lfae
