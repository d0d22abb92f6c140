#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lfae/errors.hpp"

namespace lfae {

/// Engine behind every seeded random choice in the library.
using Rng = std::mt19937_64;

/// Dimensions of a 4-axis tensor: (batch, channels, height, width).
struct Shape {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    constexpr std::size_t numel() const noexcept { return n * c * h * w; }
    constexpr std::size_t plane() const noexcept { return h * w; }
    friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s)
{
    std::ostringstream os;
    os << '[' << s.n << ',' << s.c << ',' << s.h << ',' << s.w << ']';
    return os.str();
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << to_string(s); }

/// Dense NCHW tensor. Storage is row-major: batch, then channel, row, column.
template <class T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0}) : shape_(shape), data_(shape.numel(), fill) {}
    Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data))
    {
        if (data_.size() != shape_.numel()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + to_string(shape_));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    std::size_t offset(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const noexcept
    {
        return ((b * shape_.c + ch) * shape_.h + y) * shape_.w + x;
    }
    T& operator()(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) noexcept
    {
        return data_[offset(b, ch, y, x)];
    }
    const T& operator()(std::size_t b, std::size_t ch, std::size_t y, std::size_t x) const noexcept
    {
        return data_[offset(b, ch, y, x)];
    }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    /// Contiguous H*W plane of one (batch, channel) pair.
    std::span<T> channel(std::size_t b, std::size_t ch) noexcept
    {
        return {data_.data() + offset(b, ch, 0, 0), shape_.plane()};
    }
    std::span<const T> channel(std::size_t b, std::size_t ch) const noexcept
    {
        return {data_.data() + offset(b, ch, 0, 0), shape_.plane()};
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    template <class U>
    Tensor<U> cast() const
    {
        Tensor<U> out(shape_);
        std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
        return out;
    }

private:
    Shape shape_{};
    std::vector<T> data_;
};

/// True when both tensors have the same shape and identical bit patterns.
template <class T>
bool bit_equal(const Tensor<T>& a, const Tensor<T>& b)
{
    return a.shape() == b.shape() &&
           (a.size() == 0 || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

template <class T>
bool all_finite(const Tensor<T>& t)
{
    return std::all_of(t.values().begin(), t.values().end(), [](T v) { return std::isfinite(v); });
}

/// Inner product accumulated in double.
template <class T>
double dot(const Tensor<T>& a, const Tensor<T>& b)
{
    if (a.shape() != b.shape()) {
        throw ShapeError("dot: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

} // namespace lfae
