#pragma once

// Shared fixtures: synthetic light fields, random tensors, direct-loop oracles.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "lfae/lfae.hpp"

namespace lfae::fx {

/// Smooth colored pattern shifted by `disparity` pixels per grid step, so
/// neighboring views look like a real scene at constant depth.
inline LightField synthetic_field(std::size_t grid, std::size_t size, double disparity, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
    std::uniform_real_distribution<double> freq(0.05, 0.2);
    double ph[kRgb][2];
    double fr[kRgb][2];
    for (std::size_t ch = 0; ch < kRgb; ++ch) {
        for (int k = 0; k < 2; ++k) {
            ph[ch][k] = phase(rng);
            fr[ch][k] = freq(rng);
        }
    }
    LightField lf;
    lf.rows = lf.cols = grid;
    const double mid = static_cast<double>(grid / 2);
    for (std::size_t r = 0; r < grid; ++r) {
        for (std::size_t c = 0; c < grid; ++c) {
            Image img(size, size);
            const double dx = disparity * (static_cast<double>(c) - mid);
            const double dy = disparity * (static_cast<double>(r) - mid);
            for (std::size_t y = 0; y < size; ++y) {
                for (std::size_t x = 0; x < size; ++x) {
                    for (std::size_t ch = 0; ch < kRgb; ++ch) {
                        const double u = static_cast<double>(x) + dx;
                        const double v = static_cast<double>(y) + dy;
                        const double val = 0.5 + 0.2 * std::sin(fr[ch][0] * u + ph[ch][0]) +
                                           0.15 * std::cos(fr[ch][1] * v + ph[ch][1]);
                        img.at(y, x, ch) = static_cast<float>(val);
                    }
                }
            }
            lf.views.push_back(std::move(img));
        }
    }
    return lf;
}

inline LightField constant_field(std::size_t grid, std::size_t size, float value)
{
    LightField lf;
    lf.rows = lf.cols = grid;
    for (std::size_t k = 0; k < grid * grid; ++k) {
        lf.views.emplace_back(size, size, value);
    }
    return lf;
}

/// Independent uniform values in [0,1] for every sample.
inline LightField noise_field(std::size_t grid, std::size_t size, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    LightField lf = constant_field(grid, size, 0.0f);
    for (Image& img : lf.views) {
        for (float& p : img.pixels) {
            p = u(rng);
        }
    }
    return lf;
}

template <class T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<T> t(s);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = static_cast<T>(u(rng));
    }
    return t;
}

template <class T>
std::vector<T> random_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<T> v(n);
    for (T& x : v) {
        x = static_cast<T>(u(rng));
    }
    return v;
}

template <class T>
ConvParams<T> random_conv(std::size_t in, std::size_t out, std::size_t k, std::size_t stride, bool transposed, Rng& rng)
{
    ConvParams<T> p;
    p.weights = random_tensor<T>(transposed ? Shape{in, out, k, k} : Shape{out, in, k, k}, rng);
    p.bias = random_vector<T>(out, rng);
    p.stride = stride;
    return p;
}

/// Direct-loop convolution, no padding.
inline Tensor<double> direct_conv(const Tensor<double>& x, const ConvParams<double>& p)
{
    const Shape s = x.shape();
    const std::size_t out_c = p.weights.shape().n;
    const std::size_t k = p.weights.shape().h;
    const std::size_t oh = (s.h - k) / p.stride + 1;
    const std::size_t ow = (s.w - k) / p.stride + 1;
    Tensor<double> y({s.n, out_c, oh, ow});
    for (std::size_t b = 0; b < s.n; ++b) {
        for (std::size_t o = 0; o < out_c; ++o) {
            for (std::size_t i = 0; i < oh; ++i) {
                for (std::size_t j = 0; j < ow; ++j) {
                    double acc = p.bias[o];
                    for (std::size_t c = 0; c < s.c; ++c) {
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                acc += p.weights(o, c, ky, kx) * x(b, c, i * p.stride + ky, j * p.stride + kx);
                            }
                        }
                    }
                    y(b, o, i, j) = acc;
                }
            }
        }
    }
    return y;
}

/// Direct-loop transposed convolution: each input pixel scatters a weighted kernel.
inline Tensor<double> direct_conv_transpose(const Tensor<double>& x, const ConvParams<double>& p)
{
    const Shape s = x.shape();
    const std::size_t out_c = p.weights.shape().c;
    const std::size_t k = p.weights.shape().h;
    const std::size_t oh = (s.h - 1) * p.stride + k;
    const std::size_t ow = (s.w - 1) * p.stride + k;
    Tensor<double> y({s.n, out_c, oh, ow});
    for (std::size_t b = 0; b < s.n; ++b) {
        for (std::size_t o = 0; o < out_c; ++o) {
            for (std::size_t yy = 0; yy < oh; ++yy) {
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    y(b, o, yy, xx) = p.bias[o];
                }
            }
            for (std::size_t c = 0; c < s.c; ++c) {
                for (std::size_t i = 0; i < s.h; ++i) {
                    for (std::size_t j = 0; j < s.w; ++j) {
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                y(b, o, i * p.stride + ky, j * p.stride + kx) += p.weights(c, o, ky, kx) * x(b, c, i, j);
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("lfae_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace lfae::fx
