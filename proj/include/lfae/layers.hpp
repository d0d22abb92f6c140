#pragma once

// Layer primitives with hand-paired backward passes: strided convolution,
// transposed convolution, ReLU, batch normalization and channel concatenation.
//
// Convolutions are lowered to GEMM over patch matrices. Patch matrices are
// built in chunks of output positions so peak scratch memory stays bounded
// even for 243-channel 512x512 inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lfae/errors.hpp"
#include "lfae/tensor.hpp"

namespace lfae {

/// Weights and bias of a convolution. For `conv2d` the weights are laid out
/// (out, in, k, k); for `conv_transpose2d` they are (in, out, k, k), so one
/// array serves as a convolution and as its adjoint.
template <class T>
struct ConvParams {
    Tensor<T> weights;
    std::vector<T> bias;
    std::size_t stride = 2;

    std::size_t kernel() const noexcept { return weights.shape().h; }
};

template <class T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    std::vector<T> bias;
};

template <class T>
struct BatchNormParams {
    std::vector<T> gamma;
    std::vector<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T epsilon = T(1e-5);
    T momentum = T(0.1);

    /// gamma = 1, beta = 0, running statistics (0, 1).
    static BatchNormParams identity(std::size_t channels)
    {
        BatchNormParams p;
        p.gamma.assign(channels, T(1));
        p.beta.assign(channels, T(0));
        p.running_mean.assign(channels, T(0));
        p.running_var.assign(channels, T(1));
        return p;
    }

    std::size_t channels() const noexcept { return gamma.size(); }
};

/// Saved state of a training-mode batch normalization, consumed by backward.
template <class T>
struct BatchNormCache {
    Tensor<T> normalized;
    std::vector<T> inv_std;
    std::vector<T> gamma;
};

template <class T>
struct BatchNormTrainResult {
    Tensor<T> output;
    BatchNormCache<T> cache;
};

template <class T>
struct BatchNormGrads {
    Tensor<T> input;
    std::vector<T> gamma;
    std::vector<T> beta;
};

namespace detail {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMatrix<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

template <class T>
MatrixMap<T> map(T* data, std::size_t rows, std::size_t cols, std::size_t stride)
{
    return MatrixMap<T>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                        Eigen::OuterStride<>(static_cast<Eigen::Index>(stride)));
}

template <class T>
ConstMatrixMap<T> map(const T* data, std::size_t rows, std::size_t cols, std::size_t stride)
{
    return ConstMatrixMap<T>(data, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols),
                             Eigen::OuterStride<>(static_cast<Eigen::Index>(stride)));
}

/// Geometry of a sliding k x k window with stride s over a (C, H, W) image,
/// producing a grid of `grid_h x grid_w` window positions.
struct PatchGeometry {
    std::size_t channels;
    std::size_t height;
    std::size_t width;
    std::size_t kernel;
    std::size_t stride;
    std::size_t grid_h;
    std::size_t grid_w;

    std::size_t rows() const noexcept { return channels * kernel * kernel; }
    std::size_t positions() const noexcept { return grid_h * grid_w; }
};

// Scratch budget for one patch-matrix chunk, in elements.
inline constexpr std::size_t kPatchChunkElements = std::size_t{1} << 22;

inline std::size_t chunk_positions(const PatchGeometry& g)
{
    return std::clamp<std::size_t>(kPatchChunkElements / std::max<std::size_t>(g.rows(), 1), 1,
                                   std::max<std::size_t>(g.positions(), 1));
}

/// cols[(c*k + di)*k + dj][p - first] = image[c][oy*s + di][ox*s + dj].
template <class T>
void gather_patches(const T* image, const PatchGeometry& g, std::size_t first, std::size_t count, T* cols)
{
    const std::size_t k = g.kernel;
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* plane = image + c * g.height * g.width;
        for (std::size_t di = 0; di < k; ++di) {
            for (std::size_t dj = 0; dj < k; ++dj) {
                T* row = cols + ((c * k + di) * k + dj) * count;
                for (std::size_t q = 0; q < count; ++q) {
                    const std::size_t p = first + q;
                    const std::size_t oy = p / g.grid_w;
                    const std::size_t ox = p % g.grid_w;
                    row[q] = plane[(oy * g.stride + di) * g.width + ox * g.stride + dj];
                }
            }
        }
    }
}

/// Adjoint of gather_patches: accumulates patch columns back into the image.
template <class T>
void scatter_patches(const T* cols, const PatchGeometry& g, std::size_t first, std::size_t count, T* image)
{
    const std::size_t k = g.kernel;
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* plane = image + c * g.height * g.width;
        for (std::size_t di = 0; di < k; ++di) {
            for (std::size_t dj = 0; dj < k; ++dj) {
                const T* row = cols + ((c * k + di) * k + dj) * count;
                for (std::size_t q = 0; q < count; ++q) {
                    const std::size_t p = first + q;
                    const std::size_t oy = p / g.grid_w;
                    const std::size_t ox = p % g.grid_w;
                    plane[(oy * g.stride + di) * g.width + ox * g.stride + dj] += row[q];
                }
            }
        }
    }
}

template <class T>
void check_conv_params(const char* op, const ConvParams<T>& p, std::size_t out_channels)
{
    const Shape& ws = p.weights.shape();
    if (ws.h == 0 || ws.h != ws.w) {
        throw ShapeError(std::string(op) + ": kernel must be square and non-empty, got weights " + to_string(ws));
    }
    if (p.stride == 0) {
        throw ShapeError(std::string(op) + ": stride must be positive");
    }
    if (p.bias.size() != out_channels) {
        throw ShapeError(std::string(op) + ": bias length " + std::to_string(p.bias.size()) +
                         " does not match " + std::to_string(out_channels) + " output channels");
    }
}

template <class T>
void add_channel_bias(Tensor<T>& t, const std::vector<T>& bias)
{
    const Shape& s = t.shape();
    for (std::size_t b = 0; b < s.n; ++b) {
        for (std::size_t c = 0; c < s.c; ++c) {
            for (T& v : t.channel(b, c)) {
                v += bias[c];
            }
        }
    }
}

template <class T>
std::vector<T> channel_sums(const Tensor<T>& t)
{
    const Shape& s = t.shape();
    std::vector<T> out(s.c, T(0));
    for (std::size_t c = 0; c < s.c; ++c) {
        double acc = 0.0;
        for (std::size_t b = 0; b < s.n; ++b) {
            for (T v : t.channel(b, c)) {
                acc += static_cast<double>(v);
            }
        }
        out[c] = static_cast<T>(acc);
    }
    return out;
}

template <class T>
PatchGeometry conv_geometry(const char* op, const Shape& in, const ConvParams<T>& p)
{
    const Shape& ws = p.weights.shape();
    check_conv_params(op, p, ws.n);
    if (in.c != ws.c) {
        throw ShapeError(std::string(op) + ": input " + to_string(in) + " has " + std::to_string(in.c) +
                         " channels but weights " + to_string(ws) + " expect " + std::to_string(ws.c));
    }
    const std::size_t k = ws.h;
    if (in.h < k || in.w < k) {
        throw ShapeError(std::string(op) + ": input " + to_string(in) + " smaller than kernel of weights " +
                         to_string(ws));
    }
    return {in.c, in.h, in.w, k, p.stride, (in.h - k) / p.stride + 1, (in.w - k) / p.stride + 1};
}

template <class T>
PatchGeometry transpose_geometry(const char* op, const Shape& in, const ConvParams<T>& p)
{
    const Shape& ws = p.weights.shape();
    check_conv_params(op, p, ws.c);
    if (in.c != ws.n) {
        throw ShapeError(std::string(op) + ": input " + to_string(in) + " has " + std::to_string(in.c) +
                         " channels but weights " + to_string(ws) + " expect " + std::to_string(ws.n));
    }
    if (in.h == 0 || in.w == 0) {
        throw ShapeError(std::string(op) + ": empty input " + to_string(in));
    }
    const std::size_t k = ws.h;
    return {ws.c, (in.h - 1) * p.stride + k, (in.w - 1) * p.stride + k, k, p.stride, in.h, in.w};
}

} // namespace detail

/// Valid (unpadded) strided convolution:
/// out[b,o,i,j] = bias[o] + sum_{c,di,dj} in[b,c,i*s+di,j*s+dj] * w[o,c,di,dj].
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvParams<T>& p)
{
    const detail::PatchGeometry g = detail::conv_geometry("conv2d", input.shape(), p);
    const std::size_t out_c = p.weights.shape().n;
    const std::size_t positions = g.positions();
    const std::size_t rows = g.rows();
    const std::size_t chunk = detail::chunk_positions(g);

    Tensor<T> out({input.shape().n, out_c, g.grid_h, g.grid_w});
    const auto weights = detail::map(p.weights.data(), out_c, rows, rows);
    std::vector<T> cols(rows * chunk);
    for (std::size_t b = 0; b < input.shape().n; ++b) {
        const T* image = input.data() + input.offset(b, 0, 0, 0);
        T* dst = out.data() + out.offset(b, 0, 0, 0);
        for (std::size_t first = 0; first < positions; first += chunk) {
            const std::size_t count = std::min(chunk, positions - first);
            detail::gather_patches(image, g, first, count, cols.data());
            auto block = detail::map(dst + first, out_c, count, positions);
            block.noalias() = weights * detail::map(static_cast<const T*>(cols.data()), rows, count, count);
        }
    }
    detail::add_channel_bias(out, p.bias);
    return out;
}

template <class T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& p, const Tensor<T>& upstream)
{
    const detail::PatchGeometry g = detail::conv_geometry("conv2d_backward", input.shape(), p);
    const std::size_t out_c = p.weights.shape().n;
    const Shape expected{input.shape().n, out_c, g.grid_h, g.grid_w};
    if (upstream.shape() != expected) {
        throw ShapeError("conv2d_backward: upstream gradient " + to_string(upstream.shape()) +
                         " does not match output shape " + to_string(expected));
    }
    const std::size_t positions = g.positions();
    const std::size_t rows = g.rows();
    const std::size_t chunk = detail::chunk_positions(g);

    ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(p.weights.shape()), detail::channel_sums(upstream)};
    const auto weights = detail::map(p.weights.data(), out_c, rows, rows);
    auto grad_w = detail::map(grads.weights.data(), out_c, rows, rows);
    std::vector<T> cols(rows * chunk);
    for (std::size_t b = 0; b < input.shape().n; ++b) {
        const T* image = input.data() + input.offset(b, 0, 0, 0);
        const T* up = upstream.data() + upstream.offset(b, 0, 0, 0);
        T* grad_image = grads.input.data() + grads.input.offset(b, 0, 0, 0);
        for (std::size_t first = 0; first < positions; first += chunk) {
            const std::size_t count = std::min(chunk, positions - first);
            const auto up_block = detail::map(up + first, out_c, count, positions);
            detail::gather_patches(image, g, first, count, cols.data());
            auto patch = detail::map(cols.data(), rows, count, count);
            grad_w.noalias() += up_block * patch.transpose();
            patch.noalias() = weights.transpose() * up_block;
            detail::scatter_patches(static_cast<const T*>(cols.data()), g, first, count, grad_image);
        }
    }
    return grads;
}

/// Adjoint of `conv2d` over the same weight array, plus bias. Weights are
/// (in, out, k, k); output spatial size is (h-1)*s + k, i.e. h*s when k == s.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const ConvParams<T>& p)
{
    const detail::PatchGeometry g = detail::transpose_geometry("conv_transpose2d", input.shape(), p);
    const std::size_t in_c = input.shape().c;
    const std::size_t positions = g.positions();
    const std::size_t rows = g.rows();
    const std::size_t chunk = detail::chunk_positions(g);

    Tensor<T> out({input.shape().n, g.channels, g.height, g.width});
    const auto weights = detail::map(p.weights.data(), in_c, rows, rows);
    std::vector<T> cols(rows * chunk);
    for (std::size_t b = 0; b < input.shape().n; ++b) {
        const T* src = input.data() + input.offset(b, 0, 0, 0);
        T* image = out.data() + out.offset(b, 0, 0, 0);
        for (std::size_t first = 0; first < positions; first += chunk) {
            const std::size_t count = std::min(chunk, positions - first);
            auto patch = detail::map(cols.data(), rows, count, count);
            patch.noalias() = weights.transpose() * detail::map(src + first, in_c, count, positions);
            detail::scatter_patches(static_cast<const T*>(cols.data()), g, first, count, image);
        }
    }
    detail::add_channel_bias(out, p.bias);
    return out;
}

template <class T>
ConvGrads<T> conv_transpose2d_backward(const Tensor<T>& input, const ConvParams<T>& p, const Tensor<T>& upstream)
{
    const detail::PatchGeometry g = detail::transpose_geometry("conv_transpose2d_backward", input.shape(), p);
    const std::size_t in_c = input.shape().c;
    const Shape expected{input.shape().n, g.channels, g.height, g.width};
    if (upstream.shape() != expected) {
        throw ShapeError("conv_transpose2d_backward: upstream gradient " + to_string(upstream.shape()) +
                         " does not match output shape " + to_string(expected));
    }
    const std::size_t positions = g.positions();
    const std::size_t rows = g.rows();
    const std::size_t chunk = detail::chunk_positions(g);

    ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(p.weights.shape()), detail::channel_sums(upstream)};
    const auto weights = detail::map(p.weights.data(), in_c, rows, rows);
    auto grad_w = detail::map(grads.weights.data(), in_c, rows, rows);
    std::vector<T> cols(rows * chunk);
    for (std::size_t b = 0; b < input.shape().n; ++b) {
        const T* src = input.data() + input.offset(b, 0, 0, 0);
        const T* up = upstream.data() + upstream.offset(b, 0, 0, 0);
        T* grad_src = grads.input.data() + grads.input.offset(b, 0, 0, 0);
        for (std::size_t first = 0; first < positions; first += chunk) {
            const std::size_t count = std::min(chunk, positions - first);
            detail::gather_patches(up, g, first, count, cols.data());
            const auto patch = detail::map(static_cast<const T*>(cols.data()), rows, count, count);
            detail::map(grad_src + first, in_c, count, positions).noalias() = weights * patch;
            grad_w.noalias() += detail::map(src + first, in_c, count, positions) * patch.transpose();
        }
    }
    return grads;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x)
{
    Tensor<T> out(x.shape());
    std::transform(x.values().begin(), x.values().end(), out.data(),
                   [](T v) { return v > T(0) ? v : T(0); });
    return out;
}

/// Passes upstream where x > 0; the derivative at exactly 0 is taken as 0.
template <class T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& upstream)
{
    if (x.shape() != upstream.shape()) {
        throw ShapeError("relu_backward: input " + to_string(x.shape()) + " vs upstream " +
                         to_string(upstream.shape()));
    }
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] > T(0) ? upstream[i] : T(0);
    }
    return out;
}

namespace detail {

template <class T>
void check_batchnorm(const char* op, const Shape& s, const BatchNormParams<T>& p)
{
    const std::size_t c = p.gamma.size();
    if (p.beta.size() != c || p.running_mean.size() != c || p.running_var.size() != c) {
        throw ShapeError(std::string(op) + ": parameter vectors have inconsistent lengths");
    }
    if (s.c != c) {
        throw ShapeError(std::string(op) + ": input " + to_string(s) + " has " + std::to_string(s.c) +
                         " channels, parameters have " + std::to_string(c));
    }
}

} // namespace detail

/// Normalizes each channel over (batch, height, width) with batch statistics
/// and folds them into the running statistics by exponential moving average.
/// The mean is accumulated relative to the channel's first element, so a
/// constant channel normalizes to exactly zero.
template <class T>
BatchNormTrainResult<T> batchnorm_train(const Tensor<T>& x, BatchNormParams<T>& p)
{
    detail::check_batchnorm("batchnorm_train", x.shape(), p);
    const Shape& s = x.shape();
    const std::size_t count = s.n * s.h * s.w;
    if (count == 0) {
        throw ShapeError("batchnorm_train: empty input " + to_string(s));
    }
    BatchNormTrainResult<T> r{Tensor<T>(s), {Tensor<T>(s), std::vector<T>(s.c), p.gamma}};
    for (std::size_t c = 0; c < s.c; ++c) {
        const T shift = x(0, c, 0, 0);
        double acc = 0.0;
        for (std::size_t b = 0; b < s.n; ++b) {
            for (T v : x.channel(b, c)) {
                acc += static_cast<double>(v - shift);
            }
        }
        const T mean = shift + static_cast<T>(acc / static_cast<double>(count));
        double sq = 0.0;
        for (std::size_t b = 0; b < s.n; ++b) {
            for (T v : x.channel(b, c)) {
                const double d = static_cast<double>(v - mean);
                sq += d * d;
            }
        }
        const T var = static_cast<T>(sq / static_cast<double>(count));
        const T inv_std = T(1) / std::sqrt(var + p.epsilon);
        r.cache.inv_std[c] = inv_std;
        for (std::size_t b = 0; b < s.n; ++b) {
            const auto src = x.channel(b, c);
            auto norm = r.cache.normalized.channel(b, c);
            auto dst = r.output.channel(b, c);
            for (std::size_t i = 0; i < src.size(); ++i) {
                norm[i] = (src[i] - mean) * inv_std;
                dst[i] = p.gamma[c] * norm[i] + p.beta[c];
            }
        }
        p.running_mean[c] = (T(1) - p.momentum) * p.running_mean[c] + p.momentum * mean;
        p.running_var[c] = (T(1) - p.momentum) * p.running_var[c] + p.momentum * var;
    }
    return r;
}

template <class T>
Tensor<T> batchnorm_eval(const Tensor<T>& x, const BatchNormParams<T>& p)
{
    detail::check_batchnorm("batchnorm_eval", x.shape(), p);
    const Shape& s = x.shape();
    Tensor<T> out(s);
    for (std::size_t c = 0; c < s.c; ++c) {
        const T inv_std = T(1) / std::sqrt(p.running_var[c] + p.epsilon);
        for (std::size_t b = 0; b < s.n; ++b) {
            const auto src = x.channel(b, c);
            auto dst = out.channel(b, c);
            for (std::size_t i = 0; i < src.size(); ++i) {
                dst[i] = p.gamma[c] * ((src[i] - p.running_mean[c]) * inv_std) + p.beta[c];
            }
        }
    }
    return out;
}

template <class T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const Tensor<T>& upstream)
{
    const Shape& s = cache.normalized.shape();
    if (upstream.shape() != s) {
        throw ShapeError("batchnorm_backward: upstream " + to_string(upstream.shape()) + " vs cached " +
                         to_string(s));
    }
    const double count = static_cast<double>(s.n * s.h * s.w);
    BatchNormGrads<T> g{Tensor<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
    for (std::size_t c = 0; c < s.c; ++c) {
        double sum_up = 0.0;
        double sum_up_norm = 0.0;
        for (std::size_t b = 0; b < s.n; ++b) {
            const auto up = upstream.channel(b, c);
            const auto norm = cache.normalized.channel(b, c);
            for (std::size_t i = 0; i < up.size(); ++i) {
                sum_up += static_cast<double>(up[i]);
                sum_up_norm += static_cast<double>(up[i]) * static_cast<double>(norm[i]);
            }
        }
        g.beta[c] = static_cast<T>(sum_up);
        g.gamma[c] = static_cast<T>(sum_up_norm);
        // dx = gamma * inv_std / N * (N*dy - sum(dy) - xhat * sum(dy*xhat))
        const T scale = static_cast<T>(static_cast<double>(cache.gamma[c]) * cache.inv_std[c] / count);
        const T total_up = static_cast<T>(sum_up);
        const T total_up_norm = static_cast<T>(sum_up_norm);
        const T n = static_cast<T>(count);
        for (std::size_t b = 0; b < s.n; ++b) {
            const auto up = upstream.channel(b, c);
            const auto norm = cache.normalized.channel(b, c);
            auto dst = g.input.channel(b, c);
            for (std::size_t i = 0; i < up.size(); ++i) {
                dst[i] = scale * (n * up[i] - total_up - norm[i] * total_up_norm);
            }
        }
    }
    return g;
}

/// Stacks `b` after `a` along the channel axis.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b)
{
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw ShapeError("concat_channels: " + to_string(sa) + " and " + to_string(sb) +
                         " differ outside the channel axis");
    }
    Tensor<T> out({sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t plane = sa.plane();
    for (std::size_t n = 0; n < sa.n; ++n) {
        std::copy_n(a.data() + a.offset(n, 0, 0, 0), sa.c * plane, out.data() + out.offset(n, 0, 0, 0));
        std::copy_n(b.data() + b.offset(n, 0, 0, 0), sb.c * plane, out.data() + out.offset(n, sa.c, 0, 0));
    }
    return out;
}

/// Inverse of concat_channels: channels [0, first) and [first, C).
template <class T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& t, std::size_t first)
{
    const Shape& s = t.shape();
    if (first > s.c) {
        throw ShapeError("split_channels: split point " + std::to_string(first) + " beyond " + to_string(s));
    }
    Tensor<T> a({s.n, first, s.h, s.w});
    Tensor<T> b({s.n, s.c - first, s.h, s.w});
    const std::size_t plane = s.plane();
    for (std::size_t n = 0; n < s.n; ++n) {
        std::copy_n(t.data() + t.offset(n, 0, 0, 0), first * plane, a.data() + a.offset(n, 0, 0, 0));
        std::copy_n(t.data() + t.offset(n, first, 0, 0), (s.c - first) * plane, b.data() + b.offset(n, 0, 0, 0));
    }
    return {std::move(a), std::move(b)};
}

} // namespace lfae
