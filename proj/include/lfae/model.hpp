#pragma once

// Two-lane light-field autoencoder.
//
//   stacked views [B, R*C*3, S, S]
//     -> 5 x (conv 2x2/2 -> ReLU -> batch norm)            latent [B, L, S/32, S/32]
//     -> 5 x (transposed conv 2x2/2 -> ReLU -> batch norm)  [B, D, S, S]
//     -> concat with the center view (highway lane)         [B, D + 3, S, S]
//     -> 1x1 conv -> ReLU                                    [B, R*C*3, S, S]

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lfae/errors.hpp"
#include "lfae/layers.hpp"
#include "lfae/light_field.hpp"
#include "lfae/tensor.hpp"

namespace lfae {

inline constexpr std::size_t kLaneDepth = 5;
inline constexpr std::size_t kDownsample = std::size_t{1} << kLaneDepth;

struct ModelConfig {
    std::size_t grid_rows = 9;
    std::size_t grid_cols = 9;
    std::size_t spatial = 512;
    std::vector<std::size_t> channel_schedule{128, 256, 512, 1024, 2048};
    std::size_t decoder_out_channels = 240;
    std::uint64_t init_seed = 0;

    std::size_t stacked_channels() const noexcept { return grid_rows * grid_cols * kRgb; }
    std::size_t latent_channels() const noexcept { return channel_schedule.empty() ? 0 : channel_schedule.back(); }
    std::size_t latent_spatial() const noexcept { return spatial / kDownsample; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// 3x3 grid, 32x32 views, schedule [8,16,32,64,128]: small enough for
/// finite-difference checks and quick training runs.
inline ModelConfig toy_config()
{
    ModelConfig cfg;
    cfg.grid_rows = 3;
    cfg.grid_cols = 3;
    cfg.spatial = 32;
    cfg.channel_schedule = {8, 16, 32, 64, 128};
    cfg.decoder_out_channels = 24;
    return cfg;
}

inline void validate(const ModelConfig& cfg)
{
    if (cfg.grid_rows == 0 || cfg.grid_cols == 0 || cfg.grid_rows % 2 == 0 || cfg.grid_cols % 2 == 0) {
        throw ConfigError("grid must have odd, positive dimensions so a center view exists (got " +
                          std::to_string(cfg.grid_rows) + "x" + std::to_string(cfg.grid_cols) + ")");
    }
    if (cfg.spatial == 0 || cfg.spatial % kDownsample != 0) {
        throw ConfigError("spatial size " + std::to_string(cfg.spatial) + " must be a positive multiple of " +
                          std::to_string(kDownsample));
    }
    if (cfg.channel_schedule.size() != kLaneDepth) {
        throw ConfigError("channel schedule must list " + std::to_string(kLaneDepth) + " entries, got " +
                          std::to_string(cfg.channel_schedule.size()));
    }
    for (std::size_t c : cfg.channel_schedule) {
        if (c == 0) {
            throw ConfigError("channel schedule entries must be positive");
        }
    }
    if (cfg.decoder_out_channels + kRgb != cfg.stacked_channels()) {
        throw ConfigError("decoder_out_channels + 3 must equal the stacked width " +
                          std::to_string(cfg.stacked_channels()) + " (got " +
                          std::to_string(cfg.decoder_out_channels) + ")");
    }
}

/// 64-bit FNV-1a over the architecture fields (the init seed is excluded).
inline std::uint64_t fingerprint(const ModelConfig& cfg)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(cfg.grid_rows);
    mix(cfg.grid_cols);
    mix(cfg.spatial);
    mix(cfg.channel_schedule.size());
    for (std::size_t c : cfg.channel_schedule) {
        mix(c);
    }
    mix(cfg.decoder_out_channels);
    return h;
}

inline double compression_ratio(double input_units, double middle_units) { return input_units / middle_units; }

/// Scalars in one stacked input light field.
inline std::size_t input_units(const ModelConfig& cfg) { return cfg.spatial * cfg.spatial * cfg.stacked_channels(); }

/// Scalars carried across the bottleneck: the latent plus the center view.
inline std::size_t middle_units(const ModelConfig& cfg)
{
    return cfg.latent_channels() * cfg.latent_spatial() * cfg.latent_spatial() + cfg.spatial * cfg.spatial * kRgb;
}

/// Units in the input layer over units in the middle layer (latent + center view).
inline double compression_ratio(const ModelConfig& cfg)
{
    return compression_ratio(static_cast<double>(input_units(cfg)), static_cast<double>(middle_units(cfg)));
}

enum class Mode { train, eval };

template <class T>
struct LaneLayer {
    ConvParams<T> conv;
    BatchNormParams<T> norm;
};

template <class T>
struct Model {
    ModelConfig config;
    std::vector<LaneLayer<T>> encoder;
    std::vector<LaneLayer<T>> decoder;
    ConvParams<T> merge;
    Mode mode = Mode::eval;
};

/// Named view onto one parameter block.
template <class T>
struct ParamView {
    std::string name;
    std::span<T> values;
};

template <class T>
struct LaneGrads {
    Tensor<T> weights;
    std::vector<T> bias;
    std::vector<T> gamma;
    std::vector<T> beta;
};

template <class T>
struct ModelGrads {
    std::vector<LaneGrads<T>> encoder;
    std::vector<LaneGrads<T>> decoder;
    Tensor<T> merge_weights;
    std::vector<T> merge_bias;
};

namespace detail {

template <class Lane, class F>
void visit_lane(const std::string& prefix, Lane& lane, F& f)
{
    f(prefix + ".weight", std::span(lane.conv.weights.storage()));
    f(prefix + ".bias", std::span(lane.conv.bias));
    f(prefix + ".gamma", std::span(lane.norm.gamma));
    f(prefix + ".beta", std::span(lane.norm.beta));
}

template <class Lane, class F>
void visit_lane_grads(const std::string& prefix, Lane& g, F& f)
{
    f(prefix + ".weight", std::span(g.weights.storage()));
    f(prefix + ".bias", std::span(g.bias));
    f(prefix + ".gamma", std::span(g.gamma));
    f(prefix + ".beta", std::span(g.beta));
}

} // namespace detail

/// Trainable parameters in a fixed order; ModelGrads visits the same order.
template <class T, class F>
void for_each_parameter(Model<T>& m, F&& f)
{
    for (std::size_t i = 0; i < m.encoder.size(); ++i) {
        detail::visit_lane("encoder." + std::to_string(i), m.encoder[i], f);
    }
    for (std::size_t i = 0; i < m.decoder.size(); ++i) {
        detail::visit_lane("decoder." + std::to_string(i), m.decoder[i], f);
    }
    f(std::string("merge.weight"), std::span(m.merge.weights.storage()));
    f(std::string("merge.bias"), std::span(m.merge.bias));
}

template <class T, class F>
void for_each_parameter(const Model<T>& m, F&& f)
{
    auto& mutable_model = const_cast<Model<T>&>(m);
    for_each_parameter(mutable_model, [&f](const std::string& name, std::span<T> values) {
        f(name, std::span<const T>(values));
    });
}

/// Batch-norm running statistics (state that is saved but not trained).
template <class T, class F>
void for_each_buffer(Model<T>& m, F&& f)
{
    const auto lanes = [&f](const std::string& prefix, std::vector<LaneLayer<T>>& layers) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string p = prefix + "." + std::to_string(i);
            f(p + ".running_mean", std::span(layers[i].norm.running_mean));
            f(p + ".running_var", std::span(layers[i].norm.running_var));
        }
    };
    lanes("encoder", m.encoder);
    lanes("decoder", m.decoder);
}

template <class T, class F>
void for_each_gradient(ModelGrads<T>& g, F&& f)
{
    for (std::size_t i = 0; i < g.encoder.size(); ++i) {
        detail::visit_lane_grads("encoder." + std::to_string(i), g.encoder[i], f);
    }
    for (std::size_t i = 0; i < g.decoder.size(); ++i) {
        detail::visit_lane_grads("decoder." + std::to_string(i), g.decoder[i], f);
    }
    f(std::string("merge.weight"), std::span(g.merge_weights.storage()));
    f(std::string("merge.bias"), std::span(g.merge_bias));
}

template <class T>
std::vector<ParamView<T>> parameters(Model<T>& m)
{
    std::vector<ParamView<T>> out;
    for_each_parameter(m, [&out](const std::string& name, std::span<T> v) { out.push_back({name, v}); });
    return out;
}

template <class T>
std::vector<ParamView<T>> gradients(ModelGrads<T>& g)
{
    std::vector<ParamView<T>> out;
    for_each_gradient(g, [&out](const std::string& name, std::span<T> v) { out.push_back({name, v}); });
    return out;
}

/// Total trainable scalars: conv weights and biases plus batch-norm gamma and beta.
template <class T>
std::size_t parameter_count(const Model<T>& m)
{
    std::size_t n = 0;
    for_each_parameter(m, [&n](const std::string&, std::span<const T> v) { n += v.size(); });
    return n;
}

/// Per-layer shapes for a single light field, derived from the config alone.
struct LayerInfo {
    std::string name;
    Shape input;
    Shape output;
    std::size_t parameters = 0;
};

inline std::vector<LayerInfo> layer_table(const ModelConfig& cfg)
{
    validate(cfg);
    std::vector<LayerInfo> table;
    std::size_t channels = cfg.stacked_channels();
    std::size_t size = cfg.spatial;
    for (std::size_t i = 0; i < kLaneDepth; ++i) {
        const std::size_t out = cfg.channel_schedule[i];
        table.push_back({"encoder." + std::to_string(i), {1, channels, size, size}, {1, out, size / 2, size / 2},
                         channels * out * 4 + 3 * out});
        channels = out;
        size /= 2;
    }
    for (std::size_t i = 0; i < kLaneDepth; ++i) {
        const std::size_t out =
            i + 1 < kLaneDepth ? cfg.channel_schedule[kLaneDepth - 2 - i] : cfg.decoder_out_channels;
        table.push_back({"decoder." + std::to_string(i), {1, channels, size, size}, {1, out, size * 2, size * 2},
                         channels * out * 4 + 3 * out});
        channels = out;
        size *= 2;
    }
    const std::size_t merge_in = channels + kRgb;
    const std::size_t merge_out = cfg.stacked_channels();
    table.push_back({"merge", {1, merge_in, size, size}, {1, merge_out, size, size}, merge_in * merge_out + merge_out});
    return table;
}

inline std::size_t parameter_count(const ModelConfig& cfg)
{
    std::size_t n = 0;
    for (const LayerInfo& l : layer_table(cfg)) {
        n += l.parameters;
    }
    return n;
}

namespace detail {

template <class T>
ConvParams<T> he_conv(Rng& rng, Shape weight_shape, std::size_t out_channels, std::size_t fan_in, std::size_t stride)
{
    ConvParams<T> p{Tensor<T>(weight_shape), std::vector<T>(out_channels, T(0)), stride};
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (T& w : p.weights.values()) {
        w = static_cast<T>(dist(rng));
    }
    return p;
}

} // namespace detail

/// He-initialized weights from `cfg.init_seed`, zero biases, identity batch norms.
template <class T = float>
Model<T> build_model(const ModelConfig& cfg)
{
    validate(cfg);
    Model<T> m;
    m.config = cfg;
    Rng rng(cfg.init_seed);
    std::size_t channels = cfg.stacked_channels();
    for (std::size_t i = 0; i < kLaneDepth; ++i) {
        const std::size_t out = cfg.channel_schedule[i];
        m.encoder.push_back({detail::he_conv<T>(rng, {out, channels, 2, 2}, out, channels * 4, 2),
                             BatchNormParams<T>::identity(out)});
        channels = out;
    }
    for (std::size_t i = 0; i < kLaneDepth; ++i) {
        const std::size_t out =
            i + 1 < kLaneDepth ? cfg.channel_schedule[kLaneDepth - 2 - i] : cfg.decoder_out_channels;
        // Each output of a non-overlapping 2x2/2 transposed conv sees `channels` inputs.
        m.decoder.push_back({detail::he_conv<T>(rng, {channels, out, 2, 2}, out, channels, 2),
                             BatchNormParams<T>::identity(out)});
        channels = out;
    }
    const std::size_t merge_in = channels + kRgb;
    m.merge = detail::he_conv<T>(rng, {cfg.stacked_channels(), merge_in, 1, 1}, cfg.stacked_channels(), merge_in, 1);
    return m;
}

template <class U, class T>
Model<U> cast_model(const Model<T>& m)
{
    const auto vec = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
    const auto conv = [&vec](const ConvParams<T>& p) {
        return ConvParams<U>{p.weights.template cast<U>(), vec(p.bias), p.stride};
    };
    const auto lane = [&](const LaneLayer<T>& l) {
        BatchNormParams<U> n{vec(l.norm.gamma), vec(l.norm.beta), vec(l.norm.running_mean), vec(l.norm.running_var),
                             static_cast<U>(l.norm.epsilon), static_cast<U>(l.norm.momentum)};
        return LaneLayer<U>{conv(l.conv), std::move(n)};
    };
    Model<U> out;
    out.config = m.config;
    out.mode = m.mode;
    for (const auto& l : m.encoder) {
        out.encoder.push_back(lane(l));
    }
    for (const auto& l : m.decoder) {
        out.decoder.push_back(lane(l));
    }
    out.merge = conv(m.merge);
    return out;
}

template <class T>
struct LaneCache {
    Tensor<T> input;
    Tensor<T> pre_activation;
    BatchNormCache<T> norm;
};

/// Activations retained by a training-mode forward pass for backprop.
template <class T>
struct ForwardCache {
    std::vector<LaneCache<T>> encoder;
    std::vector<LaneCache<T>> decoder;
    Tensor<T> merge_input;
    Tensor<T> merge_pre_activation;
    std::size_t center_channel = 0;
};

namespace detail {

template <class T>
Tensor<T> lane_eval(const LaneLayer<T>& layer, const Tensor<T>& x, bool transposed)
{
    Tensor<T> z = transposed ? conv_transpose2d(x, layer.conv) : conv2d(x, layer.conv);
    return batchnorm_eval(relu(z), layer.norm);
}

template <class T>
Tensor<T> lane_train(LaneLayer<T>& layer, const Tensor<T>& x, bool transposed, LaneCache<T>* cache)
{
    Tensor<T> z = transposed ? conv_transpose2d(x, layer.conv) : conv2d(x, layer.conv);
    auto bn = batchnorm_train(relu(z), layer.norm);
    if (cache != nullptr) {
        cache->input = x;
        cache->pre_activation = std::move(z);
        cache->norm = std::move(bn.cache);
    }
    return std::move(bn.output);
}

inline void check_input_shape(const ModelConfig& cfg, const Shape& s, const char* op)
{
    if (s.c != cfg.stacked_channels() || s.h != cfg.spatial || s.w != cfg.spatial || s.n == 0) {
        throw ShapeError(std::string(op) + ": input " + to_string(s) + " does not match model input [B," +
                         std::to_string(cfg.stacked_channels()) + "," + std::to_string(cfg.spatial) + "," +
                         std::to_string(cfg.spatial) + "]");
    }
}

inline std::size_t center_channel(const ModelConfig& cfg)
{
    const auto [r, c] = center_index(cfg.grid_rows, cfg.grid_cols);
    return stacked_channel(r, c, cfg.grid_cols, 0);
}

} // namespace detail

/// The highway lane: the three center-view channels of a stacked tensor.
template <class T>
Tensor<T> extract_center(const ModelConfig& cfg, const Tensor<T>& stacked)
{
    const std::size_t first = detail::center_channel(cfg);
    const Shape& s = stacked.shape();
    Tensor<T> out({s.n, kRgb, s.h, s.w});
    for (std::size_t b = 0; b < s.n; ++b) {
        for (std::size_t ch = 0; ch < kRgb; ++ch) {
            const auto src = stacked.channel(b, first + ch);
            std::copy(src.begin(), src.end(), out.channel(b, ch).begin());
        }
    }
    return out;
}

/// Encoder lane with running batch-norm statistics.
template <class T>
Tensor<T> encode_latent(const Model<T>& m, const Tensor<T>& stacked)
{
    detail::check_input_shape(m.config, stacked.shape(), "encode");
    Tensor<T> x = stacked;
    for (const auto& layer : m.encoder) {
        x = detail::lane_eval(layer, x, false);
    }
    return x;
}

/// Decoder lane plus merge, with running batch-norm statistics.
template <class T>
Tensor<T> decode_latent(const Model<T>& m, const Tensor<T>& latent, const Tensor<T>& center)
{
    const ModelConfig& cfg = m.config;
    const Shape& ls = latent.shape();
    if (ls.c != cfg.latent_channels() || ls.h != cfg.latent_spatial() || ls.w != cfg.latent_spatial()) {
        throw ShapeError("decode: latent " + to_string(ls) + " does not match model latent [B," +
                         std::to_string(cfg.latent_channels()) + "," + std::to_string(cfg.latent_spatial()) + "," +
                         std::to_string(cfg.latent_spatial()) + "]");
    }
    const Shape expected_center{ls.n, kRgb, cfg.spatial, cfg.spatial};
    if (center.shape() != expected_center) {
        throw ShapeError("decode: center " + to_string(center.shape()) + " expected " + to_string(expected_center));
    }
    Tensor<T> x = latent;
    for (const auto& layer : m.decoder) {
        x = detail::lane_eval(layer, x, true);
    }
    return relu(conv2d(concat_channels(x, center), m.merge));
}

/// Full network on a stacked batch. Train mode uses batch statistics, updates
/// running statistics and fills `cache` when given; eval mode is
/// decode_latent(encode_latent(x), center(x)).
template <class T>
Tensor<T> forward(Model<T>& m, const Tensor<T>& stacked, ForwardCache<T>* cache = nullptr)
{
    detail::check_input_shape(m.config, stacked.shape(), "forward");
    const Tensor<T> center = extract_center(m.config, stacked);
    if (m.mode == Mode::eval) {
        if (cache != nullptr) {
            throw ConfigError("forward: activation cache requires train mode");
        }
        return decode_latent(m, encode_latent(m, stacked), center);
    }
    if (cache != nullptr) {
        cache->encoder.assign(m.encoder.size(), {});
        cache->decoder.assign(m.decoder.size(), {});
        cache->center_channel = detail::center_channel(m.config);
    }
    Tensor<T> x = stacked;
    for (std::size_t i = 0; i < m.encoder.size(); ++i) {
        x = detail::lane_train(m.encoder[i], x, false, cache ? &cache->encoder[i] : nullptr);
    }
    for (std::size_t i = 0; i < m.decoder.size(); ++i) {
        x = detail::lane_train(m.decoder[i], x, true, cache ? &cache->decoder[i] : nullptr);
    }
    Tensor<T> merged = concat_channels(x, center);
    Tensor<T> z = conv2d(merged, m.merge);
    Tensor<T> out = relu(z);
    if (cache != nullptr) {
        cache->merge_input = std::move(merged);
        cache->merge_pre_activation = std::move(z);
    }
    return out;
}

template <class T>
struct BackwardResult {
    ModelGrads<T> grads;
    Tensor<T> input;
};

namespace detail {

template <class T>
std::pair<LaneGrads<T>, Tensor<T>> lane_backward(const LaneLayer<T>& layer, const LaneCache<T>& cache,
                                                 const Tensor<T>& upstream, bool transposed)
{
    BatchNormGrads<T> bn = batchnorm_backward(cache.norm, upstream);
    Tensor<T> dz = relu_backward(cache.pre_activation, bn.input);
    ConvGrads<T> cg = transposed ? conv_transpose2d_backward(cache.input, layer.conv, dz)
                                 : conv2d_backward(cache.input, layer.conv, dz);
    return {LaneGrads<T>{std::move(cg.weights), std::move(cg.bias), std::move(bn.gamma), std::move(bn.beta)},
            std::move(cg.input)};
}

} // namespace detail

/// Gradients of a scalar loss with respect to every parameter and the input,
/// given dLoss/dOutput. The highway receives gradient only through the merge
/// layer's center-view input channels.
template <class T>
BackwardResult<T> backward(const Model<T>& m, const ForwardCache<T>& cache, const Tensor<T>& grad_output)
{
    if (cache.encoder.size() != m.encoder.size() || cache.decoder.size() != m.decoder.size()) {
        throw ConfigError("backward: activation cache does not belong to this model");
    }
    BackwardResult<T> r;
    Tensor<T> dz = relu_backward(cache.merge_pre_activation, grad_output);
    ConvGrads<T> merge = conv2d_backward(cache.merge_input, m.merge, dz);
    r.grads.merge_weights = std::move(merge.weights);
    r.grads.merge_bias = std::move(merge.bias);
    auto [grad_decoded, grad_center] = split_channels(merge.input, m.config.decoder_out_channels);

    r.grads.decoder.resize(m.decoder.size());
    Tensor<T> g = std::move(grad_decoded);
    for (std::size_t i = m.decoder.size(); i-- > 0;) {
        auto [lg, gin] = detail::lane_backward(m.decoder[i], cache.decoder[i], g, true);
        r.grads.decoder[i] = std::move(lg);
        g = std::move(gin);
    }
    r.grads.encoder.resize(m.encoder.size());
    for (std::size_t i = m.encoder.size(); i-- > 0;) {
        auto [lg, gin] = detail::lane_backward(m.encoder[i], cache.encoder[i], g, false);
        r.grads.encoder[i] = std::move(lg);
        g = std::move(gin);
    }
    for (std::size_t b = 0; b < g.shape().n; ++b) {
        for (std::size_t ch = 0; ch < kRgb; ++ch) {
            auto dst = g.channel(b, cache.center_channel + ch);
            const auto src = grad_center.channel(b, ch);
            for (std::size_t i = 0; i < dst.size(); ++i) {
                dst[i] += src[i];
            }
        }
    }
    r.input = std::move(g);
    return r;
}

/// The compressed form of one light field: latent code plus center view.
struct EncodedLightField {
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
    std::size_t spatial = 0;
    Tensor<float> latent;
    Image center;
    std::uint64_t fingerprint = 0;
};

inline void check_light_field(const ModelConfig& cfg, const LightField& lf, const char* op)
{
    validate(lf);
    if (lf.rows != cfg.grid_rows || lf.cols != cfg.grid_cols || lf.height() != cfg.spatial) {
        throw ShapeError(std::string(op) + ": light field " + std::to_string(lf.rows) + "x" + std::to_string(lf.cols) +
                         " of " + std::to_string(lf.height()) + "x" + std::to_string(lf.width()) +
                         " views does not match model " + std::to_string(cfg.grid_rows) + "x" +
                         std::to_string(cfg.grid_cols) + " of " + std::to_string(cfg.spatial) + "x" +
                         std::to_string(cfg.spatial));
    }
}

template <class T>
EncodedLightField encode(const Model<T>& m, const LightField& lf)
{
    check_light_field(m.config, lf, "encode");
    EncodedLightField enc;
    enc.grid_rows = lf.rows;
    enc.grid_cols = lf.cols;
    enc.spatial = lf.height();
    enc.latent = encode_latent(m, stack_views<T>(lf)).template cast<float>();
    enc.center = center_view(lf);
    enc.fingerprint = fingerprint(m.config);
    return enc;
}

inline Tensor<float> image_to_tensor(const Image& img)
{
    Tensor<float> t({1, kRgb, img.height, img.width});
    for (std::size_t ch = 0; ch < kRgb; ++ch) {
        auto plane = t.channel(0, ch);
        for (std::size_t i = 0; i < plane.size(); ++i) {
            plane[i] = img.pixels[i * kRgb + ch];
        }
    }
    return t;
}

template <class T>
LightField decode(const Model<T>& m, const EncodedLightField& enc)
{
    if (enc.fingerprint != fingerprint(m.config)) {
        throw IncompatibleEncodingError("encoded light field was produced by a different architecture "
                                        "(fingerprint mismatch)");
    }
    if (enc.center.height != m.config.spatial || enc.center.width != m.config.spatial) {
        throw ShapeError("decode: center view is " + std::to_string(enc.center.height) + "x" +
                         std::to_string(enc.center.width) + ", model expects " + std::to_string(m.config.spatial));
    }
    const Tensor<T> out = decode_latent(m, enc.latent.template cast<T>(), image_to_tensor(enc.center).cast<T>());
    return unstack_views(out, m.config.grid_rows, m.config.grid_cols);
}

/// Reconstruction of one light field through both lanes (see the tensor overload for modes).
template <class T>
LightField forward(Model<T>& m, const LightField& lf)
{
    check_light_field(m.config, lf, "forward");
    return unstack_views(forward(m, stack_views<T>(lf)), lf.rows, lf.cols);
}

} // namespace lfae
