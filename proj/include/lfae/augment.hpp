#pragma once

// Photometric and geometric augmentation of light fields. Every random
// parameter is drawn once per sample and applied identically to all views.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lfae/errors.hpp"
#include "lfae/light_field.hpp"

namespace lfae {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct AugmentConfig {
    Range brightness_range{-0.2, 0.2};
    Range saturation_range{0.6, 1.6};
    std::size_t min_crop = 256;
    double flip_probability = 0.5;
    std::uint64_t seed = 0;
};

inline void validate(const AugmentConfig& cfg)
{
    if (cfg.brightness_range.lo > cfg.brightness_range.hi) {
        throw ConfigError("brightness range lower bound exceeds upper bound");
    }
    if (cfg.saturation_range.lo > cfg.saturation_range.hi || cfg.saturation_range.lo < 0.0) {
        throw ConfigError("saturation range must satisfy 0 <= lo <= hi");
    }
    if (cfg.min_crop == 0) {
        throw ConfigError("min_crop must be positive");
    }
    if (!(cfg.flip_probability >= 0.0 && cfg.flip_probability <= 1.0)) {
        throw ConfigError("flip probability must lie in [0,1]");
    }
}

/// The random choices behind one augmented sample.
struct AugmentParams {
    bool flip = false;
    double brightness = 0.0;
    double saturation = 1.0;
    std::size_t crop_size = 0;
    std::size_t crop_y = 0;
    std::size_t crop_x = 0;
};

/// Mirrors every view left-right and reverses the order of grid columns, so
/// the disparity direction stays consistent across the grid.
inline LightField flip_horizontal(const LightField& lf)
{
    LightField out = lf;
    for (std::size_t r = 0; r < lf.rows; ++r) {
        for (std::size_t c = 0; c < lf.cols; ++c) {
            const Image& src = lf.view(r, lf.cols - 1 - c);
            Image& dst = out.view(r, c);
            for (std::size_t y = 0; y < src.height; ++y) {
                for (std::size_t x = 0; x < src.width; ++x) {
                    for (std::size_t ch = 0; ch < kRgb; ++ch) {
                        dst.at(y, src.width - 1 - x, ch) = src.at(y, x, ch);
                    }
                }
            }
        }
    }
    return out;
}

/// x -> clamp(x + delta, 0, 1).
inline LightField adjust_brightness(const LightField& lf, double delta)
{
    LightField out = lf;
    for (Image& v : out.views) {
        for (float& p : v.pixels) {
            p = static_cast<float>(std::clamp(static_cast<double>(p) + delta, 0.0, 1.0));
        }
    }
    return out;
}

/// Blends each pixel with its Rec.601 luma: x*f + gray*(1-f), clamped to [0,1].
/// Written as a two-term blend so f = 1 and f = 0 are exact.
inline LightField adjust_saturation(const LightField& lf, double factor)
{
    LightField out = lf;
    const double keep = 1.0 - factor;
    for (Image& v : out.views) {
        for (std::size_t i = 0; i + 2 < v.pixels.size(); i += kRgb) {
            const double gray = 0.299 * v.pixels[i] + 0.587 * v.pixels[i + 1] + 0.114 * v.pixels[i + 2];
            for (std::size_t ch = 0; ch < kRgb; ++ch) {
                const double blended = static_cast<double>(v.pixels[i + ch]) * factor + gray * keep;
                v.pixels[i + ch] = static_cast<float>(std::clamp(blended, 0.0, 1.0));
            }
        }
    }
    return out;
}

/// Bilinear resampling with corner-aligned sample positions:
/// output pixel i samples the source at i * (in - 1) / (out - 1).
inline Image bilinear_resize(const Image& img, std::size_t out_h, std::size_t out_w)
{
    if (out_h == 0 || out_w == 0 || img.height == 0 || img.width == 0) {
        throw ShapeError("bilinear_resize: dimensions must be positive");
    }
    if (out_h == img.height && out_w == img.width) {
        return img;
    }
    struct Tap {
        std::size_t lo;
        std::size_t hi;
        double frac;
    };
    const auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> t(out);
        for (std::size_t i = 0; i < out; ++i) {
            const double pos =
                out == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
            const auto lo = std::min(static_cast<std::size_t>(pos), in - 1);
            t[i] = {lo, std::min(lo + 1, in - 1), pos - static_cast<double>(lo)};
        }
        return t;
    };
    const std::vector<Tap> ty = taps(img.height, out_h);
    const std::vector<Tap> tx = taps(img.width, out_w);
    // a + f*(b - a) keeps constant regions exactly constant.
    const auto lerp = [](double a, double b, double f) { return a + f * (b - a); };

    Image out(out_h, out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        for (std::size_t x = 0; x < out_w; ++x) {
            for (std::size_t ch = 0; ch < kRgb; ++ch) {
                const double top = lerp(img.at(ty[y].lo, tx[x].lo, ch), img.at(ty[y].lo, tx[x].hi, ch), tx[x].frac);
                const double bottom =
                    lerp(img.at(ty[y].hi, tx[x].lo, ch), img.at(ty[y].hi, tx[x].hi, ch), tx[x].frac);
                out.at(y, x, ch) = static_cast<float>(lerp(top, bottom, ty[y].frac));
            }
        }
    }
    return out;
}

inline Image crop(const Image& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w)
{
    if (y0 + h > img.height || x0 + w > img.width) {
        throw ShapeError("crop window exceeds image bounds");
    }
    Image out(h, w);
    for (std::size_t y = 0; y < h; ++y) {
        const float* src = img.pixels.data() + ((y0 + y) * img.width + x0) * kRgb;
        std::copy_n(src, w * kRgb, out.pixels.data() + y * w * kRgb);
    }
    return out;
}

/// Crops the same square window from every view and resizes it back to H x H.
inline LightField crop_resize(const LightField& lf, std::size_t size, std::size_t y0, std::size_t x0)
{
    const std::size_t h = lf.height();
    LightField out = lf;
    for (std::size_t i = 0; i < lf.views.size(); ++i) {
        out.views[i] = bilinear_resize(crop(lf.views[i], y0, x0, size, size), h, h);
    }
    return out;
}

inline double uniform(Rng& rng, Range r)
{
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return r.lo + (r.hi - r.lo) * u;
}

/// Window size uniform in [min_crop, H], position uniform over valid placements.
inline LightField random_crop_resize(const LightField& lf, Rng& rng, std::size_t min_crop)
{
    const std::size_t h = lf.height();
    if (min_crop == 0 || min_crop > h) {
        throw ConfigError("min_crop " + std::to_string(min_crop) + " must lie in [1, " + std::to_string(h) + "]");
    }
    const std::size_t size = std::uniform_int_distribution<std::size_t>(min_crop, h)(rng);
    const std::size_t y0 = std::uniform_int_distribution<std::size_t>(0, h - size)(rng);
    const std::size_t x0 = std::uniform_int_distribution<std::size_t>(0, h - size)(rng);
    return crop_resize(lf, size, y0, x0);
}

/// Draws, in order: flip, brightness delta, saturation factor, crop size, crop row, crop column.
inline AugmentParams draw_augment_params(Rng& rng, const AugmentConfig& cfg, std::size_t height)
{
    validate(cfg);
    if (cfg.min_crop > height) {
        throw ConfigError("min_crop " + std::to_string(cfg.min_crop) + " exceeds view size " + std::to_string(height));
    }
    AugmentParams p;
    p.flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.flip_probability;
    p.brightness = uniform(rng, cfg.brightness_range);
    p.saturation = uniform(rng, cfg.saturation_range);
    p.crop_size = std::uniform_int_distribution<std::size_t>(cfg.min_crop, height)(rng);
    p.crop_y = std::uniform_int_distribution<std::size_t>(0, height - p.crop_size)(rng);
    p.crop_x = std::uniform_int_distribution<std::size_t>(0, height - p.crop_size)(rng);
    return p;
}

/// flip -> brightness -> saturation -> crop-resize.
inline LightField apply_augment(const LightField& lf, const AugmentParams& p)
{
    LightField out = p.flip ? flip_horizontal(lf) : lf;
    out = adjust_brightness(out, p.brightness);
    out = adjust_saturation(out, p.saturation);
    return crop_resize(out, p.crop_size, p.crop_y, p.crop_x);
}

struct AugmentedSample {
    LightField field;
    AugmentParams params;
};

inline AugmentedSample sample_augmented(const LightField& lf, Rng& rng, const AugmentConfig& cfg)
{
    validate(lf);
    AugmentParams p = draw_augment_params(rng, cfg, lf.height());
    return {apply_augment(lf, p), p};
}

/// Endless stream of augmented samples. The batch for a given iteration is a
/// pure function of (seed, iteration), so a resumed run sees the same data.
class StreamingSampler {
public:
    using Source = std::function<LightField(std::size_t)>;

    StreamingSampler(std::size_t field_count, Source source, AugmentConfig cfg)
        : count_(field_count), source_(std::move(source)), cfg_(cfg)
    {
        validate(cfg_);
        if (count_ == 0) {
            throw ConfigError("sampler needs at least one light field");
        }
    }

    /// Serves samples from an in-memory set of light fields.
    StreamingSampler(std::vector<LightField> fields, AugmentConfig cfg)
        : StreamingSampler(std::make_shared<const std::vector<LightField>>(std::move(fields)), cfg)
    {}

    std::size_t field_count() const noexcept { return count_; }
    const AugmentConfig& config() const noexcept { return cfg_; }

    std::vector<LightField> batch(std::uint64_t iteration, std::size_t batch_size) const
    {
        std::vector<LightField> out;
        out.reserve(batch_size);
        for (std::size_t slot = 0; slot < batch_size; ++slot) {
            std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                              static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32),
                              static_cast<std::uint32_t>(slot)};
            Rng rng(seq);
            const std::size_t index = std::uniform_int_distribution<std::size_t>(0, count_ - 1)(rng);
            out.push_back(sample_augmented(source_(index), rng, cfg_).field);
        }
        return out;
    }

private:
    StreamingSampler(std::shared_ptr<const std::vector<LightField>> fields, AugmentConfig cfg)
        : StreamingSampler(fields->size(), [fields](std::size_t i) { return (*fields)[i]; }, cfg)
    {}

    std::size_t count_;
    Source source_;
    AugmentConfig cfg_;
};

} // namespace lfae
