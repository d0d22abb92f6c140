#pragma once

// Reconstruction quality: MSE, PSNR and SSIM over light fields.
//
// SSIM follows the usual conventions: an 11x11 Gaussian window with
// sigma 1.5, C1 = (0.01 L)^2 and C2 = (0.03 L)^2 for dynamic range L = 1,
// averaged over every valid window position and over the three color
// channels separately. Light-field SSIM is the mean over all views.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "lfae/errors.hpp"
#include "lfae/light_field.hpp"
#include "lfae/model.hpp"

namespace lfae {

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

inline void check_same_geometry(const LightField& a, const LightField& b, const char* op)
{
    validate(a);
    validate(b);
    if (a.rows != b.rows || a.cols != b.cols || a.height() != b.height()) {
        throw ShapeError(std::string(op) + ": light fields differ in grid or view size");
    }
}

} // namespace detail

/// Mean squared difference over every view, pixel and channel.
inline double mse(const LightField& a, const LightField& b)
{
    detail::check_same_geometry(a, b, "mse");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t v = 0; v < a.views.size(); ++v) {
        const auto& pa = a.views[v].pixels;
        const auto& pb = b.views[v].pixels;
        for (std::size_t i = 0; i < pa.size(); ++i) {
            const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
            acc += d * d;
        }
        n += pa.size();
    }
    return acc / static_cast<double>(n);
}

/// 10 log10(peak^2 / mse); +infinity when mse is zero.
inline double psnr(double mse_value, double peak = 1.0)
{
    if (mse_value == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(peak * peak / mse_value);
}

inline std::string format_psnr(double db, int precision = 5)
{
    return std::isinf(db) ? std::string("inf") : fmt::format("{:.{}f}", db, precision);
}

namespace detail {

inline std::array<double, kSsimWindow> gaussian_window()
{
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    const double mid = static_cast<double>(kSsimWindow / 2);
    for (std::size_t i = 0; i < kSsimWindow; ++i) {
        const double d = static_cast<double>(i) - mid;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double& v : w) {
        v /= sum;
    }
    return w;
}

/// Separable Gaussian filter, valid positions only.
inline std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w)
{
    static const auto win = gaussian_window();
    const std::size_t oh = h - kSsimWindow + 1;
    const std::size_t ow = w - kSsimWindow + 1;
    std::vector<double> rows(h * ow);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kSsimWindow; ++k) {
                acc += win[k] * plane[y * w + x + k];
            }
            rows[y * ow + x] = acc;
        }
    }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kSsimWindow; ++k) {
                acc += win[k] * rows[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    return out;
}

} // namespace detail

/// Mean SSIM over window positions and color channels.
inline double ssim(const Image& a, const Image& b)
{
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("ssim: images differ in size");
    }
    if (a.height < kSsimWindow || a.width < kSsimWindow) {
        throw ShapeError("ssim: images must be at least " + std::to_string(kSsimWindow) + "x" +
                         std::to_string(kSsimWindow) + ", got " + std::to_string(a.height) + "x" +
                         std::to_string(a.width));
    }
    const std::size_t h = a.height;
    const std::size_t w = a.width;
    double total = 0.0;
    for (std::size_t ch = 0; ch < kRgb; ++ch) {
        std::vector<double> pa(h * w), pb(h * w), paa(h * w), pbb(h * w), pab(h * w);
        for (std::size_t i = 0; i < h * w; ++i) {
            pa[i] = a.pixels[i * kRgb + ch];
            pb[i] = b.pixels[i * kRgb + ch];
            paa[i] = pa[i] * pa[i];
            pbb[i] = pb[i] * pb[i];
            pab[i] = pa[i] * pb[i];
        }
        const auto mu_a = detail::filter_valid(pa, h, w);
        const auto mu_b = detail::filter_valid(pb, h, w);
        const auto e_aa = detail::filter_valid(paa, h, w);
        const auto e_bb = detail::filter_valid(pbb, h, w);
        const auto e_ab = detail::filter_valid(pab, h, w);
        double sum = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i];
            const double mb = mu_b[i];
            const double var_a = e_aa[i] - ma * ma;
            const double var_b = e_bb[i] - mb * mb;
            const double cov = e_ab[i] - ma * mb;
            const double num = (2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2);
            const double den = (ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2);
            sum += num / den;
        }
        total += sum / static_cast<double>(mu_a.size());
    }
    return total / static_cast<double>(kRgb);
}

/// Mean of per-view SSIM over the whole grid.
inline double ssim(const LightField& a, const LightField& b)
{
    detail::check_same_geometry(a, b, "ssim");
    double total = 0.0;
    for (std::size_t v = 0; v < a.views.size(); ++v) {
        total += ssim(a.views[v], b.views[v]);
    }
    return total / static_cast<double>(a.views.size());
}

struct QualityRow {
    std::string name;
    double mse = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct QualityReport {
    std::vector<QualityRow> samples;
    QualityRow mean{"Mean"};
};

inline QualityRow quality_row(std::string name, const LightField& reference, const LightField& reconstruction)
{
    const double e = mse(reference, reconstruction);
    return {std::move(name), e, psnr(e), ssim(reference, reconstruction)};
}

/// Appends the arithmetic mean of each column (PSNR is averaged in dB).
inline QualityReport make_report(std::vector<QualityRow> rows)
{
    QualityReport r;
    r.samples = std::move(rows);
    if (r.samples.empty()) {
        return r;
    }
    double m = 0.0, p = 0.0, s = 0.0;
    for (const QualityRow& row : r.samples) {
        m += row.mse;
        p += row.psnr_db;
        s += row.ssim;
    }
    const double n = static_cast<double>(r.samples.size());
    r.mean = {"Mean", m / n, p / n, s / n};
    return r;
}

/// Reconstructs each named field through the model in eval mode and scores it.
template <class T>
QualityReport evaluate(const Model<T>& model, const std::vector<std::pair<std::string, LightField>>& fields)
{
    std::vector<QualityRow> rows;
    for (const auto& [name, lf] : fields) {
        const LightField rec = decode(model, encode(model, lf));
        rows.push_back(quality_row(name, lf, rec));
    }
    return make_report(std::move(rows));
}

inline void write_report_csv(const QualityReport& r, std::ostream& os)
{
    os << "sample,mse,psnr_db,ssim\n";
    const auto line = [&os](const QualityRow& row) {
        os << fmt::format("{},{:.7f},{},{:.7f}\n", row.name, row.mse, format_psnr(row.psnr_db), row.ssim);
    };
    for (const QualityRow& row : r.samples) {
        line(row);
    }
    line(r.mean);
}

/// Aligned table with the columns Sample, MSE, PSNR, SSIM and a closing Mean row.
inline void write_report_table(const QualityReport& r, std::ostream& os)
{
    std::size_t width = 7;
    for (const QualityRow& row : r.samples) {
        width = std::max(width, row.name.size());
    }
    const auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
        os << fmt::format("{:<{}}  {:>10}  {:>10}  {:>10}\n", a, width, b, c, d);
    };
    line("Sample", "MSE", "PSNR", "SSIM");
    const auto row_line = [&](const QualityRow& row) {
        line(row.name, fmt::format("{:.7f}", row.mse), format_psnr(row.psnr_db), fmt::format("{:.7f}", row.ssim));
    };
    for (const QualityRow& row : r.samples) {
        row_line(row);
    }
    row_line(r.mean);
}

} // namespace lfae
