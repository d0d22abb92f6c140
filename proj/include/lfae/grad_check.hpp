#pragma once

// Central finite-difference gradient checking in double precision.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfae {

/// A block of scalars the loss depends on, with the analytic gradient to verify.
/// `values` is perturbed in place and restored after each probe.
struct GradCheckTarget {
    std::string name;
    std::span<double> values;
    std::span<const double> analytic;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Lower bound on the relative-error denominator, so gradients that are
    /// zero up to finite-difference noise do not blow up the ratio.
    double abs_floor = 1e-6;
    /// Elements probed per target; 0 checks every element. Larger targets are
    /// subsampled with a seeded shuffle.
    std::size_t max_checks_per_target = 0;
    std::uint64_t seed = 0;
    /// Optional fingerprint of the linear piece the current point lies in (for
    /// example a hash of ReLU masks). A probe whose two ends land in different
    /// pieces straddles a kink, where central differences do not estimate the
    /// gradient; it is retried with the step divided by 10 up to `kink_retries`
    /// times and skipped if it still straddles one.
    std::function<std::uint64_t()> region;
    int kink_retries = 2;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_target;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    bool passed = true;

    std::string describe() const
    {
        std::ostringstream os;
        os << "max relative error " << max_relative_error << " at " << worst_target << '[' << worst_index
           << "] (analytic " << worst_analytic << ", numeric " << worst_numeric << "), " << checked
           << " elements checked";
        if (skipped != 0) {
            os << ", " << skipped << " skipped at kinks";
        }
        return os.str();
    }
};

inline double relative_error(double analytic, double numeric, double floor)
{
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

/// Compares every analytic gradient element (or a seeded subsample) with
/// (loss(x + h) - loss(x - h)) / 2h and reports the worst relative error.
inline GradCheckResult grad_check(const std::function<double()>& loss, std::span<const GradCheckTarget> targets,
                                  const GradCheckOptions& opt = {})
{
    GradCheckResult result;
    std::mt19937_64 rng(opt.seed);
    for (const GradCheckTarget& target : targets) {
        if (target.values.size() != target.analytic.size()) {
            throw std::invalid_argument("grad_check: target '" + target.name + "' has " +
                                        std::to_string(target.values.size()) + " values but " +
                                        std::to_string(target.analytic.size()) + " gradient entries");
        }
        std::vector<std::size_t> indices(target.values.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        if (opt.max_checks_per_target != 0 && indices.size() > opt.max_checks_per_target) {
            std::shuffle(indices.begin(), indices.end(), rng);
            indices.resize(opt.max_checks_per_target);
            std::sort(indices.begin(), indices.end());
        }
        for (std::size_t i : indices) {
            double& x = target.values[i];
            const double saved = x;
            double step = opt.step;
            std::optional<double> numeric;
            for (int attempt = 0; attempt <= (opt.region ? opt.kink_retries : 0); ++attempt, step /= 10.0) {
                x = saved + step;
                const double up = loss();
                const std::uint64_t up_region = opt.region ? opt.region() : 0;
                x = saved - step;
                const double down = loss();
                const std::uint64_t down_region = opt.region ? opt.region() : 0;
                x = saved;
                if (up_region == down_region) {
                    numeric = (up - down) / (2.0 * step);
                    break;
                }
            }
            if (!numeric) {
                ++result.skipped;
                continue;
            }
            const double err = relative_error(target.analytic[i], *numeric, opt.abs_floor);
            ++result.checked;
            if (result.worst_target.empty() || err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_target = target.name;
                result.worst_index = i;
                result.worst_analytic = target.analytic[i];
                result.worst_numeric = *numeric;
            }
        }
    }
    result.passed = result.max_relative_error < opt.tolerance;
    return result;
}

} // namespace lfae
