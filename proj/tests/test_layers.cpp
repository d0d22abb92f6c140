#include <gtest/gtest.h>

#include "gradients.hpp"

using namespace lfae;
using lfae::fx::random_conv;
using lfae::fx::random_tensor;

namespace {

double max_rel_diff(const Tensor<double>& a, const Tensor<double>& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
    }
    return worst;
}

} // namespace

TEST(Tensor, RejectsDataOfWrongLength)
{
    EXPECT_THROW(Tensor<float>({1, 2, 2, 2}, std::vector<float>(7)), ShapeError);
    EXPECT_NO_THROW(Tensor<float>({1, 2, 2, 2}, std::vector<float>(8)));
}

TEST(Tensor, IndexingIsRowMajorNchw)
{
    Tensor<int> t({2, 3, 4, 5});
    t(1, 2, 3, 4) = 7;
    EXPECT_EQ(t[t.size() - 1], 7);
    EXPECT_EQ(t.offset(0, 1, 0, 0), 20u);
}

TEST(Conv2d, OnesKernelSumsWindow)
{
    ConvParams<double> p{Tensor<double>({1, 1, 2, 2}, 1.0), {0.0}, 2};
    const Tensor<double> y = conv2d(Tensor<double>({1, 1, 2, 2}, 1.0), p);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(y[0], 4.0);
}

TEST(Conv2d, MatchesDirectLoopOracle)
{
    Rng rng(11);
    const Tensor<double> x = random_tensor<double>({1, 2, 4, 4}, rng);
    const ConvParams<double> p = random_conv<double>(2, 3, 2, 2, false, rng);
    EXPECT_LT(max_rel_diff(conv2d(x, p), fx::direct_conv(x, p)), 1e-12);
}

TEST(Conv2d, MatchesOracleOnRandomSmallGeometries)
{
    Rng rng(12);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
        const std::size_t stride = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
        const std::size_t h = std::max(k, dim(rng));
        const std::size_t w = std::max(k, dim(rng));
        const Tensor<double> x = random_tensor<double>({dim(rng) % 3 + 1, dim(rng), h, w}, rng);
        const ConvParams<double> p = random_conv<double>(x.shape().c, dim(rng), k, stride, false, rng);
        ASSERT_LT(max_rel_diff(conv2d(x, p), fx::direct_conv(x, p)), 1e-12) << "trial " << trial;
    }
}

TEST(ConvTranspose2d, MatchesOracleOnRandomSmallGeometries)
{
    Rng rng(13);
    std::uniform_int_distribution<std::size_t> dim(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
        const std::size_t stride = std::uniform_int_distribution<std::size_t>(1, 3)(rng);
        const Tensor<double> x = random_tensor<double>({dim(rng) % 3 + 1, dim(rng), dim(rng), dim(rng)}, rng);
        const ConvParams<double> p = random_conv<double>(x.shape().c, dim(rng), k, stride, true, rng);
        ASSERT_LT(max_rel_diff(conv_transpose2d(x, p), fx::direct_conv_transpose(x, p)), 1e-12)
            << "trial " << trial;
    }
}

TEST(ConvTranspose2d, SinglePixelSpreadsOverKernel)
{
    ConvParams<double> p{Tensor<double>({1, 1, 2, 2}, 1.0), {0.0}, 2};
    const Tensor<double> y = conv_transpose2d(Tensor<double>({1, 1, 1, 1}, 0.75), p);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    for (double v : y.values()) {
        EXPECT_EQ(v, 0.75);
    }
}

TEST(ConvTranspose2d, FiveLayersRestore512From16)
{
    Shape s{1, 1, 16, 16};
    for (int i = 0; i < 5; ++i) {
        s = {1, 1, s.h * 2, s.w * 2};
    }
    EXPECT_EQ(s.h, 512u);
    ConvParams<float> p{Tensor<float>({1, 1, 2, 2}, 1.0f), {0.0f}, 2};
    Tensor<float> x({1, 1, 16, 16}, 1.0f);
    for (int i = 0; i < 5; ++i) {
        x = conv_transpose2d(x, p);
    }
    EXPECT_EQ(x.shape(), (Shape{1, 1, 512, 512}));
}

TEST(Conv2d, DownThenUpPreservesSpatialDims)
{
    Rng rng(14);
    const Tensor<double> x = random_tensor<double>({1, 2, 6, 10}, rng);
    const ConvParams<double> down = random_conv<double>(2, 3, 2, 2, false, rng);
    const ConvParams<double> up = random_conv<double>(3, 2, 2, 2, true, rng);
    EXPECT_EQ(conv_transpose2d(conv2d(x, down), up).shape(), x.shape());
}

TEST(Conv2d, AdjointOfTransposeWithZeroBias)
{
    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        ConvParams<double> p = random_conv<double>(3, 5, 2, 2, false, rng);
        std::fill(p.bias.begin(), p.bias.end(), 0.0);
        const Tensor<double> x = random_tensor<double>({2, 3, 8, 6}, rng);
        const Tensor<double> y = random_tensor<double>({2, 5, 4, 3}, rng);
        // The same (out, in) weight array read as (in, out) for the transpose maps 5 -> 3 channels.
        ConvParams<double> adj{p.weights, std::vector<double>(3, 0.0), 2};
        const double lhs = dot(conv2d(x, p), y);
        const double rhs = dot(x, conv_transpose2d(y, adj));
        ASSERT_LT(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300), 1e-10);
    }
}

TEST(Conv2dBackward, ZeroUpstreamGivesZeroGradients)
{
    Rng rng(16);
    const Tensor<double> x = random_tensor<double>({1, 2, 4, 4}, rng);
    for (bool transposed : {false, true}) {
        const ConvParams<double> p = random_conv<double>(2, 3, 2, 2, transposed, rng);
        const Shape out = transposed ? Shape{1, 3, 8, 8} : Shape{1, 3, 2, 2};
        const ConvGrads<double> g = transposed ? conv_transpose2d_backward(x, p, Tensor<double>(out))
                                               : conv2d_backward(x, p, Tensor<double>(out));
        for (double v : g.input.values()) {
            EXPECT_EQ(v, 0.0);
        }
        for (double v : g.weights.values()) {
            EXPECT_EQ(v, 0.0);
        }
        for (double v : g.bias) {
            EXPECT_EQ(v, 0.0);
        }
    }
}

TEST(Conv2dBackward, BiasGradientIsUpstreamChannelSum)
{
    Rng rng(17);
    const Tensor<double> x = random_tensor<double>({2, 2, 6, 6}, rng);
    const ConvParams<double> p = random_conv<double>(2, 3, 2, 2, false, rng);
    const Tensor<double> up = random_tensor<double>({2, 3, 3, 3}, rng);
    const ConvGrads<double> g = conv2d_backward(x, p, up);
    for (std::size_t o = 0; o < 3; ++o) {
        double sum = 0.0;
        for (std::size_t b = 0; b < 2; ++b) {
            for (double v : up.channel(b, o)) {
                sum += v;
            }
        }
        EXPECT_NEAR(g.bias[o], sum, 1e-12);
    }
}

TEST(ConvTranspose2dBackward, InputGradientIsForwardConvOfUpstream)
{
    Rng rng(18);
    const Tensor<double> x = random_tensor<double>({1, 4, 3, 3}, rng);
    const ConvParams<double> p = random_conv<double>(4, 2, 2, 2, true, rng);
    const Tensor<double> up = random_tensor<double>({1, 2, 6, 6}, rng);
    const ConvParams<double> as_conv{p.weights, std::vector<double>(4, 0.0), 2};
    EXPECT_LT(max_rel_diff(conv_transpose2d_backward(x, p, up).input, conv2d(up, as_conv)), 1e-12);
}

TEST(GradCheck, Conv2dAgreesWithFiniteDifferences)
{
    Rng rng(19);
    const GradCheckResult r = fx::check_conv(false, rng);
    EXPECT_LT(r.max_relative_error, 1e-4) << r.describe();
}

TEST(GradCheck, ConvTranspose2dAgreesWithFiniteDifferences)
{
    Rng rng(20);
    const GradCheckResult r = fx::check_conv(true, rng);
    EXPECT_LT(r.max_relative_error, 1e-4) << r.describe();
}

TEST(GradCheck, ReluAgreesAwayFromKink)
{
    Rng rng(21);
    const GradCheckResult r = fx::check_relu(rng);
    EXPECT_LT(r.max_relative_error, 1e-6) << r.describe();
}

TEST(GradCheck, BatchNormAgreesWithFiniteDifferences)
{
    Rng rng(22);
    const GradCheckResult r = fx::check_batchnorm(rng);
    EXPECT_LT(r.max_relative_error, 1e-4) << r.describe();
}

TEST(GradCheck, LinearOneByOneConvIsNearlyExact)
{
    Rng rng(23);
    Tensor<double> x = random_tensor<double>({1, 3, 3, 3}, rng);
    ConvParams<double> p = random_conv<double>(3, 2, 1, 1, false, rng);
    const Tensor<double> proj = random_tensor<double>({1, 2, 3, 3}, rng);
    const ConvGrads<double> g = conv2d_backward(x, p, proj);
    const std::vector<GradCheckTarget> targets{{"input", x.values(), g.input.values()}};
    // Central differences of a linear map carry no truncation error, so a wide step only cuts rounding.
    GradCheckOptions opts;
    opts.step = 1e-2;
    const GradCheckResult r = grad_check([&] { return dot(conv2d(x, p), proj); }, targets, opts);
    EXPECT_LT(r.max_relative_error, 1e-10) << r.describe();
}

TEST(GradCheck, ReportsCorruptedGradientWithIndex)
{
    Rng rng(24);
    Tensor<double> x = random_tensor<double>({1, 2, 4, 4}, rng);
    ConvParams<double> p = random_conv<double>(2, 2, 2, 2, false, rng);
    const Tensor<double> proj = random_tensor<double>({1, 2, 2, 2}, rng);
    ConvGrads<double> g = conv2d_backward(x, p, proj);
    g.weights[5] += 1.0;
    const std::vector<GradCheckTarget> targets{{"input", x.values(), g.input.values()},
                                               {"weights", p.weights.values(), g.weights.values()}};
    const GradCheckResult r = grad_check([&] { return dot(conv2d(x, p), proj); }, targets);
    EXPECT_FALSE(r.passed);
    EXPECT_GT(r.max_relative_error, 1e-4);
    EXPECT_EQ(r.worst_target, "weights");
    EXPECT_EQ(r.worst_index, 5u);
    EXPECT_NE(r.describe().find("weights[5]"), std::string::npos);
}

TEST(GradCheck, RestoresPerturbedValues)
{
    Rng rng(25);
    Tensor<double> x = random_tensor<double>({1, 1, 3, 3}, rng);
    const Tensor<double> before = x;
    const Tensor<double> grad = x;
    const std::vector<GradCheckTarget> targets{{"x", x.values(), grad.values()}};
    grad_check([&] { return 0.5 * dot(x, x); }, targets);
    EXPECT_TRUE(bit_equal(x, before));
}

TEST(GradCheck, RetriesProbesThatStraddleAKink)
{
    // f(x) = relu(x) at x = 3e-6 with step 1e-5: the first probe crosses 0, the retry at 1e-6 does not.
    std::vector<double> x{3e-6};
    const std::vector<double> grad{1.0};
    const std::vector<GradCheckTarget> targets{{"x", x, grad}};
    GradCheckOptions opts;
    const GradCheckResult naive = grad_check([&] { return std::max(x[0], 0.0); }, targets, opts);
    EXPECT_GT(naive.max_relative_error, 0.1);
    opts.region = [&] { return std::uint64_t{x[0] > 0.0}; };
    const GradCheckResult aware = grad_check([&] { return std::max(x[0], 0.0); }, targets, opts);
    EXPECT_EQ(aware.skipped, 0u);
    EXPECT_LT(aware.max_relative_error, 1e-9) << aware.describe();
}

TEST(GradCheck, SkipsProbesThatAlwaysStraddleAKink)
{
    std::vector<double> x{0.0, 2.0};
    const std::vector<double> grad{0.5, 1.0};
    const std::vector<GradCheckTarget> targets{{"x", x, grad}};
    GradCheckOptions opts;
    opts.region = [&] { return std::uint64_t{x[0] > 0.0}; };
    const GradCheckResult r = grad_check([&] { return std::max(x[0], 0.0) + x[1]; }, targets, opts);
    EXPECT_EQ(r.skipped, 1u);
    EXPECT_EQ(r.checked, 1u);
    EXPECT_TRUE(r.passed);
    EXPECT_NE(r.describe().find("1 skipped at kinks"), std::string::npos);
}

TEST(Relu, ClampsNegativesAndPassesRest)
{
    const Tensor<double> x({1, 1, 1, 3}, std::vector<double>{-1.0, 0.0, 2.0});
    const Tensor<double> y = relu(x);
    EXPECT_EQ(y.storage(), (std::vector<double>{0.0, 0.0, 2.0}));
    const Tensor<double> g = relu_backward(x, Tensor<double>(x.shape(), 1.0));
    EXPECT_EQ(g.storage(), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Relu, NonNegativeInputIsUnchanged)
{
    Rng rng(26);
    const Tensor<float> x = random_tensor<float>({2, 3, 4, 4}, rng, 0.0, 1.0);
    EXPECT_TRUE(bit_equal(relu(x), x));
}

TEST(BatchNorm, TrainOutputIsStandardized)
{
    Rng rng(27);
    const Tensor<double> x = random_tensor<double>({4, 3, 5, 5}, rng, -3.0, 7.0);
    BatchNormParams<double> p = BatchNormParams<double>::identity(3);
    const Tensor<double> y = batchnorm_train(x, p).output;
    for (std::size_t c = 0; c < 3; ++c) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t b = 0; b < 4; ++b) {
            for (double v : y.channel(b, c)) {
                sum += v;
                sq += v * v;
            }
        }
        const double n = 100.0;
        EXPECT_LT(std::abs(sum / n), 1e-6);
        EXPECT_LT(std::abs(sq / n - (sum / n) * (sum / n) - 1.0), 1e-4);
    }
}

TEST(BatchNorm, ConstantChannelGivesZeros)
{
    BatchNormParams<float> p = BatchNormParams<float>::identity(2);
    const Tensor<float> y = batchnorm_train(Tensor<float>({2, 2, 3, 3}, 0.37f), p).output;
    for (float v : y.values()) {
        EXPECT_EQ(v, 0.0f);
    }
}

TEST(BatchNorm, RunningStatisticsFollowMomentum)
{
    Tensor<double> x({1, 1, 1, 4}, std::vector<double>{1.0, 2.0, 3.0, 6.0});
    BatchNormParams<double> p = BatchNormParams<double>::identity(1);
    batchnorm_train(x, p);
    EXPECT_NEAR(p.running_mean[0], 0.1 * 3.0, 1e-12);
    EXPECT_NEAR(p.running_var[0], 0.9 + 0.1 * 3.5, 1e-12);
}

TEST(BatchNorm, EvalUsesRunningStatistics)
{
    BatchNormParams<double> p = BatchNormParams<double>::identity(1);
    p.running_mean = {2.0};
    p.running_var = {4.0 - 1e-5};
    p.gamma = {3.0};
    p.beta = {1.0};
    const Tensor<double> y = batchnorm_eval(Tensor<double>({1, 1, 1, 1}, 6.0), p);
    EXPECT_NEAR(y[0], 3.0 * 2.0 + 1.0, 1e-12);
}

TEST(BatchNorm, RejectsChannelMismatch)
{
    BatchNormParams<float> p = BatchNormParams<float>::identity(3);
    EXPECT_THROW(batchnorm_train(Tensor<float>({1, 2, 2, 2}), p), ShapeError);
}

TEST(Concat, SplitInvertsConcatBitExactly)
{
    Rng rng(28);
    const Tensor<float> a = random_tensor<float>({2, 240, 4, 4}, rng);
    const Tensor<float> b = random_tensor<float>({2, 3, 4, 4}, rng);
    const Tensor<float> ab = concat_channels(a, b);
    EXPECT_EQ(ab.shape().c, 243u);
    const auto [a2, b2] = split_channels(ab, 240);
    EXPECT_TRUE(bit_equal(a, a2));
    EXPECT_TRUE(bit_equal(b, b2));
    for (std::size_t c = 0; c < 240; ++c) {
        ASSERT_TRUE(std::equal(a.channel(1, c).begin(), a.channel(1, c).end(), ab.channel(1, c).begin()));
    }
}

TEST(Concat, RejectsSpatialMismatch)
{
    EXPECT_THROW(concat_channels(Tensor<float>({1, 1, 2, 2}), Tensor<float>({1, 1, 2, 3})), ShapeError);
}

TEST(Layers, ForwardIsDeterministic)
{
    Rng rng(29);
    const Tensor<float> x = random_tensor<float>({2, 8, 16, 16}, rng);
    const ConvParams<float> p = random_conv<float>(8, 16, 2, 2, false, rng);
    EXPECT_TRUE(bit_equal(conv2d(x, p), conv2d(x, p)));
}
