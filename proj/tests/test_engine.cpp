#include <gtest/gtest.h>

#include <cmath>

#include "cwr/engine.hpp"
#include "cwr/errors.hpp"
#include "test_support.hpp"

using namespace cwr;
using cwr::test::make_model;
using cwr::test::random_labels;
using cwr::test::random_tensor;

namespace {

// Direct-definition oracles, deliberately written without the engine's loop structure.
std::vector<double> conv_oracle(const std::vector<double>& x, std::size_t ci, std::size_t h, std::size_t w,
                                const Tensor<double>& weight, const Tensor<double>& bias, std::size_t k,
                                std::size_t stride, std::size_t pad, std::size_t& ho, std::size_t& wo) {
    const std::size_t co = weight.dim(0);
    ho = (h + 2 * pad - k) / stride + 1;
    wo = (w + 2 * pad - k) / stride + 1;
    std::vector<double> y(co * ho * wo);
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double acc = bias[o];
                for (std::size_t c = 0; c < ci; ++c)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                            acc += weight[((o * ci + c) * k + ky) * k + kx] * x[(c * h + iy) * w + ix];
                        }
                y[(o * ho + oy) * wo + ox] = acc;
            }
    return y;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)}); }

}  // namespace

TEST(EngineShapes, CnnSmallOnSixteenPixelImages) {
    const std::vector<LayerSpec> layers{LayerSpec::conv2d(8, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                                        LayerSpec::conv2d(16, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                                        LayerSpec::flatten(), LayerSpec::dense(10)};
    const auto shapes = infer_shapes(std::span<const LayerSpec>(layers), {3, 16, 16}, 10);
    ASSERT_EQ(shapes.size(), layers.size());
    EXPECT_EQ(shapes[0], (Shape{8, 16, 16}));
    EXPECT_EQ(shapes[2], (Shape{8, 8, 8}));
    EXPECT_EQ(shapes[5], (Shape{16, 4, 4}));
    EXPECT_EQ(shapes[6], (Shape{256}));
    EXPECT_EQ(shapes.back(), (Shape{10}));
}

TEST(EngineShapes, FinalWidthMustEqualClassCount) {
    const std::vector<LayerSpec> layers{LayerSpec::flatten(), LayerSpec::dense(4)};
    try {
        infer_shapes(std::span<const LayerSpec>(layers), {1, 2, 2}, 3);
        FAIL() << "expected ShapeMismatch";
    } catch (const ShapeMismatch& e) {
        EXPECT_EQ(e.layer_index(), 1u);
    }
}

TEST(EngineShapes, DenseOnImageInputNamesTheLayer) {
    const std::vector<LayerSpec> layers{LayerSpec::relu(), LayerSpec::dense(3)};
    try {
        infer_shapes(std::span<const LayerSpec>(layers), {1, 4, 4}, 3);
        FAIL() << "expected ShapeMismatch";
    } catch (const ShapeMismatch& e) {
        EXPECT_EQ(e.layer_index(), 1u);
    }
}

TEST(EngineShapes, KernelLargerThanInput) {
    const std::vector<LayerSpec> layers{LayerSpec::conv2d(2, 5), LayerSpec::flatten(), LayerSpec::dense(2)};
    EXPECT_THROW(infer_shapes(std::span<const LayerSpec>(layers), {1, 3, 3}, 2), ShapeMismatch);
}

TEST(EngineShapes, WrongParameterShapeRejected) {
    Rng rng(1);
    auto m = make_model<float>({4}, {LayerSpec::dense(3)}, 3, rng);
    m.params[0].weight = Tensor<float>({3, 5});
    EXPECT_THROW(forward(m, Tensor<float>({1, 4})), ShapeMismatch);
}

TEST(EngineShapes, BatchShapeMismatch) {
    Rng rng(1);
    auto m = make_model<float>({4}, {LayerSpec::dense(3)}, 3, rng);
    EXPECT_THROW(forward(m, Tensor<float>({2, 5})), ShapeMismatch);
}

TEST(EngineForward, NonFiniteInputRejected) {
    Rng rng(1);
    auto m = make_model<float>({4}, {LayerSpec::dense(3)}, 3, rng);
    Tensor<float> x({1, 4});
    x[2] = std::nanf("");
    EXPECT_THROW(forward(m, x), NonFiniteActivation);
}

TEST(EngineForward, ConvMatchesDirectDefinition) {
    Rng rng(7);
    for (auto [k, stride, pad] : {std::tuple{3, 1, 1}, std::tuple{3, 2, 1}, std::tuple{2, 1, 0}, std::tuple{3, 2, 2}}) {
        auto m = make_model<double>({2, 7, 6},
                                    {LayerSpec::conv2d(3, k, stride, pad), LayerSpec::flatten(), LayerSpec::dense(2)},
                                    2, rng);
        // Read the conv output through a dense layer that is the identity on one coordinate at a time.
        const Tensor<double> x = random_tensor<double>({1, 2, 7, 6}, rng);
        std::size_t ho = 0, wo = 0;
        const auto expected = conv_oracle(x.storage(), 2, 7, 6, m.params[0].weight, m.params[0].bias, k, stride,
                                          pad, ho, wo);
        const std::size_t n = expected.size();
        for (std::size_t probe : {std::size_t{0}, n / 3, n - 1}) {
            auto probe_model = m;
            probe_model.params[2].weight = Tensor<double>({2, n});
            probe_model.params[2].weight[probe] = 1.0;
            probe_model.params[2].bias = Tensor<double>({2});
            const auto logits = forward(probe_model, x);
            EXPECT_NEAR(logits[0], expected[probe], 1e-12) << "k=" << k << " stride=" << stride << " pad=" << pad;
        }
    }
}

TEST(EngineForward, DenseReluPoolingByHand) {
    Model64 m;
    m.num_classes = 2;
    m.input_shape = {1, 2, 4};
    m.layers = {LayerSpec::maxpool2d(2, 2), LayerSpec::flatten(), LayerSpec::relu(), LayerSpec::dense(2)};
    m.params.resize(4);
    m.params[3] = {Tensor<double>({2, 2}, {1.0, 2.0, -1.0, 0.5}), Tensor<double>({2}, {0.25, -0.25})};
    const Tensor<double> x({1, 1, 2, 4}, {1, -3, -2, -5, 0.5, 2, -4, -1});
    // pooled = (2, -1), relu = (2, 0)
    const auto y = forward(m, x);
    EXPECT_DOUBLE_EQ(y[0], 2.0 + 0.25);
    EXPECT_DOUBLE_EQ(y[1], -2.0 - 0.25);

    m.layers[0] = LayerSpec::avgpool2d(2, 2);
    // averaged = (0.125, -3), relu = (0.125, 0)
    const auto z = forward(m, x);
    EXPECT_DOUBLE_EQ(z[0], 0.125 + 0.25);
    EXPECT_DOUBLE_EQ(z[1], -0.125 - 0.25);
}

TEST(EngineLoss, MatchesLogSumExpOracle) {
    const Tensor<double> logits({2, 3}, {1.0, 2.0, 3.0, -1.0, 0.0, 4.0});
    const std::vector<int> y{0, 2};
    const auto loss = loss_cross_entropy(logits, y);
    const double l0 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 1.0;
    const double l1 = std::log(std::exp(-1.0) + std::exp(0.0) + std::exp(4.0)) - 4.0;
    EXPECT_NEAR(loss.per_sample[0], l0, 1e-14);
    EXPECT_NEAR(loss.per_sample[1], l1, 1e-14);
    EXPECT_NEAR(loss.mean, (l0 + l1) / 2, 1e-14);
}

TEST(EngineLoss, StableForLargeLogits) {
    const Tensor<float> logits({1, 2}, {1000.0f, 0.0f});
    const std::vector<int> y{1};
    const auto loss = loss_cross_entropy(logits, y);
    EXPECT_TRUE(std::isfinite(loss.mean));
    EXPECT_NEAR(loss.mean, 1000.0f, 1e-3f);
}

TEST(EngineLoss, LabelOutOfRange) {
    const Tensor<float> logits({1, 2});
    const std::vector<int> bad{2};
    EXPECT_THROW(loss_cross_entropy(logits, bad), LabelOutOfRange);
    const std::vector<int> negative{-1};
    EXPECT_THROW(loss_cross_entropy(logits, negative), LabelOutOfRange);
}

TEST(EngineArgmax, TiesGoToLowestIndex) {
    const Tensor<float> logits({2, 3}, {1, 5, 5, 2, 2, 2});
    EXPECT_EQ(argmax_rows(logits), (std::vector<int>{1, 0}));
}

TEST(EngineGradient, DenseSoftmaxClosedForm) {
    Rng rng(3);
    auto m = make_model<double>({5}, {LayerSpec::dense(4)}, 4, rng);
    const auto x = random_tensor<double>({3, 5}, rng);
    const std::vector<int> y{0, 3, 1};
    const auto g = backward(m, x, y);
    // dL/dW[c][j] = mean_n (softmax(z_n)_c - [y_n == c]) x_n[j]
    const auto z = forward(m, x);
    for (std::size_t c = 0; c < 4; ++c) {
        double db = 0.0;
        std::vector<double> dw(5, 0.0);
        for (std::size_t n = 0; n < 3; ++n) {
            double denom = 0.0;
            for (std::size_t k = 0; k < 4; ++k) denom += std::exp(z[n * 4 + k]);
            const double r = std::exp(z[n * 4 + c]) / denom - (y[n] == static_cast<int>(c) ? 1.0 : 0.0);
            db += r / 3.0;
            for (std::size_t j = 0; j < 5; ++j) dw[j] += r * x[n * 5 + j] / 3.0;
        }
        EXPECT_NEAR(g.params[0].bias[c], db, 1e-12);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(g.params[0].weight[c * 5 + j], dw[j], 1e-12);
    }
}

TEST(EngineGradient, CentralDifferencesOnConvPoolModels) {
    Rng rng(11);
    const std::vector<std::vector<LayerSpec>> archs{
        {LayerSpec::conv2d(2, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2), LayerSpec::flatten(),
         LayerSpec::dense(3)},
        {LayerSpec::conv2d(3, 2, 2, 0), LayerSpec::avgpool2d(2, 1), LayerSpec::flatten(), LayerSpec::dense(3)},
        {LayerSpec::flatten(), LayerSpec::dense(6), LayerSpec::relu(), LayerSpec::dense(3)}};
    for (const auto& layers : archs) {
        auto m = make_model<double>({2, 6, 6}, layers, 3, rng);
        const auto x = random_tensor<double>({2, 2, 6, 6}, rng, 0.0, 1.0);
        const auto y = random_labels(2, 3, rng);
        const auto g = backward(m, x, y);
        const double h = 1e-3;
        for (std::size_t k = 0; k < x.size(); k += 7) {
            auto xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fd = (loss_cross_entropy(forward(m, xp), y).mean - loss_cross_entropy(forward(m, xm), y).mean) /
                              (2 * h);
            EXPECT_LE(relative_error(g.input[k], fd), 1e-3) << "input coordinate " << k;
        }
        for (std::size_t i = 0; i < m.params.size(); ++i) {
            if (m.params[i].empty()) continue;
            for (std::size_t k = 0; k < m.params[i].weight.size(); k += 5) {
                auto mp = m, mm = m;
                mp.params[i].weight[k] += h;
                mm.params[i].weight[k] -= h;
                const double fd = (loss_cross_entropy(forward(mp, x), y).mean -
                                   loss_cross_entropy(forward(mm, x), y).mean) /
                                  (2 * h);
                EXPECT_LE(relative_error(g.params[i].weight[k], fd), 1e-3) << "layer " << i << " weight " << k;
            }
        }
    }
}

TEST(EngineGradient, MaxPoolTieRoutesToFirstMaximum) {
    Model64 m;
    m.num_classes = 2;
    m.input_shape = {1, 2, 2};
    m.layers = {LayerSpec::maxpool2d(2, 2), LayerSpec::flatten(), LayerSpec::dense(2)};
    m.params.resize(3);
    m.params[2] = {Tensor<double>({2, 1}, {1.0, -1.0}), Tensor<double>({2})};
    const Tensor<double> x({1, 1, 2, 2}, {0.5, 0.5, 0.5, 0.5});
    const std::vector<int> y{0};
    const auto g = backward(m, x, y);
    EXPECT_NE(g.input[0], 0.0);
    EXPECT_EQ(g.input[1], 0.0);
    EXPECT_EQ(g.input[2], 0.0);
    EXPECT_EQ(g.input[3], 0.0);
}

TEST(EngineBatch, LogitsIndependentOfBatchComposition) {
    Rng rng(5);
    auto m = make_model<float>({3, 8, 8},
                               {LayerSpec::conv2d(4, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                                LayerSpec::flatten(), LayerSpec::dense(5)},
                               5, rng);
    const auto x = random_tensor<float>({6, 3, 8, 8}, rng, 0.0, 1.0);
    const auto all = forward(m, x);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto one = forward(m, slice_rows(x, i, 1));
        for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(one[c], all[i * 5 + c]);
    }
}

TEST(EngineBatch, DuplicatedSampleGivesTheSameGradient) {
    Rng rng(9);
    auto m = make_model<float>({2, 5, 5},
                               {LayerSpec::conv2d(3, 3, 1, 1), LayerSpec::relu(), LayerSpec::flatten(),
                                LayerSpec::dense(4)},
                               4, rng);
    const auto x = random_tensor<float>({1, 2, 5, 5}, rng, 0.0, 1.0);
    const std::vector<int> y{2};
    Tensor<float> xx({2, 2, 5, 5});
    std::copy(x.storage().begin(), x.storage().end(), xx.storage().begin());
    std::copy(x.storage().begin(), x.storage().end(), xx.storage().begin() + 50);
    const std::vector<int> yy{2, 2};
    const auto g1 = backward(m, x, y);
    const auto g2 = backward(m, xx, yy);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        EXPECT_EQ(g1.params[i].weight, g2.params[i].weight);
        EXPECT_EQ(g1.params[i].bias, g2.params[i].bias);
    }
}

TEST(EngineBatch, ThreadCountDoesNotChangeResults) {
    Rng rng(13);
    auto m = make_model<float>({3, 6, 6},
                               {LayerSpec::conv2d(4, 3, 1, 1), LayerSpec::relu(), LayerSpec::flatten(),
                                LayerSpec::dense(3)},
                               3, rng);
    const auto x = random_tensor<float>({37, 3, 6, 6}, rng, 0.0, 1.0);
    const auto y = random_labels(37, 3, rng);
    const auto a = backward(m, x, y, {}, ExecPolicy{1});
    const auto b = backward(m, x, y, {}, ExecPolicy{4});
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.input, b.input);
    for (std::size_t i = 0; i < m.params.size(); ++i) EXPECT_EQ(a.params[i], b.params[i]);
    EXPECT_EQ(a.loss.mean, b.loss.mean);
}

TEST(EngineModel, CastRoundTripAndParameterCount) {
    Rng rng(2);
    auto m = make_model<float>({4}, {LayerSpec::dense(3), LayerSpec::relu(), LayerSpec::dense(2)}, 2, rng);
    EXPECT_EQ(m.parameter_count(), 4u * 3 + 3 + 3 * 2 + 2);
    EXPECT_EQ(m.cast<double>().cast<float>(), m);
}

TEST(EngineNames, LayerKindAndRegimeRoundTrip) {
    for (auto k : {LayerKind::conv2d, LayerKind::dense, LayerKind::relu, LayerKind::maxpool2d, LayerKind::avgpool2d,
                   LayerKind::flatten})
        EXPECT_EQ(parse_layer_kind(to_string(k)), k);
    EXPECT_EQ(parse_regime("adversarial"), Regime::adversarial);
    EXPECT_THROW(parse_layer_kind("lstm"), InvalidConfig);
}
