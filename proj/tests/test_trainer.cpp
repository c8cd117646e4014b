#include <gtest/gtest.h>

#include <cmath>

#include "cwr/dataset_io.hpp"
#include "cwr/errors.hpp"
#include "cwr/metrics.hpp"
#include "cwr/trainer.hpp"

using namespace cwr;

namespace {

LabeledDataset blobs(std::size_t classes, std::size_t per_class, double sep, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.num_classes = classes;
    spec.per_class = per_class;
    spec.image_shape = {3, 8, 8};
    spec.separation = sep;
    spec.noise = 0.05;
    spec.seed = seed;
    return generate_synthetic(spec);
}

}  // namespace

TEST(Init, DeterministicWithZeroBiases) {
    const Model a = init_model("cnn_small", 10, {3, 32, 32}, 5);
    EXPECT_EQ(a, init_model("cnn_small", 10, {3, 32, 32}, 5));
    EXPECT_NE(a, init_model("cnn_small", 10, {3, 32, 32}, 6));
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (!a.layers[i].has_params()) continue;
        for (float v : a.params[i].bias.storage()) ASSERT_EQ(v, 0.0f);
    }
    EXPECT_EQ(a.name, "cnn_small");
    EXPECT_THROW(init_model("resnet50", 10, {3, 32, 32}, 1), UnknownPreset);
    EXPECT_EQ(preset_names().size(), 3u);
}

TEST(Init, GlorotBoundsAndMoments) {
    const Model m = init_model("mlp_small", 10, {3, 16, 16}, 1);
    const auto& w = m.params[1].weight;  // dense(64) over 768 inputs
    const double bound = std::sqrt(6.0 / (768.0 + 64.0));
    double sum = 0.0, sq = 0.0;
    for (float v : w.storage()) {
        ASSERT_LE(std::abs(v), bound);
        sum += v;
        sq += double(v) * v;
    }
    const double n = double(w.size());
    const double variance = bound * bound / 3.0;
    EXPECT_LE(std::abs(sum / n), 3.0 * std::sqrt(variance / n));
    EXPECT_NEAR(sq / n, variance, 0.05 * variance);
}

TEST(Config, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.epochs = 0;
    EXPECT_THROW(c.validate(), InvalidConfig);
    c = {};
    c.momentum = 1.0;
    EXPECT_THROW(c.validate(), InvalidConfig);
    c = {};
    c.learning_rate = -0.1;
    EXPECT_THROW(c.validate(), InvalidConfig);
    c = {};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), InvalidConfig);
}

TEST(Config, LearningRateSchedule) {
    TrainConfig c;
    c.epochs = 8;
    c.learning_rate = 0.1;
    EXPECT_DOUBLE_EQ(c.learning_rate_at(0), 0.1);
    EXPECT_DOUBLE_EQ(c.learning_rate_at(3), 0.1);
    EXPECT_DOUBLE_EQ(c.learning_rate_at(4), 0.01);
    EXPECT_DOUBLE_EQ(c.learning_rate_at(5), 0.01);
    EXPECT_DOUBLE_EQ(c.learning_rate_at(6), 0.001);
    c.lr_decay = false;
    EXPECT_EQ(c.learning_rate_at(7), 0.1);
    c.lr_decay = true;
    c.epochs = 1;
    EXPECT_EQ(c.learning_rate_at(0), 0.1);
}

TEST(Config, EpsilonWarmupRamp) {
    TrainConfig c;
    c.regime = Regime::adversarial;
    c.epsilon_warmup = 3;
    const double eps = c.attack.epsilon, step = c.attack.step_size;
    EXPECT_DOUBLE_EQ(c.attack_at(0).epsilon, eps / 4);
    EXPECT_DOUBLE_EQ(c.attack_at(2).epsilon, eps * 3 / 4);
    EXPECT_DOUBLE_EQ(c.attack_at(2).step_size, step * 3 / 4);
    EXPECT_EQ(c.attack_at(3).epsilon, eps);
    EXPECT_EQ(c.attack_at(9).step_size, step);
    c.epsilon_warmup = 0;
    EXPECT_EQ(c.attack_at(0).epsilon, eps);
}

TEST(Train, SeparableBlobsReachHighAccuracy) {
    const auto data = blobs(2, 60, 0.5, 3);
    TrainConfig cfg;
    cfg.epochs = 20;
    const auto r = train(init_model("mlp_small", 2, data.manifest.image_shape, 1), data, cfg);
    ASSERT_EQ(r.trace.size(), 20u);
    EXPECT_GE(r.trace.back().accuracy, 0.99);
    EXPECT_GE(overall_accuracy(confusion(evaluate(r.model, data))), 0.99);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
    const auto data = blobs(3, 10, 0.3, 1);
    const Model m = init_model("cnn_small", 3, data.manifest.image_shape, 2);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.learning_rate = 0.0;
    EXPECT_EQ(train(m, data, cfg).model, m);
}

TEST(Train, AdversarialWithZeroBudgetMatchesStandard) {
    const auto data = blobs(3, 8, 0.3, 2);
    const Model m = init_model("mlp_small", 3, data.manifest.image_shape, 4);
    TrainConfig std_cfg;
    std_cfg.epochs = 3;
    std_cfg.seed = 11;
    TrainConfig adv = std_cfg;
    adv.regime = Regime::adversarial;
    adv.attack.epsilon = 0.0;
    adv.attack.random_start = false;
    const auto a = train(m, data, std_cfg), b = train(m, data, adv);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.model.params, b.model.params);
    EXPECT_EQ(b.model.regime, Regime::adversarial);
}

TEST(Train, ReproducibleAcrossThreadCounts) {
    const auto data = blobs(3, 12, 0.3, 5);
    const Model m = init_model("cnn_small", 3, data.manifest.image_shape, 1);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.augment = true;
    cfg.regime = Regime::adversarial;
    cfg.attack.steps = 2;
    const auto a = train(m, data, cfg, ExecPolicy{1});
    const auto b = train(m, data, cfg, ExecPolicy{3});
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.trace, b.trace);
    cfg.seed = 1;
    EXPECT_NE(train(m, data, cfg).model, a.model);
}

TEST(Train, TraceRowsAndEvalSplit) {
    const auto data = blobs(2, 10, 0.4, 6);
    const auto held = blobs(2, 5, 0.4, 7);
    TrainConfig cfg;
    cfg.epochs = 3;
    const auto r = train(init_model("mlp_small", 2, data.manifest.image_shape, 1), data, cfg, {}, &held);
    ASSERT_EQ(r.trace.size(), 6u);
    for (std::size_t e = 0; e < 3; ++e) {
        EXPECT_EQ(r.trace[2 * e].epoch, e + 1);
        EXPECT_EQ(r.trace[2 * e].split, "train");
        EXPECT_EQ(r.trace[2 * e + 1].split, "eval");
    }
    const auto csv = trace_csv(r.trace);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,split,loss,accuracy");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(Train, RejectsBadInputs) {
    auto data = blobs(2, 4, 0.4, 1);
    const Model m = init_model("mlp_small", 2, data.manifest.image_shape, 1);
    LabeledDataset empty = data;
    empty.images = ImageBatch{};
    empty.labels.clear();
    empty.manifest.count = 0;
    EXPECT_THROW(train(m, empty, TrainConfig{}), Error);
    data.labels[0] = 5;
    EXPECT_THROW(train(m, data, TrainConfig{}), Error);
    EXPECT_THROW(train(init_model("mlp_small", 2, {3, 4, 4}, 1), blobs(2, 4, 0.4, 1), TrainConfig{}), Error);
}
