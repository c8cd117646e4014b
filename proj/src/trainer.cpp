#include "cwr/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "cwr/random.hpp"

namespace cwr {

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"mlp_small", "cnn_small", "cnn_medium"};
    return names;
}

std::vector<LayerSpec> preset_layers(std::string_view preset, std::size_t num_classes) {
    using L = LayerSpec;
    if (preset == "mlp_small") return {L::flatten(), L::dense(64), L::relu(), L::dense(num_classes)};
    if (preset == "cnn_small")
        return {L::conv2d(8, 3, 1, 1),  L::relu(), L::maxpool2d(2, 2), L::conv2d(16, 3, 1, 1),
                L::relu(),              L::maxpool2d(2, 2), L::flatten(), L::dense(num_classes)};
    if (preset == "cnn_medium")
        return {L::conv2d(16, 3, 1, 1), L::relu(),     L::conv2d(16, 3, 1, 1), L::relu(),
                L::maxpool2d(2, 2),     L::conv2d(32, 3, 1, 1), L::relu(),     L::conv2d(32, 3, 1, 1),
                L::relu(),              L::maxpool2d(2, 2),     L::flatten(),  L::dense(64),
                L::relu(),              L::dense(num_classes)};
    throw UnknownPreset(std::string(preset));
}

Model init_model(std::string_view preset, std::size_t num_classes, const Shape& input_shape, std::uint64_t seed) {
    Model model;
    model.name = std::string(preset);
    model.seed = seed;
    model.num_classes = num_classes;
    model.input_shape = input_shape;
    model.layers = preset_layers(preset, num_classes);
    const auto shapes = infer_shapes(std::span<const LayerSpec>(model.layers), input_shape, num_classes);

    Rng rng(derive_seed(seed, 0));
    model.params.resize(model.layers.size());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& l = model.layers[i];
        if (!l.has_params()) continue;
        const Shape& in = i == 0 ? input_shape : shapes[i - 1];
        auto [wshape, bshape] = param_shapes(l, in);
        const std::size_t receptive = l.kind == LayerKind::conv2d ? l.kernel_h * l.kernel_w : 1;
        const double fan_in = static_cast<double>(wshape[1] * receptive);
        const double fan_out = static_cast<double>(wshape[0] * receptive);
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Tensor<float> weight(wshape);
        for (auto& v : weight.storage()) v = static_cast<float>(rng.uniform(-bound, bound));
        model.params[i] = {std::move(weight), Tensor<float>(bshape)};
    }
    return model;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidConfig("epochs must be at least 1");
    if (batch_size < 1) throw InvalidConfig("batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidConfig("learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("momentum must be in [0,1)");
    if (!(weight_decay >= 0.0)) throw InvalidConfig("weight decay must be >= 0");
    if (regime == Regime::adversarial) attack.validate();
    if (attack.target) throw InvalidConfig("training attacks must be untargeted");
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
    if (!lr_decay) return learning_rate;
    double lr = learning_rate;
    if (2 * epoch >= epochs && epochs > 1) lr *= 0.1;
    if (4 * epoch >= 3 * epochs && epochs > 1) lr *= 0.1;
    return lr;
}

AttackConfig TrainConfig::attack_at(std::size_t epoch) const {
    AttackConfig a = attack;
    if (epoch < epsilon_warmup) {
        const double f = static_cast<double>(epoch + 1) / static_cast<double>(epsilon_warmup + 1);
        a.epsilon *= f;
        a.step_size *= f;
    }
    return a;
}

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kAttackStream = 2;
constexpr std::uint64_t kAugmentStream = 3;

void flip_horizontal(std::span<float> image, const Shape& shape) {
    const std::size_t planes = shape[0] * shape[1], w = shape[2];
    for (std::size_t p = 0; p < planes; ++p) std::reverse(image.begin() + p * w, image.begin() + (p + 1) * w);
}

void check_feasible(const ImageBatch& clean, const ImageBatch& adv, double epsilon) {
    const float tol = static_cast<float>(epsilon) + 1e-6f;
    for (std::size_t k = 0; k < clean.size(); ++k)
        if (!(adv[k] >= 0.0f && adv[k] <= 1.0f && std::abs(adv[k] - clean[k]) <= tol))
            throw Error(Error::Category::numeric, "adversarial training sample left the feasible set");
}

}  // namespace

TrainResult train(Model model, const LabeledDataset& data, const TrainConfig& cfg, const ExecPolicy& policy,
                  const LabeledDataset* eval) {
    cfg.validate();
    if (data.size() == 0) throw EmptyDataset();
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.labels[i] < 0 || static_cast<std::size_t>(data.labels[i]) >= model.num_classes)
            throw LabelOutOfRange("label " + std::to_string(data.labels[i]) + " at sample " + std::to_string(i));
    infer_shapes(model);

    model.regime = cfg.regime;
    std::vector<LayerParams<float>> velocity(model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i)
        if (!model.params[i].empty())
            velocity[i] = {Tensor<float>(model.params[i].weight.shape()), Tensor<float>(model.params[i].bias.shape())};

    const std::size_t n = data.size();
    const Shape& image_shape = data.manifest.image_shape;
    TrainResult result;
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(derive_seed(cfg.seed, kShuffleStream), epoch));
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        const float lr = static_cast<float>(cfg.learning_rate_at(epoch));
        const float mu = static_cast<float>(cfg.momentum);
        const float decay = static_cast<float>(cfg.weight_decay);
        double loss_sum = 0.0;
        std::size_t correct = 0;

        for (std::size_t first = 0; first < n; first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, n - first);
            const std::span<const std::size_t> idx(order.data() + first, count);
            ImageBatch x = gather_rows(data.images, idx);
            std::vector<int> labels(count);
            for (std::size_t k = 0; k < count; ++k) labels[k] = data.labels[idx[k]];

            if (cfg.augment && image_shape.size() == 3) {
                for (std::size_t k = 0; k < count; ++k) {
                    Rng flip(derive_seed(derive_seed(cfg.seed, kAugmentStream), epoch * n + first + k));
                    if (flip.uniform() < 0.5) flip_horizontal(x.row(k), image_shape);
                }
            }
            if (cfg.regime == Regime::adversarial) {
                AttackConfig attack = cfg.attack_at(epoch);
                attack.seed = derive_seed(derive_seed(cfg.seed, kAttackStream), epoch);
                ImageBatch adv = run_attack(model, x, labels, attack, policy, first);
                check_feasible(x, adv, attack.epsilon);
                x = std::move(adv);
            }

            const Gradients<float> g = backward(model, x, labels, {false, true}, policy);
            loss_sum += static_cast<double>(g.loss.mean) * static_cast<double>(count);
            const auto predicted = argmax_rows(g.logits);
            for (std::size_t k = 0; k < count; ++k) correct += predicted[k] == labels[k];

            for (std::size_t i = 0; i < model.params.size(); ++i) {
                if (model.params[i].empty()) continue;
                auto step = [&](Tensor<float>& param, Tensor<float>& vel, const Tensor<float>& grad) {
                    auto& p = param.storage();
                    auto& v = vel.storage();
                    const auto& gr = grad.storage();
                    for (std::size_t k = 0; k < p.size(); ++k) {
                        v[k] = mu * v[k] + gr[k] + decay * p[k];
                        p[k] -= lr * v[k];
                    }
                };
                step(model.params[i].weight, velocity[i].weight, g.params[i].weight);
                step(model.params[i].bias, velocity[i].bias, g.params[i].bias);
            }
        }
        result.trace.push_back({epoch + 1, "train", loss_sum / static_cast<double>(n),
                                static_cast<double>(correct) / static_cast<double>(n)});

        if (eval && eval->size() > 0) {
            const Tensor<float> logits = forward(model, eval->images, policy);
            const auto loss = loss_cross_entropy(logits, eval->labels);
            const auto predicted = argmax_rows(logits);
            std::size_t hits = 0;
            for (std::size_t k = 0; k < predicted.size(); ++k) hits += predicted[k] == eval->labels[k];
            result.trace.push_back({epoch + 1, "eval", static_cast<double>(loss.mean),
                                    static_cast<double>(hits) / static_cast<double>(eval->size())});
        }
    }
    result.model = std::move(model);
    return result;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out << "epoch,split,loss,accuracy\n";
    char buf[64];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g", r.loss, r.accuracy);
        out << r.epoch << ',' << r.split << ',' << buf << '\n';
    }
    return out.str();
}

}  // namespace cwr
