#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cwr/attacks.hpp"
#include "cwr/dataset.hpp"
#include "cwr/engine.hpp"

namespace cwr {

/// Layer lists of the built-in architectures (C = number of classes):
///
///   mlp_small   flatten, dense(64), relu, dense(C)
///   cnn_small   conv(8,3x3,pad 1), relu, maxpool(2,2), conv(16,3x3,pad 1), relu,
///               maxpool(2,2), flatten, dense(C)
///   cnn_medium  conv(16,3x3,pad 1), relu, conv(16,3x3,pad 1), relu, maxpool(2,2),
///               conv(32,3x3,pad 1), relu, conv(32,3x3,pad 1), relu, maxpool(2,2),
///               flatten, dense(64), relu, dense(C)
std::vector<LayerSpec> preset_layers(std::string_view preset, std::size_t num_classes);
const std::vector<std::string>& preset_names();

/// Glorot-uniform weights, U(-b, b) with b = sqrt(6 / (fan_in + fan_out)),
/// zero biases. Deterministic per seed.
Model init_model(std::string_view preset, std::size_t num_classes, const Shape& input_shape, std::uint64_t seed);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    bool augment = false;  // random horizontal flips
    bool lr_decay = true;  // x0.1 at 50% and 75% of the epochs
    std::uint64_t seed = 0;
    Regime regime = Regime::standard;
    AttackConfig attack = AttackConfig::training_default();
    /// Adversarial regime only: the budget (and step size) ramps linearly from
    /// eps/(W+1) up to eps over the first W epochs. 0 = full budget from the start.
    std::size_t epsilon_warmup = 0;

    void validate() const;
    /// Learning rate used during `epoch` (0-based).
    double learning_rate_at(std::size_t epoch) const;
    /// Training attack used during `epoch` (0-based), after the warm-up ramp.
    AttackConfig attack_at(std::size_t epoch) const;
};

struct TraceRow {
    std::size_t epoch = 0;  // 1-based
    std::string split;      // "train", or "eval" for the optional held-out set
    double loss = 0.0;
    double accuracy = 0.0;

    friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct TrainResult {
    Model model;
    std::vector<TraceRow> trace;
};

/// Mini-batch SGD with momentum. In the adversarial regime every mini-batch is
/// replaced by its PGD perturbation against the current parameters before the
/// gradient step. `eval` (optional) adds one "eval" trace row per epoch.
TrainResult train(Model model, const LabeledDataset& data, const TrainConfig& cfg, const ExecPolicy& policy = {},
                  const LabeledDataset* eval = nullptr);

/// CSV with header "epoch,split,loss,accuracy".
std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace cwr
