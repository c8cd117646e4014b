#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cwr/parallel.hpp"
#include "cwr/tensor.hpp"

namespace cwr {

enum class LayerKind { conv2d, dense, relu, maxpool2d, avgpool2d, flatten };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// One layer of a sequential classifier. Pools reuse kernel_h/kernel_w/stride.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t out_features = 0;

    static LayerSpec conv2d(std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
                            std::size_t padding = 0);
    static LayerSpec dense(std::size_t out_features);
    static LayerSpec relu();
    static LayerSpec maxpool2d(std::size_t kernel, std::size_t stride);
    static LayerSpec avgpool2d(std::size_t kernel, std::size_t stride);
    static LayerSpec flatten();

    bool has_params() const noexcept { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class Regime { standard, adversarial };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view name);

/// Weight and bias of a conv2d or dense layer; both empty for other kinds.
template <typename T>
struct LayerParams {
    Tensor<T> weight;
    Tensor<T> bias;

    bool empty() const noexcept { return weight.empty(); }
    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Sequential classifier f_theta: ordered layers plus their parameters.
/// Instantiated for float (default) and double (gradient verification).
template <typename T>
struct BasicModel {
    std::string name;
    Regime regime = Regime::standard;
    std::uint64_t seed = 0;
    std::size_t num_classes = 0;
    Shape input_shape;
    std::vector<LayerSpec> layers;
    std::vector<LayerParams<T>> params;  // parallel to layers

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& p : params) n += p.weight.size() + p.bias.size();
        return n;
    }

    template <typename U>
    BasicModel<U> cast() const {
        BasicModel<U> out{name, regime, seed, num_classes, input_shape, layers, {}};
        out.params.reserve(params.size());
        for (const auto& p : params) {
            LayerParams<U> q;
            if (!p.empty()) q = {p.weight.template cast<U>(), p.bias.template cast<U>()};
            out.params.push_back(std::move(q));
        }
        return out;
    }

    friend bool operator==(const BasicModel&, const BasicModel&) = default;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

/// Parameter shapes (weight, bias) of a layer given its per-sample input shape.
/// Returns empty shapes for parameter-free layers.
std::pair<Shape, Shape> param_shapes(const LayerSpec& layer, const Shape& input);

/// Per-sample activation shape after every layer. Throws ShapeMismatch naming
/// the first layer whose input is incompatible, or whose output is not (C)
/// for the last layer.
std::vector<Shape> infer_shapes(std::span<const LayerSpec> layers, const Shape& input_shape,
                                std::size_t num_classes);

/// As above, and additionally checks every parameter tensor against its layer.
template <typename T>
std::vector<Shape> infer_shapes(const BasicModel<T>& model);

/// Logits, shape (batch, C).
template <typename T>
Tensor<T> forward(const BasicModel<T>& model, const Tensor<T>& batch, const ExecPolicy& policy = {});

template <typename T>
struct LossResult {
    T mean{};
    std::vector<T> per_sample;
};

/// Mean cross-entropy of softmax(logits) against labels, max-subtracted.
template <typename T>
LossResult<T> loss_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

template <typename T>
struct Gradients {
    LossResult<T> loss;
    Tensor<T> logits;
    Tensor<T> input;                     // d(mean loss)/d(batch); empty unless requested
    std::vector<LayerParams<T>> params;  // d(mean loss)/d(theta); empty unless requested
};

struct GradientRequest {
    bool input = true;
    bool params = true;
};

/// Reverse-mode pass through the whole model. Parameter gradients are reduced
/// in sample order independent of the thread count.
template <typename T>
Gradients<T> backward(const BasicModel<T>& model, const Tensor<T>& batch, std::span<const int> labels,
                      GradientRequest request = {}, const ExecPolicy& policy = {});

template <typename T>
Tensor<T> input_gradient(const BasicModel<T>& model, const Tensor<T>& batch, std::span<const int> labels,
                         const ExecPolicy& policy = {}) {
    return backward(model, batch, labels, {true, false}, policy).input;
}

template <typename T>
std::vector<LayerParams<T>> param_gradients(const BasicModel<T>& model, const Tensor<T>& batch,
                                            std::span<const int> labels, const ExecPolicy& policy = {}) {
    return backward(model, batch, labels, {false, true}, policy).params;
}

/// Index of the largest logit per row, ties to the lowest index.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

}  // namespace cwr
