#include "cwr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cwr {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::dense: return "dense";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::avgpool2d: return "avgpool2d";
        case LayerKind::flatten: return "flatten";
    }
    return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
    for (auto kind : {LayerKind::conv2d, LayerKind::dense, LayerKind::relu, LayerKind::maxpool2d,
                      LayerKind::avgpool2d, LayerKind::flatten})
        if (to_string(kind) == name) return kind;
    throw InvalidConfig("unknown layer kind '" + std::string(name) + "'");
}

std::string_view to_string(Regime regime) {
    return regime == Regime::standard ? "standard" : "adversarial";
}

Regime parse_regime(std::string_view name) {
    if (name == "standard") return Regime::standard;
    if (name == "adversarial") return Regime::adversarial;
    throw InvalidConfig("unknown regime '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv2d(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.out_channels = out_channels;
    l.kernel_h = l.kernel_w = kernel;
    l.stride = stride;
    l.padding = padding;
    return l;
}

LayerSpec LayerSpec::dense(std::size_t out_features) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.out_features = out_features;
    return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool2d(std::size_t kernel, std::size_t stride) {
    LayerSpec l;
    l.kind = LayerKind::maxpool2d;
    l.kernel_h = l.kernel_w = kernel;
    l.stride = stride;
    return l;
}

LayerSpec LayerSpec::avgpool2d(std::size_t kernel, std::size_t stride) {
    LayerSpec l = maxpool2d(kernel, stride);
    l.kind = LayerKind::avgpool2d;
    return l;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
}

namespace {

Shape layer_output(const LayerSpec& l, const Shape& in, std::size_t index) {
    auto fail = [&](const std::string& why) {
        return ShapeMismatch(index, std::string(to_string(l.kind)) + " on input " + shape_string(in) + ": " + why);
    };
    switch (l.kind) {
        case LayerKind::conv2d: {
            if (in.size() != 3) throw fail("expects (channel, height, width)");
            if (l.out_channels == 0 || l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0)
                throw fail("attributes must be positive");
            if (in[1] + 2 * l.padding < l.kernel_h || in[2] + 2 * l.padding < l.kernel_w)
                throw fail("kernel larger than padded input");
            return {l.out_channels, (in[1] + 2 * l.padding - l.kernel_h) / l.stride + 1,
                    (in[2] + 2 * l.padding - l.kernel_w) / l.stride + 1};
        }
        case LayerKind::dense:
            if (in.size() != 1) throw fail("expects a flat input");
            if (l.out_features == 0) throw fail("out_features must be positive");
            return {l.out_features};
        case LayerKind::relu: return in;
        case LayerKind::maxpool2d:
        case LayerKind::avgpool2d:
            if (in.size() != 3) throw fail("expects (channel, height, width)");
            if (l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0) throw fail("attributes must be positive");
            if (in[1] < l.kernel_h || in[2] < l.kernel_w) throw fail("window larger than input");
            return {in[0], (in[1] - l.kernel_h) / l.stride + 1, (in[2] - l.kernel_w) / l.stride + 1};
        case LayerKind::flatten: return {shape_size(in)};
    }
    throw fail("unknown layer");
}

}  // namespace

std::pair<Shape, Shape> param_shapes(const LayerSpec& layer, const Shape& input) {
    switch (layer.kind) {
        case LayerKind::conv2d:
            return {{layer.out_channels, input.at(0), layer.kernel_h, layer.kernel_w}, {layer.out_channels}};
        case LayerKind::dense: return {{layer.out_features, input.at(0)}, {layer.out_features}};
        default: return {};
    }
}

std::vector<Shape> infer_shapes(std::span<const LayerSpec> layers, const Shape& input_shape,
                                std::size_t num_classes) {
    if (layers.empty()) throw ShapeMismatch(0, "model has no layers");
    if (input_shape.empty() || shape_size(input_shape) == 0)
        throw ShapeMismatch(0, "input shape " + shape_string(input_shape) + " is empty");
    std::vector<Shape> shapes;
    shapes.reserve(layers.size());
    Shape current = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        current = layer_output(layers[i], current, i);
        shapes.push_back(current);
    }
    if (current != Shape{num_classes})
        throw ShapeMismatch(layers.size() - 1, "final output " + shape_string(current) + " is not (" +
                                                   std::to_string(num_classes) + ")");
    return shapes;
}

template <typename T>
std::vector<Shape> infer_shapes(const BasicModel<T>& model) {
    auto shapes = infer_shapes(std::span<const LayerSpec>(model.layers), model.input_shape, model.num_classes);
    if (model.params.size() != model.layers.size())
        throw ShapeMismatch(std::min(model.params.size(), model.layers.size()),
                            "parameter list length differs from layer count");
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Shape& in = i == 0 ? model.input_shape : shapes[i - 1];
        auto [w, b] = param_shapes(model.layers[i], in);
        const auto& p = model.params[i];
        const bool ok = model.layers[i].has_params() ? (p.weight.shape() == w && p.bias.shape() == b) : p.empty();
        if (!ok)
            throw ShapeMismatch(i, "parameters " + shape_string(p.weight.shape()) + "/" +
                                       shape_string(p.bias.shape()) + " expected " + shape_string(w) + "/" +
                                       shape_string(b));
    }
    return shapes;
}

namespace {

template <typename T>
struct Plan {
    const BasicModel<T>& model;
    std::vector<Shape> shapes;  // shapes[i] = output of layer i
    std::size_t input_size;

    const Shape& in_shape(std::size_t i) const { return i == 0 ? model.input_shape : shapes[i - 1]; }
};

template <typename T>
Plan<T> make_plan(const BasicModel<T>& model, const Tensor<T>& batch) {
    Plan<T> plan{model, infer_shapes(model), shape_size(model.input_shape)};
    Shape expected = model.input_shape;
    expected.insert(expected.begin(), batch.rank() ? batch.dim(0) : 0);
    if (batch.shape() != expected)
        throw ShapeMismatch(0, "batch " + shape_string(batch.shape()) + " does not match input shape " +
                                   shape_string(model.input_shape));
    if (!batch.all_finite()) throw NonFiniteActivation("input batch");
    return plan;
}

// Range of output columns whose input column ox*stride + k - pad lies in [0, width).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t pad, std::size_t stride,
                                                       std::size_t width, std::size_t out_width) {
    std::size_t lo = 0;
    if (pad > k) lo = (pad - k + stride - 1) / stride;
    if (width + pad < k + 1) return {0, 0};
    std::size_t hi = (width - 1 + pad - k) / stride + 1;
    return {std::min(lo, out_width), std::min(hi, out_width)};
}

template <typename T>
void conv_forward(const LayerSpec& l, const LayerParams<T>& p, const Shape& in, const Shape& out, const T* x,
                  T* y) {
    const std::size_t ci_n = in[0], h = in[1], w = in[2];
    const std::size_t co_n = out[0], ho = out[1], wo = out[2];
    const std::size_t kh = l.kernel_h, kw = l.kernel_w, s = l.stride, pad = l.padding;
    const T* weight = p.weight.data().data();
    for (std::size_t co = 0; co < co_n; ++co) {
        T* yc = y + co * ho * wo;
        std::fill(yc, yc + ho * wo, p.bias[co]);
        for (std::size_t ci = 0; ci < ci_n; ++ci) {
            const T* xc = x + ci * h * w;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const T wv = weight[((co * ci_n + ci) * kh + ky) * kw + kx];
                    auto [ox_lo, ox_hi] = valid_range(kx, pad, s, w, wo);
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        // unsigned wrap of (kx - pad) cancels against ox * s >= pad - kx
                        const std::size_t base = static_cast<std::size_t>(iy) * w + kx - pad;
                        T* yr = yc + oy * wo;
                        if (s == 1) {
                            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) yr[ox] += wv * xc[base + ox];
                        } else {
                            for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) yr[ox] += wv * xc[base + ox * s];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv_backward(const LayerSpec& l, const LayerParams<T>& p, const Shape& in, const Shape& out, const T* x,
                   const T* dy, T* dx, LayerParams<T>* dp) {
    const std::size_t ci_n = in[0], h = in[1], w = in[2];
    const std::size_t co_n = out[0], ho = out[1], wo = out[2];
    const std::size_t kh = l.kernel_h, kw = l.kernel_w, s = l.stride, pad = l.padding;
    const T* weight = p.weight.data().data();
    for (std::size_t co = 0; co < co_n; ++co) {
        const T* dyc = dy + co * ho * wo;
        if (dp) {
            T acc = 0;
            for (std::size_t i = 0; i < ho * wo; ++i) acc += dyc[i];
            dp->bias[co] += acc;
        }
        for (std::size_t ci = 0; ci < ci_n; ++ci) {
            const T* xc = x + ci * h * w;
            T* dxc = dx ? dx + ci * h * w : nullptr;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::size_t widx = ((co * ci_n + ci) * kh + ky) * kw + kx;
                    const T wv = weight[widx];
                    auto [ox_lo, ox_hi] = valid_range(kx, pad, s, w, wo);
                    T acc = 0;
                    for (std::size_t oy = 0; oy < ho; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const std::size_t base = static_cast<std::size_t>(iy) * w + kx - pad;
                        const T* dyr = dyc + oy * wo;
                        for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                            const std::size_t ix = base + ox * s;
                            acc += dyr[ox] * xc[ix];
                            if (dxc) dxc[ix] += wv * dyr[ox];
                        }
                    }
                    if (dp) dp->weight[widx] += acc;
                }
            }
        }
    }
}

template <typename T>
void dense_forward(const LayerParams<T>& p, std::size_t n_in, std::size_t n_out, const T* x, T* y) {
    const T* weight = p.weight.data().data();
    for (std::size_t o = 0; o < n_out; ++o) {
        const T* wr = weight + o * n_in;
        T acc = 0;
        for (std::size_t i = 0; i < n_in; ++i) acc += wr[i] * x[i];
        y[o] = acc + p.bias[o];
    }
}

template <typename T>
void dense_backward(const LayerParams<T>& p, std::size_t n_in, std::size_t n_out, const T* x, const T* dy, T* dx,
                    LayerParams<T>* dp) {
    const T* weight = p.weight.data().data();
    for (std::size_t o = 0; o < n_out; ++o) {
        const T g = dy[o];
        const T* wr = weight + o * n_in;
        if (dx)
            for (std::size_t i = 0; i < n_in; ++i) dx[i] += wr[i] * g;
        if (dp) {
            T* dwr = dp->weight.data().data() + o * n_in;
            for (std::size_t i = 0; i < n_in; ++i) dwr[i] += g * x[i];
            dp->bias[o] += g;
        }
    }
}

// Flat input index of the first maximal element of window (c, oy, ox).
template <typename T>
std::size_t window_argmax(const LayerSpec& l, const Shape& in, const T* x, std::size_t c, std::size_t oy,
                          std::size_t ox) {
    const std::size_t h = in[1], w = in[2];
    std::size_t best = c * h * w + (oy * l.stride) * w + ox * l.stride;
    for (std::size_t ky = 0; ky < l.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < l.kernel_w; ++kx) {
            const std::size_t idx = c * h * w + (oy * l.stride + ky) * w + ox * l.stride + kx;
            if (x[idx] > x[best]) best = idx;
        }
    return best;
}

template <typename T>
void pool_forward(const LayerSpec& l, const Shape& in, const Shape& out, const T* x, T* y) {
    const std::size_t h = in[1], w = in[2], ho = out[1], wo = out[2];
    const T area = static_cast<T>(l.kernel_h * l.kernel_w);
    for (std::size_t c = 0; c < out[0]; ++c)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                T& dst = y[(c * ho + oy) * wo + ox];
                if (l.kind == LayerKind::maxpool2d) {
                    dst = x[window_argmax(l, in, x, c, oy, ox)];
                } else {
                    T acc = 0;
                    for (std::size_t ky = 0; ky < l.kernel_h; ++ky)
                        for (std::size_t kx = 0; kx < l.kernel_w; ++kx)
                            acc += x[c * h * w + (oy * l.stride + ky) * w + ox * l.stride + kx];
                    dst = acc / area;
                }
            }
}

template <typename T>
void pool_backward(const LayerSpec& l, const Shape& in, const Shape& out, const T* x, const T* dy, T* dx) {
    const std::size_t h = in[1], w = in[2], ho = out[1], wo = out[2];
    const T area = static_cast<T>(l.kernel_h * l.kernel_w);
    for (std::size_t c = 0; c < out[0]; ++c)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                const T g = dy[(c * ho + oy) * wo + ox];
                if (l.kind == LayerKind::maxpool2d) {
                    dx[window_argmax(l, in, x, c, oy, ox)] += g;
                } else {
                    for (std::size_t ky = 0; ky < l.kernel_h; ++ky)
                        for (std::size_t kx = 0; kx < l.kernel_w; ++kx)
                            dx[c * h * w + (oy * l.stride + ky) * w + ox * l.stride + kx] += g / area;
                }
            }
}

// Activations of one sample: acts[0] is the input, acts[i + 1] the output of layer i.
template <typename T>
void sample_forward(const Plan<T>& plan, std::span<const T> input, std::vector<std::vector<T>>& acts) {
    const auto& model = plan.model;
    acts.resize(model.layers.size() + 1);
    acts[0].assign(input.begin(), input.end());
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& l = model.layers[i];
        const Shape& in = plan.in_shape(i);
        const Shape& out = plan.shapes[i];
        const T* x = acts[i].data();
        auto& y = acts[i + 1];
        y.assign(shape_size(out), T{0});
        switch (l.kind) {
            case LayerKind::conv2d: conv_forward(l, model.params[i], in, out, x, y.data()); break;
            case LayerKind::dense: dense_forward(model.params[i], in[0], out[0], x, y.data()); break;
            case LayerKind::relu:
                for (std::size_t k = 0; k < y.size(); ++k) y[k] = x[k] > T{0} ? x[k] : T{0};
                break;
            case LayerKind::maxpool2d:
            case LayerKind::avgpool2d: pool_forward(l, in, out, x, y.data()); break;
            case LayerKind::flatten: std::copy(x, x + y.size(), y.begin()); break;
        }
    }
}

// Backpropagates dlogits through one sample. dinput may be empty (not wanted);
// dparams may be null.
template <typename T>
void sample_backward(const Plan<T>& plan, const std::vector<std::vector<T>>& acts, std::vector<T> grad,
                     std::span<T> dinput, std::vector<LayerParams<T>>* dparams) {
    const auto& model = plan.model;
    std::vector<T> below;
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        const LayerSpec& l = model.layers[i];
        const Shape& in = plan.in_shape(i);
        const Shape& out = plan.shapes[i];
        const bool need_dx = i > 0 || !dinput.empty();
        const bool need_dp = dparams && l.has_params();
        if (!need_dx && !need_dp) break;
        below.assign(need_dx ? acts[i].size() : 0, T{0});
        T* dx = need_dx ? below.data() : nullptr;
        LayerParams<T>* dp = need_dp ? &(*dparams)[i] : nullptr;
        const T* x = acts[i].data();
        switch (l.kind) {
            case LayerKind::conv2d: conv_backward(l, model.params[i], in, out, x, grad.data(), dx, dp); break;
            case LayerKind::dense: dense_backward(model.params[i], in[0], out[0], x, grad.data(), dx, dp); break;
            case LayerKind::relu:
                if (dx)
                    for (std::size_t k = 0; k < below.size(); ++k) below[k] = x[k] > T{0} ? grad[k] : T{0};
                break;
            case LayerKind::maxpool2d:
            case LayerKind::avgpool2d:
                if (dx) pool_backward(l, in, out, x, grad.data(), dx);
                break;
            case LayerKind::flatten:
                if (dx) std::copy(grad.begin(), grad.end(), below.begin());
                break;
        }
        grad.swap(below);
    }
    if (!dinput.empty()) std::copy(grad.begin(), grad.end(), dinput.begin());
}

template <typename T>
std::vector<LayerParams<T>> zero_params_like(const BasicModel<T>& model) {
    std::vector<LayerParams<T>> out(model.params.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!model.params[i].empty())
            out[i] = {Tensor<T>(model.params[i].weight.shape()), Tensor<T>(model.params[i].bias.shape())};
    return out;
}

template <typename T>
void add_into(std::vector<LayerParams<T>>& acc, const std::vector<LayerParams<T>>& g) {
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (acc[i].empty()) continue;
        auto& aw = acc[i].weight.storage();
        const auto& gw = g[i].weight.storage();
        for (std::size_t k = 0; k < aw.size(); ++k) aw[k] += gw[k];
        auto& ab = acc[i].bias.storage();
        const auto& gb = g[i].bias.storage();
        for (std::size_t k = 0; k < ab.size(); ++k) ab[k] += gb[k];
    }
}

template <typename T>
void reset(std::vector<LayerParams<T>>& g) {
    for (auto& p : g) {
        std::fill(p.weight.storage().begin(), p.weight.storage().end(), T{0});
        std::fill(p.bias.storage().begin(), p.bias.storage().end(), T{0});
    }
}

template <typename T>
void softmax_loss_row(std::span<const T> logits, int label, T& loss, std::span<T> dlogits, T scale) {
    const T m = *std::max_element(logits.begin(), logits.end());
    T sum = 0;
    for (T v : logits) sum += std::exp(v - m);
    const T log_sum = std::log(sum);
    loss = log_sum - (logits[static_cast<std::size_t>(label)] - m);
    if (!dlogits.empty()) {
        for (std::size_t c = 0; c < logits.size(); ++c) dlogits[c] = std::exp(logits[c] - m - log_sum) * scale;
        dlogits[static_cast<std::size_t>(label)] -= scale;
    }
}

void check_labels(std::span<const int> labels, std::size_t batch, std::size_t classes) {
    if (labels.size() != batch)
        throw LabelOutOfRange(std::to_string(labels.size()) + " labels for batch of " + std::to_string(batch));
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
            throw LabelOutOfRange("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                                  " with " + std::to_string(classes) + " classes");
}

// Parameter gradients are accumulated per fixed-size chunk of samples and the
// chunks are summed in order, so the result is independent of thread count.
constexpr std::size_t kChunk = 8;

}  // namespace

template <typename T>
Tensor<T> forward(const BasicModel<T>& model, const Tensor<T>& batch, const ExecPolicy& policy) {
    const Plan<T> plan = make_plan(model, batch);
    const std::size_t n = batch.dim(0);
    Tensor<T> logits({n, model.num_classes});
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, policy, [&](std::size_t chunk) {
        std::vector<std::vector<T>> acts;
        for (std::size_t i = chunk * kChunk; i < std::min(n, (chunk + 1) * kChunk); ++i) {
            sample_forward(plan, batch.row(i), acts);
            std::copy(acts.back().begin(), acts.back().end(), logits.row(i).begin());
        }
    });
    if (!logits.all_finite()) throw NonFiniteActivation("logits");
    return logits;
}

template <typename T>
LossResult<T> loss_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw InvalidConfig("logits must be (batch, classes)");
    const std::size_t n = logits.dim(0);
    check_labels(labels, n, logits.dim(1));
    LossResult<T> out;
    out.per_sample.resize(n);
    T total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        softmax_loss_row<T>(logits.row(i), labels[i], out.per_sample[i], {}, T{0});
        total += out.per_sample[i];
    }
    out.mean = total / static_cast<T>(n);
    if (!std::isfinite(out.mean)) throw NonFiniteActivation("loss");
    return out;
}

template <typename T>
Gradients<T> backward(const BasicModel<T>& model, const Tensor<T>& batch, std::span<const int> labels,
                      GradientRequest request, const ExecPolicy& policy) {
    const Plan<T> plan = make_plan(model, batch);
    const std::size_t n = batch.dim(0);
    const std::size_t classes = model.num_classes;
    check_labels(labels, n, classes);

    Gradients<T> out;
    out.logits = Tensor<T>({n, classes});
    out.loss.per_sample.assign(n, T{0});
    if (request.input) out.input = Tensor<T>(batch.shape());

    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::vector<LayerParams<T>>> partial(request.params ? chunks : 0);
    const T scale = T{1} / static_cast<T>(n);

    parallel_for(chunks, policy, [&](std::size_t chunk) {
        std::vector<std::vector<T>> acts;
        std::vector<LayerParams<T>> sample_grad;
        if (request.params) {
            partial[chunk] = zero_params_like(model);
            sample_grad = zero_params_like(model);
        }
        for (std::size_t i = chunk * kChunk; i < std::min(n, (chunk + 1) * kChunk); ++i) {
            sample_forward(plan, batch.row(i), acts);
            auto row = out.logits.row(i);
            std::copy(acts.back().begin(), acts.back().end(), row.begin());
            std::vector<T> dlogits(classes);
            softmax_loss_row<T>(row, labels[i], out.loss.per_sample[i], dlogits, scale);
            std::span<T> dinput = request.input ? out.input.row(i) : std::span<T>{};
            if (request.params) reset(sample_grad);
            sample_backward(plan, acts, std::move(dlogits), dinput, request.params ? &sample_grad : nullptr);
            if (request.params) add_into(partial[chunk], sample_grad);
        }
    });

    if (!out.logits.all_finite()) throw NonFiniteActivation("logits");
    T total = 0;
    for (T v : out.loss.per_sample) total += v;
    out.loss.mean = total / static_cast<T>(n);
    if (!std::isfinite(out.loss.mean)) throw NonFiniteActivation("loss");

    if (request.input && !out.input.all_finite()) throw NonFiniteActivation("input gradient");
    if (request.params) {
        out.params = zero_params_like(model);
        for (const auto& p : partial) add_into(out.params, p);
        for (const auto& p : out.params)
            if (!p.weight.all_finite() || !p.bias.all_finite()) throw NonFiniteActivation("parameter gradient");
    }
    return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
    std::vector<int> out(logits.dim(0));
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = logits.row(i);
        out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

#define CWR_INSTANTIATE(T)                                                                                     \
    template std::vector<Shape> infer_shapes(const BasicModel<T>&);                                            \
    template Tensor<T> forward(const BasicModel<T>&, const Tensor<T>&, const ExecPolicy&);                    \
    template LossResult<T> loss_cross_entropy(const Tensor<T>&, std::span<const int>);                        \
    template Gradients<T> backward(const BasicModel<T>&, const Tensor<T>&, std::span<const int>,              \
                                   GradientRequest, const ExecPolicy&);                                        \
    template std::vector<int> argmax_rows(const Tensor<T>&);

CWR_INSTANTIATE(float)
CWR_INSTANTIATE(double)

#undef CWR_INSTANTIATE

}  // namespace cwr
