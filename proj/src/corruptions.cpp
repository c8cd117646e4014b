#include "cwr/corruptions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "cwr/random.hpp"

namespace cwr {

std::string_view to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::gaussian_noise: return "gaussian_noise";
        case CorruptionKind::shot_noise: return "shot_noise";
        case CorruptionKind::impulse_noise: return "impulse_noise";
        case CorruptionKind::gaussian_blur: return "gaussian_blur";
        case CorruptionKind::contrast: return "contrast";
        case CorruptionKind::brightness: return "brightness";
    }
    return "unknown";
}

const std::vector<CorruptionKind>& all_corruption_kinds() {
    static const std::vector<CorruptionKind> kinds{CorruptionKind::gaussian_noise, CorruptionKind::shot_noise,
                                                   CorruptionKind::impulse_noise,  CorruptionKind::gaussian_blur,
                                                   CorruptionKind::contrast,       CorruptionKind::brightness};
    return kinds;
}

CorruptionKind parse_corruption_kind(std::string_view name) {
    for (auto k : all_corruption_kinds())
        if (to_string(k) == name) return k;
    throw InvalidConfig("unknown corruption '" + std::string(name) + "'");
}

double severity_parameter(CorruptionKind kind, int severity) {
    if (severity < 1 || severity > 5) throw InvalidSeverity(severity);
    static constexpr std::array<double, 5> gaussian{0.04, 0.06, 0.08, 0.09, 0.10};
    static constexpr std::array<double, 5> shot{500, 250, 100, 75, 50};
    static constexpr std::array<double, 5> impulse{0.01, 0.02, 0.03, 0.05, 0.07};
    static constexpr std::array<double, 5> blur{0.4, 0.6, 0.7, 0.8, 1.0};
    static constexpr std::array<double, 5> contrast{0.75, 0.5, 0.4, 0.3, 0.15};
    static constexpr std::array<double, 5> brightness{0.05, 0.1, 0.15, 0.2, 0.3};
    const auto i = static_cast<std::size_t>(severity - 1);
    switch (kind) {
        case CorruptionKind::gaussian_noise: return gaussian[i];
        case CorruptionKind::shot_noise: return shot[i];
        case CorruptionKind::impulse_noise: return impulse[i];
        case CorruptionKind::gaussian_blur: return blur[i];
        case CorruptionKind::contrast: return contrast[i];
        case CorruptionKind::brightness: return brightness[i];
    }
    throw InvalidConfig("unknown corruption kind");
}

double CorruptionConfig::parameter() const {
    validate();
    return parameter_override ? *parameter_override : severity_parameter(kind, severity);
}

void CorruptionConfig::validate() const {
    if (severity < 1 || severity > 5) throw InvalidSeverity(severity);
    if (parameter_override) {
        const double p = *parameter_override;
        const bool ok = std::isfinite(p) && (kind == CorruptionKind::shot_noise ? p > 0.0 : true) &&
                        (kind == CorruptionKind::brightness ? true : p >= 0.0) &&
                        (kind == CorruptionKind::impulse_noise ? p <= 1.0 : true);
        if (!ok) throw InvalidConfig("corruption parameter " + std::to_string(p) + " invalid for " +
                                     std::string(to_string(kind)));
    }
}

std::size_t blur_kernel_size(double sigma) {
    return 2 * static_cast<std::size_t>(std::ceil(2.0 * std::max(0.0, sigma))) + 1;
}

namespace {

// Mirror without repeating the edge sample: ... 2 1 | 0 1 2 ... n-1 | n-2 ...
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * static_cast<std::ptrdiff_t>(n - 1);
    i %= period;
    if (i < 0) i += period;
    return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

std::vector<double> gaussian_kernel(double sigma, std::size_t size) {
    std::vector<double> k(size, 0.0);
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(size / 2);
    if (sigma <= 0.0) {
        k[static_cast<std::size_t>(r)] = 1.0;
        return k;
    }
    double sum = 0.0;
    for (std::ptrdiff_t d = -r; d <= r; ++d) {
        const double w = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(d + r)] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;
    return k;
}

void check_batch(const ImageBatch& batch) {
    if (batch.rank() != 4) throw InvalidConfig("corruptions expect a (batch, channel, height, width) tensor");
}

}  // namespace

ImageBatch gaussian_blur(const ImageBatch& batch, double sigma, std::size_t kernel_size) {
    check_batch(batch);
    if (kernel_size % 2 == 0) throw InvalidConfig("blur kernel size must be odd");
    if (kernel_size == 1) return batch;
    const auto kernel = gaussian_kernel(sigma, kernel_size);
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kernel_size / 2);
    const std::size_t planes = batch.dim(0) * batch.dim(1), h = batch.dim(2), w = batch.dim(3);

    ImageBatch out(batch.shape());
    std::vector<double> tmp(h * w);
    for (std::size_t p = 0; p < planes; ++p) {
        const float* src = batch.data().data() + p * h * w;
        float* dst = out.data().data() + p * h * w;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t d = -r; d <= r; ++d)
                    acc += kernel[static_cast<std::size_t>(d + r)] *
                           src[y * w + reflect(static_cast<std::ptrdiff_t>(x) + d, w)];
                tmp[y * w + x] = acc;
            }
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t d = -r; d <= r; ++d)
                    acc += kernel[static_cast<std::size_t>(d + r)] *
                           tmp[reflect(static_cast<std::ptrdiff_t>(y) + d, h) * w + x];
                dst[y * w + x] = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
            }
    }
    return out;
}

ImageBatch corrupt(const ImageBatch& batch, const CorruptionConfig& cfg, std::size_t first_index) {
    check_batch(batch);
    const double param = cfg.parameter();
    if (cfg.kind == CorruptionKind::gaussian_blur) return gaussian_blur(batch, param, blur_kernel_size(param));

    ImageBatch out = batch;
    const std::size_t row = batch.row_size();
    for (std::size_t i = 0; i < batch.dim(0); ++i) {
        Rng rng(derive_seed(cfg.seed, first_index + i));
        auto src = batch.row(i);
        auto dst = out.row(i);
        switch (cfg.kind) {
            case CorruptionKind::gaussian_noise:
                for (std::size_t k = 0; k < row; ++k) dst[k] = static_cast<float>(src[k] + param * rng.normal());
                break;
            case CorruptionKind::shot_noise:
                for (std::size_t k = 0; k < row; ++k) {
                    std::poisson_distribution<long> poisson(std::max(0.0, static_cast<double>(src[k])) * param);
                    dst[k] = static_cast<float>(static_cast<double>(poisson(rng.engine())) / param);
                }
                break;
            case CorruptionKind::impulse_noise:
                for (std::size_t k = 0; k < row; ++k) {
                    const double u = rng.uniform();
                    const double salt = rng.uniform();
                    if (u < param) dst[k] = salt < 0.5 ? 0.0f : 1.0f;
                }
                break;
            case CorruptionKind::contrast: {
                double mean = 0.0;
                for (float v : src) mean += v;
                mean /= static_cast<double>(row);
                for (std::size_t k = 0; k < row; ++k) dst[k] = static_cast<float>((src[k] - mean) * param + mean);
                break;
            }
            case CorruptionKind::brightness:
                for (std::size_t k = 0; k < row; ++k) dst[k] = static_cast<float>(src[k] + param);
                break;
            case CorruptionKind::gaussian_blur: break;
        }
        for (auto& v : dst) v = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

std::map<SweepKey, PredictionSet> corruption_sweep(const Model& model, const LabeledDataset& data,
                                                   std::span<const CorruptionKind> kinds,
                                                   std::span<const int> severities, std::uint64_t seed,
                                                   std::size_t batch_size, const ExecPolicy& policy,
                                                   std::optional<double> parameter_override) {
    std::map<SweepKey, PredictionSet> results;
    for (CorruptionKind kind : kinds)
        for (int severity : severities) {
            CorruptionConfig cfg{kind, severity, seed, parameter_override};
            cfg.validate();
            if (data.size() == 0) throw EmptyDataset();
            const ImageBatch corrupted = corrupt(data.images, cfg);
            PredictionSet preds = classify(model, corrupted, data.labels, batch_size, policy);
            preds.provenance = {{"kind", "corruption"},
                                {"corruption", to_string(kind)},
                                {"severity", severity},
                                {"parameter", cfg.parameter()},
                                {"seed", seed}};
            results.emplace(SweepKey{kind, severity}, std::move(preds));
        }
    return results;
}

}  // namespace cwr
