#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cwr/dataset.hpp"
#include "cwr/engine.hpp"
#include "cwr/prediction.hpp"

namespace cwr {

enum class CorruptionKind { gaussian_noise, shot_noise, impulse_noise, gaussian_blur, contrast, brightness };

std::string_view to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(std::string_view name);
const std::vector<CorruptionKind>& all_corruption_kinds();

/// Severity table, index 0 = severity 1.
///
///   gaussian_noise  sigma of additive N(0, sigma^2)        .04 .06 .08 .09 .10
///   shot_noise      photon count c, x' = Poisson(x c) / c   500 250 100  75  50
///   impulse_noise   salt-and-pepper fraction               .01 .02 .03 .05 .07
///   gaussian_blur   kernel sigma (pixels), size 2*ceil(2s)+1 0.4 0.6 0.7 0.8 1.0
///   contrast        factor c, x' = (x - mean) c + mean       .75 .50 .40 .30 .15
///   brightness      offset d, x' = x + d                     .05 .10 .15 .20 .30
double severity_parameter(CorruptionKind kind, int severity);

struct CorruptionConfig {
    CorruptionKind kind = CorruptionKind::gaussian_noise;
    int severity = 1;
    std::uint64_t seed = 0;
    /// Replaces the table value, e.g. blur sigma 0 (a 1-tap kernel, the identity).
    std::optional<double> parameter_override;

    double parameter() const;
    void validate() const;
};

/// Separable Gaussian blur with reflected-edge padding; kernel_size must be odd.
ImageBatch gaussian_blur(const ImageBatch& batch, double sigma, std::size_t kernel_size);

/// Kernel size used for a blur sigma: 2*ceil(2 sigma) + 1.
std::size_t blur_kernel_size(double sigma);

/// Applies the corruption; output clamped to [0,1]. Stochastic kinds draw row
/// i from the stream derive_seed(cfg.seed, first_index + i).
ImageBatch corrupt(const ImageBatch& batch, const CorruptionConfig& cfg, std::size_t first_index = 0);

using SweepKey = std::pair<CorruptionKind, int>;

/// One clean-label evaluation per (kind, severity) on the corrupted dataset.
std::map<SweepKey, PredictionSet> corruption_sweep(const Model& model, const LabeledDataset& data,
                                                   std::span<const CorruptionKind> kinds,
                                                   std::span<const int> severities, std::uint64_t seed = 0,
                                                   std::size_t batch_size = 100, const ExecPolicy& policy = {},
                                                   std::optional<double> parameter_override = std::nullopt);

}  // namespace cwr
