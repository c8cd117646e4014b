#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cwr/dataset.hpp"

namespace cwr {

/// Per-record layout of the CIFAR-10 binary format: 1 label byte, then the
/// image as channel planes, each row-major. Pixels map to [0,1] by /255.
inline const Shape kCifarImageShape{3, 32, 32};
inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Parses records of `image_shape` (CIFAR-10 layout generalised to any
/// channel-planar shape). Throws TruncatedFile when the length is not a
/// multiple of the record size and LabelByteOutOfRange for labels >= num_classes.
LabeledDataset parse_dataset_binary(std::span<const std::uint8_t> bytes, const Shape& image_shape,
                                    std::size_t num_classes);

/// Inverse of parse_dataset_binary; pixels are rounded to the nearest /255 level.
std::vector<std::uint8_t> serialize_dataset_binary(const LabeledDataset& data);

LabeledDataset load_cifar_binary(const std::filesystem::path& path);

/// Writes the binary payload plus a `<path>.json` manifest sidecar.
void save_dataset(const LabeledDataset& data, const std::filesystem::path& path);

/// Reads a payload written by save_dataset, checking the manifest checksum.
LabeledDataset load_dataset(const std::filesystem::path& path);

struct SyntheticSpec {
    std::size_t num_classes = 10;
    std::size_t per_class = 100;
    Shape image_shape{3, 16, 16};
    double separation = 0.5;  // minimum pairwise max-norm distance between class templates
    double noise = 0.1;       // std-dev of the Gaussian pixel noise
    std::size_t block = 4;    // templates are constant on block x block tiles
    std::uint64_t seed = 0;   // template seed
    std::uint64_t split = 0;  // selects an independent noise stream (0 train, 1 test, ...)
};

/// Class templates drawn from the template seed, one per class, on the /255 grid.
std::vector<std::vector<float>> synthetic_templates(const SyntheticSpec& spec);

/// Template-plus-noise dataset; samples cycle through the classes so every
/// prefix is class balanced. Throws InfeasibleSeparation when the separation
/// cannot be met inside [0,1].
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace cwr
