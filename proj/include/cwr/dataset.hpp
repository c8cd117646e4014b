#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwr/tensor.hpp"

namespace cwr {

enum class DatasetSource { cifar_binary, synthetic, archive };

std::string_view to_string(DatasetSource source);
DatasetSource parse_dataset_source(std::string_view name);

/// The ten CIFAR-10 class names in label order.
const std::vector<std::string>& cifar10_class_names();

struct DatasetManifest {
    std::string name;
    std::size_t num_classes = 0;
    std::vector<std::string> class_names;
    std::size_t count = 0;
    Shape image_shape;
    DatasetSource source = DatasetSource::synthetic;
    std::uint64_t seed = 0;
    std::string checksum;  // crc32 of the binary payload, 8 hex digits
    nlohmann::json provenance;  // optional: how an archive was produced (attack/corruption config, model hash)

    nlohmann::json to_json() const;
    static DatasetManifest from_json(const nlohmann::json& j);
};

/// Images in [0,1] with integer labels. `images` is empty when count == 0.
struct LabeledDataset {
    DatasetManifest manifest;
    ImageBatch images;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t num_classes() const noexcept { return manifest.num_classes; }

    ImageBatch batch(std::size_t first, std::size_t count) const { return slice_rows(images, first, count); }
    std::span<const int> batch_labels(std::size_t first, std::size_t count) const {
        return std::span<const int>(labels).subspan(first, count);
    }

    /// Throws LabelOutOfRange / InvalidConfig when the invariants are broken.
    void validate() const;
};

}  // namespace cwr
