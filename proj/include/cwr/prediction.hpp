#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwr/dataset.hpp"
#include "cwr/engine.hpp"

namespace cwr {

/// Ground truth, predicted label and logits for every sample of one pass.
struct PredictionSet {
    std::size_t num_classes = 0;
    std::vector<int> truth;
    std::vector<int> predicted;
    std::vector<float> logits;  // N x C row-major; may be empty for label-only sets
    nlohmann::json provenance = nlohmann::json::object();
    std::string model_hash;

    std::size_t size() const noexcept { return truth.size(); }

    /// Label-only set, e.g. built from raw (truth, prediction) pairs.
    static PredictionSet from_labels(std::size_t num_classes, std::vector<int> truth, std::vector<int> predicted);

    /// Labels in range, equal lengths, predicted == argmax(logits) with ties to the lowest index.
    void validate() const;
};

/// Clean forward classification of a whole dataset.
PredictionSet evaluate(const Model& model, const LabeledDataset& data, std::size_t batch_size = 100,
                       const ExecPolicy& policy = {});

/// Classifies an already-prepared batch archive (attacked or corrupted) with labels from `data`.
PredictionSet classify(const Model& model, const ImageBatch& images, const std::vector<int>& truth,
                       std::size_t batch_size = 100, const ExecPolicy& policy = {});

}  // namespace cwr
