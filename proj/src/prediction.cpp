#include "cwr/prediction.hpp"

#include <algorithm>

#include "cwr/model_io.hpp"

namespace cwr {

PredictionSet PredictionSet::from_labels(std::size_t num_classes, std::vector<int> truth, std::vector<int> predicted) {
    PredictionSet p;
    p.num_classes = num_classes;
    p.truth = std::move(truth);
    p.predicted = std::move(predicted);
    p.validate();
    return p;
}

void PredictionSet::validate() const {
    if (num_classes == 0) throw InvalidConfig("prediction set has zero classes");
    if (truth.size() != predicted.size())
        throw SampleMismatch(std::to_string(truth.size()) + " labels vs " + std::to_string(predicted.size()) +
                             " predictions");
    auto check = [&](const std::vector<int>& v, const char* what) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (v[i] < 0 || static_cast<std::size_t>(v[i]) >= num_classes)
                throw LabelOutOfRange(std::string(what) + " " + std::to_string(v[i]) + " at sample " +
                                      std::to_string(i));
    };
    check(truth, "ground truth");
    check(predicted, "prediction");
    if (!logits.empty()) {
        if (logits.size() != truth.size() * num_classes) throw SampleMismatch("logit count does not match N x C");
        for (std::size_t i = 0; i < truth.size(); ++i) {
            auto first = logits.begin() + static_cast<std::ptrdiff_t>(i * num_classes);
            const int arg = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(num_classes)) - first);
            if (arg != predicted[i])
                throw SampleMismatch("prediction at sample " + std::to_string(i) + " is not the logit argmax");
        }
    }
}

PredictionSet classify(const Model& model, const ImageBatch& images, const std::vector<int>& truth,
                       std::size_t batch_size, const ExecPolicy& policy) {
    if (truth.empty()) throw EmptyDataset();
    batch_size = std::max<std::size_t>(1, batch_size);
    PredictionSet out;
    out.num_classes = model.num_classes;
    out.truth = truth;
    out.model_hash = model_hash(model);
    out.logits.reserve(truth.size() * model.num_classes);
    for (std::size_t first = 0; first < truth.size(); first += batch_size) {
        const std::size_t count = std::min(batch_size, truth.size() - first);
        const Tensor<float> logits = forward(model, slice_rows(images, first, count), policy);
        out.logits.insert(out.logits.end(), logits.storage().begin(), logits.storage().end());
        const auto labels = argmax_rows(logits);
        out.predicted.insert(out.predicted.end(), labels.begin(), labels.end());
    }
    out.provenance = {{"kind", "clean"}};
    out.validate();
    return out;
}

PredictionSet evaluate(const Model& model, const LabeledDataset& data, std::size_t batch_size,
                       const ExecPolicy& policy) {
    if (data.size() == 0) throw EmptyDataset();
    return classify(model, data.images, data.labels, batch_size, policy);
}

}  // namespace cwr
