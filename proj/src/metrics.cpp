#include "cwr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cwr {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : classes_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes == 0) throw DimensionMismatch("confusion matrix needs at least one class");
}

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts)
    : classes_(num_classes), counts_(std::move(counts)) {
    if (num_classes == 0 || counts_.size() != num_classes * num_classes)
        throw DimensionMismatch(std::to_string(counts_.size()) + " counts for " + std::to_string(num_classes) +
                                " classes");
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    std::vector<std::uint64_t> flat;
    for (const auto& r : rows) {
        if (r.size() != rows.size()) throw DimensionMismatch("confusion rows must form a square matrix");
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return ConfusionMatrix(rows.size(), std::move(flat));
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
    if (truth >= classes_ || predicted >= classes_)
        throw LabelOutOfRange("(" + std::to_string(truth) + ", " + std::to_string(predicted) + ") in " +
                              std::to_string(classes_) + " classes");
    counts_[truth * classes_ + predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t j = 0; j < classes_; ++j) t += at(j, j);
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t r) const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < classes_; ++c) s += at(r, c);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t r = 0; r < classes_; ++r) s += at(r, c);
    return s;
}

ConfusionMatrix confusion(const PredictionSet& preds) {
    if (preds.size() == 0) throw EmptyPredictionSet();
    preds.validate();
    ConfusionMatrix cm(preds.num_classes);
    for (std::size_t i = 0; i < preds.size(); ++i)
        cm.add(static_cast<std::size_t>(preds.truth[i]), static_cast<std::size_t>(preds.predicted[i]));
    return cm;
}

CfpsResult cfps(const ConfusionMatrix& cm) {
    const std::size_t c = cm.num_classes();
    CfpsResult out{std::vector<double>(c, 0.0), false};
    const std::uint64_t errors = cm.total() - cm.trace();
    if (errors == 0) {
        out.degenerate = true;
        return out;
    }
    for (std::size_t j = 0; j < c; ++j)
        out.scores[j] = static_cast<double>(cm.false_positives(j)) / static_cast<double>(errors);
    return out;
}

std::vector<double> cwa(const ConfusionMatrix& cm) {
    const std::uint64_t n = cm.total();
    if (n == 0) throw EmptyPredictionSet();
    std::vector<double> out(cm.num_classes());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = static_cast<double>(cm.true_positives(j) + cm.true_negatives(j)) / static_cast<double>(n);
    return out;
}

std::vector<std::optional<double>> recall(const ConfusionMatrix& cm) {
    std::vector<std::optional<double>> out(cm.num_classes());
    for (std::size_t j = 0; j < out.size(); ++j) {
        const std::uint64_t row = cm.row_sum(j);
        if (row > 0) out[j] = static_cast<double>(cm.at(j, j)) / static_cast<double>(row);
    }
    return out;
}

double overall_accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t n = cm.total();
    if (n == 0) throw EmptyPredictionSet();
    return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

std::string_view to_string(ClassStrength s) {
    switch (s) {
        case ClassStrength::strong: return "strong";
        case ClassStrength::weak: return "weak";
        case ClassStrength::unknown: return "unknown";
    }
    return "unknown";
}

std::vector<ClassStrength> strong_weak(std::span<const std::optional<double>> recalls, double overall) {
    std::vector<ClassStrength> out;
    out.reserve(recalls.size());
    for (const auto& r : recalls)
        out.push_back(!r ? ClassStrength::unknown : (*r >= overall ? ClassStrength::strong : ClassStrength::weak));
    return out;
}

double targeted_success_rate(const PredictionSet& preds, int target) {
    preds.validate();
    if (target < 0 || static_cast<std::size_t>(target) >= preds.num_classes)
        throw InvalidConfig("target " + std::to_string(target) + " out of range");
    std::uint64_t eligible = 0, hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds.truth[i] == target) continue;
        ++eligible;
        if (preds.predicted[i] == target) ++hits;
    }
    if (eligible == 0) throw DenominatorZero("every sample belongs to target class " + std::to_string(target));
    return static_cast<double>(hits) / static_cast<double>(eligible);
}

std::string_view to_string(SimilarityMode mode) {
    return mode == SimilarityMode::one_hot ? "one_hot" : "recall_vector";
}

SimilarityMode parse_similarity_mode(std::string_view name) {
    if (name == "one_hot") return SimilarityMode::one_hot;
    if (name == "recall_vector") return SimilarityMode::recall_vector;
    throw InvalidConfig("unknown similarity mode '" + std::string(name) + "'");
}

double prediction_similarity(const PredictionSet& a, const PredictionSet& b, SimilarityMode mode) {
    if (a.num_classes != b.num_classes) throw SampleMismatch("class counts differ");
    if (a.size() != b.size()) throw SampleMismatch(std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " samples");
    if (a.truth != b.truth) throw SampleMismatch("ground truth differs; sets do not cover the same samples");
    if (a.size() == 0) throw EmptyPredictionSet();

    if (mode == SimilarityMode::one_hot) {
        std::uint64_t agree = 0;
        for (std::size_t i = 0; i < a.size(); ++i) agree += a.predicted[i] == b.predicted[i];
        return static_cast<double>(agree) / static_cast<double>(a.size());
    }
    const auto ra = recall(confusion(a));
    const auto rb = recall(confusion(b));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t j = 0; j < ra.size(); ++j) {
        const double x = ra[j].value_or(0.0), y = rb[j].value_or(0.0);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

AggregatedConfusion aggregate_confusions(std::span<const ConfusionMatrix> matrices) {
    if (matrices.empty()) throw DimensionMismatch("no matrices to aggregate");
    const std::size_t c = matrices.front().num_classes();
    AggregatedConfusion out{ConfusionMatrix(c), std::vector<double>(c * c, 0.0)};
    for (const auto& m : matrices) {
        if (m.num_classes() != c)
            throw DimensionMismatch(std::to_string(m.num_classes()) + " classes vs " + std::to_string(c));
        for (std::size_t r = 0; r < c; ++r)
            for (std::size_t k = 0; k < c; ++k) out.pooled.add(r, k, m.at(r, k));
    }
    for (std::size_t i = 0; i < c * c; ++i)
        out.mean[i] = static_cast<double>(out.pooled.counts()[i]) / static_cast<double>(matrices.size());
    return out;
}

ClasswiseReport make_report(const PredictionSet& preds, std::vector<std::string> class_names) {
    ClasswiseReport r;
    r.confusion = confusion(preds);
    r.num_classes = preds.num_classes;
    if (class_names.size() != r.num_classes) {
        class_names.clear();
        for (std::size_t j = 0; j < r.num_classes; ++j) class_names.push_back("C" + std::to_string(j + 1));
    }
    r.class_names = std::move(class_names);
    for (std::size_t j = 0; j < r.num_classes; ++j) r.support.push_back(r.confusion.row_sum(j));
    r.recall = recall(r.confusion);
    r.cwa = cwa(r.confusion);
    r.cfps = cfps(r.confusion);
    r.overall_accuracy = overall_accuracy(r.confusion);
    r.strength = strong_weak(r.recall, r.overall_accuracy);
    r.sample_count = r.confusion.total();
    r.misclassified = r.sample_count - r.confusion.trace();
    r.provenance = preds.provenance;
    r.model_hash = preds.model_hash;
    if (preds.provenance.is_object() && preds.provenance.contains("target") && preds.provenance["target"].is_number_integer()) {
        try {
            r.targeted_success_rate = targeted_success_rate(preds, preds.provenance["target"].get<int>());
        } catch (const DenominatorZero&) {
            r.targeted_success_rate.reset();
        }
    }
    return r;
}

}  // namespace cwr
