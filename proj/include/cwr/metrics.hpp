#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwr/prediction.hpp"

namespace cwr {

/// C x C counts; entry (r, c) = samples with ground truth r predicted as c.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t num_classes);
    /// Row-major counts, length C * C.
    ConfusionMatrix(std::size_t num_classes, std::vector<std::uint64_t> counts);
    static ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows);

    std::size_t num_classes() const noexcept { return classes_; }
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth * classes_ + predicted); }
    void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    std::uint64_t total() const;
    std::uint64_t trace() const;
    std::uint64_t row_sum(std::size_t r) const;
    std::uint64_t col_sum(std::size_t c) const;

    std::uint64_t true_positives(std::size_t j) const { return at(j, j); }
    std::uint64_t false_positives(std::size_t j) const { return col_sum(j) - at(j, j); }
    std::uint64_t false_negatives(std::size_t j) const { return row_sum(j) - at(j, j); }
    std::uint64_t true_negatives(std::size_t j) const { return total() - row_sum(j) - col_sum(j) + at(j, j); }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t classes_ = 0;
    std::vector<std::uint64_t> counts_;
};

/// Throws EmptyPredictionSet for N == 0.
ConfusionMatrix confusion(const PredictionSet& preds);

struct CfpsResult {
    std::vector<double> scores;
    bool degenerate = false;  // no misclassifications; scores are all zero
};

/// Class False Positive Score: for each class j, the share of all
/// misclassified samples that were predicted as j.
CfpsResult cfps(const ConfusionMatrix& cm);

/// Class-wise accuracy (TP_j + TN_j) / N, counting true negatives over the whole set.
std::vector<double> cwa(const ConfusionMatrix& cm);

/// Per-class recall cm[j,j] / row_j; missing for classes without samples.
std::vector<std::optional<double>> recall(const ConfusionMatrix& cm);

/// trace / N.
double overall_accuracy(const ConfusionMatrix& cm);

enum class ClassStrength { strong, weak, unknown };

std::string_view to_string(ClassStrength s);

/// Strong when recall >= overall accuracy (ties are strong), weak otherwise,
/// unknown when recall is missing.
std::vector<ClassStrength> strong_weak(std::span<const std::optional<double>> recalls, double overall);

/// |{i : y_i != t, f(x_i) = t}| / |{i : y_i != t}|. Throws DenominatorZero
/// when every sample belongs to the target class.
double targeted_success_rate(const PredictionSet& preds, int target);

enum class SimilarityMode {
    one_hot,        // cosine of the N x C one-hot prediction matrices = agreement / N
    recall_vector,  // cosine of the per-class recall vectors
};

std::string_view to_string(SimilarityMode mode);
SimilarityMode parse_similarity_mode(std::string_view name);

/// Cosine similarity of two prediction sets over the same samples. Throws
/// SampleMismatch when sizes, classes or ground truth differ.
double prediction_similarity(const PredictionSet& a, const PredictionSet& b,
                             SimilarityMode mode = SimilarityMode::one_hot);

struct AggregatedConfusion {
    ConfusionMatrix pooled;     // elementwise sum
    std::vector<double> mean;   // elementwise arithmetic mean, row-major
};

/// Throws DimensionMismatch when class counts differ or the list is empty.
AggregatedConfusion aggregate_confusions(std::span<const ConfusionMatrix> matrices);

/// Full class-wise metric suite for one prediction set.
struct ClasswiseReport {
    std::size_t num_classes = 0;
    std::vector<std::string> class_names;
    std::vector<std::uint64_t> support;
    std::vector<std::optional<double>> recall;
    std::vector<double> cwa;
    CfpsResult cfps;
    std::vector<ClassStrength> strength;
    double overall_accuracy = 0.0;
    std::uint64_t sample_count = 0;
    std::uint64_t misclassified = 0;
    ConfusionMatrix confusion;
    std::optional<double> targeted_success_rate;  // targeted attacks only
    nlohmann::json provenance = nlohmann::json::object();
    std::string model_hash;
};

/// Builds the report. Class names default to "C1".."CC" when not given.
ClasswiseReport make_report(const PredictionSet& preds, std::vector<std::string> class_names = {});

}  // namespace cwr
