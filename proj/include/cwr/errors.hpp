#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cwr {

/// Base of every error raised by the toolkit. `category()` drives the CLI exit code.
class Error : public std::runtime_error {
public:
    enum class Category { invalid_argument, data, numeric, io };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

class ShapeMismatch : public Error {
public:
    ShapeMismatch(std::size_t layer_index, const std::string& what)
        : Error(Category::invalid_argument,
                "shape mismatch at layer " + std::to_string(layer_index) + ": " + what),
          layer_index_(layer_index) {}

    std::size_t layer_index() const noexcept { return layer_index_; }

private:
    std::size_t layer_index_;
};

class NonFiniteActivation : public Error {
public:
    explicit NonFiniteActivation(const std::string& what)
        : Error(Category::numeric, "non-finite value: " + what) {}
};

class LabelOutOfRange : public Error {
public:
    explicit LabelOutOfRange(const std::string& what)
        : Error(Category::data, "label out of range: " + what) {}
};

class UnknownPreset : public Error {
public:
    explicit UnknownPreset(const std::string& name)
        : Error(Category::invalid_argument, "unknown preset '" + name + "'") {}
};

class EmptyDataset : public Error {
public:
    EmptyDataset() : Error(Category::data, "dataset is empty") {}
};

class InvalidConfig : public Error {
public:
    explicit InvalidConfig(const std::string& what)
        : Error(Category::invalid_argument, what) {}
};

class InvalidSeverity : public Error {
public:
    explicit InvalidSeverity(int severity)
        : Error(Category::invalid_argument,
                "severity must be in [1,5], got " + std::to_string(severity)) {}
};

class EmptyPredictionSet : public Error {
public:
    EmptyPredictionSet() : Error(Category::data, "prediction set is empty") {}
};

class DenominatorZero : public Error {
public:
    explicit DenominatorZero(const std::string& what)
        : Error(Category::data, "zero denominator: " + what) {}
};

class SampleMismatch : public Error {
public:
    explicit SampleMismatch(const std::string& what)
        : Error(Category::data, "sample mismatch: " + what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what)
        : Error(Category::data, "dimension mismatch: " + what) {}
};

class TruncatedFile : public Error {
public:
    explicit TruncatedFile(const std::string& what)
        : Error(Category::data, "truncated file: " + what) {}
};

class LabelByteOutOfRange : public Error {
public:
    LabelByteOutOfRange(std::size_t record, int value)
        : Error(Category::data, "label byte " + std::to_string(value) + " out of range in record " +
                                    std::to_string(record)) {}
};

class InfeasibleSeparation : public Error {
public:
    explicit InfeasibleSeparation(const std::string& what)
        : Error(Category::invalid_argument, "infeasible separation: " + what) {}
};

class ChecksumMismatch : public Error {
public:
    explicit ChecksumMismatch(const std::string& what)
        : Error(Category::data, "checksum mismatch: " + what) {}
};

class VersionUnsupported : public Error {
public:
    explicit VersionUnsupported(int version)
        : Error(Category::data, "unsupported model format version " + std::to_string(version)) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error(Category::data, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

}  // namespace cwr
