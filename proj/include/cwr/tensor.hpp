#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cwr/errors.hpp"

namespace cwr {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ')';
    return out.str();
}

/// Dense row-major array; the last axis is contiguous.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
        check_extents();
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_extents();
        if (data_.size() != shape_size(shape_))
            throw InvalidConfig("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    /// Number of elements in one slice along axis 0.
    std::size_t row_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

    std::span<T> row(std::size_t i) { return std::span<T>(data_).subspan(i * row_size(), row_size()); }
    std::span<const T> row(std::size_t i) const {
        return std::span<const T>(data_).subspan(i * row_size(), row_size());
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void check_extents() const {
        for (std::size_t e : shape_)
            if (e == 0) throw InvalidConfig("tensor extents must be positive, got " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<T> data_;
};

/// Batch of images, axes (batch, channel, height, width), values in [0,1].
using ImageBatch = Tensor<float>;

/// Rows [first, first + count) of a batch-major tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& t, std::size_t first, std::size_t count) {
    Shape shape = t.shape();
    shape[0] = count;
    const std::size_t row = t.row_size();
    std::vector<T> data(t.storage().begin() + static_cast<std::ptrdiff_t>(first * row),
                        t.storage().begin() + static_cast<std::ptrdiff_t>((first + count) * row));
    return Tensor<T>(std::move(shape), std::move(data));
}

/// Gathers rows by index into a new tensor.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& t, std::span<const std::size_t> indices) {
    Shape shape = t.shape();
    shape[0] = indices.size();
    const std::size_t row = t.row_size();
    std::vector<T> data;
    data.reserve(indices.size() * row);
    for (std::size_t i : indices) {
        auto r = t.row(i);
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace cwr
