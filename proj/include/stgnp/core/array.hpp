#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stgnp/core/errors.hpp"

namespace stgnp {

/// Dense row-major array of 64-bit reals. The only tensor type in the library;
/// rank is dynamic but almost everything downstream works with rank-2 views
/// [rows x cols].
class Array {
public:
    Array() = default;

    explicit Array(std::vector<std::size_t> shape_in)
        : shape_(std::move(shape_in)), data_(numel_of(shape_), 0.0) {}

    Array(std::vector<std::size_t> shape_in, std::vector<double> values)
        : shape_(std::move(shape_in)), data_(std::move(values)) {
        if (data_.size() != numel_of(shape_)) {
            throw dim_error("Array: data size " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
        }
    }

    static Array zeros(std::size_t rows, std::size_t cols) { return Array({rows, cols}); }

    static Array full(std::vector<std::size_t> shape_in, double v) {
        Array a(std::move(shape_in));
        std::fill(a.data_.begin(), a.data_.end(), v);
        return a;
    }

    static Array scalar(double v) { return Array({1, 1}, {v}); }

    static Array row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Array({1, n}, std::move(values));
    }

    static Array column(std::vector<double> values) {
        const std::size_t n = values.size();
        return Array({n, 1}, std::move(values));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t dim(std::size_t i) const { return shape_.at(i); }

    /// Rows/cols of the canonical 2-D view: [d0, product(d1..)].
    std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const {
        if (shape_.empty()) return 0;
        std::size_t c = 1;
        for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
        return c;
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at2(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at2(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    bool is_scalar() const { return numel() == 1; }

    bool same_shape(const Array& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Reinterpret as a different shape with the same element count.
    Array reshaped(std::vector<std::size_t> new_shape) const {
        if (numel_of(new_shape) != data_.size()) {
            throw dim_error("reshape: element count mismatch, have " + shape_string(shape_) +
                            " want " + shape_string(new_shape));
        }
        return Array(std::move(new_shape), data_);
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    static std::string shape_string(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    std::string shape_string() const { return shape_string(shape_); }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline bool operator==(const Array& a, const Array& b) {
    return a.shape() == b.shape() && a.values() == b.values();
}

}  // namespace stgnp
