#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "hyla/alloc_counter.hpp"
#include "hyla/error.hpp"

namespace hyla {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Non-owning row-major matrix window used by the kernels so they can write
// into caller-provided buffers.
template <class T>
struct MatrixRef {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::span<T> data;

    std::span<T> row(std::size_t i) const { return data.subspan(i * cols, cols); }
    T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Dense row-major array of reals. Storage is counted by AllocCounter.
template <class T>
class DenseArray {
public:
    using value_type = T;

    DenseArray() = default;

    explicit DenseArray(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), T{0}) {}

    DenseArray(Shape shape, std::span<const T> values) : shape_(std::move(shape)), data_(values.begin(), values.end()) {
        if (data_.size() != shape_size(shape_))
            throw DimensionError("DenseArray: " + std::to_string(data_.size()) + " values for shape " +
                                 shape_string(shape_));
    }

    DenseArray(Shape shape, std::initializer_list<T> values)
        : DenseArray(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

    static DenseArray matrix(std::initializer_list<std::initializer_list<T>> rows) {
        const std::size_t n = rows.size();
        const std::size_t m = n ? rows.begin()->size() : 0;
        DenseArray out({n, m});
        std::size_t i = 0;
        for (const auto& r : rows) {
            if (r.size() != m) throw DimensionError("DenseArray::matrix: ragged rows");
            std::copy(r.begin(), r.end(), out.data_.begin() + static_cast<std::ptrdiff_t>(i * m));
            ++i;
        }
        return out;
    }

    static DenseArray vector(std::initializer_list<T> values) { return DenseArray({values.size()}, values); }

    static DenseArray identity(std::size_t n) {
        DenseArray out({n, n});
        for (std::size_t i = 0; i < n; ++i) out.data_[i * n + i] = T{1};
        return out;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    // Leading extent and the product of the remaining ones; a rank-1 array is one row.
    std::size_t rows() const noexcept {
        if (shape_.empty()) return 1;
        return shape_.size() == 1 ? 1 : shape_[0];
    }
    std::size_t cols() const noexcept {
        if (shape_.empty()) return 1;
        return shape_.size() == 1 ? shape_[0] : data_.size() / std::max<std::size_t>(shape_[0], 1);
    }

    std::span<const T> values() const noexcept { return {data_.data(), data_.size()}; }
    std::span<T> values() noexcept { return {data_.data(), data_.size()}; }

    std::span<const T> row(std::size_t i) const { return values().subspan(i * cols(), cols()); }
    std::span<T> row(std::size_t i) { return values().subspan(i * cols(), cols()); }

    const T& operator[](std::size_t i) const { return data_[i]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }
    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }

    MatrixRef<const T> view() const { return {rows(), cols(), values()}; }
    MatrixRef<T> view() { return {rows(), cols(), values()}; }

    DenseArray reshaped(Shape shape) const {
        if (shape_size(shape) != size())
            throw DimensionError("reshape " + shape_string(shape_) + " -> " + shape_string(shape));
        DenseArray out = *this;
        out.shape_ = std::move(shape);
        return out;
    }

    template <class U>
    DenseArray<U> cast() const {
        DenseArray<U> out(shape_);
        std::transform(data_.begin(), data_.end(), out.values().begin(), [](T v) { return static_cast<U>(v); });
        return out;
    }

    bool operator==(const DenseArray& other) const {
        return shape_ == other.shape_ && std::equal(data_.begin(), data_.end(), other.data_.begin(), other.data_.end());
    }

private:
    Shape shape_;
    counted_vector<T> data_;
};

using Array = DenseArray<double>;

inline void require_matrix(const Shape& s, const char* what) {
    if (s.size() != 2) throw DimensionError(std::string(what) + ": expected a matrix, got shape " + shape_string(s));
}

// C = A * B with fixed k-ascending accumulation per output entry.
template <class T>
void matmul_into(MatrixRef<const T> a, MatrixRef<const T> b, MatrixRef<T> c) {
    if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
        throw DimensionError("matmul: [" + std::to_string(a.rows) + "x" + std::to_string(a.cols) + "] * [" +
                             std::to_string(b.rows) + "x" + std::to_string(b.cols) + "]");
    std::fill(c.data.begin(), c.data.end(), T{0});
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* crow = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const T aik = a(i, k);
            const T* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <class T>
DenseArray<T> matmul(const DenseArray<T>& a, const DenseArray<T>& b) {
    require_matrix(a.shape(), "matmul lhs");
    require_matrix(b.shape(), "matmul rhs");
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions " + shape_string(a.shape()) + " * " + shape_string(b.shape()));
    DenseArray<T> c({a.rows(), b.cols()});
    matmul_into(a.view(), b.view(), c.view());
    return c;
}

template <class T>
DenseArray<T> transpose(const DenseArray<T>& a) {
    require_matrix(a.shape(), "transpose");
    DenseArray<T> out({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

template <class T>
std::remove_cv_t<T> norm(std::span<T> v) {
    std::remove_cv_t<T> s{0};
    for (auto x : v) s += x * x;
    return std::sqrt(s);
}

template <class T, class U>
std::remove_cv_t<T> dot(std::span<T> a, std::span<U> b) {
    std::remove_cv_t<T> s{0};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Euclidean norm over the last axis; a rank-1 input is a single row.
template <class T>
DenseArray<T> row_norms(const DenseArray<T>& a) {
    DenseArray<T> out({a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = norm(a.row(i));
    return out;
}

template <class T, class F>
DenseArray<T> map_elementwise(const DenseArray<T>& a, F&& f) {
    DenseArray<T> out(a.shape());
    std::transform(a.values().begin(), a.values().end(), out.values().begin(), std::forward<F>(f));
    return out;
}

template <class T>
bool all_finite(const DenseArray<T>& a) {
    return std::all_of(a.values().begin(), a.values().end(), [](T v) { return std::isfinite(v); });
}

// Throws NumericError when the array holds NaN or Inf.
template <class T>
const DenseArray<T>& require_finite(const DenseArray<T>& a, const char* what) {
    if (!all_finite(a)) throw NumericError(std::string(what) + ": non-finite value");
    return a;
}

template <class T>
DenseArray<T> add(const DenseArray<T>& a, const DenseArray<T>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    DenseArray<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <class T>
DenseArray<T> scale(const DenseArray<T>& a, T s) {
    return map_elementwise(a, [s](T v) { return v * s; });
}

template <class T>
T max_abs_diff(const DenseArray<T>& a, const DenseArray<T>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    T m{0};
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Rows [begin, begin + count) of a matrix.
template <class T>
DenseArray<T> slice_rows(const DenseArray<T>& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.rows()) throw DimensionError("slice_rows: range past end");
    DenseArray<T> out({count, a.cols()});
    std::copy_n(a.values().begin() + static_cast<std::ptrdiff_t>(begin * a.cols()), count * a.cols(),
                out.values().begin());
    return out;
}

template <class T>
DenseArray<T> mean_rows(const DenseArray<T>& a) {
    DenseArray<T> out({a.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j);
    if (a.rows() > 0)
        for (auto& v : out.values()) v /= static_cast<T>(a.rows());
    return out;
}

} // namespace hyla
