#include "tsrisk/tensor.hpp"

#include "tsrisk/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace tsrisk {

std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape)
{
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            out += "x";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values))
{
    if (data_.size() != shape_size(shape_)) {
        throw ShapeError("tensor: " + std::to_string(data_.size()) + " values do not fill shape " +
                         shape_string(shape_));
    }
}

Tensor Tensor::scalar(double value)
{
    return Tensor({1, 1}, std::vector<double>{value});
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw ShapeError("tensor: ragged rows");
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

Tensor Tensor::row_vector(std::span<const double> values)
{
    return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const
{
    return shape_.empty() ? 1 : shape_[0];
}

std::size_t Tensor::cols() const
{
    if (shape_.size() <= 1) {
        return 1;
    }
    return std::accumulate(shape_.begin() + 1, shape_.end(), std::size_t{1}, std::multiplies<>());
}

std::span<double> Tensor::row(std::size_t r)
{
    const std::size_t c = cols();
    return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const
{
    const std::size_t c = cols();
    return std::span<const double>(data_).subspan(r * c, c);
}

void Tensor::fill(double value)
{
    std::fill(data_.begin(), data_.end(), value);
}

void Tensor::reshape(Shape shape)
{
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
    }
    shape_ = std::move(shape);
}

bool bitwise_equal(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) {
        return false;
    }
    return a.size() == 0 || std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) {
        throw ShapeError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

Tensor select_rows(const Tensor& source, std::span<const std::size_t> rows)
{
    Shape shape = source.shape();
    if (shape.empty()) {
        throw ShapeError("select_rows: scalar tensor");
    }
    shape[0] = rows.size();
    Tensor out(shape);
    const std::size_t c = source.cols();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= source.rows()) {
            throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " out of range");
        }
        std::copy_n(source.row(rows[i]).begin(), c, out.row(i).begin());
    }
    return out;
}

} // namespace tsrisk
