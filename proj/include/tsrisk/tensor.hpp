#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tsrisk {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor row_vector(std::span<const double> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // Leading dimension, and the product of the remaining ones.
    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<double> row(std::size_t r);
    std::span<const double> row(std::size_t r) const;

    void fill(double value);
    void reshape(Shape shape);

    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Same shape and identical bit patterns for every element.
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Largest |a_i - b_i|; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Rows of `source` picked by index, in the given order.
Tensor select_rows(const Tensor& source, std::span<const std::size_t> rows);

} // namespace tsrisk
