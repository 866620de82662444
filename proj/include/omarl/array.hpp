#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace omarl {

using Shape = std::vector<std::size_t>;

// Dense row-major block of doubles. Every op treats an array as a matrix of
// rows() x cols(), where cols() is the last dimension.
class Array {
 public:
  Array() : shape_{1}, data_(1, 0.0) {}
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array scalar(double v) { return Array({1}, {v}); }
  static Array matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Array({rows, cols}, fill);
  }
  static Array from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t cols() const { return shape_.back(); }
  std::size_t rows() const { return data_.size() / shape_.back(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  // Value of a one-element array.
  double item() const;
  bool all_finite() const;
  void fill(double v);
  Array reshaped(Shape shape) const;

  bool same_shape(const Array& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

}  // namespace omarl
