#include "omarl/array.hpp"

#include <cmath>
#include <sstream>

#include "omarl/errors.hpp"

namespace omarl {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static void check_shape(const Shape& shape) {
  if (shape.empty()) throw ConfigError("array shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw ConfigError("array shape " + shape_string(shape) + " has a zero dimension");
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size())
    throw ConfigError("array shape " + shape_string(shape_) + " does not match " +
                      std::to_string(data_.size()) + " values");
}

Array Array::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ConfigError("ragged rows in Array::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Array({r, c}, std::move(data));
}

double Array::item() const {
  if (data_.size() != 1) throw UsageError("item() on array of shape " + shape_string(shape_));
  return data_[0];
}

bool Array::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Array Array::reshaped(Shape shape) const { return Array(std::move(shape), data_); }

}  // namespace omarl
