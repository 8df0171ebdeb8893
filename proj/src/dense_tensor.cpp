#include "msntucf/dense_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "msntucf/error.hpp"

namespace msntucf {

std::size_t shape_volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

DenseTensor::DenseTensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_volume(shape_)) {
    fail(ErrorKind::Shape, "data length " + std::to_string(data_.size()) +
                               " does not match shape " + shape_string(shape_));
  }
}

DenseTensor DenseTensor::vector(std::initializer_list<double> values) {
  return DenseTensor({values.size()}, std::vector<double>(values));
}

DenseTensor DenseTensor::reshaped(Shape shape) const {
  if (shape_volume(shape) != data_.size()) {
    fail(ErrorKind::Shape, "cannot reshape " + shape_string(shape_) + " to " +
                               shape_string(shape));
  }
  return DenseTensor(std::move(shape), data_);
}

void DenseTensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void DenseTensor::add_scaled(const DenseTensor& other, double scale) {
  if (other.shape_ != shape_) {
    fail(ErrorKind::Shape, "add_scaled: " + shape_string(shape_) + " vs " +
                               shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

bool DenseTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

Parameter::Parameter(std::string name_, DenseTensor value_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.shape()),
      first_moment(value.shape()),
      second_moment(value.shape()) {}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Numerical: return "numerical error";
  }
  return "error";
}

}  // namespace msntucf
