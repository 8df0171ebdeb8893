#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace msntucf {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major n-dimensional array of doubles.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape, double fill = 0.0);
  DenseTensor(Shape shape, std::vector<double> data);

  static DenseTensor vector(std::initializer_list<double> values);
  static DenseTensor scalar(double value) { return DenseTensor({1}, {value}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t flat) noexcept { return data_[flat]; }
  double operator[](std::size_t flat) const noexcept { return data_[flat]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double& at(std::size_t p, std::size_t q, std::size_t r) {
    return data_[(p * shape_[1] + q) * shape_[2] + r];
  }
  double at(std::size_t p, std::size_t q, std::size_t r) const {
    return data_[(p * shape_[1] + q) * shape_[2] + r];
  }

  /// Same data, new shape of equal volume.
  DenseTensor reshaped(Shape shape) const;

  void fill(double value);
  void add_scaled(const DenseTensor& other, double scale = 1.0);
  bool all_finite() const;

  bool operator==(const DenseTensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// A trainable tensor with its gradient accumulator and Adam moment slots.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, DenseTensor value);

  std::string name;
  DenseTensor value;
  DenseTensor grad;
  DenseTensor first_moment;
  DenseTensor second_moment;

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace msntucf
