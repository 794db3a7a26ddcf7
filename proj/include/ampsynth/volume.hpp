#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ampsynth {

/// Extent of a 2D (H, W) or 3D (H, W, D) grid. Storage is row-major with the
/// last axis fastest.
class Shape {
public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::span<const std::size_t> dims);

  std::size_t rank() const noexcept { return rank_; }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }

  /// Extents padded to three axes with trailing 1s; lets 2D and 3D share loops.
  const std::array<std::size_t, 3>& padded() const noexcept { return dims_; }

  std::size_t size() const noexcept { return dims_[0] * dims_[1] * dims_[2]; }

  std::size_t linear(std::size_t i, std::size_t j, std::size_t k = 0) const noexcept {
    return (i * dims_[1] + j) * dims_[2] + k;
  }

  std::vector<std::size_t> dims() const;
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

private:
  std::size_t rank_ = 0;
  std::array<std::size_t, 3> dims_{1, 1, 1};
};

/// Real-valued intensity grid. Values are finite and immutable after
/// construction; derived images are new Volumes sharing the metadata.
class Volume {
public:
  Volume(Shape shape, std::vector<double> data, std::string id = {},
         std::array<double, 3> spacing = {1.0, 1.0, 1.0});

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::array<double, 3>& spacing() const noexcept { return spacing_; }
  const std::string& id() const noexcept { return id_; }

  double operator[](std::size_t idx) const { return data_[idx]; }

  /// Same shape, spacing and id with new values.
  Volume with_data(std::vector<double> data) const;

  double max_abs() const noexcept;

private:
  Shape shape_;
  std::vector<double> data_;
  std::string id_;
  std::array<double, 3> spacing_;
};

}  // namespace ampsynth
