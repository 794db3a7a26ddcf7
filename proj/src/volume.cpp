#include "ampsynth/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ampsynth/error.hpp"

namespace ampsynth {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) : rank_(dims.size()) {
  require(rank_ == 2 || rank_ == 3, "shape must have 2 or 3 axes, got " + std::to_string(rank_));
  for (std::size_t a = 0; a < rank_; ++a) {
    require(dims[a] >= 1, "shape dims must be >= 1");
    dims_[a] = dims[a];
  }
}

std::vector<std::size_t> Shape::dims() const {
  return {dims_.begin(), dims_.begin() + static_cast<std::ptrdiff_t>(rank_)};
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t a = 0; a < rank_; ++a) os << (a ? ", " : "") << dims_[a];
  os << ')';
  return os.str();
}

Volume::Volume(Shape shape, std::vector<double> data, std::string id,
               std::array<double, 3> spacing)
    : shape_(shape), data_(std::move(data)), id_(std::move(id)), spacing_(spacing) {
  require(shape_.rank() == 2 || shape_.rank() == 3, "volume shape must be 2D or 3D");
  require(data_.size() == shape_.size(),
          "volume data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_.str());
  for (double v : data_) require(std::isfinite(v), "volume '" + id_ + "' contains non-finite values");
  for (double s : spacing_) require(std::isfinite(s) && s > 0.0, "volume spacing must be positive");
}

Volume Volume::with_data(std::vector<double> data) const {
  return Volume(shape_, std::move(data), id_, spacing_);
}

double Volume::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace ampsynth
