#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ampsynth/volume.hpp"

namespace ampsynth::rms {

/// Axis-aligned box; origin + size never exceeds the image shape.
struct MaskRegion {
  std::array<std::size_t, 3> origin{0, 0, 0};
  std::array<std::size_t, 3> size{1, 1, 1};

  friend bool operator==(const MaskRegion&, const MaskRegion&) = default;
};

struct RmsParams {
  std::size_t num_regions = 4;
  std::array<std::size_t, 3> min_size{1, 1, 1};
  std::array<std::size_t, 3> max_size{1, 1, 1};
  std::uint64_t seed = 0;

  void validate(const Shape& shape) const;

  /// Size bounds as fractions of each axis, rounded and kept >= 1.
  /// The default fractions 1/16 and 1/4 perturb local structure only.
  static RmsParams for_shape(const Shape& shape, std::size_t num_regions = 4,
                             double min_fraction = 1.0 / 16.0, double max_fraction = 0.25,
                             std::uint64_t seed = 0);
};

void validate_region(const MaskRegion& region, const Shape& shape);

std::vector<MaskRegion> select_regions(const Shape& shape, const RmsParams& params);

/// Permutes values inside each region in list order; later regions see the
/// output of earlier ones.
Volume shuffle_regions(const Volume& v, std::span<const MaskRegion> regions, std::uint64_t seed);

/// Multi-channel variant: every channel receives the same permutation.
std::vector<Volume> shuffle_regions_channels(std::span<const Volume> channels,
                                             std::span<const MaskRegion> regions, std::uint64_t seed);

Volume rms_augment(const Volume& v, const RmsParams& params);
std::vector<Volume> rms_augment_channels(std::span<const Volume> channels, const RmsParams& params);

}  // namespace ampsynth::rms
