#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ampsynth/spectral.hpp"
#include "ampsynth/volume.hpp"

namespace ampsynth::rass {

/// Amplitude-synthesis hyperparameters (defaults: alpha 3, beta 0.25, gamma 2).
struct RassParams {
  double alpha = 3.0;  ///< overall perturbation scale
  double beta = 0.25;  ///< baseline perturbation applied at every frequency
  double gamma = 2.0;  ///< growth exponent in normalized radius
  std::uint64_t seed = 0;

  void validate() const;
};

/// sigma(r) = (2 alpha r)^gamma + beta for normalized radius r.
double sigma_at_radius(double radius, const RassParams& params);

/// sigma at signed frequency coordinates (one per axis of `shape`). The
/// coordinates are not folded into the centered range.
double sigma_at_frequency(std::span<const long> freqs, const Shape& shape, const RassParams& params);

/// Per-bin perturbation standard deviation in centered layout.
class SigmaField {
public:
  SigmaField(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t idx) const { return data_[idx]; }

private:
  Shape shape_;
  std::vector<double> data_;
};

/// Per-bin nonnegative amplitude multiplier, centrally symmetric.
class DeltaField {
public:
  DeltaField(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t idx) const { return data_[idx]; }

private:
  Shape shape_;
  std::vector<double> data_;
};

SigmaField sigma_field(const Shape& shape, const RassParams& params);

/// Draws delta ~ N(1, sigma^2) once per conjugate pair and writes the same
/// value to both bins, then clamps at 0. A bin's draw is addressed by
/// (seed, lower linear index of its pair), so the field does not depend on
/// traversal order.
DeltaField sample_delta(const SigmaField& sigma, std::uint64_t seed);

AmplitudeField perturb_amplitude(const AmplitudeField& a, const DeltaField& d);

struct AugmentResult {
  Volume volume;
  double relative_residual = 0.0;
};

/// Full amplitude-synthesis pass on one grid.
AugmentResult rass_augment_detailed(const Volume& v, const RassParams& params);
Volume rass_augment(const Volume& v, const RassParams& params);

/// Applies one shared delta field to every channel of a multi-channel image.
/// When given, `max_relative_residual` receives the worst channel residual.
std::vector<Volume> rass_augment_channels(std::span<const Volume> channels, const RassParams& params,
                                          double* max_relative_residual = nullptr);

}  // namespace ampsynth::rass
