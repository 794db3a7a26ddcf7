#pragma once

#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

#include "ampsynth/volume.hpp"

namespace ampsynth {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Centered frequency layout
//
// Along an axis of extent n, array index c holds signed frequency
// c - floor(n/2), so frequencies span [-floor(n/2), ceil(n/2) - 1] and DC sits
// at floor(n/2). The conjugate partner of frequency m is -m folded back into
// that range; for even n the Nyquist bin (m = -n/2) is its own partner.
// ---------------------------------------------------------------------------

inline long centered_frequency(std::size_t index, std::size_t n) noexcept {
  return static_cast<long>(index) - static_cast<long>(n / 2);
}

inline std::size_t mirror_index(std::size_t index, std::size_t n) noexcept {
  const std::size_t half = n / 2;
  const std::size_t standard = (index + n - half) % n;
  const std::size_t partner = (n - standard) % n;
  return (partner + half) % n;
}

/// Linear index of the conjugate partner of a centered bin.
std::size_t mirror_linear(std::size_t linear, const Shape& shape) noexcept;

/// sqrt(sum m_a^2 / sum n_a^2) over the axes of `shape`.
double normalized_radius(std::span<const long> freqs, const Shape& shape) noexcept;

/// Normalized radius of every centered bin, row-major.
std::vector<double> radius_grid(const Shape& shape);

// ---------------------------------------------------------------------------
// Spectral types
// ---------------------------------------------------------------------------

/// Complex grid in centered layout; forward transform unnormalized.
class Spectrum {
public:
  Spectrum(Shape shape, std::vector<Complex> data);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const Complex> data() const noexcept { return data_; }
  Complex operator[](std::size_t idx) const { return data_[idx]; }
  Complex at_dc() const { return data_[dc_index()]; }
  std::size_t dc_index() const noexcept;

private:
  Shape shape_;
  std::vector<Complex> data_;
};

/// Nonnegative modulus grid in centered layout.
class AmplitudeField {
public:
  AmplitudeField(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t idx) const { return data_[idx]; }

private:
  Shape shape_;
  std::vector<double> data_;
};

/// Principal-argument grid, values in (-pi, pi].
class PhaseField {
public:
  PhaseField(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::span<const double> data() const noexcept { return data_; }
  double operator[](std::size_t idx) const { return data_[idx]; }

private:
  Shape shape_;
  std::vector<double> data_;
};

struct InverseOptions {
  /// Largest tolerated max|Im x| relative to max|S|/N before the spectrum is
  /// rejected as non-Hermitian.
  double residual_ceiling = 1e-3;
};

struct InverseResult {
  Volume volume;
  /// max |Im x| over the output grid, after the 1/N scaling.
  double imag_residual = 0.0;
  /// imag_residual / (max|S| / N); 0 for an all-zero spectrum.
  double relative_residual = 0.0;
};

/// Centered-layout DFT of a real grid. Forward sums; inverse divides by N.
Spectrum fft_forward(const Volume& v);

/// Inverse DFT returning the real part. The output volume takes its id and
/// spacing from `like` when given. Throws kSymmetryViolation when the
/// relative residual exceeds the ceiling.
InverseResult fft_inverse(const Spectrum& s, const InverseOptions& options = {},
                          const Volume* like = nullptr);

std::pair<AmplitudeField, PhaseField> decompose(const Spectrum& s);

/// Bin-wise a * exp(i p).
Spectrum recompose(const AmplitudeField& a, const PhaseField& p);

}  // namespace ampsynth
