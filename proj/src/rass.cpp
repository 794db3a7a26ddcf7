#include "ampsynth/rass.hpp"

#include <algorithm>
#include <cmath>

#include "ampsynth/error.hpp"
#include "ampsynth/random.hpp"

namespace ampsynth::rass {

namespace {

// Stream id separating delta draws from other consumers of the same seed.
constexpr std::uint64_t kDeltaStream = 0x5A5A'0001;

Volume augment_with(const Volume& v, const DeltaField& delta, double* relative_residual) {
  const auto [amplitude, phase] = decompose(fft_forward(v));
  const Spectrum perturbed = recompose(perturb_amplitude(amplitude, delta), phase);
  InverseResult inv = fft_inverse(perturbed, {}, &v);
  if (relative_residual != nullptr) *relative_residual = inv.relative_residual;
  return std::move(inv.volume);
}

}  // namespace

void RassParams::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be >= 0");
  require(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be > 0");
}

double sigma_at_radius(double radius, const RassParams& params) {
  params.validate();
  require(std::isfinite(radius) && radius >= 0.0, "radius must be >= 0");
  return std::pow(2.0 * params.alpha * radius, params.gamma) + params.beta;
}

double sigma_at_frequency(std::span<const long> freqs, const Shape& shape, const RassParams& params) {
  require(freqs.size() == shape.rank(), "frequency coordinate count must equal shape rank");
  return sigma_at_radius(normalized_radius(freqs, shape), params);
}

SigmaField::SigmaField(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  require(data_.size() == shape_.size(), "sigma data length does not match shape " + shape_.str());
  for (double s : data_) require(std::isfinite(s) && s >= 0.0, "sigma values must be finite and >= 0");
}

DeltaField::DeltaField(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  require(data_.size() == shape_.size(), "delta data length does not match shape " + shape_.str());
  for (double d : data_) require(std::isfinite(d) && d >= 0.0, "delta values must be finite and >= 0");
}

SigmaField sigma_field(const Shape& shape, const RassParams& params) {
  params.validate();
  std::vector<double> radius = radius_grid(shape);
  for (double& r : radius) r = std::pow(2.0 * params.alpha * r, params.gamma) + params.beta;
  return SigmaField(shape, std::move(radius));
}

DeltaField sample_delta(const SigmaField& sigma, std::uint64_t seed) {
  const Shape& shape = sigma.shape();
  std::vector<double> delta(shape.size());
  for (std::size_t idx = 0; idx < delta.size(); ++idx) {
    const std::size_t partner = mirror_linear(idx, shape);
    if (partner < idx) {
      delta[idx] = delta[partner];
      continue;
    }
    const double s = sigma[idx];
    delta[idx] = s == 0.0 ? 1.0 : std::max(0.0, 1.0 + s * random::normal(seed, kDeltaStream, idx));
  }
  return DeltaField(shape, std::move(delta));
}

AmplitudeField perturb_amplitude(const AmplitudeField& a, const DeltaField& d) {
  require(a.shape() == d.shape(),
          "amplitude shape " + a.shape().str() + " does not match delta shape " + d.shape().str());
  std::vector<double> out(a.shape().size());
  for (std::size_t idx = 0; idx < out.size(); ++idx) out[idx] = d[idx] * a[idx];
  return AmplitudeField(a.shape(), std::move(out));
}

AugmentResult rass_augment_detailed(const Volume& v, const RassParams& params) {
  const DeltaField delta = sample_delta(sigma_field(v.shape(), params), params.seed);
  double residual = 0.0;
  Volume out = augment_with(v, delta, &residual);
  return {std::move(out), residual};
}

Volume rass_augment(const Volume& v, const RassParams& params) {
  return std::move(rass_augment_detailed(v, params).volume);
}

std::vector<Volume> rass_augment_channels(std::span<const Volume> channels, const RassParams& params,
                                          double* max_relative_residual) {
  std::vector<Volume> out;
  if (channels.empty()) return out;
  const Shape& shape = channels.front().shape();
  for (const Volume& c : channels) require(c.shape() == shape, "all channels must share one shape");
  const DeltaField delta = sample_delta(sigma_field(shape, params), params.seed);
  out.reserve(channels.size());
  double worst = 0.0;
  for (const Volume& c : channels) {
    double residual = 0.0;
    out.push_back(augment_with(c, delta, &residual));
    worst = std::max(worst, residual);
  }
  if (max_relative_residual != nullptr) *max_relative_residual = worst;
  return out;
}

}  // namespace ampsynth::rass
