#include "ampsynth/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <numbers>

#include "ampsynth/error.hpp"

namespace ampsynth {

namespace {

// FFTW planning is not thread-safe, execution is. Plans are built once per
// (shape, direction) under a lock and then executed concurrently through the
// new-array interface on fftw_malloc'd buffers, which keeps alignment equal to
// the planning buffers.
class PlanCache {
public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const Shape& shape, int sign) {
    const Key key{shape.padded(), shape.rank(), sign};
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::array<int, 3> n{};
    for (std::size_t a = 0; a < shape.rank(); ++a) n[a] = static_cast<int>(shape[a]);
    const std::size_t total = shape.size();
    auto* in = fftw_alloc_complex(total);
    auto* out = fftw_alloc_complex(total);
    fftw_plan plan = fftw_plan_dft(static_cast<int>(shape.rank()), n.data(), in, out, sign,
                                   FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    if (plan == nullptr) fail(ErrorCode::kValidation, "FFTW could not plan shape " + shape.str());
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

private:
  using Key = std::tuple<std::array<std::size_t, 3>, std::size_t, int>;
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer make_buffer(std::size_t n) {
  FftwBuffer buf(fftw_alloc_complex(n));
  if (!buf) throw std::bad_alloc();
  return buf;
}

// standard[u] <-> centered[c] with c = (u + floor(n/2)) mod n on every axis.
template <typename Fn>
void for_each_shifted(const Shape& shape, Fn&& fn) {
  const auto& d = shape.padded();
  for (std::size_t i = 0; i < d[0]; ++i) {
    const std::size_t ci = (i + d[0] / 2) % d[0];
    for (std::size_t j = 0; j < d[1]; ++j) {
      const std::size_t cj = (j + d[1] / 2) % d[1];
      for (std::size_t k = 0; k < d[2]; ++k) {
        const std::size_t ck = (k + d[2] / 2) % d[2];
        fn(shape.linear(i, j, k), shape.linear(ci, cj, ck));
      }
    }
  }
}

double principal_arg(Complex z) {
  if (z == Complex{0.0, 0.0}) return 0.0;
  const double p = std::arg(z);
  return p <= -std::numbers::pi ? std::numbers::pi : p;
}

}  // namespace

std::size_t mirror_linear(std::size_t linear, const Shape& shape) noexcept {
  const auto& d = shape.padded();
  const std::size_t k = linear % d[2];
  const std::size_t j = (linear / d[2]) % d[1];
  const std::size_t i = linear / (d[2] * d[1]);
  return shape.linear(mirror_index(i, d[0]), mirror_index(j, d[1]), mirror_index(k, d[2]));
}

double normalized_radius(std::span<const long> freqs, const Shape& shape) noexcept {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t a = 0; a < shape.rank(); ++a) {
    const double m = static_cast<double>(freqs[a]);
    const double n = static_cast<double>(shape[a]);
    num += m * m;
    den += n * n;
  }
  return std::sqrt(num / den);
}

std::vector<double> radius_grid(const Shape& shape) {
  const auto& d = shape.padded();
  std::vector<double> out(shape.size());
  std::array<long, 3> f{};
  for (std::size_t i = 0; i < d[0]; ++i) {
    f[0] = centered_frequency(i, d[0]);
    for (std::size_t j = 0; j < d[1]; ++j) {
      f[1] = centered_frequency(j, d[1]);
      for (std::size_t k = 0; k < d[2]; ++k) {
        f[2] = centered_frequency(k, d[2]);
        out[shape.linear(i, j, k)] = normalized_radius(f, shape);
      }
    }
  }
  return out;
}

Spectrum::Spectrum(Shape shape, std::vector<Complex> data) : shape_(shape), data_(std::move(data)) {
  require(data_.size() == shape_.size(), "spectrum data length does not match shape " + shape_.str());
  for (const Complex& z : data_)
    require(std::isfinite(z.real()) && std::isfinite(z.imag()), "spectrum contains non-finite values");
}

std::size_t Spectrum::dc_index() const noexcept {
  const auto& d = shape_.padded();
  return shape_.linear(d[0] / 2, d[1] / 2, d[2] / 2);
}

AmplitudeField::AmplitudeField(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  require(data_.size() == shape_.size(), "amplitude data length does not match shape " + shape_.str());
  for (double a : data_) require(std::isfinite(a) && a >= 0.0, "amplitude values must be finite and >= 0");
}

PhaseField::PhaseField(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  require(data_.size() == shape_.size(), "phase data length does not match shape " + shape_.str());
  for (double p : data_)
    require(p > -std::numbers::pi && p <= std::numbers::pi, "phase values must lie in (-pi, pi]");
}

Spectrum fft_forward(const Volume& v) {
  const Shape& shape = v.shape();
  const std::size_t n = shape.size();
  auto in = make_buffer(n);
  auto out = make_buffer(n);
  const auto values = v.data();
  for (std::size_t idx = 0; idx < n; ++idx) {
    in[idx][0] = values[idx];
    in[idx][1] = 0.0;
  }
  fftw_execute_dft(PlanCache::instance().get(shape, FFTW_FORWARD), in.get(), out.get());

  std::vector<Complex> centered(n);
  for_each_shifted(shape, [&](std::size_t standard, std::size_t c) {
    centered[c] = {out[standard][0], out[standard][1]};
  });
  return Spectrum(shape, std::move(centered));
}

InverseResult fft_inverse(const Spectrum& s, const InverseOptions& options, const Volume* like) {
  const Shape& shape = s.shape();
  const std::size_t n = shape.size();
  auto in = make_buffer(n);
  auto out = make_buffer(n);
  const auto bins = s.data();
  double max_amp = 0.0;
  for_each_shifted(shape, [&](std::size_t standard, std::size_t c) {
    in[standard][0] = bins[c].real();
    in[standard][1] = bins[c].imag();
    max_amp = std::max(max_amp, std::abs(bins[c]));
  });
  fftw_execute_dft(PlanCache::instance().get(shape, FFTW_BACKWARD), in.get(), out.get());

  const double scale = 1.0 / static_cast<double>(n);
  std::vector<double> real(n);
  double residual = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    real[idx] = out[idx][0] * scale;
    residual = std::max(residual, std::abs(out[idx][1] * scale));
  }
  const double reference = max_amp * scale;
  const double relative = reference > 0.0 ? residual / reference : 0.0;
  if (relative > options.residual_ceiling) {
    fail(ErrorCode::kSymmetryViolation,
         "inverse transform has imaginary residual " + std::to_string(relative) +
             " (relative) above ceiling " + std::to_string(options.residual_ceiling) +
             "; spectrum is not Hermitian");
  }
  Volume vol = like != nullptr ? Volume(shape, std::move(real), like->id(), like->spacing())
                               : Volume(shape, std::move(real));
  return InverseResult{std::move(vol), residual, relative};
}

std::pair<AmplitudeField, PhaseField> decompose(const Spectrum& s) {
  const auto bins = s.data();
  std::vector<double> amp(bins.size());
  std::vector<double> phase(bins.size());
  for (std::size_t idx = 0; idx < bins.size(); ++idx) {
    amp[idx] = std::abs(bins[idx]);
    phase[idx] = principal_arg(bins[idx]);
  }
  return {AmplitudeField(s.shape(), std::move(amp)), PhaseField(s.shape(), std::move(phase))};
}

Spectrum recompose(const AmplitudeField& a, const PhaseField& p) {
  require(a.shape() == p.shape(),
          "amplitude shape " + a.shape().str() + " does not match phase shape " + p.shape().str());
  std::vector<Complex> bins(a.shape().size());
  for (std::size_t idx = 0; idx < bins.size(); ++idx) bins[idx] = std::polar(a[idx], p[idx]);
  return Spectrum(a.shape(), std::move(bins));
}

}  // namespace ampsynth
