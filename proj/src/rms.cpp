#include "ampsynth/rms.hpp"

#include <algorithm>
#include <cmath>

#include "ampsynth/error.hpp"
#include "ampsynth/random.hpp"

namespace ampsynth::rms {

namespace {

constexpr std::uint64_t kRegionStream = 0x5A5A'0002;
constexpr std::uint64_t kShuffleStreamBase = 0x5A5A'1000'0000'0000;
constexpr std::uint64_t kShuffleSeedSalt = 0x746C'7566'6665'6873;

std::uint64_t shuffle_seed(std::uint64_t seed) { return random::mix64(seed ^ kShuffleSeedSalt); }

std::vector<std::size_t> region_indices(const MaskRegion& r, const Shape& shape) {
  std::vector<std::size_t> out;
  out.reserve(r.size[0] * r.size[1] * r.size[2]);
  for (std::size_t i = r.origin[0]; i < r.origin[0] + r.size[0]; ++i)
    for (std::size_t j = r.origin[1]; j < r.origin[1] + r.size[1]; ++j)
      for (std::size_t k = r.origin[2]; k < r.origin[2] + r.size[2]; ++k)
        out.push_back(shape.linear(i, j, k));
  return out;
}

// perm[t] is the source slot whose value lands in slot t.
std::vector<std::size_t> fisher_yates(std::size_t n, std::uint64_t seed, std::size_t region) {
  std::vector<std::size_t> perm(n);
  for (std::size_t t = 0; t < n; ++t) perm[t] = t;
  random::Stream stream(seed, kShuffleStreamBase + region);
  for (std::size_t t = n; t > 1; --t) {
    const auto j = static_cast<std::size_t>(stream.uniform_inclusive(t - 1));
    std::swap(perm[t - 1], perm[j]);
  }
  return perm;
}

}  // namespace

void validate_region(const MaskRegion& region, const Shape& shape) {
  const auto& d = shape.padded();
  for (std::size_t a = 0; a < 3; ++a) {
    require(region.size[a] >= 1, "mask region sizes must be >= 1");
    require(region.origin[a] + region.size[a] <= d[a],
            "mask region exceeds image bounds on axis " + std::to_string(a) + " of shape " + shape.str());
  }
}

void RmsParams::validate(const Shape& shape) const {
  const auto& d = shape.padded();
  for (std::size_t a = 0; a < 3; ++a) {
    const std::size_t lo = a < shape.rank() ? min_size[a] : 1;
    const std::size_t hi = a < shape.rank() ? max_size[a] : 1;
    require(lo >= 1, "rms min_size must be >= 1");
    require(lo <= hi, "rms min_size must not exceed max_size");
    require(lo <= d[a], "rms min_size " + std::to_string(lo) + " exceeds image dim " +
                            std::to_string(d[a]) + " on axis " + std::to_string(a));
  }
}

RmsParams RmsParams::for_shape(const Shape& shape, std::size_t num_regions, double min_fraction,
                               double max_fraction, std::uint64_t seed) {
  require(min_fraction > 0.0 && min_fraction <= max_fraction && max_fraction <= 1.0,
          "rms size fractions must satisfy 0 < min <= max <= 1");
  RmsParams p;
  p.num_regions = num_regions;
  p.seed = seed;
  for (std::size_t a = 0; a < shape.rank(); ++a) {
    const double n = static_cast<double>(shape[a]);
    p.min_size[a] = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(n * min_fraction)), 1, shape[a]);
    p.max_size[a] = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(n * max_fraction)),
                                            p.min_size[a], shape[a]);
  }
  return p;
}

std::vector<MaskRegion> select_regions(const Shape& shape, const RmsParams& params) {
  params.validate(shape);
  const auto& d = shape.padded();
  std::vector<MaskRegion> regions(params.num_regions);
  for (std::size_t r = 0; r < params.num_regions; ++r) {
    random::Stream stream(params.seed, kRegionStream + (std::uint64_t{r} << 8));
    MaskRegion& region = regions[r];
    for (std::size_t a = 0; a < shape.rank(); ++a) {
      const std::size_t lo = params.min_size[a];
      const std::size_t hi = std::min(params.max_size[a], d[a]);
      region.size[a] = lo + static_cast<std::size_t>(stream.uniform_inclusive(hi - lo));
      region.origin[a] = static_cast<std::size_t>(stream.uniform_inclusive(d[a] - region.size[a]));
    }
  }
  return regions;
}

std::vector<Volume> shuffle_regions_channels(std::span<const Volume> channels,
                                             std::span<const MaskRegion> regions, std::uint64_t seed) {
  std::vector<Volume> out;
  if (channels.empty()) return out;
  const Shape& shape = channels.front().shape();
  for (const Volume& c : channels) require(c.shape() == shape, "all channels must share one shape");
  for (const MaskRegion& r : regions) validate_region(r, shape);

  std::vector<std::vector<double>> data;
  data.reserve(channels.size());
  for (const Volume& c : channels) data.emplace_back(c.data().begin(), c.data().end());

  std::vector<double> scratch;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto slots = region_indices(regions[r], shape);
    const auto perm = fisher_yates(slots.size(), seed, r);
    scratch.resize(slots.size());
    for (auto& values : data) {
      for (std::size_t t = 0; t < slots.size(); ++t) scratch[t] = values[slots[perm[t]]];
      for (std::size_t t = 0; t < slots.size(); ++t) values[slots[t]] = scratch[t];
    }
  }

  out.reserve(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c) out.push_back(channels[c].with_data(std::move(data[c])));
  return out;
}

Volume shuffle_regions(const Volume& v, std::span<const MaskRegion> regions, std::uint64_t seed) {
  return std::move(shuffle_regions_channels(std::span(&v, 1), regions, seed).front());
}

std::vector<Volume> rms_augment_channels(std::span<const Volume> channels, const RmsParams& params) {
  if (channels.empty()) return {};
  const auto regions = select_regions(channels.front().shape(), params);
  return shuffle_regions_channels(channels, regions, shuffle_seed(params.seed));
}

Volume rms_augment(const Volume& v, const RmsParams& params) {
  return std::move(rms_augment_channels(std::span(&v, 1), params).front());
}

}  // namespace ampsynth::rms
