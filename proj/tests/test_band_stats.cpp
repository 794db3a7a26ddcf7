#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ampsynth/band_stats.hpp"
#include "ampsynth/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace ampsynth;
using namespace ampsynth::bands;

namespace {
void validate_bounds(std::vector<double> b) { BandSpec{std::move(b)}.validate(); }
}  // namespace

TEST_CASE("band spec validation") {
  CHECK_NOTHROW(validate_bounds({0.25}));
  CHECK_NOTHROW(validate_bounds({0.1, 0.2, 0.4}));
  CHECK_THROWS_AS(validate_bounds({1.5}), Error);
  CHECK_THROWS_AS(validate_bounds({0.0}), Error);
  CHECK_THROWS_AS(validate_bounds({0.3, 0.2}), Error);
  CHECK_THROWS_AS(validate_bounds({}), Error);
}

TEST_CASE("band_partition: DC in band 0, the 144^3 example bin in HF, totality") {
  const Shape cube{144, 144, 144};
  const auto p = band_partition(cube, BandSpec{});
  CHECK(p.band_of[cube.linear(72, 72, 72)] == 0);
  // Frequency (72, 0, 0) aliases to array index 0 on axis 0; radius sqrt(1/12).
  CHECK(p.band_of[cube.linear(0, 72, 72)] == 1);
  std::size_t total = 0;
  for (auto c : p.counts()) total += c;
  CHECK(total == cube.size());
}

TEST_CASE("band_partition: half-open intervals agree with direct radius evaluation") {
  const Shape shape{9, 8, 7};
  const BandSpec spec{{0.1, 0.2, 0.3}};
  const auto p = band_partition(shape, spec);
  const auto& d = shape.padded();
  for (std::size_t i = 0; i < d[0]; ++i)
    for (std::size_t j = 0; j < d[1]; ++j)
      for (std::size_t k = 0; k < d[2]; ++k) {
        const double r = std::sqrt(
            static_cast<double>(oracle::freq(i, 9) * oracle::freq(i, 9) + oracle::freq(j, 8) * oracle::freq(j, 8) +
                                oracle::freq(k, 7) * oracle::freq(k, 7)) /
            (81.0 + 64.0 + 49.0));
        std::size_t expected = 0;
        while (expected < 3 && r >= spec.boundaries[expected]) ++expected;
        CHECK(p.band_of[shape.linear(i, j, k)] == expected);
      }
}

TEST_CASE("band_variance: constant image has zero HF variance") {
  const Shape shape{16, 16};
  const auto [a, ph] = decompose(fft_forward(fixtures::constant_volume(shape, 3.0)));
  const auto stats = band_variance(a, band_partition(shape, BandSpec{}));
  CHECK(stats.bands[1].variance < 1e-20);
  CHECK(stats.bands[1].mean < 1e-12);
  CHECK(stats.lf_excluding_dc.variance < 1e-20);
  CHECK(stats.bands[0].variance > 0.0);  // DC dominates the raw LF band
}

TEST_CASE("band_variance: sampled sinusoid puts two spikes in HF and nothing else") {
  const Shape shape{32, 32};
  // Normalized radius sqrt((11^2 + 5^2) / (2 * 32^2)) ~ 0.267, inside HF.
  constexpr long fx = 11;
  constexpr long fy = 5;
  std::vector<double> data(shape.size());
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j)
      data[shape.linear(i, j)] = std::cos(2.0 * std::numbers::pi * (fx * static_cast<double>(i) + fy * static_cast<double>(j)) / 32.0);
  const auto [a, ph] = decompose(fft_forward(Volume(shape, data)));
  const auto partition = band_partition(shape, BandSpec{});
  const auto stats = band_variance(a, partition);
  // Analytic DFT: amplitude N/2 = 512 at (+fx,+fy) and its mirror, zero elsewhere.
  const std::size_t hf = stats.bands[1].count;
  const oracle::Moments expected = oracle::two_pass([&] {
    std::vector<double> xs(hf, 0.0);
    xs[0] = xs[1] = 512.0;
    return xs;
  }());
  CHECK(stats.bands[1].mean == doctest::Approx(expected.mean).epsilon(1e-9));
  CHECK(stats.bands[1].variance == doctest::Approx(expected.variance).epsilon(1e-9));
  CHECK(stats.lf_excluding_dc.variance < 1e-18);
  CHECK(partition.band_of[shape.linear(16 + fx, 16 + fy)] == 1);
}

TEST_CASE("band_variance matches the two-pass oracle on random grids, raw and log") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<std::size_t> ext(2, 16);
    const Shape shape = trial % 2 ? Shape{ext(rng), ext(rng)} : Shape{ext(rng), ext(rng), ext(rng)};
    const auto [a, ph] = decompose(fft_forward(fixtures::random_volume(shape, rng(), 0.0, 5.0)));
    const BandSpec spec{{0.15, 0.3}};
    const auto partition = band_partition(shape, spec);
    for (bool log_amp : {false, true}) {
      const auto stats = band_variance(a, partition, log_amp);
      for (std::size_t b = 0; b < spec.band_count(); ++b) {
        std::vector<double> xs;
        for (std::size_t i = 0; i < shape.size(); ++i)
          if (partition.band_of[i] == b) xs.push_back(log_amp ? std::log1p(a[i]) : a[i]);
        const auto m = oracle::two_pass(xs);
        CHECK(stats.bands[b].count == m.count);
        CHECK(stats.bands[b].mean == doctest::Approx(m.mean).epsilon(1e-10));
        CHECK(stats.bands[b].variance == doctest::Approx(m.variance).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("band_variance rejects mismatched shapes") {
  const auto [a, ph] = decompose(fft_forward(fixtures::random_volume(Shape{4, 4}, 1)));
  CHECK_THROWS_AS(band_variance(a, band_partition(Shape{4, 5}, BandSpec{})), Error);
}

TEST_CASE("dataset_report: single volume has zero cross-volume variance") {
  const auto r = dataset_report(std::vector<Volume>{fixtures::random_volume(Shape{8, 8, 8}, 1)}, BandSpec{});
  for (const auto& b : r.cross_volume) CHECK(b.variance_of_means == 0.0);
  std::size_t total = 0;
  for (const auto& s : r.datasets.front().volumes.front().stats.bands) total += s.count;
  CHECK(total == 512);
}

TEST_CASE("dataset_report: empty and mixed-shape inputs are errors") {
  CHECK_THROWS_AS(dataset_report(std::vector<Volume>{}, BandSpec{}), Error);
  const std::vector<Volume> mixed{fixtures::random_volume(Shape{4, 4}, 1), fixtures::random_volume(Shape{4, 5}, 2)};
  CHECK_THROWS_AS(dataset_report(mixed, BandSpec{}), Error);
}

TEST_CASE("dataset_report: LF-shifted corpus shows LF cross-volume variance above HF") {
  const Shape shape{16, 16, 16};
  std::vector<Volume> a, b;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto v = fixtures::two_band_volume(shape, 0.25, 100 + s, 7, "a" + std::to_string(s));
    a.push_back(v);
    const auto shifted = fixtures::scale_low_band(v, 0.25, 2.0);
    b.push_back(Volume(shape, std::vector<double>(shifted.data().begin(), shifted.data().end()),
                       "b" + std::to_string(s)));
  }
  const auto report = dataset_report({NamedDataset{"A", a}, NamedDataset{"B", b}}, BandSpec{}, 3);
  CHECK(report.cross_volume[0].variance_of_means > report.cross_volume[1].variance_of_means);
  CHECK(report.cross_volume_lf_excluding_dc.variance_of_means > report.cross_volume[1].variance_of_means);
  CHECK(report.cross_dataset_variance[0] > report.cross_dataset_variance[1]);
  CHECK(report.cross_volume[1].variance_of_means < 1e-20);

  const auto again = dataset_report({NamedDataset{"A", a}, NamedDataset{"B", b}}, BandSpec{}, 1);
  CHECK(to_json(again).dump() == to_json(report).dump());
  const auto swapped = dataset_report({NamedDataset{"B", b}, NamedDataset{"A", a}}, BandSpec{}, 2);
  CHECK(to_json(swapped).dump() == to_json(report).dump());
}

TEST_CASE("report JSON layout") {
  const auto r = dataset_report(std::vector<Volume>{fixtures::random_volume(Shape{6, 6}, 1, 0, 1, "z"),
                                                    fixtures::random_volume(Shape{6, 6}, 2, 0, 1, "a")},
                                BandSpec{{0.2}}, "ds");
  const auto j = to_json(r);
  CHECK(j["band_spec"]["boundaries"][0] == 0.2);
  CHECK(j["datasets"][0]["id"] == "ds");
  CHECK(j["datasets"][0]["volumes"][0]["id"] == "a");  // sorted by id
  CHECK(j["datasets"][0]["volumes"][0]["bands"][1]["lo"] == 0.2);
  CHECK(j["datasets"][0]["volumes"][0]["bands"][1]["hi"] == 1.0);
  CHECK(j["cross_volume"]["bands"].size() == 2);
  CHECK(j["cross_volume"].contains("lf_excluding_dc"));
  CHECK(j["partition"][0]["count"].get<std::size_t>() + j["partition"][1]["count"].get<std::size_t>() == 36);
}
