#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampsynth/spectral.hpp"
#include "ampsynth/volume.hpp"

namespace ampsynth::bands {

/// Radial band boundaries in normalized frequency. With boundaries
/// {b1..bk} the bands are [0, b1), [b1, b2), ..., [bk, inf).
struct BandSpec {
  std::vector<double> boundaries{0.25};
  /// Compute statistics on log(1 + A) instead of A.
  bool log_amplitude = false;

  void validate() const;
  std::size_t band_count() const noexcept { return boundaries.size() + 1; }
  double lower(std::size_t band) const;
  /// Upper edge; +inf for the last band.
  double upper(std::size_t band) const;
};

struct BandPartition {
  Shape shape;
  std::vector<std::size_t> band_of;  // per centered bin
  std::size_t band_count = 0;
  std::vector<std::size_t> counts() const;
};

struct BandStat {
  double mean = 0.0;
  double variance = 0.0;  // population
  std::size_t count = 0;
};

struct BandStats {
  std::vector<BandStat> bands;
  /// Band 0 with the DC bin removed; the DC term otherwise dominates.
  BandStat lf_excluding_dc;
};

BandPartition band_partition(const Shape& shape, const BandSpec& spec);

/// Population mean and variance of the amplitude within each band.
BandStats band_variance(const AmplitudeField& a, const BandPartition& partition, bool log_amplitude = false);

struct VolumeBands {
  std::string id;
  BandStats stats;
};

struct CrossVolumeBand {
  /// Variance across volumes of the per-volume band mean.
  double variance_of_means = 0.0;
  /// Mean across volumes of the per-volume within-band variance.
  double mean_of_variances = 0.0;
  /// Mean across volumes of the per-volume band mean.
  double mean_of_means = 0.0;
};

struct DatasetBands {
  std::string id;
  std::vector<VolumeBands> volumes;  // sorted by id
  std::vector<CrossVolumeBand> cross_volume;
  CrossVolumeBand lf_excluding_dc;
};

struct BandReport {
  BandSpec spec;
  Shape shape;
  std::vector<std::size_t> band_counts;
  std::vector<DatasetBands> datasets;
  /// Pooled over every volume of every dataset.
  std::vector<CrossVolumeBand> cross_volume;
  CrossVolumeBand cross_volume_lf_excluding_dc;
  /// Variance across datasets of the dataset-level mean of band means.
  std::vector<double> cross_dataset_variance;
};

struct NamedDataset {
  std::string id;
  std::vector<Volume> volumes;
};

/// Single-dataset report.
BandReport dataset_report(const std::vector<Volume>& volumes, const BandSpec& spec,
                          const std::string& dataset_id = "dataset");

/// Multi-dataset report for cross-domain comparison. Every volume in every
/// dataset must share one shape. Per-volume spectra are computed on up to
/// `workers` threads; the reduction order is fixed.
BandReport dataset_report(const std::vector<NamedDataset>& datasets, const BandSpec& spec,
                          std::size_t workers = 1);

nlohmann::json to_json(const BandReport& report);

}  // namespace ampsynth::bands
