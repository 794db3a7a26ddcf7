#include "ampsynth/band_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ampsynth/error.hpp"
#include "ampsynth/parallel.hpp"

namespace ampsynth::bands {

namespace {

// Welford accumulator.
struct Accumulator {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  BandStat stat() const {
    return {n ? mean : 0.0, n ? std::max(0.0, m2 / static_cast<double>(n)) : 0.0, n};
  }
};

double population_variance(const std::vector<double>& xs) {
  Accumulator acc;
  for (double x : xs) acc.add(x);
  return acc.stat().variance;
}

CrossVolumeBand reduce(const std::vector<const BandStat*>& stats) {
  Accumulator means;
  Accumulator variances;
  for (const BandStat* s : stats) {
    means.add(s->mean);
    variances.add(s->variance);
  }
  return {means.stat().variance, variances.stat().mean, means.stat().mean};
}

void reduce_dataset(const std::vector<const VolumeBands*>& volumes, std::size_t band_count,
                    std::vector<CrossVolumeBand>& cross, CrossVolumeBand& lf_excl) {
  cross.assign(band_count, {});
  std::vector<const BandStat*> column;
  for (std::size_t b = 0; b < band_count; ++b) {
    column.clear();
    for (const VolumeBands* v : volumes) column.push_back(&v->stats.bands[b]);
    cross[b] = reduce(column);
  }
  column.clear();
  for (const VolumeBands* v : volumes) column.push_back(&v->stats.lf_excluding_dc);
  lf_excl = reduce(column);
}

nlohmann::json stat_json(const BandStat& s) {
  return {{"mean", s.mean}, {"variance", s.variance}, {"count", s.count}};
}

nlohmann::json cross_json(const CrossVolumeBand& c) {
  return {{"variance_of_means", c.variance_of_means},
          {"mean_of_variances", c.mean_of_variances},
          {"mean_of_means", c.mean_of_means}};
}

nlohmann::json cross_bands_json(const BandSpec& spec, const std::vector<CrossVolumeBand>& bands) {
  auto arr = nlohmann::json::array();
  for (std::size_t b = 0; b < bands.size(); ++b) {
    auto j = cross_json(bands[b]);
    j["index"] = b;
    j["lo"] = spec.lower(b);
    j["hi"] = spec.upper(b);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace

void BandSpec::validate() const {
  require(!boundaries.empty(), "band spec needs at least one boundary");
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    const double b = boundaries[i];
    require(std::isfinite(b) && b > 0.0 && b < 1.0, "band boundaries must lie in (0, 1)");
    if (i > 0) require(b > boundaries[i - 1], "band boundaries must be strictly increasing");
  }
}

double BandSpec::lower(std::size_t band) const { return band == 0 ? 0.0 : boundaries.at(band - 1); }

double BandSpec::upper(std::size_t band) const {
  return band < boundaries.size() ? boundaries.at(band) : 1.0;
}

std::vector<std::size_t> BandPartition::counts() const {
  std::vector<std::size_t> out(band_count, 0);
  for (std::size_t b : band_of) ++out[b];
  return out;
}

BandPartition band_partition(const Shape& shape, const BandSpec& spec) {
  spec.validate();
  const std::vector<double> radius = radius_grid(shape);
  BandPartition p{shape, std::vector<std::size_t>(radius.size()), spec.band_count()};
  for (std::size_t idx = 0; idx < radius.size(); ++idx) {
    const auto it = std::upper_bound(spec.boundaries.begin(), spec.boundaries.end(), radius[idx]);
    p.band_of[idx] = static_cast<std::size_t>(it - spec.boundaries.begin());
  }
  return p;
}

BandStats band_variance(const AmplitudeField& a, const BandPartition& partition, bool log_amplitude) {
  require(a.shape() == partition.shape,
          "amplitude shape " + a.shape().str() + " does not match partition shape " + partition.shape.str());
  const auto& d = a.shape().padded();
  const std::size_t dc = a.shape().linear(d[0] / 2, d[1] / 2, d[2] / 2);
  std::vector<Accumulator> acc(partition.band_count);
  Accumulator lf_excl;
  for (std::size_t idx = 0; idx < a.shape().size(); ++idx) {
    const double x = log_amplitude ? std::log1p(a[idx]) : a[idx];
    const std::size_t band = partition.band_of[idx];
    acc[band].add(x);
    if (band == 0 && idx != dc) lf_excl.add(x);
  }
  BandStats out;
  for (const auto& ac : acc) out.bands.push_back(ac.stat());
  out.lf_excluding_dc = lf_excl.stat();
  return out;
}

BandReport dataset_report(const std::vector<Volume>& volumes, const BandSpec& spec,
                          const std::string& dataset_id) {
  return dataset_report(std::vector<NamedDataset>{{dataset_id, volumes}}, spec);
}

BandReport dataset_report(const std::vector<NamedDataset>& datasets, const BandSpec& spec,
                          std::size_t workers) {
  spec.validate();
  require(!datasets.empty(), "band report needs at least one dataset");
  const Volume* first = nullptr;
  for (const auto& ds : datasets) {
    require(!ds.volumes.empty(), "dataset '" + ds.id + "' has no volumes");
    for (const auto& v : ds.volumes) {
      if (first == nullptr) first = &v;
      require(v.shape() == first->shape(), "volume '" + v.id() + "' has shape " + v.shape().str() +
                                               ", expected " + first->shape().str());
    }
  }

  BandReport report;
  report.spec = spec;
  report.shape = first->shape();
  const BandPartition partition = band_partition(report.shape, spec);
  report.band_counts = partition.counts();

  for (const auto& ds : datasets) {
    DatasetBands out{ds.id, std::vector<VolumeBands>(ds.volumes.size()), {}, {}};
    parallel_for(ds.volumes.size(), workers, [&](std::size_t i) {
      const Volume& v = ds.volumes[i];
      const auto [amplitude, phase] = decompose(fft_forward(v));
      out.volumes[i] = {v.id(), band_variance(amplitude, partition, spec.log_amplitude)};
    });
    std::stable_sort(out.volumes.begin(), out.volumes.end(),
                     [](const VolumeBands& x, const VolumeBands& y) { return x.id < y.id; });
    std::vector<const VolumeBands*> refs;
    for (const auto& v : out.volumes) refs.push_back(&v);
    reduce_dataset(refs, spec.band_count(), out.cross_volume, out.lf_excluding_dc);
    report.datasets.push_back(std::move(out));
  }

  // Datasets are ordered by id too, so the report does not depend on the
  // order in which they were given.
  std::stable_sort(report.datasets.begin(), report.datasets.end(),
                   [](const DatasetBands& x, const DatasetBands& y) { return x.id < y.id; });
  std::vector<const VolumeBands*> pooled;
  for (const auto& ds : report.datasets)
    for (const auto& v : ds.volumes) pooled.push_back(&v);
  reduce_dataset(pooled, spec.band_count(), report.cross_volume, report.cross_volume_lf_excluding_dc);

  report.cross_dataset_variance.assign(spec.band_count(), 0.0);
  for (std::size_t b = 0; b < spec.band_count(); ++b) {
    std::vector<double> means;
    for (const auto& ds : report.datasets) means.push_back(ds.cross_volume[b].mean_of_means);
    report.cross_dataset_variance[b] = population_variance(means);
  }
  return report;
}

nlohmann::json to_json(const BandReport& report) {
  nlohmann::json j;
  j["format"] = "ampsynth.band_report/1";
  j["band_spec"] = {{"boundaries", report.spec.boundaries}, {"log_amplitude", report.spec.log_amplitude}};
  j["shape"] = report.shape.dims();
  auto partition = nlohmann::json::array();
  for (std::size_t b = 0; b < report.band_counts.size(); ++b)
    partition.push_back({{"index", b},
                         {"lo", report.spec.lower(b)},
                         {"hi", report.spec.upper(b)},
                         {"count", report.band_counts[b]}});
  j["partition"] = std::move(partition);

  auto datasets = nlohmann::json::array();
  for (const auto& ds : report.datasets) {
    auto vols = nlohmann::json::array();
    for (const auto& v : ds.volumes) {
      auto bands = nlohmann::json::array();
      for (std::size_t b = 0; b < v.stats.bands.size(); ++b) {
        auto bj = stat_json(v.stats.bands[b]);
        bj["index"] = b;
        bj["lo"] = report.spec.lower(b);
        bj["hi"] = report.spec.upper(b);
        bands.push_back(std::move(bj));
      }
      vols.push_back({{"id", v.id}, {"bands", std::move(bands)},
                      {"lf_excluding_dc", stat_json(v.stats.lf_excluding_dc)}});
    }
    datasets.push_back({{"id", ds.id},
                        {"volumes", std::move(vols)},
                        {"cross_volume",
                         {{"bands", cross_bands_json(report.spec, ds.cross_volume)},
                          {"lf_excluding_dc", cross_json(ds.lf_excluding_dc)}}}});
  }
  j["datasets"] = std::move(datasets);
  j["cross_volume"] = {{"bands", cross_bands_json(report.spec, report.cross_volume)},
                       {"lf_excluding_dc", cross_json(report.cross_volume_lf_excluding_dc)},
                       {"cross_dataset_variance", report.cross_dataset_variance}};
  return j;
}

}  // namespace ampsynth::bands
