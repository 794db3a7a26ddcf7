#include "ampsynth/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>

#include "ampsynth/error.hpp"
#include "ampsynth/parallel.hpp"
#include "ampsynth/random.hpp"

namespace ampsynth::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kRmsSeedSalt = 0x726D'735F'7365'6564;

struct AxisTaps {
  std::vector<std::size_t> lo;
  std::vector<std::size_t> hi;
  std::vector<double> w;
};

// Output index t samples source coordinate t * (n_src - 1) / (n_dst - 1), so
// the first and last samples coincide with the source corners.
double source_coordinate(std::size_t t, std::size_t n_src, std::size_t n_dst) {
  if (n_dst == 1) return static_cast<double>(n_src - 1) / 2.0;
  return static_cast<double>(t) * static_cast<double>(n_src - 1) / static_cast<double>(n_dst - 1);
}

AxisTaps linear_taps(std::size_t n_src, std::size_t n_dst) {
  AxisTaps taps{std::vector<std::size_t>(n_dst), std::vector<std::size_t>(n_dst), std::vector<double>(n_dst)};
  for (std::size_t t = 0; t < n_dst; ++t) {
    const double x = source_coordinate(t, n_src, n_dst);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(x)), n_src - 1);
    taps.lo[t] = lo;
    taps.hi[t] = std::min(lo + 1, n_src - 1);
    taps.w[t] = x - static_cast<double>(lo);
  }
  return taps;
}

// One separable pass along `axis`; other axes keep their extents.
std::vector<double> interp_axis(const std::vector<double>& src, std::array<std::size_t, 3> dims,
                                std::size_t axis, std::size_t n_dst) {
  const AxisTaps taps = linear_taps(dims[axis], n_dst);
  std::array<std::size_t, 3> out_dims = dims;
  out_dims[axis] = n_dst;
  std::vector<double> out(out_dims[0] * out_dims[1] * out_dims[2]);
  const auto src_at = [&](std::size_t i, std::size_t j, std::size_t k) {
    return src[(i * dims[1] + j) * dims[2] + k];
  };
  for (std::size_t i = 0; i < out_dims[0]; ++i)
    for (std::size_t j = 0; j < out_dims[1]; ++j)
      for (std::size_t k = 0; k < out_dims[2]; ++k) {
        std::array<std::size_t, 3> a{i, j, k};
        std::array<std::size_t, 3> b{i, j, k};
        const std::size_t t = a[axis];
        a[axis] = taps.lo[t];
        b[axis] = taps.hi[t];
        const double w = taps.w[t];
        const double va = src_at(a[0], a[1], a[2]);
        out[(i * out_dims[1] + j) * out_dims[2] + k] =
            w == 0.0 ? va : (1.0 - w) * va + w * src_at(b[0], b[1], b[2]);
      }
  return out;
}

std::array<double, 3> rescaled_spacing(const Volume& v, const Shape& target) {
  std::array<double, 3> s = v.spacing();
  for (std::size_t a = 0; a < v.shape().rank(); ++a) {
    const auto nf = static_cast<double>(v.shape()[a]);
    const auto nt = static_cast<double>(target[a]);
    s[a] *= (target[a] > 1 && v.shape()[a] > 1) ? (nf - 1.0) / (nt - 1.0) : nf / nt;
  }
  return s;
}

void check_modality(const Shape& shape, Modality modality, const fs::path& path) {
  const std::size_t want = modality == Modality::k2D ? 2 : 3;
  if (shape.rank() != want)
    fail(ErrorCode::kDimensionMismatch, "'" + path.string() + "' has " + std::to_string(shape.rank()) +
                                            " spatial axes but modality is " + io::to_string(modality));
}

bool valid_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9._-]+");
  return std::regex_match(id, pattern) && id != "." && id != "..";
}

std::vector<Volume> image_planes(const SampleRecord& r, const std::vector<Volume>& colors) {
  std::vector<Volume> planes = colors;
  if (r.image.alpha) planes.push_back(*r.image.alpha);
  return planes;
}

void write_image(const fs::path& path, const std::vector<Volume>& planes, const io::ImageMeta& meta,
                 NormalizeMode mode, std::size_t color_channels) {
  if (meta.format == io::FileFormat::kNifti) {
    io::write_nifti(path, planes.front(), meta.nifti, 16);
    return;
  }
  // Normalized [0, 1] intensities map onto the full code range; other modes
  // are written as raw intensities.
  const double maxval = meta.png.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<Volume> scaled;
  for (std::size_t c = 0; c < planes.size(); ++c) {
    if (c < color_channels && mode == NormalizeMode::kMinMax) {
      std::vector<double> d(planes[c].data().begin(), planes[c].data().end());
      for (double& x : d) x *= maxval;
      scaled.push_back(planes[c].with_data(std::move(d)));
    } else {
      scaled.push_back(planes[c]);
    }
  }
  io::write_png(path, scaled, meta.png.bit_depth);
}

void write_label(const fs::path& path, const Volume& label, const io::ImageMeta& meta) {
  if (meta.format == io::FileFormat::kNifti) {
    double hi = 0.0;
    for (double x : label.data()) hi = std::max(hi, x);
    const std::int16_t type = hi <= 255.0 ? 2 : (hi <= 32767.0 ? 4 : 8);
    io::write_nifti(path, label, meta.nifti, type);
  } else {
    io::write_png(path, {label}, meta.png.bit_depth);
  }
}

nlohmann::json config_json(const Manifest& manifest, const BatchConfig& c) {
  return {{"manifest", manifest.name},
          {"modality", io::to_string(manifest.modality)},
          {"target_shape", manifest.target_shape.dims()},
          {"alpha", c.rass.alpha},
          {"beta", c.rass.beta},
          {"gamma", c.rass.gamma},
          {"rms_regions", c.rms.num_regions},
          {"rms_min_fraction", c.rms.min_fraction},
          {"rms_max_fraction", c.rms.max_fraction},
          {"normalize", to_string(c.normalize)},
          {"copies", c.copies},
          {"base_seed", c.base_seed}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

Shape default_target_shape(Modality m) {
  return m == Modality::k2D ? Shape{512, 512} : Shape{144, 144, 144};
}

void Manifest::validate() const {
  const std::size_t rank = modality == Modality::k2D ? 2 : 3;
  require(target_shape.rank() == rank, "target_shape must have " + std::to_string(rank) + " dims for modality " +
                                           io::to_string(modality));
  std::set<std::string> seen;
  for (const auto& e : entries) {
    require(valid_id(e.id), "manifest id '" + e.id + "' must match [A-Za-z0-9._-]+");
    require(seen.insert(e.id).second, "manifest id '" + e.id + "' is not unique");
    require(!e.image_path.empty(), "manifest entry '" + e.id + "' has no image_path");
  }
}

Manifest parse_manifest(const nlohmann::json& j, const fs::path& base_dir, const std::string& fallback_name) {
  require(j.is_object(), "manifest must be a JSON object");
  Manifest m;
  try {
    m.name = j.value("name", fallback_name);
    m.modality = io::parse_modality(j.at("modality").get<std::string>());
    if (j.contains("target_shape")) {
      const auto dims = j.at("target_shape").get<std::vector<std::size_t>>();
      for (std::size_t d : dims) require(d >= 1, "target_shape dims must be >= 1");
      m.target_shape = Shape(std::span<const std::size_t>(dims));
    } else {
      m.target_shape = default_target_shape(m.modality);
    }
    const auto resolve = [&](const std::string& p) {
      const fs::path path(p);
      return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.image_path = resolve(e.at("image_path").get<std::string>());
      entry.id = e.contains("id") ? e.at("id").get<std::string>() : entry.image_path.stem().stem().string();
      if (e.contains("label_path") && !e.at("label_path").is_null())
        entry.label_path = resolve(e.at("label_path").get<std::string>());
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::kValidation, std::string("malformed manifest: ") + ex.what());
  }
  m.validate();
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kUnreadable, "cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    fail(ErrorCode::kValidation, "manifest '" + path.string() + "' is not valid JSON: " + ex.what());
  }
  std::string stem = path.filename().string();
  if (const auto dot = stem.find('.'); dot != std::string::npos) stem.resize(dot);
  return parse_manifest(j, path.parent_path(), stem);
}

// ---------------------------------------------------------------------------
// Loading

SampleRecord load_volume(const fs::path& path, Modality modality, const std::string& id) {
  if (!fs::exists(path)) fail(ErrorCode::kUnreadable, "'" + path.string() + "' does not exist");
  const io::FileFormat format = io::detect_format(path);
  if (format == io::FileFormat::kPng && modality == Modality::k3D)
    fail(ErrorCode::kDimensionMismatch, "'" + path.string() + "' is a 2D PNG but modality is 3d");
  io::Image img = format == io::FileFormat::kPng ? io::read_png(path, id) : io::read_nifti(path, id);
  check_modality(img.channels.front().shape(), modality, path);
  return SampleRecord{id, std::move(img), std::nullopt, std::nullopt};
}

SampleRecord load_sample(const ManifestEntry& entry, Modality modality) {
  SampleRecord r = load_volume(entry.image_path, modality, entry.id);
  if (entry.label_path) {
    SampleRecord lab = load_volume(*entry.label_path, modality, entry.id);
    if (lab.image.channels.size() != 1 || lab.image.alpha)
      fail(ErrorCode::kValidation, "label '" + entry.label_path->string() + "' must be single-channel");
    const Volume& label = lab.image.channels.front();
    if (label.shape() != r.image.channels.front().shape())
      fail(ErrorCode::kDimensionMismatch, "label shape " + label.shape().str() + " differs from image shape " +
                                              r.image.channels.front().shape().str());
    for (double x : label.data())
      if (x < 0.0 || x != std::floor(x))
        fail(ErrorCode::kValidation, "label '" + entry.label_path->string() + "' has non-integer or negative values");
    r.label = label;
    r.label_meta = lab.image.meta;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Resampling and normalization

Volume resample_linear(const Volume& v, const Shape& target) {
  require(target.rank() == v.shape().rank(), "resample target rank must match the volume");
  if (target == v.shape()) return v;
  std::array<std::size_t, 3> dims = v.shape().padded();
  std::vector<double> data(v.data().begin(), v.data().end());
  for (std::size_t axis = 0; axis < target.rank(); ++axis) {
    if (dims[axis] == target[axis]) continue;
    data = interp_axis(data, dims, axis, target[axis]);
    dims[axis] = target[axis];
  }
  return Volume(target, std::move(data), v.id(), rescaled_spacing(v, target));
}

Volume resample_nearest(const Volume& v, const Shape& target) {
  require(target.rank() == v.shape().rank(), "resample target rank must match the volume");
  if (target == v.shape()) return v;
  const auto& src = v.shape().padded();
  const auto& dst = target.padded();
  std::array<std::vector<std::size_t>, 3> pick;
  for (std::size_t a = 0; a < 3; ++a) {
    pick[a].resize(dst[a]);
    for (std::size_t t = 0; t < dst[a]; ++t)
      pick[a][t] = std::min(static_cast<std::size_t>(std::lround(source_coordinate(t, src[a], dst[a]))), src[a] - 1);
  }
  std::vector<double> data(target.size());
  for (std::size_t i = 0; i < dst[0]; ++i)
    for (std::size_t j = 0; j < dst[1]; ++j)
      for (std::size_t k = 0; k < dst[2]; ++k)
        data[target.linear(i, j, k)] = v[v.shape().linear(pick[0][i], pick[1][j], pick[2][k])];
  return Volume(target, std::move(data), v.id(), rescaled_spacing(v, target));
}

SampleRecord resample(const SampleRecord& r, const Shape& target) {
  for (std::size_t a = 0; a < target.rank(); ++a) require(target[a] >= 1, "resample target dims must be >= 1");
  const Shape& source = r.image.channels.front().shape();
  if (target == source) return r;
  SampleRecord out = r;
  out.image.channels.clear();
  for (const Volume& c : r.image.channels) out.image.channels.push_back(resample_linear(c, target));
  if (r.image.alpha) out.image.alpha = resample_linear(*r.image.alpha, target);
  out.image.meta.nifti.rescale_axes(source, target);
  if (r.label) {
    out.label = resample_nearest(*r.label, target);
    out.label_meta->nifti.rescale_axes(source, target);
  }
  return out;
}

NormalizeMode parse_normalize_mode(const std::string& text) {
  if (text == "none") return NormalizeMode::kNone;
  if (text == "minmax") return NormalizeMode::kMinMax;
  if (text == "zscore") return NormalizeMode::kZScore;
  fail(ErrorCode::kValidation, "normalize mode must be none, minmax or zscore, got '" + text + "'");
}

std::string to_string(NormalizeMode mode) {
  switch (mode) {
    case NormalizeMode::kNone: return "none";
    case NormalizeMode::kMinMax: return "minmax";
    case NormalizeMode::kZScore: return "zscore";
  }
  return "none";
}

std::vector<Volume> normalize_channels(const std::vector<Volume>& channels, NormalizeMode mode) {
  if (mode == NormalizeMode::kNone || channels.empty()) return channels;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  std::size_t n = 0;
  for (const Volume& c : channels)
    for (double x : c.data()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      sum += x;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const Volume& c : channels)
    for (double x : c.data()) ss += (x - mean) * (x - mean);
  const double stddev = std::sqrt(ss / static_cast<double>(n));

  const bool constant = hi == lo;
  std::vector<Volume> out;
  for (const Volume& c : channels) {
    std::vector<double> d(c.data().begin(), c.data().end());
    for (double& x : d) {
      if (constant) x = 0.0;
      else if (mode == NormalizeMode::kMinMax) x = (x - lo) / (hi - lo);
      else x = (x - mean) / stddev;
    }
    out.push_back(c.with_data(std::move(d)));
  }
  return out;
}

Volume normalize(const Volume& v, NormalizeMode mode) { return normalize_channels({v}, mode).front(); }

std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& volume_id, std::uint64_t copy_index) {
  const std::uint64_t h = random::mix64(random::mix64(base_seed) ^ random::hash_bytes(volume_id));
  return random::mix64(h ^ random::mix64(copy_index + 0x636F'7079));
}

// ---------------------------------------------------------------------------
// Batch

SampleRecord preprocess(const ManifestEntry& entry, const Manifest& manifest, NormalizeMode mode) {
  SampleRecord r = resample(load_sample(entry, manifest.modality), manifest.target_shape);
  r.image.channels = normalize_channels(r.image.channels, mode);
  return r;
}

AugmentedSample augment_sample(const SampleRecord& preprocessed, const BatchConfig& config,
                               std::uint64_t copy_seed) {
  const auto& channels = preprocessed.image.channels;
  rass::RassParams rp = config.rass;
  rp.seed = copy_seed;
  double residual = 0.0;
  std::vector<Volume> styled = rass::rass_augment_channels(channels, rp, &residual);
  const Shape& shape = channels.front().shape();
  const auto rms = rms::RmsParams::for_shape(shape, config.rms.num_regions, config.rms.min_fraction,
                                             config.rms.max_fraction, random::mix64(copy_seed ^ kRmsSeedSalt));
  return {rms::rms_augment_channels(styled, rms), residual, copy_seed};
}

std::string output_extension(const io::ImageMeta& meta) {
  if (meta.format == io::FileFormat::kPng) return ".png";
  return meta.gzip ? ".nii.gz" : ".nii";
}

RunSummary run_batch(const Manifest& manifest, const BatchConfig& config) {
  manifest.validate();
  config.rass.validate();
  require(config.copies >= 1, "copies must be >= 1");
  const auto start = std::chrono::steady_clock::now();

  const fs::path image_dir = config.out_dir / "images";
  const fs::path label_dir = config.out_dir / "labels";
  if (!config.dry_run) {
    std::error_code ec;
    fs::create_directories(image_dir, ec);
    fs::create_directories(label_dir, ec);
    if (!fs::is_directory(image_dir) || !fs::is_directory(label_dir))
      fail(ErrorCode::kWriteFailed, "cannot create output directory '" + config.out_dir.string() + "'");
  }

  std::vector<EntryResult> results(manifest.entries.size());
  parallel_for(manifest.entries.size(), config.workers, [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    EntryResult& res = results[i];
    res.id = entry.id;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const SampleRecord pre = config.dry_run ? load_sample(entry, manifest.modality)
                                              : preprocess(entry, manifest, config.normalize);
      if (!config.dry_run) {
        const std::string ext = output_extension(pre.image.meta);
        for (std::size_t k = 0; k < config.copies; ++k) {
          const std::uint64_t seed = derive_seed(config.base_seed, entry.id, k);
          const AugmentedSample aug = augment_sample(pre, config, seed);
          const std::string stem = entry.id + "_aug" + std::to_string(k);
          const fs::path image_path = image_dir / (stem + ext);
          write_image(image_path, image_planes(pre, aug.channels), pre.image.meta, config.normalize,
                      aug.channels.size());
          nlohmann::json out{{"copy", k},
                             {"seed", seed},
                             {"image", fs::relative(image_path, config.out_dir).generic_string()},
                             {"imag_residual", aug.relative_residual}};
          if (pre.label) {
            const fs::path label_path = label_dir / (stem + output_extension(*pre.label_meta));
            write_label(label_path, *pre.label, *pre.label_meta);
            out["label"] = fs::relative(label_path, config.out_dir).generic_string();
          }
          res.outputs.push_back(std::move(out));
        }
      }
      res.ok = true;
    } catch (const Error& e) {
      res.error_code = std::string(to_string(e.code()));
      res.error_message = e.what();
    } catch (const std::exception& e) {
      res.error_code = "internal";
      res.error_message = e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });

  RunSummary summary;
  auto entries = nlohmann::json::array();
  auto timings = nlohmann::json::array();
  for (const auto& r : results) {
    nlohmann::json e{{"id", r.id}, {"status", r.ok ? "ok" : "error"}};
    if (r.ok) {
      e["outputs"] = r.outputs;
      summary.outputs_written += r.outputs.size();
    } else {
      e["error"] = {{"code", r.error_code}, {"message", r.error_message}};
      ++summary.failures;
    }
    entries.push_back(std::move(e));
    timings.push_back({{"id", r.id}, {"seconds", r.seconds}});
  }
  summary.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  summary.summary = {{"format", "ampsynth.summary/1"},
                     {"dry_run", config.dry_run},
                     {"config", config_json(manifest, config)},
                     {"counts",
                      {{"entries", results.size()},
                       {"succeeded", results.size() - summary.failures},
                       {"failed", summary.failures},
                       {"outputs", summary.outputs_written}}},
                     {"entries", std::move(entries)}};
  summary.timings = {{"total_seconds", summary.total_seconds}, {"workers", config.workers}, {"entries", std::move(timings)}};
  summary.entries = std::move(results);

  if (!config.dry_run) {
    std::ofstream(config.out_dir / "summary.json") << summary.summary.dump(2) << '\n';
  }
  if (config.timings_path) {
    std::ofstream f(*config.timings_path);
    if (!f) fail(ErrorCode::kWriteFailed, "cannot write '" + config.timings_path->string() + "'");
    f << summary.timings.dump(2) << '\n';
  }
  return summary;
}

}  // namespace ampsynth::pipeline
