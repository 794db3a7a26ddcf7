#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ampsynth/io.hpp"
#include "ampsynth/rass.hpp"
#include "ampsynth/rms.hpp"
#include "ampsynth/volume.hpp"

namespace ampsynth::pipeline {

using io::Modality;

struct ManifestEntry {
  std::string id;
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> label_path;
};

/// Dataset description for a batch run. Relative paths in the JSON file are
/// resolved against the manifest's directory.
struct Manifest {
  std::string name;
  Modality modality = Modality::k3D;
  Shape target_shape;
  std::vector<ManifestEntry> entries;

  void validate() const;
};

/// 144^3 for 3D and 512^2 for 2D.
Shape default_target_shape(Modality m);

Manifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir = {},
                        const std::string& fallback_name = "dataset");
Manifest load_manifest(const std::filesystem::path& path);

struct SampleRecord {
  std::string id;
  io::Image image;
  std::optional<Volume> label;
  std::optional<io::ImageMeta> label_meta;
};

/// Reads an image file; PNG for 2D, NIfTI for either modality.
SampleRecord load_volume(const std::filesystem::path& path, Modality modality, const std::string& id = {});

/// Reads image and optional label, checking that the label is a single
/// channel of nonnegative integers matching the image's spatial shape.
SampleRecord load_sample(const ManifestEntry& entry, Modality modality);

/// Corner-aligned (n)-linear interpolation of a single grid.
Volume resample_linear(const Volume& v, const Shape& target);
/// Corner-aligned nearest-neighbour resampling, for label maps.
Volume resample_nearest(const Volume& v, const Shape& target);

/// Images (and alpha) linearly, labels by nearest neighbour. Identity when
/// the target equals the current shape.
SampleRecord resample(const SampleRecord& r, const Shape& target);

enum class NormalizeMode { kNone, kMinMax, kZScore };

NormalizeMode parse_normalize_mode(const std::string& text);
std::string to_string(NormalizeMode mode);

/// minmax -> [0, 1]; zscore -> mean 0, std 1; constant inputs map to zeros.
Volume normalize(const Volume& v, NormalizeMode mode);
/// Joint normalization: statistics pooled over all channels of one image.
std::vector<Volume> normalize_channels(const std::vector<Volume>& channels, NormalizeMode mode);

/// Stable per-(volume, copy) seed; independent of processing order.
std::uint64_t derive_seed(std::uint64_t base_seed, const std::string& volume_id, std::uint64_t copy_index);

/// Size bounds for RMS as fractions of each axis.
struct RmsSettings {
  std::size_t num_regions = 4;
  double min_fraction = 1.0 / 16.0;
  double max_fraction = 0.25;
};

struct BatchConfig {
  rass::RassParams rass;  // seed ignored; seeds derive from base_seed
  RmsSettings rms;
  std::uint64_t base_seed = 0;
  std::size_t copies = 1;
  std::size_t workers = 1;
  NormalizeMode normalize = NormalizeMode::kMinMax;
  bool dry_run = false;
  std::filesystem::path out_dir;
  /// Where to write wall-clock timings; kept out of out_dir so that output
  /// trees are byte-identical across runs.
  std::optional<std::filesystem::path> timings_path;
};

/// load -> resample -> normalize.
SampleRecord preprocess(const ManifestEntry& entry, const Manifest& manifest, NormalizeMode mode);

struct AugmentedSample {
  std::vector<Volume> channels;
  double relative_residual = 0.0;
  std::uint64_t seed = 0;
};

/// RASS with one delta field shared across channels, then RMS with one set
/// of regions and permutations shared across channels.
AugmentedSample augment_sample(const SampleRecord& preprocessed, const BatchConfig& config,
                               std::uint64_t copy_seed);

struct EntryResult {
  std::string id;
  bool ok = false;
  std::string error_code;
  std::string error_message;
  std::vector<nlohmann::json> outputs;
  double seconds = 0.0;
};

struct RunSummary {
  std::vector<EntryResult> entries;  // sorted by id
  std::size_t outputs_written = 0;
  std::size_t failures = 0;
  double total_seconds = 0.0;
  /// Deterministic part, written to summary.json.
  nlohmann::json summary;
  /// Wall-clock timings, written to BatchConfig::timings_path if set.
  nlohmann::json timings;
};

std::string output_extension(const io::ImageMeta& meta);

/// Processes every (entry, copy) and writes images/, labels/ and summary.json
/// under out_dir. Failing entries are reported, not fatal.
RunSummary run_batch(const Manifest& manifest, const BatchConfig& config);

}  // namespace ampsynth::pipeline
