#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ampsynth/volume.hpp"

namespace ampsynth::io {

enum class Modality { k2D, k3D };

Modality parse_modality(const std::string& text);
std::string to_string(Modality m);

/// NIfTI-1 fields retained for write-back. Axis 0 of a loaded Volume is the
/// NIfTI x axis.
struct NiftiMeta {
  std::int16_t datatype = 16;
  std::array<float, 8> pixdim{1, 1, 1, 1, 1, 1, 1, 1};
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  std::array<float, 3> quatern{0, 0, 0};
  std::array<float, 3> qoffset{0, 0, 0};
  std::array<float, 12> srow{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
  std::uint8_t xyzt_units = 0;
  std::string descrip;

  /// Voxel-to-world 3x4 matrix (row-major) from sform, else qform, else pixdim.
  std::array<double, 12> affine() const;

  /// Rescales voxel axes after a resample from `from` to `to` cells per axis,
  /// using the corner-aligned grid mapping of `pipeline::resample`.
  void rescale_axes(const Shape& from, const Shape& to);
};

struct PngMeta {
  int bit_depth = 8;  // 8 or 16
};

enum class FileFormat { kNifti, kPng };

struct ImageMeta {
  FileFormat format = FileFormat::kNifti;
  bool gzip = false;
  NiftiMeta nifti;
  PngMeta png;
};

FileFormat detect_format(const std::filesystem::path& path);

/// Decoded image file: one Volume per color channel plus an optional alpha
/// channel, which is carried through unchanged by augmentation.
struct Image {
  std::vector<Volume> channels;
  std::optional<Volume> alpha;
  ImageMeta meta;
};

Image read_nifti(const std::filesystem::path& path, const std::string& id = {});

/// Writes `v` with the NIfTI fields from `meta`. `datatype` overrides the
/// stored datatype (16 = float32).
void write_nifti(const std::filesystem::path& path, const Volume& v, const NiftiMeta& meta,
                 std::int16_t datatype);

Image read_png(const std::filesystem::path& path, const std::string& id = {});

/// Writes 1-4 channel PNG. Values are clamped to [0, 2^bit_depth - 1] and
/// rounded half-to-even.
void write_png(const std::filesystem::path& path, const std::vector<Volume>& channels, int bit_depth);

/// Round half to even.
double round_half_even(double x);

}  // namespace ampsynth::io
