#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

#include "ampsynth/error.hpp"
#include "ampsynth/io.hpp"

namespace ampsynth::io {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kVoxOffset = 352;

enum NiftiType : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kInt32 = 8,
  kFloat32 = 16,
  kFloat64 = 64,
  kInt8 = 256,
  kUint16 = 512,
  kUint32 = 768,
  kInt64 = 1024,
  kUint64 = 1280,
};

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kUint8: case kInt8: return 1;
    case kInt16: case kUint16: return 2;
    case kInt32: case kUint32: case kFloat32: return 4;
    case kFloat64: case kInt64: case kUint64: return 8;
    default: return 0;
  }
}

struct GzCloser {
  void operator()(gzFile_s* f) const noexcept { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

// gzread handles plain files transparently.
std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  GzHandle f(gzopen(path.c_str(), "rb"));
  if (!f) fail(ErrorCode::kUnreadable, "cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes;
  std::array<unsigned char, 1 << 16> chunk{};
  for (;;) {
    const int n = gzread(f.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) fail(ErrorCode::kUnreadable, "read error in '" + path.string() + "'");
    if (n == 0) break;
    bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + n);
  }
  return bytes;
}

class Reader {
public:
  Reader(const std::vector<unsigned char>& bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <typename T>
  T at(std::size_t offset) const {
    T value;
    std::memcpy(&value, bytes_.data() + offset, sizeof(T));
    if (swap_ && sizeof(T) > 1) {
      auto* p = reinterpret_cast<unsigned char*>(&value);
      std::reverse(p, p + sizeof(T));
    }
    return value;
  }

private:
  const std::vector<unsigned char>& bytes_;
  bool swap_;
};

class Writer {
public:
  explicit Writer(std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  template <typename T>
  void put(std::size_t offset, T value) {
    std::memcpy(bytes_.data() + offset, &value, sizeof(T));
  }

private:
  std::vector<unsigned char>& bytes_;
};

double decode(const Reader& r, std::size_t offset, std::int16_t datatype) {
  switch (datatype) {
    case kUint8: return r.at<std::uint8_t>(offset);
    case kInt8: return r.at<std::int8_t>(offset);
    case kInt16: return r.at<std::int16_t>(offset);
    case kUint16: return r.at<std::uint16_t>(offset);
    case kInt32: return r.at<std::int32_t>(offset);
    case kUint32: return r.at<std::uint32_t>(offset);
    case kFloat32: return r.at<float>(offset);
    case kFloat64: return r.at<double>(offset);
    case kInt64: return static_cast<double>(r.at<std::int64_t>(offset));
    case kUint64: return static_cast<double>(r.at<std::uint64_t>(offset));
    default: return 0.0;
  }
}

template <typename T>
void encode_int(Writer& w, std::size_t offset, double v) {
  const double lo = static_cast<double>(std::numeric_limits<T>::min());
  const double hi = static_cast<double>(std::numeric_limits<T>::max());
  w.put<T>(offset, static_cast<T>(std::clamp(round_half_even(v), lo, hi)));
}

void encode(Writer& w, std::size_t offset, std::int16_t datatype, double v) {
  switch (datatype) {
    case kUint8: encode_int<std::uint8_t>(w, offset, v); break;
    case kInt8: encode_int<std::int8_t>(w, offset, v); break;
    case kInt16: encode_int<std::int16_t>(w, offset, v); break;
    case kUint16: encode_int<std::uint16_t>(w, offset, v); break;
    case kInt32: encode_int<std::int32_t>(w, offset, v); break;
    case kUint32: encode_int<std::uint32_t>(w, offset, v); break;
    case kFloat32: w.put<float>(offset, static_cast<float>(v)); break;
    case kFloat64: w.put<double>(offset, v); break;
    default: fail(ErrorCode::kUnsupportedFormat, "cannot write NIfTI datatype " + std::to_string(datatype));
  }
}

std::array<double, 9> quaternion_rotation(const std::array<float, 3>& q) {
  double b = q[0], c = q[1], d = q[2];
  double a = 1.0 - (b * b + c * c + d * d);
  if (a < 1e-7) {
    a = 1.0 / std::sqrt(b * b + c * c + d * d);
    b *= a;
    c *= a;
    d *= a;
    a = 0.0;
  } else {
    a = std::sqrt(a);
  }
  return {a * a + b * b - c * c - d * d, 2 * (b * c - a * d),         2 * (b * d + a * c),
          2 * (b * c + a * d),         a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
          2 * (b * d - a * c),         2 * (c * d + a * b),         a * a + d * d - c * c - b * b};
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Modality parse_modality(const std::string& text) {
  if (text == "2d" || text == "2D") return Modality::k2D;
  if (text == "3d" || text == "3D") return Modality::k3D;
  fail(ErrorCode::kValidation, "modality must be \"2d\" or \"3d\", got \"" + text + "\"");
}

std::string to_string(Modality m) { return m == Modality::k2D ? "2d" : "3d"; }

// Relies on the default FE_TONEAREST rounding mode.
double round_half_even(double x) { return std::nearbyint(x); }

std::array<double, 12> NiftiMeta::affine() const {
  std::array<double, 12> m{};
  if (sform_code > 0) {
    for (std::size_t i = 0; i < 12; ++i) m[i] = srow[i];
    return m;
  }
  if (qform_code > 0) {
    const auto rot = quaternion_rotation(quatern);
    const double qfac = pixdim[0] < 0.0f ? -1.0 : 1.0;
    const std::array<double, 3> scale{pixdim[1], pixdim[2], qfac * pixdim[3]};
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 3; ++c) m[r * 4 + c] = rot[r * 3 + c] * scale[c];
      m[r * 4 + 3] = qoffset[r];
    }
    return m;
  }
  m[0] = pixdim[1];
  m[5] = pixdim[2];
  m[10] = pixdim[3];
  return m;
}

void NiftiMeta::rescale_axes(const Shape& from, const Shape& to) {
  const auto before = affine();
  std::array<double, 3> factor{1, 1, 1};
  std::array<double, 3> start{0, 0, 0};
  for (std::size_t a = 0; a < from.rank(); ++a) {
    const auto nf = static_cast<double>(from[a]);
    const auto nt = static_cast<double>(to[a]);
    if (to[a] > 1 && from[a] > 1) {
      factor[a] = (nf - 1.0) / (nt - 1.0);
    } else {
      factor[a] = nf / nt;
      if (to[a] == 1) start[a] = (nf - 1.0) / 2.0;
    }
  }
  for (std::size_t a = 0; a < 3; ++a) pixdim[a + 1] = static_cast<float>(pixdim[a + 1] * factor[a]);
  for (std::size_t r = 0; r < 3; ++r) {
    double shift = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      shift += before[r * 4 + a] * start[a];
      srow[r * 4 + a] = static_cast<float>(srow[r * 4 + a] * factor[a]);
    }
    srow[r * 4 + 3] = static_cast<float>(srow[r * 4 + 3] + shift);
    qoffset[r] = static_cast<float>(qoffset[r] + shift);
  }
}

FileFormat detect_format(const std::filesystem::path& path) {
  const std::string name = path.filename().string();
  if (ends_with(name, ".nii") || ends_with(name, ".nii.gz")) return FileFormat::kNifti;
  if (ends_with(name, ".png") || ends_with(name, ".PNG")) return FileFormat::kPng;
  fail(ErrorCode::kUnsupportedFormat, "unsupported image format for '" + path.string() +
                                          "' (expected .nii, .nii.gz or .png)");
}

Image read_nifti(const std::filesystem::path& path, const std::string& id) {
  const auto bytes = slurp(path);
  if (bytes.size() < kHeaderSize) fail(ErrorCode::kUnreadable, "'" + path.string() + "' is too short for NIfTI");
  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  bool swap = false;
  if (sizeof_hdr != 348) {
    if (__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)) != 348u)
      fail(ErrorCode::kUnsupportedFormat, "'" + path.string() + "' is not a NIfTI-1 file");
    swap = true;
  }
  const Reader r(bytes, swap);
  if (std::memcmp(bytes.data() + 344, "n+1", 4) != 0 && std::memcmp(bytes.data() + 344, "ni1", 4) != 0)
    fail(ErrorCode::kUnsupportedFormat, "'" + path.string() + "' lacks the NIfTI-1 magic");
  if (std::memcmp(bytes.data() + 344, "ni1", 4) == 0)
    fail(ErrorCode::kUnsupportedFormat, "'" + path.string() + "' is a .hdr/.img pair; only single-file NIfTI is supported");

  std::array<std::int16_t, 8> dim{};
  for (std::size_t i = 0; i < 8; ++i) dim[i] = r.at<std::int16_t>(40 + 2 * i);
  const int ndim = dim[0];
  if (ndim < 1 || ndim > 7) fail(ErrorCode::kUnsupportedFormat, "'" + path.string() + "' has invalid dim[0]");
  for (int a = 4; a <= ndim; ++a)
    if (dim[a] > 1)
      fail(ErrorCode::kDimensionMismatch, "'" + path.string() + "' has more than three non-singleton axes");

  NiftiMeta meta;
  meta.datatype = r.at<std::int16_t>(70);
  for (std::size_t i = 0; i < 8; ++i) meta.pixdim[i] = r.at<float>(76 + 4 * i);
  meta.scl_slope = r.at<float>(112);
  meta.scl_inter = r.at<float>(116);
  meta.xyzt_units = r.at<std::uint8_t>(123);
  meta.qform_code = r.at<std::int16_t>(252);
  meta.sform_code = r.at<std::int16_t>(254);
  for (std::size_t i = 0; i < 3; ++i) {
    meta.quatern[i] = r.at<float>(256 + 4 * i);
    meta.qoffset[i] = r.at<float>(268 + 4 * i);
  }
  for (std::size_t i = 0; i < 12; ++i) meta.srow[i] = r.at<float>(280 + 4 * i);
  meta.descrip.assign(reinterpret_cast<const char*>(bytes.data() + 148),
                      strnlen(reinterpret_cast<const char*>(bytes.data() + 148), 80));

  const int bpv = bytes_per_voxel(meta.datatype);
  if (bpv == 0)
    fail(ErrorCode::kUnsupportedFormat, "'" + path.string() + "' has unsupported datatype " +
                                            std::to_string(meta.datatype));

  const bool is3d = ndim >= 3 && dim[3] > 1;
  std::vector<std::size_t> dims{static_cast<std::size_t>(std::max<int>(dim[1], 1)),
                                static_cast<std::size_t>(ndim >= 2 ? std::max<int>(dim[2], 1) : 1)};
  if (is3d) dims.push_back(static_cast<std::size_t>(dim[3]));
  const Shape shape{std::span<const std::size_t>(dims)};

  const auto vox_offset = static_cast<std::size_t>(r.at<float>(108));
  const std::size_t need = vox_offset + shape.size() * static_cast<std::size_t>(bpv);
  if (bytes.size() < need) fail(ErrorCode::kUnreadable, "'" + path.string() + "' is truncated");

  const double slope = (meta.scl_slope == 0.0f || !std::isfinite(meta.scl_slope)) ? 1.0 : meta.scl_slope;
  const double inter = std::isfinite(meta.scl_inter) && meta.scl_slope != 0.0f ? meta.scl_inter : 0.0;

  // NIfTI stores x fastest; volumes store their last axis fastest.
  const auto& d = shape.padded();
  std::vector<double> data(shape.size());
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const std::size_t file_idx = x + d[0] * (y + d[1] * z);
        data[shape.linear(x, y, z)] = slope * decode(r, vox_offset + file_idx * bpv, meta.datatype) + inter;
      }

  std::array<double, 3> spacing{1, 1, 1};
  for (std::size_t a = 0; a < shape.rank(); ++a) {
    const double p = std::abs(meta.pixdim[a + 1]);
    spacing[a] = (p > 0.0 && std::isfinite(p)) ? p : 1.0;
  }

  Image img;
  img.channels.emplace_back(shape, std::move(data), id, spacing);
  img.meta.format = FileFormat::kNifti;
  img.meta.gzip = ends_with(path.filename().string(), ".gz");
  img.meta.nifti = meta;
  return img;
}

void write_nifti(const std::filesystem::path& path, const Volume& v, const NiftiMeta& meta,
                 std::int16_t datatype) {
  const int bpv = bytes_per_voxel(datatype);
  if (bpv == 0) fail(ErrorCode::kUnsupportedFormat, "cannot write NIfTI datatype " + std::to_string(datatype));
  const Shape& shape = v.shape();
  const auto& d = shape.padded();
  std::vector<unsigned char> bytes(kVoxOffset + shape.size() * static_cast<std::size_t>(bpv), 0);
  Writer w(bytes);
  w.put<std::int32_t>(0, 348);
  w.put<char>(38, 'r');
  w.put<std::int16_t>(40, static_cast<std::int16_t>(shape.rank()));
  for (std::size_t a = 0; a < 7; ++a) w.put<std::int16_t>(42 + 2 * a, static_cast<std::int16_t>(a < 3 ? d[a] : 1));
  w.put<std::int16_t>(70, datatype);
  w.put<std::int16_t>(72, static_cast<std::int16_t>(8 * bpv));
  for (std::size_t i = 0; i < 8; ++i) w.put<float>(76 + 4 * i, meta.pixdim[i]);
  w.put<float>(108, static_cast<float>(kVoxOffset));
  w.put<float>(112, 1.0f);
  w.put<float>(116, 0.0f);
  w.put<std::uint8_t>(123, meta.xyzt_units);
  std::memcpy(bytes.data() + 148, meta.descrip.data(), std::min<std::size_t>(meta.descrip.size(), 79));
  w.put<std::int16_t>(252, meta.qform_code);
  w.put<std::int16_t>(254, meta.sform_code);
  for (std::size_t i = 0; i < 3; ++i) {
    w.put<float>(256 + 4 * i, meta.quatern[i]);
    w.put<float>(268 + 4 * i, meta.qoffset[i]);
  }
  for (std::size_t i = 0; i < 12; ++i) w.put<float>(280 + 4 * i, meta.srow[i]);
  std::memcpy(bytes.data() + 344, "n+1", 4);

  const auto values = v.data();
  for (std::size_t z = 0; z < d[2]; ++z)
    for (std::size_t y = 0; y < d[1]; ++y)
      for (std::size_t x = 0; x < d[0]; ++x) {
        const std::size_t file_idx = x + d[0] * (y + d[1] * z);
        encode(w, kVoxOffset + file_idx * bpv, datatype, values[shape.linear(x, y, z)]);
      }

  const bool gz = ends_with(path.filename().string(), ".gz");
  if (gz) {
    GzHandle f(gzopen(path.c_str(), "wb6"));
    if (!f) fail(ErrorCode::kWriteFailed, "cannot open '" + path.string() + "' for writing");
    if (gzwrite(f.get(), bytes.data(), static_cast<unsigned>(bytes.size())) != static_cast<int>(bytes.size()))
      fail(ErrorCode::kWriteFailed, "write error on '" + path.string() + "'");
  } else {
    std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!f) fail(ErrorCode::kWriteFailed, "cannot open '" + path.string() + "' for writing");
    if (std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
      fail(ErrorCode::kWriteFailed, "write error on '" + path.string() + "'");
  }
}

}  // namespace ampsynth::io
