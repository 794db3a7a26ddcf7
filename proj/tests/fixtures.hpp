#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ampsynth/cli.hpp"
#include "ampsynth/io.hpp"
#include "ampsynth/spectral.hpp"
#include "ampsynth/volume.hpp"

namespace fixtures {

inline ampsynth::Volume random_volume(const ampsynth::Shape& shape, std::uint64_t seed, double lo = -1.0,
                                      double hi = 1.0, const std::string& id = "rand") {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(shape.size());
  for (double& x : data) x = dist(rng);
  return ampsynth::Volume(shape, std::move(data), id);
}

inline ampsynth::Volume constant_volume(const ampsynth::Shape& shape, double c, const std::string& id = "const") {
  return ampsynth::Volume(shape, std::vector<double>(shape.size(), c), id);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ampsynth_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream(path) << j.dump(2);
}

inline ampsynth::io::NiftiMeta float_meta() {
  ampsynth::io::NiftiMeta m;
  m.datatype = 16;
  return m;
}

/// Byte-by-byte comparison of two directory trees; `skip` names are ignored.
inline bool trees_identical(const std::filesystem::path& a, const std::filesystem::path& b,
                            const std::vector<std::string>& skip = {}) {
  namespace fs = std::filesystem;
  auto listing = [&](const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      const std::string rel = fs::relative(e.path(), root).generic_string();
      bool skipped = false;
      for (const auto& s : skip) skipped |= e.path().filename() == s;
      if (!skipped) files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto fa = listing(a);
  const auto fb = listing(b);
  if (fa != fb || fa.empty()) return false;
  for (const auto& rel : fa) {
    std::ifstream ia(a / rel, std::ios::binary);
    std::ifstream ib(b / rel, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(ia)), {});
    const std::string cb((std::istreambuf_iterator<char>(ib)), {});
    if (ca != cb) return false;
  }
  return true;
}

/// Scales the amplitude of every bin with normalized radius below `split`
/// (DC excluded) by `factor`; keeps the rest of the spectrum bit-identical.
inline ampsynth::Volume scale_low_band(const ampsynth::Volume& v, double split, double factor) {
  const auto s = ampsynth::fft_forward(v);
  const auto radius = ampsynth::radius_grid(v.shape());
  std::vector<ampsynth::Complex> bins(s.data().begin(), s.data().end());
  for (std::size_t i = 0; i < bins.size(); ++i)
    if (radius[i] > 0.0 && radius[i] < split) bins[i] *= factor;
  return ampsynth::fft_inverse(ampsynth::Spectrum(v.shape(), std::move(bins)), {}, &v).volume;
}

/// Volume whose spectrum is confined to radius < split (its "LF" part) plus a
/// fixed HF part shared across every seed.
inline ampsynth::Volume two_band_volume(const ampsynth::Shape& shape, double split, std::uint64_t lf_seed,
                                        std::uint64_t hf_seed, const std::string& id) {
  const auto lf = ampsynth::fft_forward(random_volume(shape, lf_seed));
  const auto hf = ampsynth::fft_forward(random_volume(shape, hf_seed));
  const auto radius = ampsynth::radius_grid(shape);
  std::vector<ampsynth::Complex> bins(shape.size());
  for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = radius[i] < split ? lf[i] : hf[i];
  auto out = ampsynth::fft_inverse(ampsynth::Spectrum(shape, std::move(bins))).volume;
  return ampsynth::Volume(shape, std::vector<double>(out.data().begin(), out.data().end()), id);
}

struct DatasetSpec {
  std::size_t entries = 4;
  ampsynth::Shape shape{12, 10, 8};
  bool with_labels = true;
  bool png = false;
  int png_channels = 1;
  std::string name = "fixture";
  bool gzip = true;
};

/// Writes synthetic images (and labels) plus manifest.json into `dir`; the
/// manifest's target shape equals the source shape.
inline std::filesystem::path make_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
  namespace io = ampsynth::io;
  std::filesystem::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t e = 0; e < spec.entries; ++e) {
    const std::string id = spec.name + "_" + std::to_string(e);
    nlohmann::json entry{{"id", id}};
    if (spec.png) {
      std::vector<ampsynth::Volume> planes;
      for (int c = 0; c < spec.png_channels; ++c)
        planes.push_back(random_volume(spec.shape, 1000 * e + c, 0.0, 255.0));
      io::write_png(dir / (id + ".png"), planes, 8);
      entry["image_path"] = id + ".png";
    } else {
      const std::string ext = spec.gzip ? ".nii.gz" : ".nii";
      io::write_nifti(dir / (id + ext), random_volume(spec.shape, 1000 * e, 0.0, 400.0), float_meta(), 16);
      entry["image_path"] = id + ext;
    }
    if (spec.with_labels) {
      std::vector<double> lab(spec.shape.size());
      for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = static_cast<double>((i / 7 + e) % 4);
      const ampsynth::Volume label(spec.shape, lab);
      const std::string name = id + (spec.png ? "_seg.png" : "_seg.nii.gz");
      if (spec.png) io::write_png(dir / name, {label}, 8);
      else io::write_nifti(dir / name, label, io::NiftiMeta{}, 2);
      entry["label_path"] = name;
    }
    entries.push_back(entry);
  }
  const nlohmann::json manifest{{"name", spec.name},
                                {"modality", spec.shape.rank() == 2 ? "2d" : "3d"},
                                {"target_shape", spec.shape.dims()},
                                {"entries", entries}};
  const auto path = dir / "manifest.json";
  write_json(path, manifest);
  return path;
}

/// Two corpora sharing their HF content exactly; corpus B has its LF band
/// doubled. Written as float64 NIfTI so nothing is lost to quantization.
inline std::pair<std::filesystem::path, std::filesystem::path> make_two_corpus(const std::filesystem::path& dir,
                                                                               std::size_t per_corpus = 4) {
  const ampsynth::Shape shape{16, 16, 16};
  std::pair<std::filesystem::path, std::filesystem::path> paths;
  for (int corpus = 0; corpus < 2; ++corpus) {
    const std::string name = corpus == 0 ? "corpus_a" : "corpus_b";
    const auto sub = dir / name;
    std::filesystem::create_directories(sub);
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t s = 0; s < per_corpus; ++s) {
      auto v = two_band_volume(shape, 0.25, 100 + s, 7, "v");
      if (corpus == 1) v = scale_low_band(v, 0.25, 2.0);
      const std::string id = name + "_" + std::to_string(s);
      ampsynth::io::write_nifti(sub / (id + ".nii"), v, float_meta(), 64);
      entries.push_back({{"id", id}, {"image_path", id + ".nii"}});
    }
    const auto path = sub / "manifest.json";
    write_json(path, {{"name", name}, {"modality", "3d"}, {"target_shape", shape.dims()}, {"entries", entries}});
    (corpus == 0 ? paths.first : paths.second) = path;
  }
  return paths;
}

inline double max_rel_diff(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

struct CliResult {
  int rc;
  std::string out;
  std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int rc = ampsynth::cli::run(args, out, err);
  return {rc, out.str(), err.str()};
}

}  // namespace fixtures
