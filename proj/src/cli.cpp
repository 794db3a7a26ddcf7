#include "ampsynth/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string_view>
#include <tuple>

#include "ampsynth/band_stats.hpp"
#include "ampsynth/error.hpp"
#include "ampsynth/pipeline.hpp"
#include "ampsynth/rass.hpp"

namespace ampsynth::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::size_t kMaxWorkers = 1024;

std::optional<std::size_t> parse_workers(std::string_view s) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || v < 1 || v > kMaxWorkers) return std::nullopt;
  return v;
}

struct AugmentOptions {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  double alpha = 3.0;
  double beta = 0.25;
  double gamma = 2.0;
  std::size_t copies = 1;
  std::size_t rms_regions = 4;
  double rms_min_fraction = 1.0 / 16.0;
  double rms_max_fraction = 0.25;
  std::string normalize = "minmax";
  std::vector<std::size_t> target_shape;
  std::size_t workers = 1;
  bool dry_run = false;
  std::string timings;
};

struct StatsOptions {
  std::vector<std::string> manifests;
  std::vector<double> boundaries{0.25};
  bool log_amplitude = false;
  std::string normalize = "none";
  std::vector<std::size_t> target_shape;
  std::string out;
  std::size_t workers = 1;
};

struct InspectOptions {
  std::string path;
  bool bands = false;
  std::vector<double> boundaries{0.25};
  std::vector<double> sigma_at;
  double alpha = 3.0;
  double beta = 0.25;
  double gamma = 2.0;
  bool json = false;
};

const auto kOpenUnit = CLI::Validator(
    [](std::string& s) -> std::string {
      double v = 0.0;
      try {
        v = std::stod(s);
      } catch (const std::exception&) {
        return "'" + s + "' is not a number";
      }
      return v > 0.0 && v < 1.0 ? std::string{} : "value must lie strictly between 0 and 1";
    },
    "(0,1)");

// Shortest decimal that round-trips.
std::string fmt(double v) {
  std::string s;
  for (int p = 1; p <= std::numeric_limits<double>::max_digits10; ++p) {
    std::ostringstream t;
    t << std::setprecision(p) << v;
    s = t.str();
    if (std::strtod(s.c_str(), nullptr) == v) break;
  }
  return s;
}

void apply_target_override(pipeline::Manifest& m, const std::vector<std::size_t>& dims) {
  if (dims.empty()) return;
  m.target_shape = Shape(std::span<const std::size_t>(dims));
  m.validate();
}

int cmd_augment(const AugmentOptions& o, std::ostream& out, std::ostream& err) {
  if (!o.dry_run && o.out.empty()) {
    err << "augment: --out is required unless --dry-run is given\n";
    return kUsage;
  }
  pipeline::Manifest manifest = pipeline::load_manifest(o.manifest);
  apply_target_override(manifest, o.target_shape);

  pipeline::BatchConfig cfg;
  cfg.rass.alpha = o.alpha;
  cfg.rass.beta = o.beta;
  cfg.rass.gamma = o.gamma;
  cfg.rms = {o.rms_regions, o.rms_min_fraction, o.rms_max_fraction};
  cfg.base_seed = o.seed;
  cfg.copies = o.copies;
  cfg.workers = o.workers;
  cfg.normalize = pipeline::parse_normalize_mode(o.normalize);
  cfg.dry_run = o.dry_run;
  cfg.out_dir = o.out;
  if (!o.timings.empty()) cfg.timings_path = o.timings;

  const pipeline::RunSummary s = pipeline::run_batch(manifest, cfg);
  if (o.dry_run) out << s.summary.dump(2) << '\n';
  out << "entries: " << s.entries.size() << ", failed: " << s.failures << ", outputs: " << s.outputs_written
      << ", seconds: " << fmt(s.total_seconds) << '\n';
  for (const auto& e : s.entries)
    if (!e.ok) err << "entry '" << e.id << "' failed [" << e.error_code << "]: " << e.error_message << '\n';
  return s.failures == 0 ? kOk : kRuntime;
}

int cmd_stats(const StatsOptions& o, std::ostream& out, std::ostream&) {
  bands::BandSpec spec{o.boundaries, o.log_amplitude};
  spec.validate();
  const auto mode = pipeline::parse_normalize_mode(o.normalize);
  std::vector<bands::NamedDataset> datasets;
  for (const auto& path : o.manifests) {
    pipeline::Manifest m = pipeline::load_manifest(path);
    apply_target_override(m, o.target_shape);
    require(!m.entries.empty(), "manifest '" + path + "' has no entries");
    bands::NamedDataset ds{m.name, {}};
    for (const auto& e : m.entries) {
      auto rec = pipeline::preprocess(e, m, mode);
      // Multi-channel images contribute their channel mean.
      const auto& ch = rec.image.channels;
      std::vector<double> mean(ch.front().data().begin(), ch.front().data().end());
      for (std::size_t c = 1; c < ch.size(); ++c)
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += ch[c][i];
      for (double& x : mean) x /= static_cast<double>(ch.size());
      ds.volumes.push_back(ch.front().with_data(std::move(mean)));
    }
    datasets.push_back(std::move(ds));
  }
  const auto report = bands::dataset_report(datasets, spec, o.workers);
  const std::string text = bands::to_json(report).dump(2);
  if (o.out.empty()) {
    out << text << '\n';
  } else {
    std::ofstream f(o.out);
    if (!f) fail(ErrorCode::kWriteFailed, "cannot write '" + o.out + "'");
    f << text << '\n';
  }
  return kOk;
}

int cmd_inspect(const InspectOptions& o, std::ostream& out, std::ostream& err) {
  if (o.path.empty() && o.sigma_at.empty()) {
    err << "inspect: give a file path and/or --sigma-at\n";
    return kUsage;
  }
  rass::RassParams params{o.alpha, o.beta, o.gamma, 0};
  params.validate();
  nlohmann::json j;
  if (!o.path.empty()) {
    const fs::path path(o.path);
    if (!fs::exists(path)) fail(ErrorCode::kUnreadable, "'" + o.path + "' does not exist");
    const io::Image img =
        io::detect_format(path) == io::FileFormat::kPng ? io::read_png(path) : io::read_nifti(path);
    const Volume& first = img.channels.front();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : img.channels)
      for (double x : c.data()) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    j["path"] = o.path;
    j["shape"] = first.shape().dims();
    j["channels"] = img.channels.size();
    j["has_alpha"] = img.alpha.has_value();
    j["min"] = lo;
    j["max"] = hi;
    if (!o.json) {
      out << "path: " << o.path << '\n'
          << "shape: " << first.shape().str() << '\n'
          << "channels: " << img.channels.size() << (img.alpha ? " (+alpha)" : "") << '\n'
          << "intensity range: [" << fmt(lo) << ", " << fmt(hi) << "]\n";
    }
    if (o.bands) {
      bands::BandSpec spec{o.boundaries, false};
      const auto report = bands::dataset_report(std::vector<Volume>{first}, spec, "inspect");
      const auto& vol = report.datasets.front().volumes.front();
      auto arr = nlohmann::json::array();
      for (std::size_t b = 0; b < vol.stats.bands.size(); ++b) {
        const auto& s = vol.stats.bands[b];
        arr.push_back({{"index", b}, {"lo", spec.lower(b)}, {"hi", spec.upper(b)},
                       {"mean", s.mean}, {"variance", s.variance}, {"count", s.count}});
        if (!o.json)
          out << "band " << b << " [" << fmt(spec.lower(b)) << ", " << fmt(spec.upper(b)) << "): mean "
              << fmt(s.mean) << ", variance " << fmt(s.variance) << ", count " << s.count << '\n';
      }
      j["bands"] = std::move(arr);
    }
  }
  if (!o.sigma_at.empty()) {
    auto arr = nlohmann::json::array();
    for (double r : o.sigma_at) {
      const double s = rass::sigma_at_radius(r, params);
      arr.push_back({{"radius", r}, {"sigma", s}});
      if (!o.json) out << "sigma(r=" << fmt(r) << ") = " << fmt(s) << '\n';
    }
    j["sigma"] = std::move(arr);
    j["params"] = {{"alpha", o.alpha}, {"beta", o.beta}, {"gamma", o.gamma}};
  }
  if (o.json) out << j.dump(2) << '\n';
  return kOk;
}

void add_rass_flags(CLI::App* cmd, double& alpha, double& beta, double& gamma) {
  cmd->add_option("--alpha", alpha, "Overall perturbation scale")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--beta", beta, "Baseline perturbation at every frequency")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--gamma", gamma, "Growth exponent of the perturbation in radius")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frequency-domain augmentation and spectral band statistics for 2D/3D medical images", "ampsynth"};
  app.set_config("--config", "", "TOML/INI file supplying option defaults (command line wins)");
  app.require_subcommand(1);

  AugmentOptions aug;
  auto* augment = app.add_subcommand("augment", "Run amplitude synthesis + mask shuffle over a manifest");
  augment->add_option("--manifest", aug.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  augment->add_option("--out", aug.out, "Output directory");
  augment->add_option("--seed", aug.seed, "Base seed")->capture_default_str();
  add_rass_flags(augment, aug.alpha, aug.beta, aug.gamma);
  augment->add_option("--copies", aug.copies, "Augmented copies per entry")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()));
  augment->add_option("--rms-regions", aug.rms_regions, "Shuffled regions per image")->capture_default_str();
  augment->add_option("--rms-min-frac", aug.rms_min_fraction, "Smallest region size as a fraction of each axis")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  augment->add_option("--rms-max-frac", aug.rms_max_fraction, "Largest region size as a fraction of each axis")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  augment->add_option("--normalize", aug.normalize, "Intensity normalization before augmentation")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "minmax", "zscore"}));
  augment->add_option("--target-shape", aug.target_shape, "Override the manifest's target shape")->expected(2, 3);
  auto* aug_workers = augment->add_option("--workers", aug.workers, "Worker threads (env AMPSYNTH_WORKERS)")
                          ->capture_default_str()
                          ->check(CLI::Range(std::size_t{1}, kMaxWorkers));
  augment->add_flag("--dry-run", aug.dry_run, "Validate inputs without writing");
  augment->add_option("--timings", aug.timings, "Write wall-clock timings JSON here");

  StatsOptions st;
  auto* stats = app.add_subcommand("stats", "Radial band amplitude statistics across one or more datasets");
  stats->add_option("--manifest", st.manifests, "Manifest JSON (repeat for several datasets)")
      ->required()
      ->check(CLI::ExistingFile);
  stats->add_option("--band-split", st.boundaries, "Normalized radial band boundaries, increasing")
      ->capture_default_str()
      ->check(kOpenUnit);
  stats->add_flag("--log-amplitude", st.log_amplitude, "Statistics on log(1 + amplitude)");
  stats->add_option("--normalize", st.normalize, "Intensity normalization before the transform")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "minmax", "zscore"}));
  stats->add_option("--target-shape", st.target_shape, "Override the manifests' target shape")->expected(2, 3);
  stats->add_option("--out", st.out, "Write the report here instead of stdout");
  auto* stats_workers = stats->add_option("--workers", st.workers, "Worker threads (env AMPSYNTH_WORKERS)")
                            ->capture_default_str()
                            ->check(CLI::Range(std::size_t{1}, kMaxWorkers));

  InspectOptions in;
  auto* inspect = app.add_subcommand("inspect", "Describe an image file and/or evaluate sigma(r)");
  inspect->add_option("path", in.path, "NIfTI or PNG file");
  inspect->add_flag("--bands", in.bands, "Print per-band amplitude summary");
  inspect->add_option("--band-split", in.boundaries, "Band boundaries for --bands")->capture_default_str()->check(kOpenUnit);
  inspect->add_option("--sigma-at", in.sigma_at, "Normalized radii at which to print sigma")
      ->check(CLI::NonNegativeNumber);
  add_rass_flags(inspect, in.alpha, in.beta, in.gamma);
  inspect->add_flag("--json", in.json, "Emit JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    if (!app.get_subcommands().empty()) err << "run '" << app.get_subcommands().front()->get_name() << " --help' for usage\n";
    return kUsage;
  }

  // CLI11 silently drops environment values that fail validation, so the
  // variable is applied here, beneath both the command line and the config.
  for (auto [cmd, opt, target] : {std::tuple{augment, aug_workers, &aug.workers},
                                  std::tuple{stats, stats_workers, &st.workers}}) {
    if (!cmd->parsed() || opt->count() > 0) continue;
    const char* env = std::getenv("AMPSYNTH_WORKERS");
    if (env == nullptr || *env == '\0') continue;
    const auto parsed = parse_workers(env);
    if (!parsed) {
      err << "usage error: AMPSYNTH_WORKERS must be an integer in [1, " << kMaxWorkers << "], got '" << env << "'\n";
      return kUsage;
    }
    *target = *parsed;
  }

  try {
    if (augment->parsed()) return cmd_augment(aug, out, err);
    if (stats->parsed()) return cmd_stats(st, out, err);
    return cmd_inspect(in, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace ampsynth::cli
