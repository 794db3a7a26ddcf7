#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "ampsynth/io.hpp"
#include "ampsynth/pipeline.hpp"
#include "fixtures.hpp"

using fixtures::run_cli;
namespace fs = std::filesystem;

namespace {

// Dry-run output is the summary JSON followed by one status line.
nlohmann::json dry_run_summary(const std::string& out) {
  return nlohmann::json::parse(out.substr(0, out.rfind("}\n") + 1));
}

struct EnvGuard {
  explicit EnvGuard(const char* value) { ::setenv("AMPSYNTH_WORKERS", value, 1); }
  ~EnvGuard() { ::unsetenv("AMPSYNTH_WORKERS"); }
};

}  // namespace

TEST_CASE("cli: usage errors exit with 2") {
  CHECK(run_cli({}).rc == 2);
  CHECK(run_cli({"augment", "--out", "x"}).rc == 2);
  CHECK(run_cli({"augment", "--manifest", "/nonexistent/manifest.json", "--out", "x"}).rc == 2);
  CHECK(run_cli({"frobnicate"}).rc == 2);
  CHECK(run_cli({"inspect", "--sigma-at", "-1"}).rc == 2);
  CHECK(run_cli({"inspect", "--alpha", "-3", "--sigma-at", "0"}).rc == 2);
  CHECK(run_cli({"--help"}).rc == 0);
}

TEST_CASE("cli augment: deterministic output trees and identity flags") {
  fixtures::TempDir dir("cli_aug");
  const auto manifest = fixtures::make_dataset(dir / "in", {3, ampsynth::Shape{10, 8, 6}, true}).string();
  const auto a = run_cli({"augment", "--manifest", manifest, "--out", (dir / "a").string(), "--seed", "9", "--copies",
                          "2", "--workers", "1"});
  const auto b = run_cli({"augment", "--manifest", manifest, "--out", (dir / "b").string(), "--seed", "9", "--copies",
                          "2", "--workers", "3"});
  REQUIRE(a.rc == 0);
  REQUIRE(b.rc == 0);
  CHECK(a.out.find("outputs: 6") != std::string::npos);
  CHECK(fixtures::trees_identical(dir / "a", dir / "b"));

  const auto c = run_cli({"augment", "--manifest", manifest, "--out", (dir / "c").string(), "--seed", "10"});
  REQUIRE(c.rc == 0);
  CHECK(!fixtures::trees_identical(dir / "a" / "images", dir / "c" / "images"));

  const auto id = run_cli({"augment", "--manifest", manifest, "--out", (dir / "id").string(), "--alpha", "0", "--beta",
                           "0", "--rms-regions", "0"});
  REQUIRE(id.rc == 0);
  const auto m = ampsynth::pipeline::load_manifest(manifest);
  for (const auto& e : m.entries) {
    const auto pre = ampsynth::pipeline::preprocess(e, m, ampsynth::pipeline::NormalizeMode::kMinMax);
    const auto out = ampsynth::io::read_nifti(dir / "id" / "images" / (e.id + "_aug0.nii.gz"));
    CHECK(fixtures::max_rel_diff(out.channels[0].data(), pre.image.channels[0].data()) <= 1e-6);
  }
}

TEST_CASE("cli augment: dry run validates without writing") {
  fixtures::TempDir dir("cli_dry");
  const auto manifest = fixtures::make_dataset(dir / "in", {2, ampsynth::Shape{8, 8, 8}, false}).string();
  const auto r = run_cli({"augment", "--manifest", manifest, "--out", (dir / "out").string(), "--dry-run"});
  CHECK(r.rc == 0);
  CHECK(!fs::exists(dir / "out"));
  CHECK(dry_run_summary(r.out)["counts"]["entries"] == 2);
  CHECK(run_cli({"augment", "--manifest", manifest, "--dry-run"}).rc == 0);
}

TEST_CASE("cli augment: unreadable input exits with 1 and names the entry") {
  fixtures::TempDir dir("cli_bad");
  {
    std::ofstream(dir / "junk.nii") << "definitely not a nifti header";
  }
  fixtures::write_json(dir / "m.json", {{"modality", "3d"}, {"entries", {{{"id", "junk"}, {"image_path", "junk.nii"}}}}});
  const auto r = run_cli({"augment", "--manifest", (dir / "m.json").string(), "--out", (dir / "out").string()});
  CHECK(r.rc == 1);
  CHECK(r.err.find("junk") != std::string::npos);

  fixtures::write_json(dir / "bad.json", {{"modality", "3d"}});
  CHECK(run_cli({"augment", "--manifest", (dir / "bad.json").string(), "--dry-run"}).rc == 1);
}

TEST_CASE("cli: config file supplies defaults, the command line wins") {
  fixtures::TempDir dir("cli_cfg");
  const auto manifest = fixtures::make_dataset(dir / "in", {1, ampsynth::Shape{8, 8, 8}, false}).string();
  {
    std::ofstream(dir / "cfg.toml") << "[augment]\nseed = 77\nalpha = 1.5\ncopies = 2\n";
  }
  const auto cfg = (dir / "cfg.toml").string();
  const auto from_file = run_cli({"--config", cfg, "augment", "--manifest", manifest, "--dry-run"});
  REQUIRE(from_file.rc == 0);
  auto j = dry_run_summary(from_file.out)["config"];
  CHECK(j["base_seed"] == 77);
  CHECK(j["alpha"] == 1.5);
  CHECK(j["copies"] == 2);

  const auto overridden = run_cli({"--config", cfg, "augment", "--manifest", manifest, "--seed", "5", "--dry-run"});
  REQUIRE(overridden.rc == 0);
  j = dry_run_summary(overridden.out)["config"];
  CHECK(j["base_seed"] == 5);
  CHECK(j["alpha"] == 1.5);
}

TEST_CASE("cli: AMPSYNTH_WORKERS is read from the environment, beneath flags") {
  fixtures::TempDir dir("cli_env");
  const auto manifest = fixtures::make_dataset(dir / "in", {1, ampsynth::Shape{8, 8, 8}, false}).string();
  EnvGuard env("0");  // invalid on purpose: only observable if the variable is honoured
  CHECK(run_cli({"augment", "--manifest", manifest, "--dry-run"}).rc == 2);
  CHECK(run_cli({"augment", "--manifest", manifest, "--dry-run", "--workers", "2"}).rc == 0);
  {
    std::ofstream(dir / "w.toml") << "[augment]\nworkers = 2\n";
  }
  CHECK(run_cli({"--config", (dir / "w.toml").string(), "augment", "--manifest", manifest, "--dry-run"}).rc == 0);
  ::setenv("AMPSYNTH_WORKERS", "two", 1);
  CHECK(run_cli({"stats", "--manifest", manifest}).rc == 2);
  ::setenv("AMPSYNTH_WORKERS", "3", 1);
  CHECK(run_cli({"augment", "--manifest", manifest, "--dry-run"}).rc == 0);
  CHECK(run_cli({"stats", "--manifest", manifest}).rc == 0);
}

TEST_CASE("cli stats: two-corpus report shows LF shift above HF") {
  fixtures::TempDir dir("cli_stats");
  const auto [a, b] = fixtures::make_two_corpus(dir.path());
  const auto r = run_cli({"stats", "--manifest", a.string(), "--manifest", b.string(), "--workers", "2"});
  REQUIRE(r.rc == 0);
  const auto j = nlohmann::json::parse(r.out);
  const auto& cross = j["cross_volume"];
  CHECK(cross["cross_dataset_variance"][0].get<double>() > cross["cross_dataset_variance"][1].get<double>());
  CHECK(cross["bands"][0]["variance_of_means"].get<double>() > cross["bands"][1]["variance_of_means"].get<double>());
  CHECK(j["datasets"].size() == 2);

  const auto again = run_cli({"stats", "--manifest", a.string(), "--manifest", b.string(), "--workers", "1",
                              "--out", (dir / "report.json").string()});
  REQUIRE(again.rc == 0);
  std::ifstream in(dir / "report.json");
  CHECK(nlohmann::json::parse(in) == j);
}

TEST_CASE("cli stats: single volume has zero cross-volume variance; bad splits rejected") {
  fixtures::TempDir dir("cli_single");
  const auto manifest = fixtures::make_dataset(dir / "in", {1, ampsynth::Shape{8, 8, 8}, false}).string();
  const auto r = run_cli({"stats", "--manifest", manifest});
  REQUIRE(r.rc == 0);
  const auto j = nlohmann::json::parse(r.out);
  for (const auto& band : j["cross_volume"]["bands"]) CHECK(band["variance_of_means"] == 0.0);
  CHECK(run_cli({"stats", "--manifest", manifest, "--band-split", "1.5"}).rc == 2);
  CHECK(run_cli({"stats", "--manifest", manifest, "--band-split", "0"}).rc == 2);
  CHECK(run_cli({"stats", "--manifest", manifest, "--band-split", "0.4", "--band-split", "0.2"}).rc == 1);
  CHECK(run_cli({"stats", "--manifest", manifest, "--band-split", "0.1", "--band-split", "0.3"}).rc == 0);
}

TEST_CASE("cli inspect: shape, bands and sigma readout") {
  fixtures::TempDir dir("cli_inspect");
  ampsynth::io::write_png(dir / "tiny.png", {fixtures::random_volume(ampsynth::Shape{4, 4}, 3, 0, 255)}, 8);
  const auto r = run_cli({"inspect", (dir / "tiny.png").string(), "--bands"});
  REQUIRE(r.rc == 0);
  CHECK(r.out.find("shape: (4, 4)") != std::string::npos);
  CHECK(r.out.find("band 1") != std::string::npos);

  const auto s = run_cli({"inspect", "--sigma-at", "0", "--sigma-at", "0.5"});
  REQUIRE(s.rc == 0);
  CHECK(s.out.find("sigma(r=0) = 0.25") != std::string::npos);
  CHECK(s.out.find("sigma(r=0.5) = 9.25") != std::string::npos);

  const auto js = run_cli({"inspect", (dir / "tiny.png").string(), "--json", "--sigma-at", "0.25"});
  REQUIRE(js.rc == 0);
  const auto j = nlohmann::json::parse(js.out);
  CHECK(j.dump().find("2.5") != std::string::npos);

  CHECK(run_cli({"inspect", (dir / "missing.png").string()}).rc == 1);
}
