#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "hbmc/pipeline.hpp"

using namespace hbmc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("hbmc_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

void write_text(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kArtifacts[] = {"matrix.json",         "smcm_factors.json",   "completed.json",
                            "solute_linkage.json", "solvent_linkage.json", "solute_classes.json",
                            "solvent_classes.json", "hmcm_params.json"};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("end-to-end run writes every artifact and a complete manifest") {
  TempDir d("run");
  REQUIRE(run_cli({"synth", "--out", d / "in.csv", "--solutes", "10", "--solvents", "9", "--occupancy", "0.6",
                   "--seed", "2", "--quiet"}) == 0);
  write_text(d / "c.cfg", "n_solute_classes = 3\nn_solvent_classes = 2\n");
  REQUIRE(run_cli({"run", "--input", d / "in.csv", "--out-dir", d / "a", "--config", d / "c.cfg", "--quiet"}) == 0);
  const auto manifest = read_json(d / "a/manifest.json");
  for (const char* name : kArtifacts) {
    CHECK(fs::exists(d / (std::string("a/") + name)));
    CHECK(manifest["artifacts"][name] == sha256_file(d / (std::string("a/") + name)));
  }
  CHECK(manifest["failed_stage"].is_null());
  CHECK(manifest["stages"].size() == 6);
  CHECK(manifest.contains("config_sha256"));
  CHECK(manifest["seeds"].contains("smcm"));

  REQUIRE(run_cli({"run", "--input", d / "in.csv", "--out-dir", d / "b", "--config", d / "c.cfg", "--workers", "4",
                   "--quiet"}) == 0);
  for (const char* name : kArtifacts) {
    CHECK(read_text(d / (std::string("a/") + name)) == read_text(d / (std::string("b/") + name)));
  }
  CHECK(read_text(d / "a/manifest.json") == read_text(d / "b/manifest.json"));

  // A different seed changes the fits.
  REQUIRE(run_cli({"run", "--input", d / "in.csv", "--out-dir", d / "c", "--config", d / "c.cfg", "--seed", "1",
                   "--quiet"}) == 0);
  CHECK(read_text(d / "a/smcm_factors.json") != read_text(d / "c/smcm_factors.json"));
}

TEST_CASE("stage subcommands reproduce the run artifacts") {
  TempDir d("stages");
  REQUIRE(run_cli({"synth", "--out", d / "in.csv", "--solutes", "9", "--solvents", "8", "--occupancy", "0.6",
                   "--quiet"}) == 0);
  write_text(d / "c.cfg", "n_solute_classes = 2\nn_solvent_classes = 3\nseed = 4\n");
  REQUIRE(run_cli({"run", "--input", d / "in.csv", "--out-dir", d / "run", "--config", d / "c.cfg", "--quiet"}) == 0);
  const std::string cfg = d / "c.cfg";
  CHECK(run_cli({"ingest", "--input", d / "in.csv", "--output", d / "m.json", "--quiet"}) == 0);
  CHECK(run_cli({"fit-smcm", "--matrix", d / "m.json", "--out-factors", d / "f.json", "--config", cfg, "--trace",
                 d / "trace.csv", "--quiet"}) == 0);
  CHECK(run_cli({"complete", "--factors", d / "f.json", "--out", d / "c.json", "--quiet"}) == 0);
  CHECK(run_cli({"cluster", "--completed", d / "c.json", "--axis", "rows", "--out-linkage", d / "lr.json", "--quiet"}) == 0);
  CHECK(run_cli({"cluster", "--completed", d / "c.json", "--axis", "cols", "--out-linkage", d / "lc.json", "--quiet"}) == 0);
  CHECK(run_cli({"cut", "--linkage", d / "lr.json", "--classes", "2", "--out", d / "cr.json", "--quiet"}) == 0);
  CHECK(run_cli({"cut", "--linkage", d / "lc.json", "--classes", "3", "--out", d / "cc.json", "--quiet"}) == 0);
  CHECK(run_cli({"order", "--linkage", d / "lr.json", "--out", d / "order.json", "--quiet"}) == 0);
  CHECK(run_cli({"fit-hmcm", "--matrix", d / "m.json", "--solute-classes", d / "cr.json", "--solvent-classes",
                 d / "cc.json", "--out", d / "h.json", "--config", cfg, "--quiet"}) == 0);
  CHECK(read_text(d / "m.json") == read_text(d / "run/matrix.json"));
  CHECK(read_text(d / "f.json") == read_text(d / "run/smcm_factors.json"));
  CHECK(read_text(d / "c.json") == read_text(d / "run/completed.json"));
  CHECK(read_text(d / "lr.json") == read_text(d / "run/solute_linkage.json"));
  CHECK(read_text(d / "cc.json") == read_text(d / "run/solvent_classes.json"));
  CHECK(read_text(d / "h.json") == read_text(d / "run/hmcm_params.json"));
  CHECK(read_text(d / "trace.csv").rfind("iteration,elbo\n100,", 0) == 0);
  CHECK(read_json(d / "order.json")["order"].size() == 9);

  write_text(d / "pairs.csv", "solute,solvent,solute_class,solvent_class\nS0,W1,,\nNEW,W1,1,\nNEW,NEW2,0,2\n");
  CHECK(run_cli({"predict", "--params", d / "h.json", "--pairs", d / "pairs.csv", "--cold-class", "--out",
                 d / "p.csv", "--quiet"}) == 0);
  const auto pred = read_text(d / "p.csv");
  CHECK(pred.rfind("solute,solvent,ln_gamma_pred,source\n", 0) == 0);
  CHECK(pred.find(",cold\n") != std::string::npos);
  CHECK(run_cli({"predict", "--params", d / "h.json", "--pairs", d / "pairs.csv", "--out", d / "p2.csv", "--quiet"}) == 2);
}

TEST_CASE("loo subcommand writes a report and a histogram") {
  TempDir d("loo");
  REQUIRE(run_cli({"synth", "--out", d / "in.csv", "--solutes", "8", "--solvents", "7", "--occupancy", "0.7",
                   "--quiet"}) == 0);
  write_text(d / "c.cfg", "n_solute_classes = 2\nn_solvent_classes = 2\n");
  write_text(d / "folds.txt", "1\n4\n");
  CHECK(run_cli({"loo", "--input", d / "in.csv", "--config", d / "c.cfg", "--folds", "0..2", "--out", d / "r.json",
                 "--histogram", d / "h.csv", "--quiet"}) == 0);
  const auto r = read_json(d / "r.json");
  CHECK(r["folds"].size() == 3);
  CHECK(read_text(d / "h.csv").rfind("bin_center,count\n", 0) == 0);
  CHECK(run_cli({"loo", "--input", d / "in.csv", "--config", d / "c.cfg", "--folds-list", d / "folds.txt", "--out",
                 d / "r2.json", "--quiet"}) == 0);
  CHECK(read_json(d / "r2.json")["folds"].size() == 2);
  CHECK(run_cli({"loo", "--input", d / "in.csv", "--folds", "3..1", "--out", d / "r3.json", "--quiet"}) == 2);
}

TEST_CASE("exit codes") {
  TempDir d("codes");
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"frobnicate"}) == 2);
  CHECK(run_cli({"--help"}) == 0);
  CHECK(run_cli({"run", "--input", d / "missing.csv", "--out-dir", d / "o", "--quiet"}) == 2);

  write_text(d / "bad.csv", "solute,solvent,ln_gamma,quality\nA,B,abc,ok\n");
  CHECK(run_cli({"ingest", "--input", d / "bad.csv", "--output", d / "m.json", "--quiet"}) == 2);

  write_text(d / "bad.cfg", "k = 0\n");
  REQUIRE(run_cli({"synth", "--out", d / "in.csv", "--solutes", "6", "--solvents", "6", "--occupancy", "0.8",
                   "--quiet"}) == 0);
  CHECK(run_cli({"run", "--input", d / "in.csv", "--out-dir", d / "o", "--config", d / "bad.cfg", "--quiet"}) == 2);

  CHECK(run_cli({"ingest", "--input", d / "in.csv", "--output", d / "no/such/dir/m.json", "--quiet"}) == 4);

  // A step size this large overflows the variational scales.
  write_text(d / "wild.cfg", "learning_rate = 1e300\n");
  CHECK(run_cli({"run", "--input", d / "in.csv", "--out-dir", d / "w", "--config", d / "wild.cfg", "--quiet"}) == 3);
  const auto manifest = read_json(d / "w/manifest.json");
  CHECK(manifest["failed_stage"] == "fit-smcm");
  CHECK_FALSE(fs::exists(d / "w/completed.json"));
}

}  // TEST_SUITE
