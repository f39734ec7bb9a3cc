#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "qftir/calibration.hpp"
#include "qftir/cli.hpp"
#include "qftir/error.hpp"
#include "qftir/forward_model.hpp"
#include "qftir/ingest_io.hpp"
#include "support/data.hpp"

using namespace qftir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run qftir_run(std::vector<std::string> args) {
  args.insert(args.begin(), "qftir");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config(const char* name) { return (testdata::data_dir() / "configs" / name).string(); }

std::vector<std::pair<fs::path, std::string>> tree(const fs::path& dir) {
  std::vector<std::pair<fs::path, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir), io::read_file(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Noiseless methane absorbance as the calibration model sees it.
fs::path methane_csv(const fs::path& dir, double c, double res) {
  const WavenumberGrid grid(2950.0, 0.2, 651);
  const Spectrum blank(grid, std::vector<double>(grid.count(), 0.0), SpectrumKind::Absorbance);
  const calibration::CalibrationModel model(blank, testdata::species("methane"), 135.0);
  const Spectrum s(grid, c == 0.0 ? blank.values() : model.evaluate(c, res), SpectrumKind::Absorbance);
  const auto p = dir / "measured.csv";
  io::save_spectrum_csv(p, s);
  return p;
}

}  // namespace

TEST(Simulate, SameSeedGivesIdenticalBytes) {
  const auto dir = testdata::scratch_dir("cli_det");
  for (const char* sub : {"a", "b"}) {
    const auto r = qftir_run({"simulate", "-c", config("voc_mixture.json"), "--scan-count", "2", "--output-dir",
                              (dir / sub).string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto a = tree(dir / "a");
  ASSERT_EQ(a.size(), 5u);  // 2 sample, 2 reference, truth
  EXPECT_TRUE(a == tree(dir / "b"));  // contents too large to print
  ASSERT_EQ(qftir_run({"simulate", "-c", config("voc_mixture.json"), "--scan-count", "2", "--seed", "2",
                       "--output-dir", (dir / "c").string()})
                .code,
            0);
  EXPECT_FALSE(a == tree(dir / "c"));
}

TEST(Simulate, TruthEchoesMixture) {
  const auto dir = testdata::scratch_dir("cli_truth");
  const auto r = qftir_run({"simulate", "-c", config("voc_mixture.json"), "--scan-count", "1", "--output-dir",
                            dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto truth = io::parse_json(io::read_file(dir / "truth.json"));
  EXPECT_EQ(truth.at("mixture_ppm").at("acetone").get<double>(), 175.0);
  EXPECT_EQ(truth.at("mixture_ppm").at("methanol").get<double>(), 103.0);
  EXPECT_EQ(truth.at("path_length_cm").get<double>(), 170.0);
  EXPECT_EQ(truth.at("config_digest").get<std::string>().size(), 64u);
  const auto scan = io::parse_json(io::read_file(dir / "sample" / "scan_00000.json"));
  EXPECT_EQ(scan.at("provenance").at("config_digest"), truth.at("config_digest"));
}

TEST(Simulate, ZeroScansWritesNothing) {
  const auto dir = testdata::scratch_dir("cli_zero") / "out";
  const auto r = qftir_run({"simulate", "-c", config("voc_mixture.json"), "--scan-count", "0", "--output-dir",
                            dir.string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("scan_count"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Analyze, NoiselessRunReproducesTruth) {
  const auto dir = testdata::scratch_dir("cli_noiseless");
  const std::vector<std::string> common{"-c", config("voc_mixture.json"), "--noise-std", "0", "--output-dir",
                                        dir.string()};
  auto args = common;
  args.insert(args.begin(), {"simulate", "--scan-count", "2"});
  ASSERT_EQ(qftir_run(args).code, 0);
  args = common;
  args.insert(args.begin(), "analyze");
  const auto r = qftir_run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto res = io::retrieval_result_from_json(io::parse_json(io::read_file(dir / "result.json")));
  EXPECT_NEAR(res.concentrations.at("acetone"), 175.0, 1e-3 * 175.0);
  EXPECT_NEAR(res.concentrations.at("methanol"), 103.0, 1e-3 * 103.0);
  EXPECT_LT(std::abs(res.concentrations.at("ethanol")), res.detection_limits.at("ethanol").value());
  for (const char* f : {"residual.csv", "fit.csv", "absorbance.csv", "differential_absorbance.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_NE(io::read_file(dir / "residual.csv").find("config_digest="), std::string::npos);
}

TEST(Analyze, PureAcetoneClassification) {
  const auto dir = testdata::scratch_dir("cli_acetone");
  ASSERT_EQ(qftir_run({"simulate", "-c", config("pure_acetone.json"), "--scan-count", "40", "--output-dir",
                       dir.string()})
                .code,
            0);
  const auto r = qftir_run({"analyze", "-c", config("pure_acetone.json"), "--output-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = io::parse_json(io::read_file(dir / "result.json"));
  EXPECT_TRUE(j.at("present").at("acetone").get<bool>());
  EXPECT_FALSE(j.at("present").at("methanol").get<bool>());
  EXPECT_FALSE(j.at("present").at("ethanol").get<bool>());
  EXPECT_NE(r.out.find("PRESENT"), std::string::npos);
  EXPECT_NE(r.out.find("ABSENT"), std::string::npos);
}

TEST(Analyze, EmptyScanDirectoryIsACleanError) {
  const auto dir = testdata::scratch_dir("cli_empty");
  fs::create_directories(dir / "sample");
  fs::create_directories(dir / "reference");
  const auto r = qftir_run({"analyze", "-c", config("voc_mixture.json"), "--output-dir", dir.string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("no scan_"), std::string::npos) << r.err;
  EXPECT_TRUE(r.out.empty());
}

TEST(Analyze, TooManyFailedScansIsNonzero) {
  const auto dir = testdata::scratch_dir("cli_failed");
  ASSERT_EQ(qftir_run({"simulate", "-c", config("voc_mixture.json"), "--scan-count", "2", "--output-dir",
                       dir.string()})
                .code,
            0);
  for (const char* f : {"scan_00000.json", "scan_00001.json"}) io::write_file(dir / "sample" / f, "{not json");
  const auto r = qftir_run({"analyze", "-c", config("voc_mixture.json"), "--output-dir", dir.string()});
  EXPECT_EQ(r.code, cli::kDataError) << r.err;
}

TEST(Calibrate, RecoversResolutionOfScanLength) {
  const auto dir = testdata::scratch_dir("cli_cal");
  const auto measured = methane_csv(dir, 100.0, 1.0 / 0.9);
  const auto r = qftir_run({"calibrate", "-c", config("methane_cell.json"), "--measured", measured.string(),
                            "--output-dir", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("resolution_cm-1: ");
  ASSERT_NE(pos, std::string::npos) << r.out;
  const double res = std::stod(r.out.substr(pos + 17));
  EXPECT_NEAR(res, 1.0 / 0.9, 0.005 / 0.9);
  EXPECT_NE(r.out.find("fit_rms"), std::string::npos);
  const auto j = io::calibration_result_from_json(io::parse_json(io::read_file(dir / "calibration.json")));
  EXPECT_NEAR(j.concentration, 100.0, 0.5);
}

TEST(Calibrate, MissingSpeciesFileNamesThePath) {
  const auto dir = testdata::scratch_dir("cli_missing");
  io::write_file(dir / "cfg.json", R"({"species": {"methane": "nowhere/methane.xsc"}})");
  const auto r = qftir_run({"calibrate", "-c", (dir / "cfg.json").string(), "--measured",
                            (testdata::data_dir() / "spectra" / "methane_cell_absorbance.csv").string(),
                            "--output-dir", dir.string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("nowhere/methane.xsc"), std::string::npos) << r.err;
}

TEST(Calibrate, NonConvergedFitHasItsOwnExitCode) {
  const auto dir = testdata::scratch_dir("cli_flat");
  const auto measured = methane_csv(dir, 0.0, 1.11);
  const auto r = qftir_run({"calibrate", "-c", config("methane_cell.json"), "--measured", measured.string(),
                            "--output-dir", dir.string(), "--set", "calibration.initial_ppm=0.5",
                            "--set", "calibration.initial_resolution_cm-1=1.11"});
  EXPECT_EQ(r.code, cli::kNotConverged) << r.out << r.err;
  EXPECT_NE(r.out.find("converged: no"), std::string::npos) << r.out;
}

TEST(Track, ConstantSeriesAndCorruptStep) {
  const auto dir = testdata::scratch_dir("cli_track");
  ASSERT_EQ(qftir_run({"simulate", "-c", config("voc_mixture.json"), "--scan-count", "2", "--noise-std", "0",
                       "--output-dir", (dir / "run").string()})
                .code,
            0);
  ASSERT_EQ(qftir_run({"analyze", "-c", config("voc_mixture.json"), "--output-dir", (dir / "run").string()}).code, 0);
  const auto sample = io::load_spectrum_csv(dir / "run" / "sample_spectrum.csv");
  const double peak = *std::max_element(sample.values().begin(), sample.values().end());
  io::Json steps = io::Json::array();
  for (int i = 0; i < 10; ++i) {
    const std::string name = "s" + std::to_string(i) + ".csv";
    if (i == 4) {
      io::write_file(dir / name, "wavenumber,intensity\n1,oops\n");
    } else {
      io::save_spectrum_csv(dir / name, forward::add_gaussian_noise(sample, 2e-4 * peak, 100 + i));
    }
    steps.push_back({{"timestamp", 60.0 * i}, {"sample", name}, {"reference", "run/reference_spectrum.csv"}});
  }
  io::write_file(dir / "series.json", io::Json{{"schema_version", 1}, {"steps", steps}}.dump());
  const auto r = qftir_run({"track", "-c", config("voc_mixture.json"), "--series", dir.string(), "--output-dir",
                            (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("(1 failed)"), std::string::npos) << r.out;

  std::istringstream csv(io::read_file(dir / "out" / "series.csv"));
  std::string line;
  std::map<std::string, std::vector<double>> conc;
  int errors = 0;
  while (std::getline(csv, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("timestamp", 0) == 0) continue;
    std::vector<std::string> cell;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cell.push_back(c);
    ASSERT_GE(cell.size(), 5u) << line;
    if (cell[4] == "ERROR") {
      ++errors;
      EXPECT_EQ(cell[0], "240");
      ASSERT_EQ(cell.size(), 6u);
      EXPECT_NE(cell[5].find("s4.csv"), std::string::npos) << line;
      continue;
    }
    conc[cell[1]].push_back(std::stod(cell[2]));
  }
  EXPECT_EQ(errors, 3);
  ASSERT_EQ(conc.size(), 3u);
  for (const auto& [name, v] : conc) EXPECT_EQ(v.size(), 9u) << name;
  for (double c : conc["acetone"]) EXPECT_NEAR(c, 175.0, 5.0);
  for (double c : conc["methanol"]) EXPECT_NEAR(c, 103.0, 5.0);
}

TEST(Track, NonMonotonicTimestampsRejected) {
  const auto dir = testdata::scratch_dir("cli_track_ts");
  io::write_file(dir / "series.json",
                 R"({"schema_version": 1, "steps": [{"timestamp": 2, "sample": "a", "reference": "b"},
                                                    {"timestamp": 1, "sample": "a", "reference": "b"}]})");
  const auto r = qftir_run({"track", "-c", config("voc_mixture.json"), "--series", dir.string(), "--output-dir",
                            dir.string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("does not increase"), std::string::npos) << r.err;
}

TEST(Config, OutputDirEnvironmentOverride) {
  const auto dir = testdata::scratch_dir("cli_env");
  ::setenv("QFTIR_OUTPUT_DIR", (dir / "from_env").string().c_str(), 1);
  const auto r = qftir_run({"simulate", "-c", config("voc_mixture.json"), "--scan-count", "1"});
  ::unsetenv("QFTIR_OUTPUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "from_env" / "truth.json"));
}

TEST(Config, BadValuesAreConfigErrors) {
  EXPECT_EQ(qftir_run({"simulate", "-c", config("voc_mixture.json"), "--path-length-cm", "0"}).code,
            cli::kConfigError);
  EXPECT_EQ(qftir_run({"simulate", "-c", config("voc_mixture.json"), "--set", "band.low_cm-1=3100"}).code,
            cli::kConfigError);
  EXPECT_EQ(qftir_run({"simulate", "--mixture", "acetone"}).code, cli::kConfigError);
  EXPECT_EQ(qftir_run({"simulate", "-c", "/no/such/config.json"}).code, cli::kConfigError);
  EXPECT_EQ(qftir_run({"frobnicate"}).code, cli::kConfigError);
  EXPECT_EQ(qftir_run({"--help"}).code, 0);
}

TEST(Binary, ExitCodesReachTheShell) {
  const auto dir = testdata::scratch_dir("cli_bin");
  io::write_file(dir / "cfg.json", R"({"species": {"methane": "nowhere.xsc"}})");
  const std::string cmd = std::string(QFTIR_BIN) + " calibrate -c " + (dir / "cfg.json").string() +
                          " --measured x.csv > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), cli::kConfigError);
  const int ok = std::system((std::string(QFTIR_BIN) + " --version > /dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(ok), 0);
}
