#include "tke/cli.hpp"

#include "tke/config.hpp"
#include "tke/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tke;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tke_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file_without_timestamp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream keep;
  std::string line;
  while (std::getline(in, line))
    if (line.find("generated_at") == std::string::npos) keep << line << "\n";
  return keep.str();
}

const char* kCanonical = "band_limit = 10\nsymmetry_mode = full\n";
const char* kPerturbedEven =
    "band_limit = 10\nsymmetry_mode = even\nperturbation = (2, 0, 0.05)\n";

}  // namespace

TEST_CASE("config parser") {
  SUBCASE("full example") {
    ModelConfig cfg = parse_model_config_text(
        "# comment\nband_limit = 16\nfiber_length = 6.2832\n"
        "symmetry_mode = even\nperturbation = (2, 0, 0.05), (4, 2, -0.01)\n");
    CHECK(cfg.band_limit == 16);
    CHECK(cfg.fiber_length == doctest::Approx(6.2832));
    CHECK(cfg.symmetry_mode == SymmetryMode::even);
    REQUIRE(cfg.perturbation.size() == 2);
    CHECK(cfg.perturbation[1].degree == 4);
    CHECK(cfg.perturbation[1].order == 2);
    CHECK(cfg.perturbation[1].amplitude == doctest::Approx(-0.01));
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS_AS(parse_model_config_text("band_limit = 16\nresolution = 4\n"),
                    std::invalid_argument);
  }
  SUBCASE("duplicate keys are rejected") {
    CHECK_THROWS_AS(parse_model_config_text("band_limit = 16\nband_limit = 8\n"),
                    std::invalid_argument);
  }
  SUBCASE("malformed perturbation is rejected") {
    CHECK_THROWS_AS(parse_model_config_text("perturbation = (2, 0)\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_model_config_text("perturbation = (2, 0, 0.05) junk\n"),
                    std::invalid_argument);
  }
}

TEST_CASE("exit codes: config errors give 2, missing files give 2") {
  TempDir tmp;
  write_file(tmp.file("bad.cfg"), "band_limit = 16\nwhat = 3\n");
  CHECK(run_command({"model", "--config", tmp.file("bad.cfg")}) == 2);
  CHECK(run_command({"model", "--config", tmp.file("missing.cfg")}) == 2);
  CHECK(run_command({"nonsense"}) == 2);
}

TEST_CASE("solve writes family JSON and CSV with the expected schema") {
  TempDir tmp;
  write_file(tmp.file("m.cfg"), kPerturbedEven);
  const int rc = run_command({"solve", "--eqn", "s2", "--config", tmp.file("m.cfg"),
                              "--t-final", "1.0", "--t-nodes", "6", "--out",
                              tmp.file("family.json"), "--csv", tmp.file("family.csv")});
  CHECK(rc == 0);

  const auto j = io::read_json_file(tmp.file("family.json"));
  CHECK(j.at("schema") == "tke.family/1");
  CHECK(j.contains("seed"));
  CHECK(j.contains("provenance"));
  CHECK(j.at("data").at("complete").get<bool>());
  CHECK(j.at("data").at("states").size() == 6);

  // family round-trips through the loader
  ContinuityFamily fam = io::family_from_json(j.at("data"));
  CHECK(fam.size() == 6);
  CHECK(fam.reached_t == 1.0);

  std::ifstream csv(tmp.file("family.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,residual,L,M,I,J,min_eigenvalue");
}

TEST_CASE("determinism: identical config and seed give identical bytes") {
  TempDir tmp;
  write_file(tmp.file("m.cfg"), kPerturbedEven);
  const int rc1 = run_command({"functionals", "--config", tmp.file("m.cfg"), "--samples",
                               "4", "--seed", "11", "--out", tmp.file("a.json")});
  const int rc2 = run_command({"functionals", "--config", tmp.file("m.cfg"), "--samples",
                               "4", "--seed", "11", "--out", tmp.file("b.json")});
  CHECK(rc1 == 0);
  CHECK(rc2 == 0);
  CHECK(read_file_without_timestamp(tmp.file("a.json")) ==
        read_file_without_timestamp(tmp.file("b.json")));
}

TEST_CASE("verify exits zero on the canonical config") {
  TempDir tmp;
  write_file(tmp.file("canonical.cfg"), kCanonical);
  const int rc = run_command({"verify", "--config", tmp.file("canonical.cfg"),
                              "--samples", "6", "--seed", "2", "--out",
                              tmp.file("verify.json")});
  CHECK(rc == 0);
  const auto j = io::read_json_file(tmp.file("verify.json"));
  CHECK(j.at("schema") == "tke.verify/1");
  CHECK(j.at("data").at("all_pass").get<bool>());
}

TEST_CASE("report merges outputs and exits by status") {
  TempDir tmp;
  write_file(tmp.file("m.cfg"), kPerturbedEven);
  REQUIRE(run_command({"solve", "--config", tmp.file("m.cfg"), "--t-nodes", "6", "--out",
                       tmp.file("family.json")}) == 0);
  REQUIRE(run_command({"estimates", "--family", tmp.file("family.json"), "--out",
                       tmp.file("est.json"), "--rescale-points", "2", "--graph-base",
                       "120", "--graph-fiber", "24", "--graph-knn", "16"}) == 0);
  const int rc = run_command({"report", "--inputs", tmp.file("family.json"),
                              tmp.file("est.json"), "--out", tmp.file("report.json")});
  CHECK(rc == 0);
  const auto j = io::read_json_file(tmp.file("report.json"));
  CHECK(j.at("schema") == "tke.report/1");
  bool saw_skip = false, saw_pass = false;
  for (const auto& line : j.at("data").at("lines")) {
    if (line.at("status") == "SKIPPED") saw_skip = true;
    if (line.at("status") == "PASS") saw_pass = true;
    CHECK(line.at("status") != "FAIL");
  }
  CHECK(saw_pass);
  CHECK(saw_skip);  // no spectrum/uniqueness inputs were given
}

TEST_CASE("output directory override") {
  TempDir tmp;
  write_file(tmp.file("m.cfg"), kCanonical);
  ::setenv("TKE_OUT_DIR", tmp.path.string().c_str(), 1);
  const int rc = run_command({"model", "--config", tmp.file("m.cfg"), "--out",
                              "relative_model.json"});
  ::unsetenv("TKE_OUT_DIR");
  CHECK(rc == 0);
  CHECK(fs::exists(tmp.path / "relative_model.json"));
}

TEST_CASE("stray text between perturbation triples is rejected") {
  CHECK_THROWS_AS(
      parse_model_config_text("perturbation = (2, 0, 0.05) junk (4, 1, 0.01)\n"),
      std::invalid_argument);
}
