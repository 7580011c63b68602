#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ionpair/cli.hpp"
#include "oracles.hpp"

using namespace ionpair;

namespace {

const std::string kParams = IONPAIR_PARAMS_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ionpair");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Data rows of a CSV with '#' headers and one column-name line.
std::vector<std::vector<std::string>> rows(const std::string& csv, std::vector<std::string>* header = nullptr) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(csv);
  std::string line;
  bool names = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (!names) {
      names = true;
      if (header) *header = cells;
      continue;
    }
    out.push_back(cells);
  }
  return out;
}

}  // namespace

TEST_CASE("g2 curve of the weak-excitation preset") {
  const Run r = run({"g2", "--params", kParams + "/weak.json", "--tmax", "200ns"});
  REQUIRE(r.code == 0);
  std::vector<std::string> header;
  const auto data = rows(r.out, &header);
  CHECK(header == std::vector<std::string>{"tau_ns", "g2_sigma_minus", "g2_sigma_plus"});
  REQUIRE(data.size() == 201);
  double peak = 0, at = 0;
  for (const auto& row : data)
    if (std::stod(row[1]) > peak) {
      peak = std::stod(row[1]);
      at = std::stod(row[0]);
    }
  CHECK(peak == doctest::Approx(16.49).epsilon(0.01));
  CHECK(at == doctest::Approx(29.0).epsilon(0.05));
  CHECK(r.out.rfind("# ionpair 0.1.0\n# command: g2\n# params_fingerprint: ", 0) == 0);
}

TEST_CASE("purity at a single delay") {
  const Run r = run({"purity", "--params", kParams + "/weak.json", "--tau", "24ns"});
  REQUIRE(r.code == 0);
  const auto data = rows(r.out);
  REQUIRE(data.size() == 1);
  CHECK(std::stod(data[0][1]) == doctest::Approx(128.0).epsilon(0.01));
  CHECK(std::stod(data[0][2]) == doctest::Approx(128.0 / 129.0).epsilon(1e-3));
}

TEST_CASE("exit codes") {
  oracle::TempDir dir;
  const std::string out = dir / "g2.csv";
  Run r = run({"g2", "--params", dir / "missing.json", "--out", out});
  CHECK(r.code == 2);
  CHECK(!std::filesystem::exists(out));
  CHECK(r.err.find("missing.json") != std::string::npos);

  CHECK(run({}).code == 1);
  CHECK(run({"g2"}).code == 1);
  CHECK(run({"g2", "--params", kParams + "/weak.json", "--bogus"}).code == 1);
  CHECK(run({"g2", "--params", kParams + "/weak.json", "--tmax", "100"}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);

  std::ofstream(dir / "dark.json") << R"({"omega397_mhz": 0, "omega866_mhz": 0, "delta397_mhz": -15, "delta866_mhz": 5,
                                          "b_gauss": 3.5, "alpha397": "0.5pi", "alpha866": "0.5pi"})";
  r = run({"g2", "--params", dir / "dark.json", "--out", out});
  CHECK(r.code == 3);
  CHECK(!std::filesystem::exists(out));

  std::ofstream(dir / "junk.ionclk") << "not a stream";
  CHECK(run({"correlate", "--a", dir / "junk.ionclk"}).code == 2);

  const Run v = run({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("outputs are byte-identical across runs") {
  oracle::TempDir dir;
  const std::vector<std::string> args = {"spectrum", "--params", kParams + "/calibration.json", "--points", "50", "--out"};
  auto a = args, b = args;
  a.push_back(dir / "a.csv");
  b.push_back(dir / "b.csv");
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv").find("# command: spectrum") != std::string::npos);
  for (const auto& e : std::filesystem::directory_iterator(dir.path)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("simulate then correlate") {
  oracle::TempDir dir;
  const std::string prefix = dir / "run";
  const std::vector<std::string> sim = {"simulate", "--params", kParams + "/strong.json", "--duration", "5ms",
                                        "--seed", "9", "--out", prefix};
  REQUIRE(run(sim).code == 0);
  const std::string ch1 = slurp(prefix + "_ch1.ionclk");
  CHECK(ch1.substr(0, 8) == std::string("IONCLK1\0", 8));
  const auto meta = nlohmann::json::parse(slurp(prefix + "_meta.json"));
  CHECK(meta["seed"] == 9);
  auto again = sim;
  again.back() = dir / "rerun";
  REQUIRE(run(again).code == 0);
  CHECK(slurp(dir / "rerun_ch1.ionclk") == ch1);
  CHECK(slurp(dir / "rerun_ch2.ionclk") == slurp(prefix + "_ch2.ionclk"));

  const Run c = run({"correlate", "--a", prefix + "_ch1.ionclk", "--b", prefix + "_ch2.ionclk", "--window", "50ns"});
  REQUIRE(c.code == 0);
  std::vector<std::string> header;
  const auto data = rows(c.out, &header);
  CHECK(header == std::vector<std::string>{"tau_ns", "counts", "g2"});
  REQUIRE(data.size() == 101);
  CHECK(std::stod(data.front()[0]) == doctest::Approx(-50.0));
  // sigma- then sigma+ detections cannot coincide
  CHECK(std::stod(data[50][1]) == 0.0);
}

TEST_CASE("spectrum fit from a config file") {
  oracle::TempDir dir;
  REQUIRE(run({"spectrum", "--params", kParams + "/calibration.json", "--points", "60", "--scale", "2000",
               "--background", "89", "--out", dir / "spec.csv"}).code == 0);
  std::ofstream(dir / "fit.json") << R"({
    "type": "spectrum",
    "params": ")" + kParams + R"(/calibration.json",
    "data": "spec.csv",
    "parameters": {
      "scale": {"value": 1500, "min": 0, "max": 5000},
      "background": {"value": 89, "free": false}
    },
    "options": {"restarts": 1, "max_evals": 300, "seed": 3}
  })";
  const Run r = run({"fit", "--config", dir / "fit.json", "--threads", "1"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["parameters"]["scale"]["value"].get<double>() == doctest::Approx(2000.0).epsilon(1e-4));
  CHECK(j["parameters"]["background"]["free"] == false);
  CHECK(j["dof"] == 59);
  CHECK(j["covariance"]["parameters"] == nlohmann::json::array({"scale"}));

  std::ofstream(dir / "bad.json") << R"({"type": "spectrum", "params": "x.json", "data": "spec.csv", "extra": 1})";
  CHECK(run({"fit", "--config", dir / "bad.json"}).code == 2);
}

TEST_CASE("selftest passes") {
  const Run r = run({"selftest"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
