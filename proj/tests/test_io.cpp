#include <doctest.h>

#include <fstream>
#include <numbers>

#include "ionpair/io.hpp"
#include "oracles.hpp"

using namespace ionpair;
using nlohmann::json;

namespace {

void write(const std::string& path, const std::string& text) {
  std::ofstream(path) << text;
}

json weak_json() {
  return json::parse(R"({"omega397_mhz": 9.2, "omega866_mhz": 1.3, "delta397_mhz": -15.0, "delta866_mhz": 5.8,
                         "b_gauss": 3.5, "alpha397": "0.5pi", "alpha866": "90deg"})");
}

}  // namespace

TEST_CASE("unit parsing") {
  constexpr double pi = std::numbers::pi;
  CHECK(parse_angle("0.46pi") == doctest::Approx(0.46 * pi));
  CHECK(parse_angle("90deg") == doctest::Approx(pi / 2));
  CHECK(parse_angle(" 1.5 rad") == doctest::Approx(1.5));
  CHECK(parse_duration("24ns") == doctest::Approx(24e-9));
  CHECK(parse_duration("1.5us") == doctest::Approx(1.5e-6));
  CHECK(parse_duration("10ms") == doctest::Approx(1e-2));
  CHECK(parse_duration("2s") == 2.0);
  CHECK(parse_duration("500ps") == doctest::Approx(5e-10));
  CHECK(parse_frequency("-15MHz") == doctest::Approx(-2 * pi * 15e6));
  CHECK(parse_frequency("800kHz") == doctest::Approx(2 * pi * 8e5));
  CHECK(parse_frequency("+50Hz") == doctest::Approx(2 * pi * 50));
  for (const char* bad : {"0.5", "pi", "12 parsecs", "", "nanns", "1e999ns"}) {
    CHECK_THROWS_AS(parse_duration(bad), std::invalid_argument);
    CHECK_THROWS_AS(parse_angle(bad), std::invalid_argument);
  }
  CHECK_THROWS_AS(parse_frequency("15mhz"), std::invalid_argument);
  CHECK(parse_angle(format_angle(0.46 * pi)) == doctest::Approx(0.46 * pi).epsilon(1e-12));
}

TEST_CASE("parameter JSON") {
  const ExperimentParams p = params_from_json(weak_json());
  const ExperimentParams w = weak_excitation();
  CHECK(p.rabi397 == doctest::Approx(w.rabi397));
  CHECK(p.detuning397 == doctest::Approx(w.detuning397));
  CHECK(p.alpha866 == doctest::Approx(std::numbers::pi / 2));
  CHECK(p.gamma_sp == w.gamma_sp);
  const ExperimentParams back = params_from_json(params_to_json(p));
  CHECK(back.fingerprint() == p.fingerprint());

  json j = weak_json();
  j["gamma_sp_mhz"] = 22.0;
  j["linewidth397_mhz"] = 0.1;
  const ExperimentParams q = params_from_json(j);
  CHECK(q.gamma_sp == doctest::Approx(mhz(22.0)));
  CHECK(q.linewidth397 == doctest::Approx(mhz(0.1)));

  SUBCASE("errors") {
    json bad = weak_json();
    bad.erase("b_gauss");
    CHECK_THROWS_AS(params_from_json(bad), InputError);
    bad = weak_json();
    bad["omega"] = 1.0;
    CHECK_THROWS_AS(params_from_json(bad), InputError);
    bad = weak_json();
    bad["b_gauss"] = -1.0;
    CHECK_THROWS_AS(params_from_json(bad), InputError);
    bad = weak_json();
    bad["alpha397"] = 1.57;
    CHECK_THROWS_AS(params_from_json(bad), InputError);
    bad = weak_json();
    bad["omega397_mhz"] = "9.2";
    CHECK_THROWS_AS(params_from_json(bad), InputError);
    bad = weak_json();
    bad["omega397_mhz"] = -9.2;
    CHECK_THROWS_AS(params_from_json(bad), InputError);
    CHECK_THROWS_AS(params_from_json(json::array()), InputError);
  }
}

TEST_CASE("parameter files") {
  oracle::TempDir dir;
  write(dir / "ok.json", weak_json().dump());
  CHECK(load_params_file(dir / "ok.json").field_gauss == 3.5);
  write(dir / "broken.json", "{\"omega397_mhz\": ");
  CHECK_THROWS_AS(load_params_file(dir / "broken.json"), InputError);
  CHECK_THROWS_AS(load_params_file(dir / "absent.json"), InputError);
}

TEST_CASE("fit parameter names and units") {
  CHECK(fit_parameter_key("omega397") == "omega397_mhz");
  CHECK(fit_parameter_key("field") == "b_gauss");
  CHECK(fit_parameter_key("eps_minus") == "eps_minus");
  CHECK(fit_parameter_name("delta397_mhz") == "delta397");
  CHECK(fit_parameter_name("b_gauss") == "field");
  CHECK_THROWS_AS(fit_parameter_name("omega397"), InputError);
  CHECK_THROWS_AS(fit_parameter_name("eps_minus_mhz"), InputError);
  CHECK(fit_parameter_from_json("omega866", 1.5) == doctest::Approx(mhz(1.5)));
  CHECK(fit_parameter_from_json("alpha397", "0.46pi") == doctest::Approx(0.46 * std::numbers::pi));
  CHECK(fit_parameter_to_json("omega866", mhz(1.5)).get<double>() == doctest::Approx(1.5));
  CHECK(fit_parameter_unit("alpha866") == doctest::Approx(std::numbers::pi));
}

TEST_CASE("spectrum CSV") {
  oracle::TempDir dir;
  write(dir / "s.csv", "# header comment\ndetuning866_mhz,counts\n-10,400\n0,0\n10,2.25\n");
  const DataSet d = read_spectrum_csv(dir / "s.csv");
  CHECK(d.kind == DataKind::Spectrum);
  CHECK(d.x[0] == doctest::Approx(mhz(-10)));
  CHECK(d.sigma == std::vector<double>{20.0, 1.0, 1.5});
  write(dir / "e.csv", "detuning866_mhz,counts,error\n1,5,0.5\n");
  CHECK(read_spectrum_csv(dir / "e.csv").sigma[0] == 0.5);
  write(dir / "bad.csv", "detuning866_mhz,counts\n1,x\n");
  CHECK_THROWS_AS(read_spectrum_csv(dir / "bad.csv"), InputError);
  write(dir / "short.csv", "detuning866_mhz,counts\n1\n");
  CHECK_THROWS_AS(read_spectrum_csv(dir / "short.csv"), InputError);
  write(dir / "nocol.csv", "x,counts\n1,2\n");
  CHECK_THROWS_AS(read_spectrum_csv(dir / "nocol.csv"), InputError);
  write(dir / "empty.csv", "detuning866_mhz,counts\n");
  CHECK_THROWS_AS(read_spectrum_csv(dir / "empty.csv"), InputError);
}

TEST_CASE("g2 CSV") {
  oracle::TempDir dir;
  write(dir / "c.csv", "tau_ns,counts,g2\n-1,10,0.5\n0,0,0\n1,100,2\n2,25,4\n3,400,1\n");
  const DataSet c = read_g2_csv(dir / "c.csv", DataKind::G2Minus, 2.5e-9);
  CHECK(c.bin_width == doctest::Approx(1e-9));
  // bins centered at -1 and 0 reach negative delays; 3 ns is past tmax
  REQUIRE(c.size() == 2);
  CHECK(c.x[0] == doctest::Approx(1e-9));
  CHECK(c.sigma[0] == doctest::Approx(0.2));
  CHECK(c.sigma[1] == doctest::Approx(0.8));

  write(dir / "z.csv", "tau_ns,counts,g2\n1,0,0\n2,4,2\n");
  const DataSet z = read_g2_csv(dir / "z.csv", DataKind::G2Plus, 1e-6);
  CHECK(z.sigma[0] == doctest::Approx(1.0));  // empty bin: mean level

  write(dir / "p.csv", "tau_ns,g2,error\n0,0,0.1\n5,1.5,0.2\n");
  const DataSet p = read_g2_csv(dir / "p.csv", DataKind::G2Plus, 1e-6);
  CHECK(p.kind == DataKind::G2Plus);
  CHECK(p.bin_width == 0.0);
  CHECK(p.x[1] == doctest::Approx(5e-9));
  write(dir / "neg.csv", "tau_ns,g2,error\n0,1,0\n");
  CHECK_THROWS_AS(read_g2_csv(dir / "neg.csv", DataKind::G2Plus, 1e-6), InputError);
}

TEST_CASE("fit result JSON") {
  FitResult r;
  r.parameters = {{"omega397", mhz(9.9), 0, mhz(50), true}, {"alpha866", 0.4 * std::numbers::pi, 0, 1.5, false}};
  r.uncertainty = {mhz(0.1), 0.0};
  r.free_names = {"omega397"};
  r.covariance = Eigen::MatrixXd::Constant(1, 1, mhz(0.1) * mhz(0.1));
  r.state.params = calibration_spectrum();
  r.chi2 = 120.0;
  r.points = 102;
  r.dof = 101;
  const json j = fit_result_to_json(r);
  CHECK(j["parameters"]["omega397_mhz"]["value"].get<double>() == doctest::Approx(9.9));
  CHECK(j["parameters"]["omega397_mhz"]["uncertainty"].get<double>() == doctest::Approx(0.1));
  CHECK(j["parameters"]["alpha866"]["value"] == "0.4pi");
  CHECK(!j["parameters"]["alpha866"].contains("uncertainty"));
  CHECK(j["covariance"]["matrix"][0][0].get<double>() == doctest::Approx(0.01));
  CHECK(j["reduced_chi2"].get<double>() == doctest::Approx(120.0 / 101));
  CHECK(params_from_json(j["params"]).fingerprint() == r.state.params.fingerprint());
}
