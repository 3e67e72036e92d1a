#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "wk/error.hpp"
#include "wk/pipeline.hpp"

using namespace wk;
using nlohmann::json;

namespace {

json base() {
  return json::parse(R"({
    "schema": 1,
    "potential": "x1^2",
    "dimension": 1,
    "domain": {"lower": [-1.0], "upper": [1.0]},
    "grid": [257],
    "h": [0.3, 0.25],
    "k": 4,
    "solver": {"method": "dense"}
  })");
}

ErrorKind config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("config accepted: " << j.dump());
  return ErrorKind::numeric;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
  auto c = parse_config(base());
  CHECK(c.potential == "x1^2");
  CHECK(c.grid == std::vector<int>{257});
  CHECK(c.h == std::vector<double>{0.3, 0.25});
  CHECK(c.method == Method::dense);
  CHECK(c.stencil == Stencil::factorized);
  CHECK(c.output == "out");

  json o = base();
  o["output"] = {{"dir", "elsewhere"}, {"vectors", true}};
  auto d = parse_config(o);
  CHECK(d.output == "elsewhere");
  CHECK(d.dump_vectors);
}

TEST_CASE("config errors") {
  json j = base();
  j["schema"] = 2;
  CHECK(config_error(j) == ErrorKind::config);
  j = base();
  j["colour"] = "red";
  CHECK(config_error(j) == ErrorKind::config);
  j = base();
  j["h"] = {0.25, 0.3};
  CHECK(config_error(j) == ErrorKind::config);
  j = base();
  j["h"] = {0.3, -0.1};
  CHECK(config_error(j) == ErrorKind::config);
  j = base();
  j["solver"]["method"] = "power";
  CHECK(config_error(j) == ErrorKind::config);
  j = base();
  j.erase("potential");
  CHECK(config_error(j) == ErrorKind::config);
  j = base();
  j["grid"] = {256.5};
  CHECK(config_error(j) == ErrorKind::config);
  CHECK_THROWS_AS(parse_stages("topology,plot"), Error);
  auto s = parse_stages("predict");
  CHECK(s.topology);
  CHECK(s.predict);
  CHECK_FALSE(s.solve);
}

TEST_CASE("rate regression recovers an exact model") {
  std::vector<std::pair<double, double>> b;
  for (double h : {0.1, 0.15, 0.2, 0.25, 0.3}) b.emplace_back(h, 3 * h * std::exp(-2 / h));
  auto r = fit_rates(b);
  CHECK(r.energy == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.gamma == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.prefactor == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(r.rms_log_misfit < 1e-10);

  CHECK_THROWS_AS(fit_rates({{0.3, 1e-3}, {0.2, 1e-4}, {0.1, 1e-8}}), Error);
  CHECK_THROWS_AS(fit_rates({{0.3, 1e-3}, {0.3, 1e-3}, {0.3, 1e-3}, {0.3, 1e-3}}), Error);
  CHECK_THROWS_AS(fit_rates({{0.3, 1e-3}, {0.25, 0.0}, {0.2, 1e-5}, {0.15, 1e-6}}), Error);
}

TEST_CASE("pipeline on the single well") {
  auto rep = run_pipeline(parse_config(base()));
  CHECK(rep.exit_code == 0);
  CHECK(rep.json["status"]["ok"].get<bool>());
  CHECK(rep.json["m0"] == 1);
  CHECK(rep.json["predictions"]["predictions"].size() == 1);
  CHECK(rep.spectrum_csv.rfind("h,j,lambda_numeric,lambda_predicted,ratio,residual\n", 0) == 0);
  CHECK(rep.rates_csv == "branch,E_pred,E_fit,gamma_pred,gamma_fit,prefactor_fit,rms_log_misfit\n");
  // 2 h values x 4 eigenvalues
  CHECK(std::count(rep.spectrum_csv.begin(), rep.spectrum_csv.end(), '\n') == 9);
  for (const auto& s : rep.json["spectra"]) {
    CHECK(s.contains("h"));
    CHECK(s.contains("grid"));
  }
  auto again = run_pipeline(parse_config(base()));
  CHECK(again.json.dump() == rep.json.dump());
  CHECK(again.spectrum_csv == rep.spectrum_csv);
}

TEST_CASE("stages stop where asked") {
  auto rep = run_pipeline(parse_config(base()), parse_stages("topology"));
  CHECK(rep.exit_code == 0);
  CHECK(rep.json.contains("topology"));
  CHECK_FALSE(rep.json.contains("predictions"));
  auto pred = run_pipeline(parse_config(base()), parse_stages("topology,predict"));
  CHECK(pred.json.contains("predictions"));
  CHECK_FALSE(pred.json.contains("spectra"));
}

TEST_CASE("exit codes") {
  json rot = json::parse(R"({
    "schema": 1, "potential": "x1^2/2 + x2^2/2 - 2*x1*x2 + (x1+x2)^4/8", "dimension": 2,
    "domain": {"lower": [-2.0, -1.0], "upper": [0.0, 1.0]}, "grid": [65, 65], "h": [0.3]})");
  auto r = run_pipeline(parse_config(rot));
  CHECK(r.exit_code == 2);
  CHECK(r.json["status"]["kind"] == "hypothesis");
  CHECK_FALSE(r.json.contains("predictions"));
  CHECK_FALSE(r.json["topology"]["hypotheses"]["violations"].empty());

  json deg = base();
  deg["potential"] = "x1^4";
  auto d = run_pipeline(parse_config(deg));
  CHECK(d.exit_code == 2);
  CHECK(d.json["status"]["kind"] == "degenerate");

  json syn = base();
  syn["potential"] = "x1^^2";
  CHECK(run_pipeline(parse_config(syn)).exit_code == 4);

  json small_k = base();
  small_k["k"] = 2;
  auto k = run_pipeline(parse_config(small_k));
  CHECK(k.exit_code == 4);
  CHECK(k.json["status"]["stage"] == "solve");

  json coarse = base();
  coarse["grid"] = {17};
  CHECK(run_pipeline(parse_config(coarse)).exit_code == 4);

  CHECK(exit_code(ErrorKind::numeric) == 3);
  CHECK(exit_code(ErrorKind::config) == 4);
}

TEST_CASE("report files") {
  json j = base();
  j["h"] = {0.3, 0.25, 0.2, 0.15};
  j["quasimode"] = true;
  j["solver"]["method"] = "accurate";
  auto dir = (std::filesystem::temp_directory_path() / "wk_cli_test").string();
  j["output"] = {{"dir", dir}, {"vectors", true}};
  auto cfg = parse_config(j);
  auto rep = run_pipeline(cfg);
  REQUIRE(rep.exit_code == 0);
  write_report(rep, dir);
  for (const char* f : {"report.json", "spectrum.csv", "rates.csv", "eigenvectors_h0.3.wkev", "quasimodes_h0.3.wkqm"})
    CHECK(std::filesystem::exists(dir + "/" + f));
  auto back = json::parse(std::ifstream(dir + "/report.json"));
  CHECK(back["rates"][0]["E_fit"].get<double>() == doctest::Approx(1.0).epsilon(0.02));
  CHECK(back["verdicts"]["minmax_bound"].get<bool>());
  auto ev = read_flat_vectors(dir + "/eigenvectors_h0.3.wkev", "WKEV");
  CHECK(ev.cols() == 4);
  CHECK(ev.rows() == 255);
  std::filesystem::remove_all(dir);

  json sweep = base();
  sweep["potential"] = "(x1^2-1)^2";
  sweep["domain"] = {{"lower", {-1.7}}, {"upper", {1.7}}};
  sweep["grid"] = {2049};
  sweep["h"] = {0.3, 0.25, 0.2, 0.15};
  sweep["k"] = 5;
  sweep["solver"]["method"] = "accurate";
  auto dw = run_pipeline(parse_config(sweep));
  REQUIRE(dw.exit_code == 0);
  REQUIRE(dw.json["rates"].size() == 2);
  for (const auto& row : dw.json["rates"]) {
    double E = row["E_pred"].get<double>();
    CHECK(std::abs(row["E_fit"].get<double>() - E) < 0.03 * E);
  }
}

}
