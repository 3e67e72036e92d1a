#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wk/spectrum.hpp"

namespace wk {

struct RunConfig {
  std::string potential;
  int dimension = 1;
  std::vector<double> lower, upper;
  std::vector<int> grid;
  std::vector<double> h;  // strictly decreasing, positive
  int k = 6;
  Method method = Method::dense;
  double tol = 1e-10;
  Stencil stencil = Stencil::factorized;
  bool quasimode = false;
  bool principal_formula = false;
  std::string output = "out";
  bool dump_vectors = false;
  unsigned seed = 1;
  int threads = 0;  // 0: one per h value
  nlohmann::json raw;
};

/// Schema 1. Unknown keys are rejected.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

struct StageSet {
  bool topology = true;
  bool predict = true;
  bool solve = true;
  bool validate = true;
};

StageSet parse_stages(const std::string& list);

struct RateFit {
  double energy = 0.0;
  double gamma = 0.0;
  double prefactor = 0.0;
  double rms_log_misfit = 0.0;
};

/// Least squares for log lambda = log A + gamma log h - 2E/h.
RateFit fit_rates(const std::vector<std::pair<double, double>>& branch);

struct RunReport {
  nlohmann::json json;
  std::string spectrum_csv;
  std::string rates_csv;
  int exit_code = 0;
};

RunReport run_pipeline(const RunConfig& cfg, const StageSet& stages = {});

/// Writes report.json, spectrum.csv and rates.csv into `dir`.
void write_report(const RunReport& r, const std::string& dir);

}  // namespace wk
