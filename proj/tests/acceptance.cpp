// Runs the acceptance scenarios and prints one PASS/FAIL line per criterion.
// Always exits 0; the lines are the result.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "wk/pipeline.hpp"

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

struct Line {
  bool pass = true;
  std::ostringstream detail;
  void need(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

void report(const char* id, Line& l, double secs) {
  std::printf("%s %s (%.1f s)%s\n", id, l.pass ? "PASS" : "FAIL", secs, l.detail.str().c_str());
  std::fflush(stdout);
}

std::string config(const char* name) { return std::string(WK_SOURCE_DIR) + "/configs/" + name; }

wk::RunReport run(const char* name) { return wk::run_pipeline(wk::load_config(config(name))); }

double eig(const json& spectrum, int j) { return spectrum["eigenvalues"][j].get<double>(); }

int shell(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  return in ? json::parse(in) : json();
}

void a1(wk::RunReport& dw, double secs) {
  Line l;
  const auto& st = dw.json["status"];
  if (!st["ok"].get<bool>()) {
    l.need(false, "pipeline: " + st["message"].get<std::string>());
    report("A1", l, secs);
    return;
  }
  bool counts = true;
  std::ostringstream ratios;
  std::vector<double> dev;
  bool band = true;
  for (const auto& s : dw.json["spectra"]) {
    double h = s["h"].get<double>();
    counts = counts && s["cluster"]["count"].get<int>() == 2;
    double r = eig(s, 1) / (4 * std::sqrt(2.0) / kPi * h * std::exp(-2 / h));
    band = band && std::abs(r - 1) <= 3 * h;
    dev.push_back(std::abs(r - 1));
    char buf[64];
    std::snprintf(buf, sizeof buf, " %.3f@%g", r, h);
    ratios << buf;
  }
  bool monotone = true;
  for (std::size_t i = 1; i < dev.size(); ++i) monotone = monotone && dev[i] <= dev[i - 1];
  l.detail << " count=2 at every h: " << (counts ? "yes" : "no") << "; branch-2 ratio" << ratios.str();
  l.need(counts, "cluster count");
  l.need(secs <= 60.0, "runtime <= 60 s");
  l.need(band, "branch-2 ratio in [1-3h, 1+3h]");
  l.need(monotone, "branch-2 ratio approaches 1 monotonically");
  bool fit_ok = false;
  for (const auto& row : dw.json["rates"]) {
    if (!row.contains("E_fit") || std::abs(row["E_pred"].get<double>() - 3.5721) > 1e-6) continue;
    double E = row["E_fit"].get<double>(), g = row["gamma_fit"].get<double>();
    char buf[96];
    std::snprintf(buf, sizeof buf, "; branch-1 E_fit=%.4f gamma_fit=%.3f", E, g);
    l.detail << buf;
    fit_ok = E >= 3.45 && E <= 3.70 && g >= 0.3 && g <= 0.7;
  }
  l.need(fit_ok, "branch-1 fit");
  report("A1", l, secs);
}

void a2() {
  Timer t;
  Line l;
  auto hw = run("half_well.json");
  if (!hw.json["status"]["ok"].get<bool>()) {
    l.need(false, "pipeline: " + hw.json["status"]["message"].get<std::string>());
    report("A2", l, t.seconds());
    return;
  }
  l.detail << " ratio";
  for (const auto& s : hw.json["spectra"]) {
    double h = s["h"].get<double>();
    l.need(s["cluster"]["count"].get<int>() == 1, "cluster count at h=" + std::to_string(h));
    double r = eig(s, 0) / (8 * std::sqrt(2.0) / kPi * h * std::exp(-2 / h));
    char buf[48];
    std::snprintf(buf, sizeof buf, " %.3f@%g", r, h);
    l.detail << buf;
    l.need(std::abs(r - 1) <= 5 * std::sqrt(h), "ratio band at h=" + std::to_string(h));
  }
  report("A2", l, t.seconds());
}

void a3() {
  Timer t;
  Line l;
  auto r = run("half_domain_2d.json");
  if (!r.json["status"]["ok"].get<bool>()) {
    l.need(false, "pipeline: " + r.json["status"]["message"].get<std::string>());
    report("A3", l, t.seconds());
    return;
  }
  const auto& pf = r.json["principal_formula"];
  bool applicable = pf["applicable"].get<bool>();
  l.detail << " principal formula " << (applicable ? "applicable" : "not applicable (" + pf["reason"].get<std::string>() + ")");
  l.need(applicable, "applicability verdict");
  std::vector<double> dev;
  l.detail << "; lambda1/Lambda_h";
  for (const auto& s : r.json["spectra"]) {
    double h = s["h"].get<double>();
    double ratio = s["ratios"][0].get<double>();
    char buf[48];
    std::snprintf(buf, sizeof buf, " %.3f@%g", ratio, h);
    l.detail << buf;
    l.need(ratio >= 0.5 && ratio <= 2.0, "ratio in [0.5, 2] at h=" + std::to_string(h));
    dev.push_back(std::abs(ratio - 1));
  }
  for (std::size_t i = 1; i < dev.size(); ++i) l.need(dev[i] <= dev[i - 1], "drift toward 1");
  l.need(t.seconds() <= 600.0, "runtime <= 10 min");
  report("A3", l, t.seconds());
}

void a4(const wk::RunReport& dw, double secs) {
  Line l;
  const json* at = nullptr;
  if (dw.json.contains("quasimodes"))
    for (const auto& q : dw.json["quasimodes"]["per_h"])
      if (std::abs(q["h"].get<double>() - 0.25) < 1e-12) at = &q;
  if (!at) {
    l.need(false, "no quasi-mode diagnostics at h=0.25");
    report("A4", l, secs);
    return;
  }
  const double h = 0.25;
  double lambda1 = 0.0;
  for (const auto& s : dw.json["spectra"])
    if (std::abs(s["h"].get<double>() - h) < 1e-12) lambda1 = eig(s, 0);
  l.detail << " energy/prediction-1";
  for (const auto& m : (*at)["modes"]) {
    double e = m["energy"].get<double>();
    double rel = m["energy_ratio"].get<double>() - 1;
    char buf[32];
    std::snprintf(buf, sizeof buf, " %+.3f", rel);
    l.detail << buf;
    l.need(std::abs(rel) <= 3 * h, "energy within 3h");
    l.need(e >= lambda1, "min-max bound");
  }
  const auto& im = (*at)["interaction"];
  l.need(im["zeros_exact"].get<bool>(), "structural zeros exact");
  const auto& pr = (*at)["projector"];
  l.detail << "; Ritz relative error";
  for (const auto& e : pr["ritz_rel_error"]) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %+.3f", e.get<double>());
    l.detail << buf;
    l.need(std::abs(e.get<double>()) <= 0.15, "singular values within 15%");
  }
  report("A4", l, secs);
}

void a5() {
  Timer t;
  Line l;
  int rc = shell(std::string(WK_UNIT_TESTS) + " --minimal > /dev/null 2>&1");
  l.detail << " unit suites exit " << rc;
  l.need(rc == 0, "property suites green");
  l.need(t.seconds() <= 120.0, "runtime <= 120 s");
  report("A5", l, t.seconds());
}

void a6() {
  Timer t;
  Line l;
  auto out = (std::filesystem::temp_directory_path() / "wk_acceptance").string();
  std::string wk = WK_BINARY;
  int rc = shell(wk + " check --config " + config("rotated_saddle.json") + " --out " + out + "/rot > /dev/null 2>&1");
  json rot = read_json(out + "/rot/report.json");
  bool listed = rot.contains("topology") && !rot["topology"]["hypotheses"]["violations"].empty();
  l.detail << " rotated saddle exit " << rc << (listed ? " with violations" : " without violations");
  l.need(rc == 2 && listed, "hypothesis violation exit 2");

  rc = shell(wk + " run --config " + config("quartic.json") + " --out " + out + "/quartic > /dev/null 2>&1");
  json q = read_json(out + "/quartic/report.json");
  bool degenerate = q.contains("status") && q["status"]["kind"] == "degenerate";
  l.detail << "; x^4 exit " << rc << (degenerate ? " degenerate Hessian" : "");
  l.need(degenerate && rc == 2, "degenerate potential rejected");
  std::filesystem::remove_all(out);
  report("A6", l, t.seconds());
}

}  // namespace

int main() {
  Timer t;
  auto dw = run("double_well.json");
  double dw_secs = t.seconds();
  a1(dw, dw_secs);
  a2();
  a3();
  a4(dw, dw_secs);
  a5();
  a6();
  return 0;
}
