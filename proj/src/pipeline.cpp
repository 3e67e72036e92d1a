#include "wk/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "wk/error.hpp"
#include "wk/field.hpp"
#include "wk/kramers.hpp"
#include "wk/quasimode.hpp"
#include "wk/topology.hpp"

namespace wk {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::config, "config: " + msg); }

const json& need(const json& j, const char* key) {
  if (!j.contains(key)) bad(std::string("missing key '") + key + "'");
  return j.at(key);
}

std::vector<double> numbers(const json& j, const char* what) {
  if (!j.is_array()) bad(std::string(what) + " must be an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) bad(std::string(what) + " must be an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) bad("unknown key '" + it.key() + "' in " + where);
  }
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

RunConfig parse_config(const json& j) {
  if (!j.is_object()) bad("top level must be an object");
  only_keys(j, {"schema", "potential", "dimension", "domain", "grid", "h", "k", "solver", "quasimode", "principal_formula",
                "output", "seed", "threads"},
            "config");
  RunConfig c;
  c.raw = j;
  const json& schema = need(j, "schema");
  if (!schema.is_number_integer() || schema.get<int>() != 1) bad("unsupported schema (expected 1)");
  const json& pot = need(j, "potential");
  if (!pot.is_string()) bad("potential must be a string");
  c.potential = pot.get<std::string>();
  const json& dim = need(j, "dimension");
  if (!dim.is_number_integer()) bad("dimension must be 1 or 2");
  c.dimension = dim.get<int>();
  if (c.dimension != 1 && c.dimension != 2) bad("dimension must be 1 or 2");
  const json& dom = need(j, "domain");
  if (!dom.is_object()) bad("domain must be an object with lower and upper corners");
  only_keys(dom, {"lower", "upper"}, "domain");
  c.lower = numbers(need(dom, "lower"), "domain.lower");
  c.upper = numbers(need(dom, "upper"), "domain.upper");
  for (double v : numbers(need(j, "grid"), "grid")) {
    if (v != std::floor(v)) bad("grid sizes must be integers");
    c.grid.push_back(static_cast<int>(v));
  }
  if (static_cast<int>(c.grid.size()) != c.dimension) bad("grid needs one size per axis");
  c.h = numbers(need(j, "h"), "h");
  if (c.h.empty()) bad("h list is empty");
  for (std::size_t i = 0; i < c.h.size(); ++i) {
    if (!(c.h[i] > 0.0)) bad("h values must be positive");
    if (i > 0 && !(c.h[i] < c.h[i - 1])) bad("h values must be strictly decreasing");
  }
  if (j.contains("k")) {
    if (!j["k"].is_number_integer() || j["k"].get<int>() < 1) bad("k must be a positive integer");
    c.k = j["k"].get<int>();
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    if (!s.is_object()) bad("solver must be an object");
    only_keys(s, {"method", "tol", "stencil"}, "solver");
    if (s.contains("method")) {
      if (!s["method"].is_string()) bad("solver.method must be a string");
      c.method = parse_method(s["method"].get<std::string>());
    }
    if (s.contains("tol")) {
      if (!s["tol"].is_number() || !(s["tol"].get<double>() > 0.0)) bad("solver.tol must be positive");
      c.tol = s["tol"].get<double>();
    }
    if (s.contains("stencil")) {
      if (!s["stencil"].is_string()) bad("solver.stencil must be a string");
      c.stencil = parse_stencil(s["stencil"].get<std::string>());
    }
  }
  auto flag = [&](const char* key, bool& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean()) bad(std::string(key) + " must be true or false");
    out = j[key].get<bool>();
  };
  flag("quasimode", c.quasimode);
  flag("principal_formula", c.principal_formula);
  if (j.contains("output")) {
    const json& o = j["output"];
    if (o.is_string()) {
      c.output = o.get<std::string>();
    } else if (o.is_object()) {
      only_keys(o, {"dir", "vectors"}, "output");
      if (o.contains("dir")) {
        if (!o["dir"].is_string()) bad("output.dir must be a string");
        c.output = o["dir"].get<std::string>();
      }
      if (o.contains("vectors")) {
        if (!o["vectors"].is_boolean()) bad("output.vectors must be true or false");
        c.dump_vectors = o["vectors"].get<bool>();
      }
    } else {
      bad("output must be a directory name or an object");
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("seed must be a non-negative integer");
    c.seed = j["seed"].get<unsigned>();
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_unsigned()) bad("threads must be a non-negative integer");
    c.threads = j["threads"].get<int>();
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, path + ": " + e.what());
  }
  return parse_config(j);
}

StageSet parse_stages(const std::string& list) {
  StageSet s{false, false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "topology")
      s.topology = true;
    else if (item == "predict")
      s.predict = true;
    else if (item == "solve")
      s.solve = true;
    else if (item == "validate")
      s.validate = true;
    else if (!item.empty())
      throw Error(ErrorKind::config, "unknown stage '" + item + "'");
  }
  // every later stage needs the topology
  s.topology = true;
  return s;
}

RateFit fit_rates(const std::vector<std::pair<double, double>>& branch) {
  if (branch.size() < 4) throw Error(ErrorKind::numeric, "rate fit needs at least 4 h values");
  const auto n = static_cast<Eigen::Index>(branch.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [h, lam] = branch[static_cast<std::size_t>(i)];
    if (!(lam > 0.0)) throw Error(ErrorKind::numeric, "branch is below the floating-point floor");
    X(i, 0) = 1.0;
    X(i, 1) = std::log(h);
    X(i, 2) = -2.0 / h;
    y[i] = std::log(lam);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (!(s[2] > 1e-10 * s[0])) throw Error(ErrorKind::numeric, "rate fit design is rank deficient");
  Eigen::VectorXd b = svd.solve(y);
  RateFit r;
  r.prefactor = std::exp(b[0]);
  r.gamma = b[1];
  r.energy = b[2];
  r.rms_log_misfit = std::sqrt((X * b - y).squaredNorm() / static_cast<double>(n));
  return r;
}

namespace {

struct PerH {
  SpectrumResult spectrum;
  json quasimode;
  bool zeros_exact = true;
  bool minmax = true;
};

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
      return "config";
    case ErrorKind::hypothesis:
      return "hypothesis";
    case ErrorKind::numeric:
      return "numeric";
    case ErrorKind::degenerate:
      return "degenerate";
    case ErrorKind::syntax:
      return "syntax";
  }
  return "?";
}

}  // namespace

RunReport run_pipeline(const RunConfig& cfg, const StageSet& stages) {
  RunReport rep;
  json& J = rep.json;
  J["schema"] = 1;
  J["config"] = cfg.raw;
  std::string stage = "setup";
  rep.spectrum_csv = "h,j,lambda_numeric,lambda_predicted,ratio,residual\n";
  rep.rates_csv = "branch,E_pred,E_fit,gamma_pred,gamma_fit,prefactor_fit,rms_log_misfit\n";
  json verdicts = json::object();
  try {
    ScalarField field = parse_field(cfg.potential, cfg.dimension);
    Domain dom(cfg.dimension, cfg.lower, cfg.upper);
    Grid grid(dom, cfg.grid);
    json gj;
    for (int a = 0; a < grid.dim(); ++a) {
      gj["nodes"].push_back(grid.n(a));
      gj["dx"].push_back(grid.dx(a));
    }
    gj["interior"] = grid.interior_count();
    J["grid"] = gj;

    stage = "topology";
    Topology topo = analyze_topology(field, grid);
    J["topology"] = to_json(topo);
    verdicts["hypotheses"] = topo.hypotheses.pass();
    if (!topo.hypotheses.pass()) {
      std::string msg = "hypothesis violation";
      for (const auto& v : topo.hypotheses.violations) msg += "; " + v;
      throw Error(ErrorKind::hypothesis, msg);
    }
    if (!stages.predict) {
      J["status"] = {{"ok", true}};
      J["verdicts"] = verdicts;
      return rep;
    }

    stage = "predict";
    PredictionSet pred = build_prediction(topo.labeling, topo.crits);
    J["predictions"] = to_json(pred);
    const int m0 = static_cast<int>(pred.predictions.size());
    J["m0"] = m0;
    verdicts["m_star"] = pred.m_star;
    PrincipalFormula formula;
    if (cfg.principal_formula) {
      formula = principal_eigenvalue_formula(topo);
      J["principal_formula"] = to_json(formula);
      verdicts["principal_formula_applicable"] = formula.applicable;
    }
    if (!stages.solve) {
      J["status"] = {{"ok", true}};
      J["verdicts"] = verdicts;
      return rep;
    }

    stage = "solve";
    if (cfg.k < m0 + 2)
      throw Error(ErrorKind::config, "k=" + std::to_string(cfg.k) + " is below m0+2=" + std::to_string(m0 + 2));
    const bool do_qm = stages.validate && cfg.quasimode;
    CutoffProfile prof;
    if (do_qm) prof = choose_profile(topo);

    std::vector<PerH> results(cfg.h.size());
    std::vector<std::exception_ptr> errors(cfg.h.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= cfg.h.size()) return;
        try {
          const double h = cfg.h[i];
          SparseSymmetricOperator op = assemble(grid, topo.data, h, cfg.stencil);
          SolveOptions so;
          so.k = cfg.k;
          so.tol = cfg.tol;
          so.method = cfg.method;
          so.vectors = do_qm || cfg.dump_vectors;
          so.seed = cfg.seed;
          PerH& r = results[i];
          r.spectrum = smallest_eigenpairs(op, so);
          if (cfg.dump_vectors) {
            std::filesystem::create_directories(cfg.output);
            char name[64];
            std::snprintf(name, sizeof name, "/eigenvectors_h%g.wkev", h);
            write_flat_vectors(cfg.output + name, "WKEV", r.spectrum.eigenvectors);
          }
          if (do_qm) {
            std::vector<QuasiMode> qms;
            json qj = json::array();
            for (const auto& k : pred.predictions) {
              qms.push_back(build_quasimode(topo, *topo.labeling.find(k.minimum), h, prof));
              EnergyBreakdown e = dirichlet_energy(qms.back(), topo);
              json one = to_json(qms.back(), e);
              one["predicted_energy"] = k.lambda(h);
              one["energy_ratio"] = e.total / k.lambda(h);
              if (e.total < r.spectrum.eigenvalues[0] * (1.0 - 1e-8)) r.minmax = false;
              qj.push_back(one);
            }
            InteractionMatrices im = interaction_matrix(qms, topo, pred);
            ProjectorReport pr = projector_diagnostics(qms, im, r.spectrum, grid);
            r.zeros_exact = im.zeros_exact;
            r.quasimode = {{"h", h}, {"modes", qj}, {"interaction", to_json(im)}, {"projector", to_json(pr)}};
            if (cfg.dump_vectors) {
              Eigen::MatrixXd M(static_cast<Eigen::Index>(grid.interior_count()), static_cast<Eigen::Index>(qms.size()));
              for (std::size_t q = 0; q < qms.size(); ++q) M.col(static_cast<Eigen::Index>(q)) = qms[q].interior(grid);
              char name[64];
              std::snprintf(name, sizeof name, "/quasimodes_h%g.wkqm", h);
              write_flat_vectors(cfg.output + name, "WKQM", M);
            }
          }
          r.spectrum.eigenvectors.resize(0, 0);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::size_t nt = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads) : cfg.h.size();
    nt = std::max<std::size_t>(1, std::min(nt, cfg.h.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    json spectra = json::array();
    json counts = json::array();
    bool count_ok = true;
    for (std::size_t i = 0; i < cfg.h.size(); ++i) {
      const double h = cfg.h[i];
      const SpectrumResult& s = results[i].spectrum;
      json sj = to_json(s);
      sj["grid"] = gj["nodes"];
      json ratios = json::array();
      for (int j = 0; j < cfg.k; ++j) {
        const double lam = s.eigenvalues[static_cast<std::size_t>(j)];
        double p = j < m0 ? pred.predictions[static_cast<std::size_t>(j)].lambda(h) : NAN;
        double ratio = s.below_floor[static_cast<std::size_t>(j)] ? NAN : lam / p;
        if (j < m0) ratios.push_back(std::isfinite(ratio) ? json(ratio) : json(nullptr));
        rep.spectrum_csv += num(h) + "," + std::to_string(j + 1) + "," + num(lam) + "," + num(p) + "," + num(ratio) +
                            "," + num(s.residuals[static_cast<std::size_t>(j)]) + "\n";
      }
      sj["ratios"] = ratios;
      if (cfg.principal_formula && formula.applicable) {
        sj["principal_formula_ratio"] = s.eigenvalues[0] / formula.lambda(h);
        sj["principal_formula_vs_generic"] = formula.lambda(h) / pred.predictions[0].lambda(h);
      }
      spectra.push_back(sj);
      counts.push_back({{"h", h}, {"count", s.cluster.count}, {"gap_ratio", s.cluster.gap_ratio}});
      count_ok = count_ok && s.cluster.count == m0;
    }
    J["spectra"] = spectra;
    verdicts["cluster_count"] = {{"expected", m0}, {"per_h", counts}, {"pass", count_ok}};

    if (stages.validate) {
      stage = "validate";
      json fits = json::array();
      if (cfg.h.size() >= 4) {
        struct Branch {
          int index;
          RateFit fit;
        };
        std::vector<Branch> fitted;
        for (int j = 0; j < m0; ++j) {
          std::vector<std::pair<double, double>> pts;
          bool floor_hit = false;
          for (std::size_t i = 0; i < cfg.h.size(); ++i) {
            const auto& s = results[i].spectrum;
            if (s.below_floor[static_cast<std::size_t>(j)]) floor_hit = true;
            pts.emplace_back(cfg.h[i], s.eigenvalues[static_cast<std::size_t>(j)]);
          }
          if (floor_hit) {
            fits.push_back({{"branch", j + 1}, {"status", "below floor"}});
            continue;
          }
          fitted.push_back({j + 1, fit_rates(pts)});
        }
        // pair fitted branches with predictions as multisets ordered by E
        std::stable_sort(fitted.begin(), fitted.end(),
                         [](const Branch& a, const Branch& b) { return a.fit.energy > b.fit.energy; });
        std::vector<int> free_preds;
        for (int j = 0; j < m0; ++j) free_preds.push_back(j);
        std::vector<std::pair<Branch, int>> rows;
        for (std::size_t b = 0; b < fitted.size() && b < free_preds.size(); ++b) rows.emplace_back(fitted[b], free_preds[b]);
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first.index < b.first.index; });
        for (const auto& [br, pi] : rows) {
          const auto& k = pred.predictions[static_cast<std::size_t>(pi)];
          fits.push_back({{"branch", br.index},
                          {"minimum", k.minimum},
                          {"E_pred", k.energy},
                          {"E_fit", br.fit.energy},
                          {"gamma_pred", k.gamma},
                          {"gamma_fit", br.fit.gamma},
                          {"prefactor_fit", br.fit.prefactor},
                          {"rms_log_misfit", br.fit.rms_log_misfit}});
          rep.rates_csv += std::to_string(br.index) + "," + num(k.energy) + "," + num(br.fit.energy) + "," +
                           num(k.gamma) + "," + num(br.fit.gamma) + "," + num(br.fit.prefactor) + "," +
                           num(br.fit.rms_log_misfit) + "\n";
        }
      } else {
        fits.push_back({{"status", "rate fits need at least 4 h values"}});
      }
      J["rates"] = fits;
      if (do_qm) {
        json qa = json::array();
        bool zeros = true, minmax = true;
        for (const auto& r : results) {
          qa.push_back(r.quasimode);
          zeros = zeros && r.zeros_exact;
          minmax = minmax && r.minmax;
        }
        J["quasimodes"] = {{"profile", {{"delta1", prof.delta1}, {"delta2", prof.delta2}, {"adjustments", prof.adjustments}}},
                           {"per_h", qa}};
        verdicts["structural_zeros_exact"] = zeros;
        verdicts["minmax_bound"] = minmax;
      }
    }
    J["status"] = {{"ok", true}};
  } catch (const Error& e) {
    J["status"] = {{"ok", false}, {"stage", stage}, {"kind", kind_name(e.kind())}, {"message", e.what()}};
    rep.exit_code = exit_code(e.kind());
  } catch (const std::exception& e) {
    J["status"] = {{"ok", false}, {"stage", stage}, {"kind", "numeric"}, {"message", e.what()}};
    rep.exit_code = 3;
  }
  J["verdicts"] = verdicts;
  return rep;
}

void write_report(const RunReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) throw Error(ErrorKind::config, "cannot write " + dir + "/" + name);
    out << body;
  };
  put("report.json", r.json.dump(2) + "\n");
  put("spectrum.csv", r.spectrum_csv);
  put("rates.csv", r.rates_csv);
}

}  // namespace wk
