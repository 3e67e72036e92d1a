// wk: well/saddle topology, Eyring-Kramers predictions and spectral validation
// for the Dirichlet Witten Laplacian on a box.
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "wk/error.hpp"
#include "wk/pipeline.hpp"

namespace {

int finish(const wk::RunReport& rep, const std::string& dir) {
  try {
    wk::write_report(rep, dir);
  } catch (const wk::Error& e) {
    std::fprintf(stderr, "wk: %s\n", e.what());
    return wk::exit_code(e.kind());
  }
  const auto& st = rep.json.at("status");
  if (!st.at("ok").get<bool>())
    std::fprintf(stderr, "wk: %s failed (%s): %s\n", st.at("stage").get<std::string>().c_str(),
                 st.at("kind").get<std::string>().c_str(), st.at("message").get<std::string>().c_str());
  std::printf("%s/report.json\n", dir.c_str());
  return rep.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Witten Laplacian low-lying spectrum: topology, predictions, validation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, stage_list = "topology,predict,solve,validate";
  auto* run = app.add_subcommand("run", "run the pipeline and write report.json, spectrum.csv, rates.csv");
  run->add_option("--config", config_path, "JSON run configuration")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--stages", stage_list, "comma separated subset of topology,predict,solve,validate");

  auto* check = app.add_subcommand("check", "topology and hypothesis checks only");
  check->add_option("--config", config_path, "JSON run configuration")->required();
  check->add_option("--out", out_dir, "output directory (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  wk::RunConfig cfg;
  wk::StageSet stages;
  try {
    cfg = wk::load_config(config_path);
    stages = check->parsed() ? wk::parse_stages("topology") : wk::parse_stages(stage_list);
  } catch (const wk::Error& e) {
    std::fprintf(stderr, "wk: %s\n", e.what());
    return wk::exit_code(e.kind());
  }
  if (!out_dir.empty()) cfg.output = out_dir;

  wk::RunReport rep = wk::run_pipeline(cfg, stages);
  if (check->parsed()) {
    const auto& topo = rep.json.value("topology", nlohmann::json::object());
    if (topo.contains("hypotheses")) std::cout << topo["hypotheses"].dump(2) << "\n";
  }
  return finish(rep, cfg.output);
}
