#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "normsim/config.hpp"
#include "normsim/experiments.hpp"

using namespace normsim;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> runs;
  unsigned jobs = 1;

  void add(CLI::App* app, bool with_runs) {
    app->add_option("--config", config, "Scenario JSON (defaults apply when omitted)")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Run seed; overrides the config");
    app->add_option("--out", out, "Output directory")->capture_default_str();
    if (with_runs) app->add_option("--runs", runs, "Number of runs; overrides the config");
    app->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  }

  config::ScenarioConfig scenario() const {
    auto c = config.empty() ? config::ScenarioConfig{} : config::load(config);
    if (seed) c.seed = *seed;
    return c;
  }

  experiments::Options options() const { return {out, jobs, runs}; }
};

void report(const nlohmann::json& manifest, const std::string& out) {
  std::cout << "wrote " << manifest["outputs"].size() << " files to " << out << '\n';
  if (manifest.contains("summary")) std::cout << manifest["summary"].dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Descriptive and prescriptive norm simulations for a clinical community"};
  app.set_version_flag("--version", config::kVersion);
  app.require_subcommand(1);

  Common gen_opt, desc_opt, presc_opt, fit_opt, an_opt;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic clinic dataset");
  gen_opt.add(gen, false);

  auto* desc = app.add_subcommand("descriptive", "Run a descriptive-norm experiment");
  desc_opt.add(desc, true);
  std::string mode = "single";
  desc->add_option("--mode", mode, "single, dist, scan or replay")
      ->check(CLI::IsMember({"single", "dist", "scan", "replay"}))
      ->capture_default_str();

  auto* presc = app.add_subcommand("prescriptive", "Run the prescriptive-norm scenario");
  presc_opt.add(presc, true);

  auto* fit = app.add_subcommand("fit-dist", "Fit heavy-tailed families to a CSV column");
  std::string fit_input, fit_column;
  std::size_t bins = 20;
  fit->add_option("--input", fit_input, "CSV file")->required()->check(CLI::ExistingFile);
  fit->add_option("--column", fit_column, "Column name (default: first column)");
  fit->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--out", fit_opt.out, "Output directory")->capture_default_str();

  auto* an = app.add_subcommand("analyze", "SDI trends, yearly increments and elbow of a dataset");
  an_opt.add(an, false);
  std::string an_input;
  an->add_option("--input", an_input, "dataset.csv from gen-data (default: generate)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      report(experiments::generate_data(gen_opt.scenario(), gen_opt.options()), gen_opt.out);
    } else if (desc->parsed()) {
      report(experiments::run_descriptive(desc_opt.scenario(), experiments::mode_from_name(mode),
                                          desc_opt.options()),
             desc_opt.out);
    } else if (presc->parsed()) {
      report(experiments::run_prescriptive(presc_opt.scenario(), presc_opt.options()),
             presc_opt.out);
    } else if (fit->parsed()) {
      report(experiments::fit_distribution(fit_input, fit_column, bins, fit_opt.options()),
             fit_opt.out);
    } else if (an->parsed()) {
      report(experiments::analyze(an_opt.scenario(), an_input, an_opt.options()), an_opt.out);
    }
  } catch (const std::exception& e) {
    std::cerr << "normsim: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
