#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradlab/harness.hpp"
#include "gradlab/trace_io.hpp"

namespace {

using namespace gradlab;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;
constexpr int kExitCertMiss = 3;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file (JSON)")->required();
  cmd->add_option("--seed", args.seed, "override the first run seed");
  cmd->add_option("--out", args.out_dir, "override the output directory");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = load_experiment_config(args.config_path);
  if (args.seed) cfg.seeds.front() = *args.seed;
  if (args.out_dir) cfg.out_dir = *args.out_dir;
  return cfg;
}

std::vector<CompareVariant> variants_from_config(const ExperimentConfig& cfg) {
  if (!cfg.raw.contains("compare") || !cfg.raw.at("compare").contains("variants"))
    return default_compare_variants();
  std::vector<CompareVariant> variants;
  for (const auto& v : cfg.raw.at("compare").at("variants")) {
    CompareVariant var;
    var.label = v.at("label").get<std::string>();
    Json wrapper{{"objective", cfg.raw.at("objective")}, {"optimizer", v.at("optimizer")}};
    var.optimizer = *parse_experiment_config(wrapper).optimizer;
    variants.push_back(std::move(var));
  }
  if (variants.empty()) throw ConfigError("config error at 'compare.variants': empty list");
  return variants;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradlab: adaptive-gradient optimization testbed"};
  app.require_subcommand(1);

  CommonArgs run_args, grid_args, cert_args, xi_args, spec_args, cmp_args;
  bool strict = false;
  bool xi_retune = false;
  std::vector<double> xi_values;

  CLI::App* cmd_run = app.add_subcommand("run", "single optimization run");
  add_common(cmd_run, run_args);

  CLI::App* cmd_grid = app.add_subcommand("grid", "hyperparameter grid search");
  add_common(cmd_grid, grid_args);

  CLI::App* cmd_cert = app.add_subcommand("certify", "run a theorem budget certificate");
  add_common(cmd_cert, cert_args);
  cmd_cert->add_flag("--strict", strict, "exit 3 when the certificate misses");

  CLI::App* cmd_xi = app.add_subcommand("xi-sweep", "sensitivity sweep over the shift parameter");
  add_common(cmd_xi, xi_args);
  cmd_xi->add_option("--xi", xi_values, "xi values (defaults to config 'xi_sweep.values')");
  cmd_xi->add_flag("--retune", xi_retune, "re-tune the step size per xi via grid search");

  CLI::App* cmd_spec = app.add_subcommand("spectrum", "track the smallest Hessian eigenvalue");
  add_common(cmd_spec, spec_args);

  CLI::App* cmd_cmp = app.add_subcommand("compare", "multi-optimizer comparison figures");
  add_common(cmd_cmp, cmp_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (cmd_run->parsed()) {
      const ExperimentConfig cfg = load_config(run_args);
      const SingleRunOutput out = run_and_write(cfg, cfg.seeds.front(), cfg.run_name);
      std::cout << "status: " << run_status_name(out.result.status)
                << "  min |grad|: " << out.result.min_grad_norm << " (t=" << out.result.min_grad_t
                << ")\ntrace: " << out.trace_path << "\nmeta:  " << out.meta_path << "\n";
      return out.result.status == RunStatus::kDiverged ? kExitRun : kExitOk;
    }

    if (cmd_grid->parsed()) {
      const ExperimentConfig cfg = load_config(grid_args);
      if (!cfg.raw.contains("grid"))
        throw ConfigError("config error at 'grid': missing grid block");
      const GridSpec grid = parse_grid_spec(cfg.raw.at("grid"));
      const GridResult result = grid_search(grid, cfg);
      std::cout << "cells run: " << result.cells.size()
                << "  extensions: " << result.extensions_used
                << "  interior: " << (result.interior ? "yes" : "no") << "\nbest:";
      for (const auto& [k, v] : result.best) std::cout << "  " << k << "=" << v;
      std::cout << "  (final train loss " << result.best_loss << ")\n";
      std::filesystem::create_directories(cfg.out_dir);
      Json table = Json::array();
      for (const auto& cell : result.cells) {
        Json row{{"final_loss", cell.final_loss}, {"status", run_status_name(cell.status)}};
        for (const auto& [k, v] : cell.point) row[k] = v;
        table.push_back(row);
      }
      Json summary{{"best", result.best},
                   {"best_loss", result.best_loss},
                   {"extensions", result.extensions_used},
                   {"interior", result.interior},
                   {"cells", table}};
      std::ofstream out(cfg.out_dir + "/grid_result.json", std::ios::binary);
      out << summary.dump(2) << '\n';
      std::cout << "table: " << cfg.out_dir + "/grid_result.json" << "\n";
      return kExitOk;
    }

    if (cmd_cert->parsed()) {
      const ExperimentConfig cfg = load_config(cert_args);
      const CertReport report = certify_budget(cfg);
      std::cout << report.summary_line() << "\n";
      std::filesystem::create_directories(cfg.out_dir);
      const std::string path = cfg.out_dir + "/cert_report.json";
      Json report_json = report.to_json();
      report_json["config"] = cfg.raw;  // provenance, as in the run sidecars
      std::ofstream out(path, std::ios::binary);
      out << report_json.dump(2) << '\n';
      if (!report.trace.empty()) write_trace(report.trace, cfg.out_dir + "/cert_trace.csv");
      std::cout << "report: " << path << "\n";
      if (strict && !report.hit) return kExitCertMiss;
      return kExitOk;
    }

    if (cmd_xi->parsed()) {
      const ExperimentConfig cfg = load_config(xi_args);
      std::vector<double> xis = xi_values;
      if (xis.empty() && cfg.raw.contains("xi_sweep") &&
          cfg.raw.at("xi_sweep").contains("values")) {
        for (const auto& v : cfg.raw.at("xi_sweep").at("values")) xis.push_back(v.get<double>());
      }
      std::optional<GridSpec> grid;
      if (cfg.raw.contains("grid")) grid = parse_grid_spec(cfg.raw.at("grid"));
      const XiSweepResult sweep = xi_sweep(cfg, xis, xi_retune, grid);
      std::printf("%12s %12s %14s %14s %14s\n", "xi", "alpha", "final_train", "final_grad",
                  "min_grad");
      for (const auto& row : sweep.rows) {
        std::printf("%12g %12g %14.6g %14.6g %14.6g\n", row.xi, row.alpha, row.final_train,
                    row.final_grad, row.min_grad);
      }
      for (const auto& f : sweep.figure_paths) std::cout << "figure: " << f << "\n";
      return kExitOk;
    }

    if (cmd_spec->parsed()) {
      const ExperimentConfig cfg = load_config(spec_args);
      const SpectrumResult result = spectrum_experiment(cfg);
      std::cout << "status: " << run_status_name(result.run.result.status)
                << "\ntrace: " << result.run.trace_path << "\n";
      for (const auto& f : result.figure_paths) std::cout << "figure: " << f << "\n";
      return result.run.result.status == RunStatus::kDiverged ? kExitRun : kExitOk;
    }

    if (cmd_cmp->parsed()) {
      const ExperimentConfig cfg = load_config(cmp_args);
      const CompareResult result = compare(cfg, variants_from_config(cfg));
      std::cout << result.summary["observations"].dump(2) << "\n";
      for (const auto& f : result.figure_paths) std::cout << "figure: " << f << "\n";
      std::cout << "summary: " << result.summary_path << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const RunFailure& e) {
    std::cerr << e.what() << "\n";
    return kExitRun;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRun;
  }
  return kExitConfig;
}
