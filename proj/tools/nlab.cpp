// nlab: command line front end.
//
//   nlab run --config cfg.json [--out DIR] [--seed S] [--threads N]
//   nlab run --preset square
//   nlab constants --dim 3
//   nlab oracle lattice --lambda-max 2000

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlab/nlab.hpp"

namespace {

int do_run(const std::string& config_path, const std::string& preset, const std::string& out,
           std::optional<std::uint64_t> seed, std::optional<int> threads,
           const std::string& matrix_path) {
  nlohmann::json j;
  if (!preset.empty()) {
    j = nlab::preset_json(preset);
  } else {
    std::ifstream in(config_path);
    if (!in) throw nlab::Error(nlab::ErrorKind::Io, "cannot read config " + config_path);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw nlab::Error(nlab::ErrorKind::ConfigValidation, e.what());
    }
  }
  if (seed) j["seed"] = *seed;
  if (threads) j["threads"] = *threads;
  if (!out.empty()) j["output"] = out;
  const nlab::ExperimentConfig config = nlab::parse_config(j);

  if (!matrix_path.empty()) {
    const auto d = nlab::build_domain(config.domain);
    for (auto bc : config.conditions()) {
      std::ofstream os(matrix_path + "." + nlab::to_string(bc) + ".mtx");
      nlab::assemble(d, bc).write_matrix_market(os);
    }
  }

  const nlab::RunReport report = nlab::run(config);
  std::cout << "output: " << config.output << "\n";
  for (const auto& [name, v] : report.verdicts)
    std::cout << (v.passed ? "pass " : "FAIL ") << name << (v.gated ? "" : " (not gated)") << "\n";
  if (!report.passed()) {
    std::cerr << "failing checks:";
    for (const auto& name : report.failing) std::cerr << ' ' << name;
    std::cerr << "\n";
    return 1;
  }
  return 0;
}

nlohmann::json lattice_oracle(double lambda_max) {
  nlohmann::json dir = nlohmann::json::array();
  nlohmann::json neu = nlohmann::json::array();
  for (const auto& m : nlab::lattice::square_modes(lambda_max)) dir.push_back(m.lambda);
  for (const auto& m : nlab::lattice::square_modes(lambda_max, true)) neu.push_back(m.lambda);
  const double quarter = nlab::lattice::quarter_gauss_count(lambda_max);
  return {{"domain", "[0,pi]^2"},
          {"lambda_max", lambda_max},
          {"dirichlet_count", dir.size()},
          {"neumann_count", neu.size()},
          {"quarter_gauss_count", quarter},
          {"weyl_term", std::numbers::pi / 4 * lambda_max},
          {"quarter_gauss_over_lambda", lambda_max > 0 ? quarter / lambda_max : 0.0},
          {"dirichlet_eigenvalues", dir},
          {"neumann_eigenvalues", neu}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet/Neumann Laplacian eigenpairs and nodal domains on planar grids"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment config");
  std::string config_path;
  std::string preset;
  std::string out;
  std::string matrix_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  auto* config_opt = run->add_option("--config", config_path, "experiment JSON")->check(CLI::ExistingFile);
  auto* preset_opt = run->add_option("--preset", preset, "built-in preset")
                         ->check(CLI::IsMember(nlab::preset_names()));
  config_opt->excludes(preset_opt);
  run->add_option("--out", out, "output directory");
  run->add_option("--seed", seed, "solver and sampling seed");
  run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--export-matrix", matrix_path,
                  "write the assembled operators as PATH.<bc>.mtx (Matrix Market)");

  auto* constants = app.add_subcommand("constants", "print the Euclidean spectral constants");
  int dim = 2;
  constants->add_option("--dim", dim, "dimension N >= 2")->required();

  auto* oracle = app.add_subcommand("oracle", "exact reference data");
  oracle->require_subcommand(1);
  auto* lattice = oracle->add_subcommand("lattice", "lattice spectrum of the square [0,pi]^2");
  double lambda_max = 0;
  lattice->add_option("--lambda-max", lambda_max, "largest eigenvalue")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (config_path.empty() && preset.empty()) {
        std::cerr << "run needs --config or --preset\n";
        return 2;
      }
      return do_run(config_path, preset, out, seed, threads, matrix_path);
    }
    if (*constants) {
      std::cout << nlab::to_json(nlab::spectral_constants(dim)).dump(2) << "\n";
      return 0;
    }
    if (*lattice) {
      std::cout << lattice_oracle(lambda_max).dump(2) << "\n";
      return 0;
    }
  } catch (const nlab::ResolutionTooCoarse& e) {
    std::cerr << e.what() << " (minimal resolution " << e.minimal_resolution() << ")\n";
    return 2;
  } catch (const nlab::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return 0;
}
