#pragma once

// Config-driven runs: rasterize, assemble, solve, decompose, check, report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "nlab/bessel.hpp"
#include "nlab/domains.hpp"
#include "nlab/eigensolver.hpp"
#include "nlab/error.hpp"
#include "nlab/io.hpp"
#include "nlab/laplacian.hpp"
#include "nlab/nodal.hpp"
#include "nlab/rearrange.hpp"

namespace nlab {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names{"courant",     "pleijel", "weyl",
                                              "faber_krahn", "polya_szego", "green",
                                              "certificate", "isoperimetric", "coarea"};
  return names;
}

/// Reads a real number given either as a JSON number or as a short string
/// built from a number and pi: "pi", "2*pi", "pi/2", "256/pi", "0.5".
inline double parse_real(const nlohmann::json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    static const std::regex re(R"(^\s*([0-9.eE+-]*)\s*\*?\s*(pi)?\s*(?:/\s*([0-9.eE+-]+|pi))?\s*$)");
    std::smatch m;
    const std::string s = v.get<std::string>();
    if (std::regex_match(s, m, re) && (m[1].length() > 0 || m[2].matched)) {
      try {
        double x = m[1].length() ? std::stod(m[1].str()) : 1.0;
        if (m[2].matched) x *= std::numbers::pi;
        if (m[3].matched) x /= m[3].str() == "pi" ? std::numbers::pi : std::stod(m[3].str());
        return x;
      } catch (const std::exception&) {
      }
    }
  }
  throw Error(ErrorKind::ConfigValidation, "field '" + field + "' is not a number: " + v.dump());
}

struct ExperimentConfig {
  nlohmann::json domain = nlohmann::json::object();
  std::string bc = "dirichlet";  ///< dirichlet | neumann | both
  int K = 50;
  double tol_eig = 1e-8;
  std::vector<double> tau_sweep{0.0, 1e-4, 1e-3};
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::string> checks;
  std::string output = "out";

  bool write_eigenvectors = false;
  bool plots = true;
  int pgm_count = 6;         ///< label images for k = 1..pgm_count
  int green_max_k = 30;      ///< nodal Rayleigh and per-domain checks up to this k
  int pleijel_window_lo = 30;
  int pleijel_window_hi = 60;
  int random_trials = 20;    ///< Polya-Szego bump functions
  int coarea_trials = 100;
  double fk_slack = kFaberKrahnSlack;
  double nodal_fk_slack = 0.05;
  double certificate_slack = 0.05;

  [[nodiscard]] std::vector<BoundaryCondition> conditions() const {
    if (bc == "both") return {BoundaryCondition::Dirichlet, BoundaryCondition::Neumann};
    if (bc == "neumann") return {BoundaryCondition::Neumann};
    return {BoundaryCondition::Dirichlet};
  }
  [[nodiscard]] bool wants(const std::string& check) const {
    return std::find(checks.begin(), checks.end(), check) != checks.end();
  }
  [[nodiscard]] bool has_dirichlet() const { return bc != "neumann"; }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"domain", domain},
            {"bc", bc},
            {"K", K},
            {"tol_eig", tol_eig},
            {"tau_sweep", tau_sweep},
            {"seed", seed},
            {"threads", threads},
            {"checks", checks},
            {"output", output},
            {"options",
             {{"write_eigenvectors", write_eigenvectors},
              {"plots", plots},
              {"pgm_count", pgm_count},
              {"green_max_k", green_max_k},
              {"pleijel_window", {pleijel_window_lo, pleijel_window_hi}},
              {"random_trials", random_trials},
              {"coarea_trials", coarea_trials},
              {"fk_slack", fk_slack},
              {"nodal_fk_slack", nodal_fk_slack},
              {"certificate_slack", certificate_slack}}}};
  }
};

namespace detail {

inline void config_error(const std::string& what) { throw Error(ErrorKind::ConfigValidation, what); }

template <class T>
T get_field(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error("field '" + key + "' has the wrong type: " + j.at(key).dump());
  }
  return fallback;
}

inline double domain_number(const nlohmann::json& spec, const std::string& key) {
  if (!spec.contains(key)) config_error("domain needs field '" + key + "'");
  return parse_real(spec.at(key), "domain." + key);
}

}  // namespace detail

/// Builds the grid domain described by a config's "domain" object.
inline GridDomain build_domain(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("shape"))
    detail::config_error("domain must be an object with a 'shape' field");
  const std::string shape = spec.at("shape").get<std::string>();
  const double res = detail::domain_number(spec, "resolution");
  if (shape == "rectangle")
    return rasterize_rectangle(detail::domain_number(spec, "width"),
                               detail::domain_number(spec, "height"), res);
  if (shape == "disk") return rasterize_disk(detail::domain_number(spec, "radius"), res);
  if (shape == "annulus")
    return rasterize_annulus(detail::domain_number(spec, "inner"),
                             detail::domain_number(spec, "outer"), res);
  if (shape == "lshape")
    return rasterize_lshape(detail::domain_number(spec, "arm"),
                            detail::domain_number(spec, "thickness"), res);
  if (shape == "koch") {
    const double side = spec.contains("side") ? detail::domain_number(spec, "side") : 1.0;
    return rasterize_koch(detail::get_field<int>(spec, "level", 0), res, side);
  }
  detail::config_error("unknown domain shape '" + shape + "'");
  return rasterize_rectangle(1, 1, 1);
}

/// Parses and validates. Nothing is computed; the Koch resolution guard is
/// applied here so a coarse snowflake is refused before any work.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::config_error;
  using detail::get_field;
  if (!j.is_object()) config_error("config must be a JSON object");
  static const std::set<std::string> top{"domain", "bc",     "K",      "tol_eig", "tau_sweep",
                                         "seed",   "threads", "checks", "output",  "options"};
  for (const auto& [key, _] : j.items())
    if (!top.count(key)) config_error("unknown config field '" + key + "'");

  ExperimentConfig c;
  if (!j.contains("domain")) config_error("config needs a 'domain' object");
  c.domain = j.at("domain");
  c.bc = get_field<std::string>(j, "bc", c.bc);
  if (c.bc != "dirichlet" && c.bc != "neumann" && c.bc != "both")
    config_error("bc must be dirichlet, neumann or both");
  c.K = get_field<int>(j, "K", c.K);
  if (c.K < 1) config_error("K must be at least 1");
  c.tol_eig = get_field<double>(j, "tol_eig", c.tol_eig);
  if (!(c.tol_eig >= 1e-12 && c.tol_eig <= 1e-4)) config_error("tol_eig must lie in [1e-12, 1e-4]");
  c.tau_sweep = get_field<std::vector<double>>(j, "tau_sweep", c.tau_sweep);
  if (c.tau_sweep.empty()) config_error("tau_sweep must not be empty");
  for (double t : c.tau_sweep)
    if (!(t >= 0.0 && t <= 0.05)) config_error("tau values must lie in [0, 0.05]");
  c.seed = get_field<std::uint64_t>(j, "seed", c.seed);
  c.threads = get_field<int>(j, "threads", c.threads);
  if (c.threads < 1) config_error("threads must be positive");
  c.checks = get_field<std::vector<std::string>>(j, "checks", c.checks);
  for (const auto& name : c.checks)
    if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end())
      config_error("unknown check '" + name + "'");
  c.output = get_field<std::string>(j, "output", c.output);

  if (j.contains("options")) {
    const auto& o = j.at("options");
    static const std::set<std::string> opts{
        "write_eigenvectors", "plots",        "pgm_count",     "green_max_k",
        "pleijel_window",     "random_trials", "coarea_trials", "fk_slack",
        "nodal_fk_slack",     "certificate_slack"};
    for (const auto& [key, _] : o.items())
      if (!opts.count(key)) config_error("unknown option '" + key + "'");
    c.write_eigenvectors = get_field<bool>(o, "write_eigenvectors", c.write_eigenvectors);
    c.plots = get_field<bool>(o, "plots", c.plots);
    c.pgm_count = get_field<int>(o, "pgm_count", c.pgm_count);
    c.green_max_k = get_field<int>(o, "green_max_k", c.green_max_k);
    if (o.contains("pleijel_window")) {
      const auto w = get_field<std::vector<int>>(o, "pleijel_window", {});
      if (w.size() != 2 || w[0] < 1 || w[1] < w[0]) config_error("pleijel_window must be [lo, hi]");
      c.pleijel_window_lo = w[0];
      c.pleijel_window_hi = w[1];
    }
    c.random_trials = get_field<int>(o, "random_trials", c.random_trials);
    c.coarea_trials = get_field<int>(o, "coarea_trials", c.coarea_trials);
    c.fk_slack = get_field<double>(o, "fk_slack", c.fk_slack);
    c.nodal_fk_slack = get_field<double>(o, "nodal_fk_slack", c.nodal_fk_slack);
    c.certificate_slack = get_field<double>(o, "certificate_slack", c.certificate_slack);
    for (double s : {c.fk_slack, c.nodal_fk_slack, c.certificate_slack})
      if (!(s >= 0.0 && s < 1.0)) config_error("slack options must lie in [0, 1)");
  }

  if (c.wants("pleijel") && c.K < kPleijelMinK) config_error("pleijel needs K >= 20");
  if (c.wants("weyl") && c.K < kWeylMinEigenvalues) config_error("weyl needs K >= 50");
  if (c.wants("faber_krahn") && !c.has_dirichlet())
    config_error("faber_krahn needs a Dirichlet spectrum (bc dirichlet or both)");

  if (!c.domain.is_object() || !c.domain.contains("shape"))
    config_error("domain must be an object with a 'shape' field");
  if (c.domain.at("shape") == "koch") {
    const int level = detail::get_field<int>(c.domain, "level", 0);
    const double side = c.domain.contains("side") ? detail::domain_number(c.domain, "side") : 1.0;
    const double res = detail::domain_number(c.domain, "resolution");
    const double minimal = koch_minimal_resolution(level, side);
    if (!(res > minimal))
      throw ResolutionTooCoarse("Koch level " + std::to_string(level) + " needs resolution > " +
                                    std::to_string(minimal),
                                minimal);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Presets

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"square", "disk", "lshape", "koch2", "koch3"};
  return names;
}

inline nlohmann::json preset_json(const std::string& name) {
  nlohmann::json domain;
  if (name == "square")
    domain = {{"shape", "rectangle"}, {"width", "pi"}, {"height", "pi"}, {"resolution", "256/pi"}};
  else if (name == "disk")
    domain = {{"shape", "disk"}, {"radius", 1.0}, {"resolution", 100}};
  else if (name == "lshape")
    domain = {{"shape", "lshape"}, {"arm", 1.0}, {"thickness", 0.5}, {"resolution", 128}};
  else if (name == "koch2")
    domain = {{"shape", "koch"}, {"level", 2}, {"resolution", 200}};
  else if (name == "koch3")
    domain = {{"shape", "koch"}, {"level", 3}, {"resolution", 200}};
  else
    throw Error(ErrorKind::ConfigValidation, "unknown preset '" + name + "'");
  return {{"domain", domain},
          {"bc", "both"},
          {"K", 50},
          {"tol_eig", 1e-8},
          {"tau_sweep", {0.0, 1e-4, 1e-3}},
          {"seed", 0},
          {"checks",
           {"courant", "pleijel", "faber_krahn", "polya_szego", "green", "certificate",
            "isoperimetric", "coarea"}},
          {"output", "out/" + name}};
}

// ---------------------------------------------------------------------------
// Neumann vs Dirichlet

struct BcComparison {
  std::vector<double> dirichlet;
  std::vector<double> neumann;
  std::vector<double> margins;  ///< lambda_k^D - lambda_k^N
  double min_margin = 0.0;
  double tolerance = 1e-9;
  bool holds = false;
};

inline BcComparison compare_bc(const Spectrum& dirichlet, const Spectrum& neumann,
                               double tolerance = 1e-9) {
  require(dirichlet.bc == BoundaryCondition::Dirichlet && neumann.bc == BoundaryCondition::Neumann,
          ErrorKind::InvalidParameter, "compare_bc needs a Dirichlet and a Neumann spectrum");
  require(dirichlet.k() == neumann.k(), ErrorKind::DimensionMismatch,
          "spectra have different numbers of eigenvalues");
  require(dirichlet.n == neumann.n, ErrorKind::DimensionMismatch, "spectra on different domains");
  BcComparison c;
  c.tolerance = tolerance;
  c.dirichlet = dirichlet.eigenvalues;
  c.neumann = neumann.eigenvalues;
  c.min_margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dirichlet.k(); ++k) {
    c.margins.push_back(c.dirichlet[k] - c.neumann[k]);
    c.min_margin = std::min(c.min_margin, c.margins.back());
  }
  c.holds = c.min_margin >= -tolerance;
  return c;
}

inline nlohmann::json to_json(const BcComparison& c) {
  return {{"dirichlet", c.dirichlet}, {"neumann", c.neumann},     {"margins", c.margins},
          {"min_margin", c.min_margin}, {"tolerance", c.tolerance}, {"holds", c.holds},
          {"note",
           "the Dirichlet matrix minus the Neumann matrix is diagonal and nonnegative, so the "
           "ordering holds exactly at the discrete level"}};
}

// ---------------------------------------------------------------------------
// Random test data

/// Sum of 1 to 3 compactly supported C^1 bumps a (1 - |x - c|^2 / s^2)^2 whose
/// supports stay inside the domain.
inline std::vector<double> random_bump_function(const GridDomain& d, std::mt19937_64& rng) {
  const double h = d.h();
  const double scale = std::sqrt(d.area());
  std::uniform_int_distribution<int> cell(0, d.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> u(d.size(), 0.0);
  const int bumps = 1 + static_cast<int>(unit(rng) * 3.0) % 3;
  int placed = 0;
  for (int attempt = 0; placed < bumps && attempt < 10000; ++attempt) {
    const double s = 4 * h + unit(rng) * std::max(0.0, 0.25 * scale - 4 * h);
    const int centre = cell(rng);
    const Point c = d.center(centre);
    const int reach = static_cast<int>(std::ceil(s / h)) + 1;
    const auto [ci, cj] = d.ij(centre);
    bool inside = true;
    for (int dj = -reach; dj <= reach && inside; ++dj)
      for (int di = -reach; di <= reach && inside; ++di) {
        const double dist = std::hypot(di * h, dj * h);
        if (dist < s + h && d.lookup(ci + di, cj + dj) == GridDomain::kOutside) inside = false;
      }
    if (!inside) continue;
    const double amp = 0.2 + 0.8 * unit(rng);
    for (int dj = -reach; dj <= reach; ++dj)
      for (int di = -reach; di <= reach; ++di) {
        const int k = d.lookup(ci + di, cj + dj);
        if (k == GridDomain::kOutside) continue;
        const Point p = d.center(k);
        const double q = ((p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y)) / (s * s);
        if (q < 1.0) u[k] += amp * (1.0 - q) * (1.0 - q);
      }
    ++placed;
  }
  require(placed > 0, ErrorKind::InvalidGeometry, "domain too thin for a bump function");
  return u;
}

/// Random cell set for the coarea check around the interior cell x: a half
/// plane containing x, a disk containing x, an independent coin flip per
/// cell, or the whole domain.
///
/// Sets that meet the spheres around x only in short arcs of one orientation
/// are left out: there the face-count perimeter with its single anisotropy
/// factor is off by up to 4 sqrt(2) / pi - 1 = 11%, more than the slack.
inline CellSet random_cell_set(const GridDomain& d, int x, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> cell(0, d.size() - 1);
  const int kind = static_cast<int>(unit(rng) * 4.0) % 4;
  const Point o = d.center(x);
  if (kind == 0) {
    const double angle = 2 * std::numbers::pi * unit(rng);
    const double offset = 0.5 * unit(rng) * std::sqrt(d.area());
    return CellSet::from_predicate(d, [&](int k) {
      const Point p = d.center(k);
      return (p.x - o.x) * std::cos(angle) + (p.y - o.y) * std::sin(angle) > -offset;
    });
  }
  if (kind == 1) {
    const Point c = d.center(cell(rng));
    const double r = std::hypot(c.x - o.x, c.y - o.y) * (1.0 + unit(rng)) + d.h();
    return CellSet::from_predicate(d, [&](int k) {
      const Point p = d.center(k);
      return std::hypot(p.x - c.x, p.y - c.y) < r;
    });
  }
  if (kind == 2) {
    std::vector<std::uint8_t> member(d.size());
    for (auto& m : member) m = unit(rng) < 0.5;
    member[x] = 1;
    return CellSet(d, std::move(member));
  }
  return CellSet(d, true);
}

/// Smallest radius, in cells, drawn for coarea triples. Below it the digital
/// spheres are too coarse for the anisotropy factor.
inline constexpr double kCoareaMinRadiusCells = 16.0;

// ---------------------------------------------------------------------------
// Runs

struct CheckVerdict {
  bool passed = true;
  bool gated = true;  ///< false: reported but not part of the exit status
  double margin = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

struct BcResult {
  BoundaryCondition bc = BoundaryCondition::Dirichlet;
  Spectrum spectrum;
  bool partial = false;
  std::string partial_reason;
  /// decompositions[t][k - 1] for tau_sweep[t].
  std::vector<std::vector<NodalDecomposition>> decompositions;
  std::vector<std::vector<int>> counts;  ///< M(k) per tau
};

struct RunReport {
  nlohmann::json json;
  std::string series_csv;
  std::string checks_csv;
  std::map<std::string, CheckVerdict> verdicts;
  std::vector<std::string> failing;
  bool partial = false;
  [[nodiscard]] bool passed() const noexcept { return failing.empty(); }
};

namespace detail {

/// Runs `fn` and rewraps library errors with the pipeline stage name.
template <class Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PartialSpectrumError&) {
    throw;
  } catch (const ResolutionTooCoarse& e) {
    throw ResolutionTooCoarse(stage + ": " + e.message(), e.minimal_resolution());
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.message());
  }
}

/// Calls fn(i) for i in [0, n) on `threads` workers with a fixed static
/// partition. Results must be written per index.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (int i = t; i < n; i += threads) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

/// Runs the whole pipeline and writes report.json, series.csv, checks.csv and
/// the optional artifacts into `out_dir` (defaults to the config's output).
inline RunReport run(const ExperimentConfig& config,
                     std::optional<std::filesystem::path> out_dir = std::nullopt) {
  using detail::fmt;
  using detail::staged;
  using nlohmann::json;
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path out = out_dir ? *out_dir : std::filesystem::path(config.output);

  const GridDomain d = staged("rasterize", [&] { return build_domain(config.domain); });
  const double h = d.h();
  const SpectralConstants constants = spectral_constants(2);
  const double sharp_fk = sharp_faber_krahn_constant(2);

  RunReport report;
  std::vector<BcResult> results;
  std::map<BoundaryCondition, SparseSymOperator> operators;
  for (BoundaryCondition bc : config.conditions()) {
    const std::string name = to_string(bc);
    BcResult r;
    r.bc = bc;
    operators.emplace(bc, staged("assemble " + name, [&] { return assemble(d, bc); }));
    SolverOptions opt;
    opt.k = config.K;
    opt.tol_eig = config.tol_eig;
    opt.seed = config.seed;
    opt.threads = config.threads;
    opt.cell_area = d.cell_area();
    try {
      r.spectrum = staged("solve " + name,
                          [&] { return smallest_eigenpairs(operators.at(bc), opt, bc); });
    } catch (const PartialSpectrumError& e) {
      r.spectrum = e.partial();
      r.partial = true;
      r.partial_reason = "solve " + name + ": " + e.message();
      report.partial = true;
    }
    r.spectrum.domain_ref = to_json(d);

    const int K = r.spectrum.k();
    for (double tau : config.tau_sweep) {
      std::vector<NodalDecomposition> decs(K);
      staged("decompose " + name, [&] {
        detail::parallel_for(K, config.threads, [&](int i) {
          decs[i] = nodal_decompose(d, r.spectrum.eigenvector(i), tau, bc);
        });
        return 0;
      });
      r.counts.push_back(cluster_max_counts(r.spectrum, decs));
      r.decompositions.push_back(std::move(decs));
    }
    results.push_back(std::move(r));
  }

  auto verdict = [&](const std::string& name) -> CheckVerdict& { return report.verdicts[name]; };
  const BcResult* dir = nullptr;
  for (const auto& r : results)
    if (r.bc == BoundaryCondition::Dirichlet) dir = &r;

  // Per-domain first eigenvalues of Dirichlet-type nodal domains, shared by
  // green and faber_krahn.
  std::map<std::pair<int, int>, NodalRayleighReport> rayleigh;  // (bc index, k)
  const bool need_rayleigh = config.wants("green") || config.wants("faber_krahn");
  if (need_rayleigh) {
    for (int b = 0; b < static_cast<int>(results.size()); ++b) {
      const auto& r = results[b];
      const int kmax = std::min(config.green_max_k, r.spectrum.k());
      std::vector<NodalRayleighReport> reps(kmax);
      staged("green " + to_string(r.bc), [&] {
        detail::parallel_for(kmax, config.threads, [&](int i) {
          reps[i] = nodal_rayleigh_check(d, operators.at(r.bc), r.spectrum.eigenvalues[i],
                                         r.spectrum.residual_norms[i], r.decompositions[0][i]);
        });
        return 0;
      });
      for (int i = 0; i < kmax; ++i) rayleigh[{b, i + 1}] = std::move(reps[i]);
    }
  }

  // -- courant
  if (config.wants("courant")) {
    auto& v = verdict("courant");
    v.margin = std::numeric_limits<double>::infinity();
    json per = json::object();
    for (const auto& r : results) {
      json bc_rows = json::array();
      for (std::size_t t = 0; t < config.tau_sweep.size(); ++t) {
        const auto rep = courant_check(r.spectrum, r.decompositions[t]);
        for (const auto& row : rep.rows)
          v.margin = std::min(v.margin, static_cast<double>(row.cluster_last - row.nodal_count));
        if (!rep.passed()) v.passed = false;
        bc_rows.push_back({{"tau", config.tau_sweep[t]}, {"violations", rep.violations}});
      }
      per[to_string(r.bc)] = bc_rows;
    }
    v.details = per;
  }

  // -- pleijel
  if (config.wants("pleijel")) {
    auto& v = verdict("pleijel");
    v.margin = std::numeric_limits<double>::infinity();
    json per = json::object();
    for (const auto& r : results) {
      const auto series = pleijel_series(r.spectrum, r.decompositions[0]);
      std::vector<int> at_least_k;
      for (std::size_t i = 0; i < series.ks.size(); ++i) {
        const int k = series.ks[i];
        if (k < kPleijelMinK) continue;
        v.margin = std::min(v.margin, static_cast<double>(k - series.nodal_counts[i]));
        if (series.nodal_counts[i] >= k) at_least_k.push_back(k);
      }
      if (!at_least_k.empty()) v.passed = false;
      const auto [mx, mean] = series.window(config.pleijel_window_lo, config.pleijel_window_hi);
      per[to_string(r.bc)] = {{"ratios", series.ratios},
                              {"nodal_counts", series.nodal_counts},
                              {"window", {config.pleijel_window_lo, config.pleijel_window_hi}},
                              {"window_max", mx},
                              {"window_mean", mean},
                              {"k_with_count_at_least_k", at_least_k}};
    }
    per["pleijel_constant"] = constants.pleijel_constant;
    v.details = per;
  }

  // -- weyl
  if (config.wants("weyl")) {
    auto& v = verdict("weyl");
    json per = json::object();
    v.margin = std::numeric_limits<double>::infinity();
    for (const auto& r : results) {
      if (r.spectrum.k() < kWeylMinEigenvalues) {
        v.passed = false;
        per[to_string(r.bc)] = {{"error", "fewer than 50 eigenvalues"}};
        continue;
      }
      const auto w = weyl_analysis(r.spectrum, d.area());
      json entry = {{"limit_estimate", w.limit_estimate},
                    {"target", w.target},
                    {"relative_deviation", w.relative_deviation},
                    {"tolerance", 0.08}};
      if (r.bc == BoundaryCondition::Dirichlet) {
        v.margin = std::min(v.margin, 0.08 - std::abs(w.relative_deviation));
        if (std::abs(w.relative_deviation) > 0.08) v.passed = false;
      } else {
        entry["gated"] = false;
      }
      per[to_string(r.bc)] = entry;
      std::string rows;
      for (std::size_t i = 0; i < w.lambdas.size(); ++i)
        rows += "weyl," + to_string(r.bc) + "," + std::to_string(i + 1) + "," + fmt(w.lambdas[i]) +
                "," + fmt(w.normalized[i]) + "," + fmt(w.target) + "\n";
      report.checks_csv += rows;
    }
    v.details = per;
  }

  // -- faber_krahn
  if (config.wants("faber_krahn") && dir) {
    auto& v = verdict("faber_krahn");
    const auto global = faber_krahn_check(dir->spectrum.eigenvalues[0], d.area(), 2, config.fk_slack);
    v.passed = global.holds;
    v.margin = dir->spectrum.eigenvalues[0] / global.rhs - 1.0;
    report.checks_csv += "faber_krahn,dirichlet,1," + fmt(dir->spectrum.eigenvalues[0]) + "," +
                         fmt(global.rhs) + "," + fmt(d.area()) + "\n";
    // Nodal domains of Dirichlet eigenfunctions carry Dirichlet data on their
    // whole boundary, so each one is a Faber-Krahn instance.
    int checked = 0;
    int failed = 0;
    double nodal_margin = std::numeric_limits<double>::infinity();
    const int b = static_cast<int>(dir - results.data());
    for (const auto& [key, rep] : rayleigh) {
      if (key.first != b) continue;
      for (const auto& dom : rep.domains) {
        if (!dom.converged) continue;
        const auto fk = faber_krahn_check(dom.lambda1, dom.area, 2, config.nodal_fk_slack);
        ++checked;
        nodal_margin = std::min(nodal_margin, dom.lambda1 / fk.rhs - 1.0);
        if (!fk.holds) ++failed;
      }
    }
    if (failed) v.passed = false;
    v.margin = std::min(v.margin, nodal_margin);
    v.details = {{"lambda1", dir->spectrum.eigenvalues[0]},
                 {"ball_eigenvalue", global.ball_eigenvalue},
                 {"slack", config.fk_slack},
                 {"nodal_domains_checked", checked},
                 {"nodal_domains_failed", failed},
                 {"nodal_slack", config.nodal_fk_slack},
                 {"nodal_min_margin", checked ? nodal_margin : 0.0}};
  }

  // -- polya_szego
  if (config.wants("polya_szego")) {
    auto& v = verdict("polya_szego");
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::vector<double>> functions;
    std::vector<std::string> labels;
    if (dir) {
      std::vector<double> g(dir->spectrum.eigenvector(0).begin(), dir->spectrum.eigenvector(0).end());
      for (double& x : g) x = std::abs(x);
      functions.push_back(std::move(g));
      labels.push_back("ground_state");
    }
    for (int t = 0; t < config.random_trials; ++t) {
      functions.push_back(random_bump_function(d, rng));
      labels.push_back("bump_" + std::to_string(t + 1));
    }
    json rows = json::array();
    v.margin = std::numeric_limits<double>::infinity();
    double worst_equimeasure = 0.0;
    for (std::size_t f = 0; f < functions.size(); ++f) {
      const auto ps = polya_szego_check(d, functions[f]);
      const auto profile = euclidean_rearrangement(d, functions[f]);
      const auto& dist = profile.distribution();
      const double top = dist.max_value();
      for (double frac : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const double t = frac * top;
        const double r = profile.level_radius(t);
        worst_equimeasure =
            std::max(worst_equimeasure, std::abs(std::numbers::pi * r * r - dist(t)) / d.cell_area());
      }
      if (!ps.holds) v.passed = false;
      v.margin = std::min(v.margin, 1.0 + kPolyaSzegoSlack - ps.energy_rearranged / ps.energy_original);
      rows.push_back({{"function", labels[f]},
                      {"energy_original", ps.energy_original},
                      {"energy_rearranged", ps.energy_rearranged},
                      {"holds", ps.holds}});
    }
    if (worst_equimeasure > 1.0 + 1e-9) v.passed = false;
    v.details = {{"functions", rows},
                 {"slack", kPolyaSzegoSlack},
                 {"equimeasurability_cells", worst_equimeasure}};
  }

  // -- green
  if (config.wants("green")) {
    auto& v = verdict("green");
    v.margin = std::numeric_limits<double>::infinity();
    json per = json::object();
    for (int b = 0; b < static_cast<int>(results.size()); ++b) {
      int failed = 0;
      int domains = 0;
      double worst = 0.0;
      json bad = json::array();
      for (const auto& [key, rep] : rayleigh) {
        if (key.first != b) continue;
        for (const auto& dom : rep.domains) {
          ++domains;
          worst = std::max(worst, dom.green_deviation);
          v.margin = std::min(v.margin, rep.tolerance - dom.green_deviation);
          if (!(dom.converged && dom.green_ok && dom.lambda1_ok)) {
            ++failed;
            bad.push_back({{"k", key.second}, {"id", dom.id}, {"rayleigh", dom.rayleigh},
                           {"lambda1", dom.lambda1}, {"converged", dom.converged}});
          }
        }
      }
      if (failed) v.passed = false;
      per[to_string(results[b].bc)] = {{"domains", domains},
                                       {"failed", failed},
                                       {"worst_relative_deviation", worst},
                                       {"failures", bad}};
    }
    per["max_k"] = config.green_max_k;
    v.details = per;
  }

  // -- certificate
  const double c_fk = (1.0 - config.certificate_slack) * sharp_fk;
  if (config.wants("certificate")) {
    auto& v = verdict("certificate");
    v.margin = std::numeric_limits<double>::infinity();
    json per = json::object();
    for (const auto& r : results) {
      std::vector<int> violations;
      double margin = std::numeric_limits<double>::infinity();
      for (int k = 1; k <= r.spectrum.k(); ++k) {
        NodalDecomposition dec = r.decompositions[0][k - 1];
        dec.count = r.counts[0][k - 1];
        const auto cert = pleijel_certificate(dec, std::max(0.0, r.spectrum.eigenvalues[k - 1]), c_fk);
        margin = std::min(margin, static_cast<double>(cert.bound - cert.nodal_count));
        if (!cert.holds) violations.push_back(k);
      }
      const bool gated = r.bc == BoundaryCondition::Dirichlet;
      if (gated) {
        v.margin = std::min(v.margin, margin);
        if (!violations.empty()) v.passed = false;
      }
      per[to_string(r.bc)] = {{"violations", violations}, {"min_margin", margin}, {"gated", gated}};
    }
    per["constant"] = c_fk;
    per["sharp_constant"] = sharp_fk;
    v.details = per;
    if (!dir) v.gated = false;
  }

  // -- isoperimetric
  if (config.wants("isoperimetric")) {
    auto& v = verdict("isoperimetric");
    const CellSet whole(d, true);
    const auto iso = isoperimetric_ratio(whole);
    const bool fractal = d.shape() == ShapeTag::KochPrefractal;
    json details = {{"raw", iso.raw}, {"corrected", iso.corrected}, {"extremal", iso.extremal}};
    v.margin = iso.raw / iso.extremal - 1.0;
    if (fractal) {
      details["gated"] = false;
      v.margin = std::numeric_limits<double>::infinity();
    } else if (iso.raw < iso.extremal) {
      v.passed = false;
    }
    if (d.shape() == ShapeTag::Disk) {
      details["corrected_over_extremal"] = iso.corrected / iso.extremal;
      if (iso.corrected < 0.95 * iso.extremal) v.passed = false;
      v.margin = std::min(v.margin, iso.corrected / (0.95 * iso.extremal) - 1.0);
    }
    // Nodal domains are digital sets; the raw face count bounds the Euclidean
    // perimeter from above, so raw >= 2 sqrt(pi) must hold for every one.
    int checked = 0;
    double worst = std::numeric_limits<double>::infinity();
    if (dir) {
      const int kmax = std::min(config.green_max_k, dir->spectrum.k());
      for (int k = 1; k <= kmax; ++k) {
        const auto& dec = dir->decompositions[0][k - 1];
        for (int id = 1; id <= dec.count; ++id) {
          std::vector<std::uint8_t> member(d.size(), 0);
          for (int c = 0; c < d.size(); ++c) member[c] = dec.labels[c] == id;
          const auto r = isoperimetric_ratio(CellSet(d, std::move(member)));
          worst = std::min(worst, r.raw / r.extremal);
          ++checked;
        }
      }
      if (checked && worst < 1.0) v.passed = false;
      if (checked) v.margin = std::min(v.margin, worst - 1.0);
    }
    details["nodal_domains_checked"] = checked;
    details["nodal_min_raw_over_extremal"] = checked ? worst : 0.0;
    v.details = details;
  }

  // -- coarea
  if (config.wants("coarea")) {
    auto& v = verdict("coarea");
    std::mt19937_64 rng(config.seed ^ 0xc2b2ae3d27d4eb4fULL);
    std::uniform_int_distribution<int> cell(0, d.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double diam = std::hypot(d.nx() * h, d.ny() * h);
    int failed = 0;
    v.margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < config.coarea_trials; ++t) {
      const int x = cell(rng);
      const CellSet a = random_cell_set(d, x, rng);
      const double rmin = std::min(kCoareaMinRadiusCells * h, 0.5 * diam);
      const double radius = rmin + unit(rng) * (diam - rmin);
      const auto c = coarea_check(d, x, a, radius);
      if (!c.holds) ++failed;
      if (c.rhs > 0) v.margin = std::min(v.margin, (c.rhs * (1 + kCoareaSlack) - c.lhs) / c.rhs);
    }
    v.passed = failed == 0;
    v.details = {{"trials", config.coarea_trials}, {"failed", failed}, {"slack", kCoareaSlack}};
  }

  // -- Neumann vs Dirichlet
  json comparison = nullptr;
  if (results.size() == 2) {
    const int k = std::min(results[0].spectrum.k(), results[1].spectrum.k());
    const auto cmp = compare_bc(results[0].spectrum.prefix(k), results[1].spectrum.prefix(k));
    comparison = to_json(cmp);
    auto& v = verdict("compare_bc");
    v.passed = cmp.holds;
    v.margin = cmp.min_margin + cmp.tolerance;
  }

  if (report.partial) {
    auto& v = verdict("solver");
    v.passed = false;
    json reasons = json::array();
    for (const auto& r : results)
      if (r.partial) reasons.push_back(r.partial_reason);
    v.details = {{"partial", reasons}};
  }

  for (const auto& [name, v] : report.verdicts)
    if (v.gated && !v.passed) report.failing.push_back(name);

  // -- series.csv
  std::string csv =
      "#schema=1\nk,bc,lambda,cluster_size,M_count,ratio,courant_ok,certificate_bound,"
      "certificate_ok,tau\n";
  for (const auto& r : results) {
    for (std::size_t t = 0; t < config.tau_sweep.size(); ++t) {
      for (int k = 1; k <= r.spectrum.k(); ++k) {
        const IndexRange c = eigenspace_cluster(r.spectrum, k);
        const int m = r.counts[t][k - 1];
        NodalDecomposition dec = r.decompositions[t][k - 1];
        dec.count = m;
        const auto cert = pleijel_certificate(dec, std::max(0.0, r.spectrum.eigenvalues[k - 1]), c_fk);
        csv += std::to_string(k) + "," + to_string(r.bc) + "," + fmt(r.spectrum.eigenvalues[k - 1]) +
               "," + std::to_string(c.size()) + "," + std::to_string(m) + "," +
               fmt(static_cast<double>(m) / k) + "," + (m <= c.last ? "1" : "0") + "," +
               std::to_string(cert.bound) + "," + (cert.holds ? "1" : "0") + "," +
               fmt(config.tau_sweep[t]) + "\n";
      }
    }
  }
  report.series_csv = csv;
  report.checks_csv = "#schema=1\ncheck,bc,index,value,reference,extra\n" + report.checks_csv;

  // -- report.json
  const std::string config_text = config.to_json().dump();
  json spectra = json::object();
  for (const auto& r : results) {
    json s = to_json(r.spectrum);
    s["partial"] = r.partial;
    if (r.partial) s["partial_reason"] = r.partial_reason;
    s["diagnostics"] = [&] {
      const auto dg = diagnose(r.spectrum);
      return json{{"max_orthogonality", dg.max_orthogonality},
                  {"max_normalization_error", dg.max_normalization_error},
                  {"max_scaled_residual", dg.max_scaled_residual},
                  {"monotone", dg.nondecreasing}};
    }();
    spectra[to_string(r.bc)] = s;
  }
  json verdicts = json::object();
  for (const auto& [name, v] : report.verdicts)
    verdicts[name] = {{"passed", v.passed},
                      {"gated", v.gated},
                      {"margin", std::isfinite(v.margin) ? json(v.margin) : json(nullptr)},
                      {"details", v.details}};
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.json = {{"version", kVersion},
                 {"config", config.to_json()},
                 {"input_hash", io::fnv1a_hex(config_text)},
                 {"domain", to_json(d)},
                 {"constants", to_json(constants)},
                 {"spectra", spectra},
                 {"checks", verdicts},
                 {"compare_bc", comparison},
                 {"partial", report.partial},
                 {"passed", report.passed()},
                 {"failing", report.failing},
                 {"wall_seconds", seconds}};

  staged("write", [&] {
    io::write_atomic(out / "report.json", report.json.dump(2) + "\n");
    io::write_atomic(out / "series.csv", report.series_csv);
    io::write_atomic(out / "checks.csv", report.checks_csv);
    for (const auto& r : results) {
      const std::string name = to_string(r.bc);
      if (config.write_eigenvectors) {
        std::ostringstream os;
        write_eigenvectors(os, r.spectrum);
        io::write_atomic(out / ("eigenvectors_" + name + ".bin"), os.str());
      }
      for (int k = 1; k <= std::min(config.pgm_count, r.spectrum.k()); ++k) {
        const auto& dec = r.decompositions[0][k - 1];
        io::write_atomic(out / ("labels_" + name + "_k" + std::to_string(k) + ".pgm"),
                         io::label_pgm(d, dec.labels, dec.signs));
      }
      if (config.plots) {
        io::Series s{name, {}, {}};
        for (int k = 1; k <= r.spectrum.k(); ++k) {
          s.x.push_back(k);
          s.y.push_back(static_cast<double>(r.counts[0][k - 1]) / k);
        }
        io::write_atomic(out / ("pleijel_" + name + ".svg"),
                         io::svg_line_chart("M(k)/k, " + name, "k", "ratio", {s},
                                            constants.pleijel_constant));
        if (r.spectrum.k() >= kWeylMinEigenvalues) {
          const auto w = weyl_analysis(r.spectrum, d.area());
          io::Series ws{name, w.lambdas, w.normalized, "#d62728"};
          io::write_atomic(out / ("weyl_" + name + ".svg"),
                           io::svg_line_chart("N(lambda)/lambda, " + name, "lambda", "N/lambda",
                                              {ws}, w.target));
        }
      }
    }
    return 0;
  });
  return report;
}

inline RunReport run_json(const nlohmann::json& j,
                          std::optional<std::filesystem::path> out_dir = std::nullopt) {
  return run(parse_config(j), std::move(out_dir));
}

}  // namespace nlab
