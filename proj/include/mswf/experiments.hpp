#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mswf/characteristics.hpp"
#include "mswf/detector.hpp"
#include "mswf/errors.hpp"
#include "mswf/grid.hpp"
#include "mswf/potentials.hpp"
#include "mswf/propagator.hpp"

namespace mswf {

enum class ExperimentId {
  FreeTransport,        // transport consistency with a = 0
  MagneticTransport,    // transport consistency with the configured a
  FundamentalSolution,
  LemmaSuite,
  ScalarPotential,
};

std::string_view to_string(ExperimentId id);
ExperimentId parse_experiment(std::string_view s);

/// Built-in data: delta (single node), delta-like (narrow gaussian), gaussian
/// (optionally modulated and shifted), jump (gaussian times a sign flip across
/// the hyperplane normal . (x - center) = 0).
struct DatumSpec {
  std::string kind = "delta-like";
  double width = 0.25;
  std::vector<double> center;
  std::vector<double> frequency;
  std::vector<double> normal;
  nlohmann::json to_json() const;
  static DatumSpec from_json(const nlohmann::json& j);
};

GridFunction make_datum(const GridSpec& grid, const DatumSpec& d);

struct LemmaSettings {
  FlowBoundsConfig flow_bounds;
  IntegralBoundConfig integral;
  std::vector<double> commutator_times{0.5, 1.0};
  std::size_t commutator_points = 512;
  double commutator_half_width = 16.0;
  double commutator_tolerance = 1e-8;
};

struct ExperimentConfig {
  ExperimentId id = ExperimentId::FreeTransport;
  GridSpec grid{1, 256, 16.0};
  nlohmann::json potential = {{"family", "zero"}, {"n", 1}};
  nlohmann::json scalar_potential = {{"family", "zero"}};
  DatumSpec datum;
  double t0 = 1.0;
  bool control = false;
  std::string b_mode = "theorem";  // "theorem" or "fixed"
  double b = 0.125;
  ScanSettings scan;
  EvolveConfig evolve;
  double min_agreement = 0.9;
  double max_inconclusive = 0.5;
  /// Censoring floor for the static test on the evolved field, which carries solver roundoff.
  double static_floor = 1e-12;
  std::vector<double> lower_bound_lambdas{10.0, 100.0, 1000.0, 10000.0};
  LemmaSettings lemma;
  bool allow_nonconforming = false;
  std::string output_dir = "out";

  /// Unknown keys are rejected. Missing keys keep their defaults.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Fully resolved configuration, including derived b and the scan lattices.
  nlohmann::json to_json() const;

  VectorPotentialModel model() const;
  ScalarPotentialModel scalar() const;
};

struct ExperimentOutput {
  nlohmann::json summary;
  std::vector<std::pair<std::string, std::string>> files;  // name, contents
  std::optional<Error> failure;  // consistency bound missed; files are still produced
};

ExperimentOutput run_fundamental_solution(const ExperimentConfig& cfg);
ExperimentOutput run_transport_consistency(const ExperimentConfig& cfg);
ExperimentOutput run_scalar_potential(const ExperimentConfig& cfg);
ExperimentOutput run_lemma_suite(const ExperimentConfig& cfg);
ExperimentOutput run_experiment(const ExperimentConfig& cfg);

/// Writes summary.json and every named file below `dir`.
void write_outputs(const ExperimentOutput& out, const std::string& dir);

}  // namespace mswf
