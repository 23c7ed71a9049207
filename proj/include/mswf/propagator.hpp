#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mswf/grid.hpp"
#include "mswf/packets.hpp"
#include "mswf/potentials.hpp"

namespace mswf {

enum class ScalarFamily { Zero, SoftPower, Quadratic };

/// Scalar potential V(t, x):
///   zero        V = 0
///   soft-power  V = c g(t) <x>^mu, mu < 2
///   quadratic   V = c |x|^2 / 2 (solver validation only, non-conforming)
class ScalarPotentialModel {
 public:
  static ScalarPotentialModel zero(int n);
  static ScalarPotentialModel soft_power(int n, double mu, double amplitude = 1.0,
                                         Modulation g = Modulation::One);
  static ScalarPotentialModel quadratic(int n, double amplitude = 1.0);

  int dimension() const { return n_; }
  ScalarFamily family() const { return family_; }
  double mu() const { return mu_; }
  double amplitude() const { return amplitude_; }
  Modulation modulation() const { return modulation_; }
  bool is_zero() const { return family_ == ScalarFamily::Zero || amplitude_ == 0.0; }
  bool conforming() const { return family_ != ScalarFamily::Quadratic && mu_ < 2.0; }
  bool time_independent() const { return modulation_ == Modulation::One; }

  double value(double t, const Vec& x) const;

  /// Sampled check of |d^alpha V| <= C <x>^{mu - |alpha|}, same rule as verify_decay.
  DecayVerification verify(int max_order, std::span<const double> radii,
                           int samples_per_radius) const;

  nlohmann::json to_json() const;
  static ScalarPotentialModel from_json(const nlohmann::json& j, int n);

 private:
  int n_ = 1;
  ScalarFamily family_ = ScalarFamily::Zero;
  double mu_ = 0.0;
  double amplitude_ = 0.0;
  Modulation modulation_ = Modulation::One;
};

std::string_view to_string(ScalarFamily f);

enum class EvolveMethod {
  StrangSplit,           // kinetic / spectral transport + phase / kinetic
  StrangSemiLagrangian,  // kinetic / cubic semi-Lagrangian transport + phase / kinetic
  ReferenceMidpoint,     // implicit midpoint (Crank-Nicolson), small grids only
};

std::string_view to_string(EvolveMethod m);
EvolveMethod parse_method(std::string_view s);

struct EvolveConfig {
  double dt = 1e-3;
  EvolveMethod method = EvolveMethod::StrangSplit;
  /// Record (t, ||u||) every `probe_every` steps; 0 disables.
  int probe_every = 0;
  bool boundary_guard = true;
  double boundary_fraction = 0.1;
  double boundary_mass_limit = 1e-6;
  nlohmann::json to_json() const;
};

struct EvolveStats {
  int steps = 0;
  double dt_used = 0.0;
  double max_boundary_mass = 0.0;
  double l2_initial = 0.0;
  double l2_final = 0.0;
  int max_series_terms = 0;     // spectral transport
  int max_fixed_point_iters = 0;  // reference method
  nlohmann::json to_json() const;
};

struct EvolveResult {
  GridFunction u;
  std::vector<std::pair<double, double>> probe;  // (t, ||u(t)||)
  EvolveStats stats;
};

/// Solves i u_t = (1/2)(-i grad - a)^2 u + V u from t0 to t1, i.e.
///   i u_t = -(1/2) Lap u + i (a . grad + (1/2) div a) u + (1/2)|a|^2 u + V u,
/// whose characteristics are those of h = |xi - a|^2 / 2.
EvolveResult evolve_with_stats(const VectorPotentialModel& model, const ScalarPotentialModel& V,
                               const GridFunction& u0, double t0, double t1,
                               const EvolveConfig& cfg);
GridFunction evolve(const VectorPotentialModel& model, const ScalarPotentialModel& V,
                    const GridFunction& u0, double t0, double t1, const EvolveConfig& cfg);

/// Leading term e^{i int_0^t Psi ds} W_{phi_lambda} u0(x(0), xi(0)) of the representation
/// formula, with (x(0), xi(0)) the backward flow of (t, x, xi). For a = 0 it equals
/// W_{phi_lambda^{(t)}} u(t)(x, xi) exactly.
cplx evolved_wpt_leading(const VectorPotentialModel& model, const GridFunction& u0,
                         const PacketSpec& packet, double t, const PhasePoint& p, double tol);

}  // namespace mswf
