#pragma once

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mswf/grid.hpp"
#include "mswf/linalg.hpp"
#include "mswf/potentials.hpp"

namespace mswf {

struct FlowState {
  double s = 0.0;
  Vec x;
  Vec xi;
};

struct FlowStats {
  int steps = 0;
  int rejections = 0;
  int evaluations = 0;
  double tol = 0.0;
};

/// Extra scalar integrand accumulated along the trajectory, d/ds E = f(s, x, xi).
using FlowIntegrand = std::function<double(double s, const Vec& x, const Vec& xi)>;

/// Trajectory of the bicharacteristic system, from t0 to the target time.
/// The packed state is (x, xi, Re P, Im P, extras...) where P(s) = int_{t0}^s Psi.
class FlowResult {
 public:
  FlowState terminal;
  std::vector<FlowState> trajectory;  // accepted steps, starting at t0
  cplx phase = 0.0;                   // int_{t0}^{target} Psi ds
  std::vector<double> extras;         // int_{t0}^{target} of each extra integrand
  FlowStats stats;

  int dimension() const { return n_; }
  double t0() const { return times_.front(); }
  double target() const { return times_.back(); }

  /// Dense output (cubic Hermite between accepted steps). s must lie between t0 and target.
  FlowState state_at(double s) const;
  cplx phase_at(double s) const;
  double extra_at(double s, std::size_t k) const;

  // Filled by the integrator.
  int n_ = 0;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> y_;
  std::vector<Eigen::VectorXd> f_;

 private:
  Eigen::VectorXd packed_at(double s) const;
};

/// h(t, x, xi) = |xi - a(t, x)|^2 / 2.
double hamiltonian(const VectorPotentialModel& model, double t, const Vec& x, const Vec& xi);

/// Psi = -h + grad_x h . x + (i/2) div a, with grad_x h = -(grad a)^T (xi - a).
cplx psi(const VectorPotentialModel& model, double t, const Vec& x, const Vec& xi);

/// Integrates x' = xi - a, xi' = (grad a)^T (xi - a) from (t0, x0, xi0) to s_target
/// with an adaptive Dormand-Prince 5(4) pair. tol must lie in [1e-13, 1e-3].
FlowResult flow(const VectorPotentialModel& model, double t0, double s_target, const Vec& x0,
                const Vec& xi0, double tol, const std::vector<FlowIntegrand>& extras = {});

/// int_0^t Psi(s, x(s), xi(s)) ds along the trajectory through (x0, xi0) at time t0.
cplx phase_integral(const VectorPotentialModel& model, double t0, double t, const Vec& x0,
                    const Vec& xi0, double tol);

// --- property suites --------------------------------------------------------

/// Log-spaced values lo, ..., hi (count >= 2) or {lo} when count == 1.
std::vector<double> log_space(double lo, double hi, int count);

struct FlowBoundsConfig {
  double a_param = 2.0;  // Gamma_a: 1/a <= |xi| <= a, bounds use 1/(2a) and 2a
  double p = 0.5;        // window lambda^{p-1} <= |s*| <= t0
  std::vector<double> lambdas;
  double t0 = 1.0;
  std::vector<Vec> x_samples;
  std::vector<Vec> xi_samples;
  int s_samples = 12;
  double tol = 1e-10;
};

struct FlowBoundsRung {
  double lambda = 0.0;
  int samples = 0;
  int violations = 0;
  double x_ratio_min = std::numeric_limits<double>::infinity();
  double x_ratio_max = 0.0;
  double xi_ratio_min = std::numeric_limits<double>::infinity();
  double xi_ratio_max = 0.0;
  bool pass() const { return samples > 0 && violations == 0; }
  nlohmann::json to_json() const;
};

struct FlowBoundsReport {
  std::vector<FlowBoundsRung> rungs;
  /// Smallest rung from which all higher rungs pass; +inf when none does.
  double lambda_hat0 = std::numeric_limits<double>::infinity();
  /// Intermediate rungs (lambda * sqrt 2) above 2 lambda_hat0.
  std::vector<FlowBoundsRung> validation;
  int validation_violations = 0;
  bool pass = false;
  nlohmann::json to_json() const;
};

FlowBoundsRung flow_bounds_rung(const VectorPotentialModel& model, const FlowBoundsConfig& cfg,
                                double lambda);
FlowBoundsReport check_flow_bounds(const VectorPotentialModel& model, const FlowBoundsConfig& cfg);

struct IntegralBoundConfig {
  double delta = 1.0;
  double a = 0.0;  // interval I = [a, b]
  double b = 1.0;
  double base_time = 0.0;  // the trajectory passes (x, lambda xi) at this time
  std::vector<double> lambdas{1.0, 10.0, 100.0, 1000.0, 10000.0};
  std::vector<Vec> x_samples;
  std::vector<Vec> xi_samples;
  double tol = 1e-10;
};

struct IntegralBoundReport {
  std::vector<double> lambdas;
  std::vector<double> sup_ratio;  // sup over samples of integral / (1 + |b - a|)
  double variation = 0.0;         // max / min of sup_ratio
  bool stable = false;            // variation < 2
  nlohmann::json to_json() const;
};

/// int_I |xi(tau)| / <x(tau)>^{1+delta} d tau for one starting point.
double integral_bound_value(const VectorPotentialModel& model, const IntegralBoundConfig& cfg,
                            const Vec& x, const Vec& xi);
IntegralBoundReport check_integral_bound(const VectorPotentialModel& model,
                                         const IntegralBoundConfig& cfg);

struct LowerBoundConfig {
  double t0 = 1.0;
  std::vector<double> lambdas;
  std::vector<Vec> x_samples;
  std::vector<Vec> xi_samples;
  double tol = 1e-10;
};

struct LowerBoundReport {
  std::vector<double> lambdas;
  std::vector<double> ratio_min;  // per rung, over samples
  std::vector<double> ratio_max;
  bool converged = false;  // top rung within [0.9, 1.1]
  nlohmann::json to_json() const;
};

/// |x(0; t0, x, lambda xi)| / (lambda t0 |xi|) on every sample and rung.
LowerBoundReport lower_bound_x0(const VectorPotentialModel& model, const LowerBoundConfig& cfg);

}  // namespace mswf
