#pragma once

#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mswf/grid.hpp"
#include "mswf/packets.hpp"
#include "mswf/potentials.hpp"
#include "mswf/propagator.hpp"

namespace mswf {

enum class Verdict { NotInWF, InWF, Inconclusive };
std::string_view to_string(Verdict v);

struct Thresholds {
  double N = 6.0;      // not-in-WF needs every sample N-hat >= N ...
  double N_low = 1.0;  // ... in-WF needs some sample N-hat <= N_low
  double R2 = 0.95;    // ... with fit quality R^2 >= R2
  double floor = 1e-14;  // censoring floor relative to ||f|| ||phi_lambda||
  nlohmann::json to_json() const;
  /// "N=6,Nlow=1,R2=0.95,floor=1e-14"; missing keys keep their defaults.
  static Thresholds parse(std::string_view s);
};

/// lambda = 2^k for k = kmin, kmin + step, ..., kmax.
std::vector<double> dyadic_ladder(double kmin, double kmax, double step = 1.0);
/// "kmin:kmax" or "kmin:kmax:step".
std::vector<double> parse_ladder(std::string_view s);

struct DecayFit {
  double Nhat = std::numeric_limits<double>::quiet_NaN();
  double R2 = std::numeric_limits<double>::quiet_NaN();
  int used = 0;
  int censored = 0;
  bool super_polynomial = false;
  std::vector<std::string> flags;  // all-censored, tail-censored, steepening, insufficient
  nlohmann::json to_json() const;
};

/// Least-squares slope of log|W| against log(lambda) over entries above the numeric floor.
/// floor < 0 selects 1e-14 * max magnitude.
DecayFit decay_exponent(std::span<const double> ladder, std::span<const double> magnitudes,
                        double floor = -1.0);

/// Neighbourhood K x Gamma_a of (x0, xi0).
struct ConicSample {
  Vec x0;
  Vec xi0;
  double k_radius = 0.25;
  double cone_angle = 0.2;  // half-angle, radians
  double a = 1.5;           // moduli in [1/a, a]

  std::vector<Vec> positions() const;   // 3^n points x0 + {-r, 0, r}^n
  std::vector<Vec> directions() const;  // unit vectors within the cone
  std::vector<double> moduli() const;   // {1/a, 1, a}
  nlohmann::json to_json() const;
};

struct SampleResult {
  Vec x;
  Vec xi;
  std::vector<double> magnitudes;  // on the used ladder
  DecayFit fit;
};

struct DecayReport {
  std::vector<double> ladder_requested;
  std::vector<double> ladder;  // rungs surviving the guards
  std::vector<std::string> dropped;  // "lambda: reason"
  std::vector<SampleResult> samples;
  double Nhat = std::numeric_limits<double>::quiet_NaN();  // worst case (minimum) over samples
  double R2 = std::numeric_limits<double>::quiet_NaN();
  int worst = -1;  // index of the sample defining Nhat
  int censored = 0;
  std::vector<std::string> flags;
  Verdict verdict = Verdict::Inconclusive;
  Thresholds thresholds;
  double t0 = 0.0;
  double b = 0.0;

  /// {lambda, mag, Nhat, R2, flags, verdict} plus sample detail when `detail`.
  nlohmann::json to_json(bool detail = false) const;
};

/// Verdict rule applied to a list of per-sample fits.
Verdict classify(const std::vector<DecayFit>& fits, const Thresholds& thr);

/// Static test: |W_{phi_lambda} f(x, lambda xi)| over K x Gamma_a and the ladder.
DecayReport wf_test_static(const GridFunction& f, const PacketBase& base, double b,
                           const ConicSample& sample, const std::vector<double>& ladder,
                           const Thresholds& thr = {});

/// Dynamic test on u0: flow (t0, x, lambda xi) back to s = 0 and pair u0 with the packet
/// phi_lambda^{(-t0)} at the flowed point. V does not enter the characteristics.
DecayReport wf_test_dynamic(const GridFunction& u0, const VectorPotentialModel& model,
                            const ScalarPotentialModel& V, double t0, const PacketBase& base,
                            double b, const ConicSample& sample,
                            const std::vector<double>& ladder, const Thresholds& thr = {},
                            double flow_tol = 1e-10);

// --- scans ------------------------------------------------------------------

/// Directions of a fan: n=1 {+1, -1}; n=2 `count` angles 2 pi j / count; n=3 axes +-e_j.
std::vector<Vec> direction_fan(int n, int count);

struct ScanSettings {
  std::vector<Vec> positions;
  std::vector<Vec> directions;
  std::vector<double> ladder;
  Thresholds thresholds;
  PacketBase base = GaussianBase{1.0};
  double b = 0.125;
  double k_radius = 0.25;
  double cone_angle = 0.2;
  double a = 1.5;
  double flow_tol = 1e-10;
  nlohmann::json to_json() const;
};

struct ScanCell {
  Vec x;
  Vec xi;
  DecayReport report;
  std::string error;  // non-empty when the cell failed; verdict is then inconclusive
};

struct ScanTable {
  std::vector<ScanCell> cells;
  std::string csv() const;  // x..., xi..., Nhat, R2, verdict, error
  nlohmann::json to_json() const;
  int count(Verdict v) const;
};

/// Static scan over a lattice (t0 = 0) or dynamic scan when `dynamic` is set.
ScanTable wf_scan_static(const GridFunction& f, const ScanSettings& s);
ScanTable wf_scan_dynamic(const GridFunction& u0, const VectorPotentialModel& model,
                          const ScalarPotentialModel& V, double t0, const ScanSettings& s);

}  // namespace mswf
