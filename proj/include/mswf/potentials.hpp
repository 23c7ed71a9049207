#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mswf/linalg.hpp"

namespace mswf {

enum class PotentialFamily { Zero, SoftPower, Rotational, ConstantField, Custom };

/// Bounded smooth time coefficient g(t) multiplying the spatial profile.
enum class Modulation { One, Sin, HalfCos };

double modulation_value(Modulation g, double t);

std::string_view to_string(PotentialFamily f);
std::string_view to_string(Modulation g);
Modulation parse_modulation(std::string_view s);

/// Antisymmetric n x n matrix B(j,k) = d_j a_k - d_k a_j.
using FieldMatrix = Mat;

/// Time-dependent vector potential a(t, x) on R x R^n.
///
/// Families:
///   zero           a = 0
///   soft-power     a_j = c_j g(t) <x>^rho
///   rotational     a = c g(t) <x>^{rho-1} x^perp            (n = 2)
///   constant-field a = (B0/2)(-x_2, x_1[, 0])               (n = 2, 3)
///   custom         user callable, derivatives by finite differences
///
/// The constant-field gauge grows linearly and is therefore flagged as
/// non-conforming (rho = 1 is excluded by the decay assumption).
class VectorPotentialModel {
 public:
  using Callable = std::function<Vec(double, const Vec&)>;

  static VectorPotentialModel zero(int n);
  static VectorPotentialModel soft_power(int n, double rho, Modulation g = Modulation::One,
                                         std::vector<double> amplitude = {});
  static VectorPotentialModel rotational(double rho, Modulation g = Modulation::One,
                                         double amplitude = 1.0);
  static VectorPotentialModel constant_field(int n, double b0 = 1.0);
  /// `rho` is the decay exponent the caller claims for the callable.
  static VectorPotentialModel custom(int n, double rho, Callable a, bool conforming = true);

  int dimension() const { return n_; }
  PotentialFamily family() const { return family_; }
  double rho() const { return rho_; }
  Modulation modulation() const { return modulation_; }
  const std::vector<double>& amplitude() const { return amplitude_; }
  bool conforming() const { return conforming_; }
  bool is_zero() const { return family_ == PotentialFamily::Zero; }
  bool time_independent() const;

  Vec value(double t, const Vec& x) const;
  /// J(j, k) = d_{x_k} a_j(t, x).
  Mat jacobian(double t, const Vec& x) const;
  double divergence(double t, const Vec& x) const;
  /// Mixed partial d^alpha a (all components); `axes` lists the
  /// differentiation axes, e.g. {0, 0, 1} for d_0^2 d_1. Order <= 3.
  Vec partial(double t, const Vec& x, std::span<const int> axes) const;

  /// Fourth-order central differences, step 1e-4 max(1, |x|) unless given.
  Mat jacobian_fd(double t, const Vec& x, double step = 0.0) const;

  nlohmann::json to_json() const;
  static VectorPotentialModel from_json(const nlohmann::json& j);

 private:
  VectorPotentialModel() = default;
  void check_dim(const Vec& x) const;
  Vec partial_fd(double t, const Vec& x, std::span<const int> axes) const;

  int n_ = 1;
  PotentialFamily family_ = PotentialFamily::Zero;
  double rho_ = 0.0;
  Modulation modulation_ = Modulation::One;
  std::vector<double> amplitude_;
  double b0_ = 0.0;
  bool conforming_ = true;
  std::shared_ptr<const Callable> custom_;
};

Vec eval_a(const VectorPotentialModel& model, double t, const Vec& x);
Mat jacobian_a(const VectorPotentialModel& model, double t, const Vec& x);
FieldMatrix magnetic_field(const VectorPotentialModel& model, double t, const Vec& x);

/// Field-level models of two physical magnetic fields on R^3. No vector
/// potential is attached to them.
///   circular current: B = (0, 0, (1 + x_3^2)^{-1})
///   line current:     B = <x'>^{-2} x'^perp, x' = (x_1, x_2), regularized at 0
FieldMatrix circular_current_field(const Vec& x);
FieldMatrix line_current_field(const Vec& x);
/// B(j,k) = eps_{jkl} B_l for a 3-vector field.
FieldMatrix field_matrix_from_vector(const Vec& b);

struct DecayShell {
  double radius = 0.0;
  /// sup over samples of |d^alpha a_j| <x>^{|alpha| - rho}, indexed by |alpha|.
  std::vector<double> sup_by_order;
};

struct DecayVerification {
  double rho = 0.0;
  int max_order = 0;
  std::vector<DecayShell> shells;
  bool conforming = false;
  nlohmann::json to_json() const;
};

DecayVerification verify_decay(const VectorPotentialModel& model, double rho, int max_order,
                               std::span<const double> radii, int samples_per_radius);

/// Deterministic points on the sphere |x| = r (n = 1, 2, 3).
std::vector<Vec> sphere_samples(int n, double radius, int count);

namespace detail {

/// d^alpha of F(q) = q^{p/2}, q = 1 + |x|^2, for |alpha| <= 3.
double bracket_power_partial(double p, const Vec& x, std::span<const int> axes);
/// d^alpha of x_m <x>^p.
double coordinate_times_bracket_partial(int m, double p, const Vec& x,
                                        std::span<const int> axes);
/// All multi-indices of the given order, as sorted axis lists.
std::vector<std::vector<int>> multi_indices(int n, int order);

}  // namespace detail

}  // namespace mswf
