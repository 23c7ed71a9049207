#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mswf/linalg.hpp"

namespace mswf {

using cplx = std::complex<double>;

/// Uniform periodic grid on [-L_d, L_d) per axis with M_d points (power of two, >= 8).
/// Samples are stored row-major: the last axis varies fastest.
class GridSpec {
 public:
  GridSpec() = default;
  GridSpec(int n, std::size_t points, double half_width);
  GridSpec(std::vector<std::size_t> points, std::vector<double> half_width);

  int dimension() const { return static_cast<int>(points_.size()); }
  std::size_t points(int axis) const { return points_[axis]; }
  double half_width(int axis) const { return half_width_[axis]; }
  double dx(int axis) const { return 2.0 * half_width_[axis] / points_[axis]; }
  double dk(int axis) const;
  double max_dx() const;
  double min_dx() const;
  /// Product of spacings, the trapezoidal cell volume.
  double cell_volume() const;
  std::size_t size() const { return size_; }
  std::span<const std::size_t> shape() const { return points_; }

  double coordinate(int axis, std::size_t i) const { return -half_width_[axis] + i * dx(axis); }
  /// Angular frequency of DFT index i: (i < M/2 ? i : i - M) * dk.
  double frequency(int axis, std::size_t i) const;
  /// Nyquist frequency pi / dx of an axis.
  double nyquist(int axis) const;
  /// Index of the node at the origin (M/2 on every axis).
  std::size_t origin_index() const;

  std::size_t flat_index(std::span<const std::size_t> idx) const;
  void unflatten(std::size_t flat, std::span<std::size_t> idx) const;
  Vec node(std::size_t flat) const;

  bool operator==(const GridSpec& other) const = default;

  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);

 private:
  void validate() const;

  std::vector<std::size_t> points_;
  std::vector<double> half_width_;
  std::size_t size_ = 0;
};

/// Complex samples of a field on a GridSpec.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(GridSpec grid, std::string label = {});
  GridFunction(GridSpec grid, std::vector<cplx> values, std::string label = {});

  const GridSpec& grid() const { return grid_; }
  std::span<const cplx> values() const { return values_; }
  std::span<cplx> values() { return values_; }
  std::vector<cplx>& storage() { return values_; }
  cplx operator[](std::size_t i) const { return values_[i]; }
  cplx& operator[](std::size_t i) { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  int dimension() const { return grid_.dimension(); }

  const std::string& label() const { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  /// (sum |u|^2 dx^n)^{1/2}
  double l2_norm() const;
  double max_abs() const;

  GridFunction& operator+=(const GridFunction& other);
  GridFunction& operator-=(const GridFunction& other);
  GridFunction& operator*=(cplx s);

 private:
  GridSpec grid_;
  std::vector<cplx> values_;
  std::string label_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(cplx s, GridFunction a);

/// sum conj(a) b dx^n
cplx inner_product(const GridFunction& a, const GridFunction& b);
double max_abs_difference(const GridFunction& a, const GridFunction& b);

/// Fraction of |u|^2 mass within `fraction` * L of the domain edge on any axis.
double boundary_mass_fraction(const GridFunction& u, double fraction = 0.1);

}  // namespace mswf
