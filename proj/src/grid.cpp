#include "mswf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mswf/errors.hpp"

namespace mswf {

GridSpec::GridSpec(int n, std::size_t points, double half_width)
    : points_(static_cast<std::size_t>(std::max(n, 0)), points),
      half_width_(static_cast<std::size_t>(std::max(n, 0)), half_width) {
  validate();
}

GridSpec::GridSpec(std::vector<std::size_t> points, std::vector<double> half_width)
    : points_(std::move(points)), half_width_(std::move(half_width)) {
  validate();
}

void GridSpec::validate() const {
  require(!points_.empty() && points_.size() <= static_cast<std::size_t>(kMaxDim),
          ErrorCode::Input, "grid dimension must be 1..3");
  require(points_.size() == half_width_.size(), ErrorCode::Input,
          "grid needs one half-width per axis");
  for (std::size_t d = 0; d < points_.size(); ++d) {
    const auto m = points_[d];
    require(m >= 8 && (m & (m - 1)) == 0, ErrorCode::Input,
            "grid point count must be a power of two >= 8");
    require(half_width_[d] > 0.0 && std::isfinite(half_width_[d]), ErrorCode::Input,
            "grid half-width must be positive");
  }
  auto& self = const_cast<GridSpec&>(*this);
  self.size_ = 1;
  for (auto m : points_) self.size_ *= m;
}

double GridSpec::dk(int axis) const {
  return 2.0 * std::numbers::pi / (points_[axis] * dx(axis));
}

double GridSpec::max_dx() const {
  double m = 0.0;
  for (int d = 0; d < dimension(); ++d) m = std::max(m, dx(d));
  return m;
}

double GridSpec::min_dx() const {
  double m = dx(0);
  for (int d = 1; d < dimension(); ++d) m = std::min(m, dx(d));
  return m;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int d = 0; d < dimension(); ++d) v *= dx(d);
  return v;
}

double GridSpec::frequency(int axis, std::size_t i) const {
  const auto m = points_[axis];
  const double k = i < m / 2 ? static_cast<double>(i)
                             : static_cast<double>(i) - static_cast<double>(m);
  return k * dk(axis);
}

double GridSpec::nyquist(int axis) const { return std::numbers::pi / dx(axis); }

std::size_t GridSpec::origin_index() const {
  std::vector<std::size_t> idx(points_.size());
  for (std::size_t d = 0; d < points_.size(); ++d) idx[d] = points_[d] / 2;
  return flat_index(idx);
}

std::size_t GridSpec::flat_index(std::span<const std::size_t> idx) const {
  std::size_t flat = 0;
  for (std::size_t d = 0; d < points_.size(); ++d) flat = flat * points_[d] + idx[d];
  return flat;
}

void GridSpec::unflatten(std::size_t flat, std::span<std::size_t> idx) const {
  for (int d = dimension() - 1; d >= 0; --d) {
    idx[d] = flat % points_[d];
    flat /= points_[d];
  }
}

Vec GridSpec::node(std::size_t flat) const {
  const int n = dimension();
  Vec x(n);
  for (int d = n - 1; d >= 0; --d) {
    x(d) = coordinate(d, flat % points_[d]);
    flat /= points_[d];
  }
  return x;
}

nlohmann::json GridSpec::to_json() const {
  return {{"n", dimension()}, {"points", points_}, {"half_width", half_width_}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::Input, "grid config must be a JSON object");
  const int n = j.value("n", 1);
  std::vector<std::size_t> pts;
  std::vector<double> hw;
  if (j.contains("points") && j["points"].is_array())
    pts = j["points"].get<std::vector<std::size_t>>();
  else
    pts.assign(n, j.value("points", std::size_t{256}));
  if (j.contains("half_width") && j["half_width"].is_array())
    hw = j["half_width"].get<std::vector<double>>();
  else
    hw.assign(n, j.value("half_width", 20.0));
  return GridSpec(std::move(pts), std::move(hw));
}

GridFunction::GridFunction(GridSpec grid, std::string label)
    : grid_(std::move(grid)), values_(grid_.size()), label_(std::move(label)) {}

GridFunction::GridFunction(GridSpec grid, std::vector<cplx> values, std::string label)
    : grid_(std::move(grid)), values_(std::move(values)), label_(std::move(label)) {
  require(values_.size() == grid_.size(), ErrorCode::Input,
          "sample count does not match the grid");
}

double GridFunction::l2_norm() const {
  double s = 0.0;
  for (const auto& v : values_) s += std::norm(v);
  return std::sqrt(s * grid_.cell_volume());
}

double GridFunction::max_abs() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v));
  return m;
}

GridFunction& GridFunction::operator+=(const GridFunction& other) {
  require(grid_ == other.grid_, ErrorCode::Input, "grid mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other) {
  require(grid_ == other.grid_, ErrorCode::Input, "grid mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

GridFunction& GridFunction::operator*=(cplx s) {
  for (auto& v : values_) v *= s;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(cplx s, GridFunction a) { return a *= s; }

cplx inner_product(const GridFunction& a, const GridFunction& b) {
  require(a.grid() == b.grid(), ErrorCode::Input, "grid mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * a.grid().cell_volume();
}

double max_abs_difference(const GridFunction& a, const GridFunction& b) {
  require(a.grid() == b.grid(), ErrorCode::Input, "grid mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double boundary_mass_fraction(const GridFunction& u, double fraction) {
  const GridSpec& g = u.grid();
  const int n = g.dimension();
  std::vector<std::size_t> idx(n);
  double total = 0.0, edge = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    g.unflatten(i, idx);
    bool near = false;
    for (int d = 0; d < n && !near; ++d)
      near = std::abs(g.coordinate(d, idx[d])) >= (1.0 - fraction) * g.half_width(d);
    const double m = std::norm(u[i]);
    total += m;
    if (near) edge += m;
  }
  return total > 0.0 ? edge / total : 0.0;
}

}  // namespace mswf
