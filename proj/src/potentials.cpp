#include "mswf/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mswf/errors.hpp"

namespace mswf {

double modulation_value(Modulation g, double t) {
  switch (g) {
    case Modulation::One: return 1.0;
    case Modulation::Sin: return std::sin(t);
    case Modulation::HalfCos: return 0.5 * (1.0 + std::cos(t));
  }
  return 1.0;
}

std::string_view to_string(PotentialFamily f) {
  switch (f) {
    case PotentialFamily::Zero: return "zero";
    case PotentialFamily::SoftPower: return "soft-power";
    case PotentialFamily::Rotational: return "rotational";
    case PotentialFamily::ConstantField: return "constant-field";
    case PotentialFamily::Custom: return "custom-sampled";
  }
  return "unknown";
}

std::string_view to_string(Modulation g) {
  switch (g) {
    case Modulation::One: return "one";
    case Modulation::Sin: return "sin";
    case Modulation::HalfCos: return "half-cos";
  }
  return "one";
}

Modulation parse_modulation(std::string_view s) {
  if (s == "one" || s == "1" || s.empty()) return Modulation::One;
  if (s == "sin") return Modulation::Sin;
  if (s == "half-cos" || s == "halfcos") return Modulation::HalfCos;
  fail(ErrorCode::Input, "unknown modulation '" + std::string(s) + "'");
}

namespace detail {

double bracket_power_partial(double p, const Vec& x, std::span<const int> axes) {
  const double q = 1.0 + x.squaredNorm();
  const double h = 0.5 * p;
  auto deriv = [&](int m) {
    double c = 1.0;
    for (int i = 0; i < m; ++i) c *= (h - i);
    return c * std::pow(q, h - m);
  };
  auto delta = [](int i, int j) { return i == j ? 1.0 : 0.0; };
  switch (axes.size()) {
    case 0:
      return deriv(0);
    case 1:
      return 2.0 * x(axes[0]) * deriv(1);
    case 2: {
      const int i = axes[0], j = axes[1];
      return 4.0 * x(i) * x(j) * deriv(2) + 2.0 * delta(i, j) * deriv(1);
    }
    case 3: {
      const int i = axes[0], j = axes[1], l = axes[2];
      return 8.0 * x(i) * x(j) * x(l) * deriv(3) +
             4.0 * (delta(i, j) * x(l) + delta(i, l) * x(j) + delta(j, l) * x(i)) * deriv(2);
    }
    default:
      fail(ErrorCode::Input, "analytic derivatives are available up to order 3");
  }
}

double coordinate_times_bracket_partial(int m, double p, const Vec& x,
                                        std::span<const int> axes) {
  double out = x(m) * bracket_power_partial(p, x, axes);
  std::vector<int> rest;
  for (std::size_t k = 0; k < axes.size(); ++k) {
    if (axes[k] != m) continue;
    rest.clear();
    for (std::size_t l = 0; l < axes.size(); ++l)
      if (l != k) rest.push_back(axes[l]);
    out += bracket_power_partial(p, x, rest);
  }
  return out;
}

std::vector<std::vector<int>> multi_indices(int n, int order) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(order, 0);
  std::function<void(int, int)> rec = [&](int pos, int start) {
    if (pos == order) {
      out.push_back(cur);
      return;
    }
    for (int a = start; a < n; ++a) {
      cur[pos] = a;
      rec(pos + 1, a);
    }
  };
  rec(0, 0);
  return out;
}

}  // namespace detail

VectorPotentialModel VectorPotentialModel::zero(int n) {
  require(n >= 1 && n <= kMaxDim, ErrorCode::Input, "dimension must be 1..3");
  VectorPotentialModel m;
  m.n_ = n;
  m.family_ = PotentialFamily::Zero;
  m.rho_ = 0.0;
  return m;
}

VectorPotentialModel VectorPotentialModel::soft_power(int n, double rho, Modulation g,
                                                      std::vector<double> amplitude) {
  require(n >= 1 && n <= kMaxDim, ErrorCode::Input, "dimension must be 1..3");
  if (amplitude.empty()) amplitude.assign(n, 1.0);
  require(static_cast<int>(amplitude.size()) == n, ErrorCode::Input,
          "soft-power amplitude needs one coefficient per component");
  VectorPotentialModel m;
  m.n_ = n;
  m.family_ = PotentialFamily::SoftPower;
  m.rho_ = rho;
  m.modulation_ = g;
  m.amplitude_ = std::move(amplitude);
  m.conforming_ = rho < 1.0;
  return m;
}

VectorPotentialModel VectorPotentialModel::rotational(double rho, Modulation g,
                                                      double amplitude) {
  VectorPotentialModel m;
  m.n_ = 2;
  m.family_ = PotentialFamily::Rotational;
  m.rho_ = rho;
  m.modulation_ = g;
  m.amplitude_ = {amplitude};
  m.conforming_ = rho < 1.0;
  return m;
}

VectorPotentialModel VectorPotentialModel::constant_field(int n, double b0) {
  require(n == 2 || n == 3, ErrorCode::Input, "constant-field gauge needs n = 2 or 3");
  VectorPotentialModel m;
  m.n_ = n;
  m.family_ = PotentialFamily::ConstantField;
  m.rho_ = 1.0;
  m.b0_ = b0;
  m.amplitude_ = {b0};
  m.conforming_ = false;
  return m;
}

VectorPotentialModel VectorPotentialModel::custom(int n, double rho, Callable a,
                                                  bool conforming) {
  require(n >= 1 && n <= kMaxDim, ErrorCode::Input, "dimension must be 1..3");
  require(static_cast<bool>(a), ErrorCode::Input, "custom potential needs a callable");
  VectorPotentialModel m;
  m.n_ = n;
  m.family_ = PotentialFamily::Custom;
  m.rho_ = rho;
  m.conforming_ = conforming && rho < 1.0;
  m.custom_ = std::make_shared<const Callable>(std::move(a));
  return m;
}

bool VectorPotentialModel::time_independent() const {
  switch (family_) {
    case PotentialFamily::Zero:
    case PotentialFamily::ConstantField:
      return true;
    case PotentialFamily::SoftPower:
    case PotentialFamily::Rotational:
      return modulation_ == Modulation::One;
    case PotentialFamily::Custom:
      return false;
  }
  return false;
}

void VectorPotentialModel::check_dim(const Vec& x) const {
  if (x.size() != n_) {
    std::ostringstream os;
    os << "point has dimension " << x.size() << ", potential expects " << n_;
    fail(ErrorCode::Input, os.str());
  }
}

Vec VectorPotentialModel::value(double t, const Vec& x) const {
  check_dim(x);
  Vec a = Vec::Zero(n_);
  switch (family_) {
    case PotentialFamily::Zero:
      break;
    case PotentialFamily::SoftPower: {
      const double s = modulation_value(modulation_, t) * std::pow(bracket(x), rho_);
      for (int j = 0; j < n_; ++j) a(j) = amplitude_[j] * s;
      break;
    }
    case PotentialFamily::Rotational: {
      const double s =
          amplitude_[0] * modulation_value(modulation_, t) * std::pow(bracket(x), rho_ - 1.0);
      a(0) = -s * x(1);
      a(1) = s * x(0);
      break;
    }
    case PotentialFamily::ConstantField:
      a(0) = -0.5 * b0_ * x(1);
      a(1) = 0.5 * b0_ * x(0);
      break;
    case PotentialFamily::Custom:
      a = (*custom_)(t, x);
      require(a.size() == n_, ErrorCode::Input, "custom potential returned wrong dimension");
      break;
  }
  return a;
}

Vec VectorPotentialModel::partial(double t, const Vec& x, std::span<const int> axes) const {
  check_dim(x);
  for (int ax : axes)
    require(ax >= 0 && ax < n_, ErrorCode::Input, "derivative axis out of range");
  if (axes.empty()) return value(t, x);
  Vec d = Vec::Zero(n_);
  switch (family_) {
    case PotentialFamily::Zero:
      break;
    case PotentialFamily::SoftPower: {
      const double s =
          modulation_value(modulation_, t) * detail::bracket_power_partial(rho_, x, axes);
      for (int j = 0; j < n_; ++j) d(j) = amplitude_[j] * s;
      break;
    }
    case PotentialFamily::Rotational: {
      const double g = amplitude_[0] * modulation_value(modulation_, t);
      d(0) = -g * detail::coordinate_times_bracket_partial(1, rho_ - 1.0, x, axes);
      d(1) = g * detail::coordinate_times_bracket_partial(0, rho_ - 1.0, x, axes);
      break;
    }
    case PotentialFamily::ConstantField:
      if (axes.size() == 1) {
        if (axes[0] == 1) d(0) = -0.5 * b0_;
        if (axes[0] == 0) d(1) = 0.5 * b0_;
      }
      break;
    case PotentialFamily::Custom:
      d = partial_fd(t, x, axes);
      break;
  }
  return d;
}

Vec VectorPotentialModel::partial_fd(double t, const Vec& x, std::span<const int> axes) const {
  if (axes.empty()) return value(t, x);
  // Larger steps for higher orders keep round-off below truncation error.
  static constexpr double kRelStep[] = {1e-4, 1e-4, 1e-3, 5e-3};
  const double h = kRelStep[std::min<std::size_t>(axes.size(), 3)] *
                   std::max(1.0, x.norm());
  const int ax = axes[0];
  auto rest = axes.subspan(1);
  auto at = [&](double off) {
    Vec y = x;
    y(ax) += off;
    return partial_fd(t, y, rest);
  };
  return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
}

Mat VectorPotentialModel::jacobian(double t, const Vec& x) const {
  check_dim(x);
  Mat J = Mat::Zero(n_, n_);
  switch (family_) {
    case PotentialFamily::Zero:
      break;
    case PotentialFamily::SoftPower: {
      const double g = modulation_value(modulation_, t);
      const double r = bracket(x);
      const double s = g * rho_ * std::pow(r, rho_ - 2.0);
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k) J(j, k) = amplitude_[j] * s * x(k);
      break;
    }
    case PotentialFamily::Rotational: {
      const double g = amplitude_[0] * modulation_value(modulation_, t);
      const double r = bracket(x);
      const double f = std::pow(r, rho_ - 1.0);
      const double fp = (rho_ - 1.0) * std::pow(r, rho_ - 3.0);  // d_k f = fp * x_k
      // a_0 = -g f x_1, a_1 = g f x_0
      J(0, 0) = -g * fp * x(0) * x(1);
      J(0, 1) = -g * (f + fp * x(1) * x(1));
      J(1, 0) = g * (f + fp * x(0) * x(0));
      J(1, 1) = g * fp * x(0) * x(1);
      break;
    }
    case PotentialFamily::ConstantField:
      J(0, 1) = -0.5 * b0_;
      J(1, 0) = 0.5 * b0_;
      break;
    case PotentialFamily::Custom:
      J = jacobian_fd(t, x);
      break;
  }
  return J;
}

Mat VectorPotentialModel::jacobian_fd(double t, const Vec& x, double step) const {
  check_dim(x);
  const double h = step > 0.0 ? step : 1e-4 * std::max(1.0, x.norm());
  Mat J(n_, n_);
  for (int k = 0; k < n_; ++k) {
    auto at = [&](double off) {
      Vec y = x;
      y(k) += off;
      return value(t, y);
    };
    Vec col = (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
    J.col(k) = col;
  }
  return J;
}

double VectorPotentialModel::divergence(double t, const Vec& x) const {
  if (family_ == PotentialFamily::Zero || family_ == PotentialFamily::ConstantField) return 0.0;
  return jacobian(t, x).trace();
}

nlohmann::json VectorPotentialModel::to_json() const {
  nlohmann::json j;
  j["family"] = std::string(to_string(family_));
  j["n"] = n_;
  j["rho"] = rho_;
  j["modulation"] = std::string(to_string(modulation_));
  j["amplitude"] = amplitude_;
  j["conforming"] = conforming_;
  return j;
}

VectorPotentialModel VectorPotentialModel::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::Input, "potential config must be a JSON object");
  const std::string family = j.value("family", std::string("zero"));
  const int n = j.value("n", 2);
  const double rho = j.value("rho", 0.5);
  const Modulation g = parse_modulation(j.value("modulation", std::string("one")));
  std::vector<double> amp;
  if (j.contains("amplitude")) {
    if (j["amplitude"].is_array())
      amp = j["amplitude"].get<std::vector<double>>();
    else
      amp = {j["amplitude"].get<double>()};
  }
  if (family == "zero") return zero(n);
  if (family == "soft-power") return soft_power(n, rho, g, amp);
  if (family == "rotational") {
    require(n == 2, ErrorCode::Input, "rotational family is defined for n = 2");
    return rotational(rho, g, amp.empty() ? 1.0 : amp[0]);
  }
  if (family == "constant-field") {
    const double b0 = j.value("b0", amp.empty() ? 1.0 : amp[0]);
    return constant_field(n, b0);
  }
  if (family == "custom-sampled")
    fail(ErrorCode::Input,
         "custom-sampled potentials are built programmatically (C++ or Python callable)");
  fail(ErrorCode::Input, "unknown potential family '" + family + "'");
}

Vec eval_a(const VectorPotentialModel& model, double t, const Vec& x) {
  return model.value(t, x);
}

Mat jacobian_a(const VectorPotentialModel& model, double t, const Vec& x) {
  return model.jacobian(t, x);
}

FieldMatrix magnetic_field(const VectorPotentialModel& model, double t, const Vec& x) {
  const Mat J = model.jacobian(t, x);
  const int n = model.dimension();
  FieldMatrix B(n, n);
  for (int j = 0; j < n; ++j) {
    B(j, j) = 0.0;
    for (int k = j + 1; k < n; ++k) {
      // d_j a_k - d_k a_j
      B(j, k) = J(k, j) - J(j, k);
      B(k, j) = -B(j, k);
    }
  }
  return B;
}

FieldMatrix field_matrix_from_vector(const Vec& b) {
  require(b.size() == 3, ErrorCode::Input, "field vector must be 3-dimensional");
  FieldMatrix B = FieldMatrix::Zero(3, 3);
  B(0, 1) = b(2);
  B(1, 0) = -b(2);
  B(1, 2) = b(0);
  B(2, 1) = -b(0);
  B(2, 0) = b(1);
  B(0, 2) = -b(1);
  return B;
}

FieldMatrix circular_current_field(const Vec& x) {
  require(x.size() == 3, ErrorCode::Input, "circular current field lives in R^3");
  Vec b = Vec::Zero(3);
  b(2) = 1.0 / (1.0 + x(2) * x(2));
  return field_matrix_from_vector(b);
}

FieldMatrix line_current_field(const Vec& x) {
  require(x.size() == 3, ErrorCode::Input, "line current field lives in R^3");
  const double r2 = 1.0 + x(0) * x(0) + x(1) * x(1);
  Vec b = Vec::Zero(3);
  b(0) = -x(1) / r2;
  b(1) = x(0) / r2;
  return field_matrix_from_vector(b);
}

std::vector<Vec> sphere_samples(int n, double radius, int count) {
  std::vector<Vec> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    Vec p(n);
    if (n == 1) {
      p(0) = (i % 2 == 0 ? radius : -radius);
    } else if (n == 2) {
      const double th = 2.0 * std::numbers::pi * (i + 0.3) / count;
      p << radius * std::cos(th), radius * std::sin(th);
    } else {
      // Fibonacci lattice on the sphere.
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double rr = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double th = std::numbers::pi * (3.0 - std::sqrt(5.0)) * i;
      p << radius * rr * std::cos(th), radius * rr * std::sin(th), radius * z;
    }
    pts.push_back(p);
  }
  return pts;
}

nlohmann::json DecayVerification::to_json() const {
  nlohmann::json j;
  j["rho"] = rho;
  j["max_order"] = max_order;
  j["conforming"] = conforming;
  auto& arr = j["shells"] = nlohmann::json::array();
  for (const auto& s : shells) arr.push_back({{"radius", s.radius}, {"sup", s.sup_by_order}});
  return j;
}

DecayVerification verify_decay(const VectorPotentialModel& model, double rho, int max_order,
                               std::span<const double> radii, int samples_per_radius) {
  require(max_order >= 0 && max_order <= 3, ErrorCode::Input, "max_order must be in 0..3");
  require(!radii.empty(), ErrorCode::Input, "at least one radius is required");
  require(samples_per_radius >= 1, ErrorCode::Input, "samples_per_radius must be positive");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    require(radii[i] > 0.0, ErrorCode::Input, "radii must be positive");
    if (i > 0) require(radii[i] > radii[i - 1], ErrorCode::Input, "radii must increase");
  }
  static constexpr double kTimes[] = {0.0, 0.5, 1.0, 1.5707963267948966, 2.5, 3.141592653589793};
  const int n = model.dimension();

  DecayVerification out;
  out.rho = rho;
  out.max_order = max_order;
  for (double r : radii) {
    DecayShell shell;
    shell.radius = r;
    shell.sup_by_order.assign(max_order + 1, 0.0);
    for (const Vec& x : sphere_samples(n, r, samples_per_radius)) {
      const double w = bracket(x);
      for (double t : kTimes) {
        for (int order = 0; order <= max_order; ++order) {
          const double weight = std::pow(w, order - rho);
          for (const auto& alpha : detail::multi_indices(n, order)) {
            const Vec d = model.partial(t, x, alpha);
            for (int j = 0; j < n; ++j) {
              if (!std::isfinite(d(j))) {
                std::ostringstream os;
                os << "non-finite derivative of order " << order << " at x = ("
                   << x.transpose() << "), t = " << t;
                fail(ErrorCode::Numeric, os.str());
              }
              shell.sup_by_order[order] =
                  std::max(shell.sup_by_order[order], std::abs(d(j)) * weight);
            }
          }
        }
      }
    }
    out.shells.push_back(std::move(shell));
  }

  out.conforming = true;
  for (int order = 0; order <= max_order; ++order)
    for (std::size_t i = 1; i < out.shells.size(); ++i)
      if (out.shells[i].sup_by_order[order] > 1.1 * out.shells[i - 1].sup_by_order[order])
        out.conforming = false;
  return out;
}

}  // namespace mswf
