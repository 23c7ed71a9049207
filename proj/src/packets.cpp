#include "mswf/packets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mswf/errors.hpp"
#include "mswf/fft.hpp"

namespace mswf {
namespace {

constexpr double kPi = std::numbers::pi;

Vec zeros_if_empty(const Vec& v, int n) { return v.size() == 0 ? Vec(Vec::Zero(n)) : v; }

void check_point(const GridSpec& g, const Vec& v, const char* what) {
  if (v.size() != g.dimension()) {
    std::ostringstream os;
    os << what << " has dimension " << v.size() << ", grid has " << g.dimension();
    fail(ErrorCode::Input, os.str());
  }
}

void check_nyquist(const GridSpec& g, const Vec& xi) {
  for (int d = 0; d < g.dimension(); ++d) {
    if (std::abs(xi(d)) * g.dx(d) > kPi * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "frequency " << xi(d) << " on axis " << d << " exceeds the grid band pi/dx = "
         << g.nyquist(d);
      fail(ErrorCode::Nyquist, os.str());
    }
  }
}

// Per-axis complex factors c_d(j) for separable pairing sums.
using AxisFactors = std::vector<std::vector<cplx>>;

cplx separable_sum(const GridFunction& f, const AxisFactors& c) {
  const GridSpec& g = f.grid();
  const int n = g.dimension();
  cplx acc = 0.0;
  if (n == 1) {
    for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * c[0][i];
  } else if (n == 2) {
    const std::size_t m1 = g.points(1);
    for (std::size_t i = 0; i < g.points(0); ++i) {
      cplx row = 0.0;
      const cplx* fr = f.values().data() + i * m1;
      for (std::size_t j = 0; j < m1; ++j) row += fr[j] * c[1][j];
      acc += row * c[0][i];
    }
  } else {
    const std::size_t m1 = g.points(1), m2 = g.points(2);
    for (std::size_t i = 0; i < g.points(0); ++i) {
      cplx plane = 0.0;
      for (std::size_t j = 0; j < m1; ++j) {
        cplx row = 0.0;
        const cplx* fr = f.values().data() + (i * m1 + j) * m2;
        for (std::size_t k = 0; k < m2; ++k) row += fr[k] * c[2][k];
        plane += row * c[1][j];
      }
      acc += plane * c[0][i];
    }
  }
  return acc * g.cell_volume();
}

// Radius per axis beyond which |phi| < 1e-12 max|phi|.
std::vector<double> support_radius(const GridFunction& packet) {
  const GridSpec& g = packet.grid();
  const int n = g.dimension();
  const double thr = 1e-12 * packet.max_abs();
  std::vector<double> r(n, 0.0);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < packet.size(); ++i) {
    if (std::abs(packet[i]) < thr) continue;
    g.unflatten(i, idx);
    for (int d = 0; d < n; ++d) r[d] = std::max(r[d], std::abs(g.coordinate(d, idx[d])));
  }
  return r;
}

// Dense evaluation of the trigonometric interpolant along one axis at the
// points `s * x_i`; zero outside [-L, L).
std::vector<cplx> axis_interpolation_matrix(const GridSpec& g, int axis, double s) {
  const std::size_t m = g.points(axis);
  const double L = g.half_width(axis);
  std::vector<cplx> E(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double y = s * g.coordinate(axis, i);
    if (y < -L || y >= L) continue;
    for (std::size_t k = 0; k < m; ++k) {
      const double kk = g.frequency(axis, k);
      const double ph = kk * (y + L);
      // Nyquist mode interpolated symmetrically.
      E[i * m + k] = (k == m / 2) ? cplx(std::cos(ph), 0.0) / static_cast<double>(m)
                                  : std::polar(1.0 / m, ph);
    }
  }
  return E;
}

// Contract `data` (shape) along `axis` with matrix E (rows: new index).
void apply_axis_matrix(std::vector<cplx>& data, std::span<const std::size_t> shape, int axis,
                       const std::vector<cplx>& E) {
  const std::size_t m = shape[axis];
  std::size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  std::vector<cplx> out(data.size(), 0.0);
  std::vector<cplx> line(m);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      for (std::size_t k = 0; k < m; ++k) line[k] = data[(o * m + k) * inner + in];
      for (std::size_t i = 0; i < m; ++i) {
        cplx acc = 0.0;
        const cplx* row = E.data() + i * m;
        for (std::size_t k = 0; k < m; ++k) acc += row[k] * line[k];
        out[(o * m + i) * inner + in] = acc;
      }
    }
  }
  data.swap(out);
}

}  // namespace

double theorem_exponent(double rho) { return std::min(0.125, (1.0 - rho) / 8.0); }

GridFunction gaussian(const GridSpec& grid, double width, const Vec& center,
                      const Vec& frequency, double amplitude) {
  require(width > 0.0, ErrorCode::Input, "gaussian width must be positive");
  const int n = grid.dimension();
  const Vec c = zeros_if_empty(center, n);
  const Vec k = zeros_if_empty(frequency, n);
  check_point(grid, c, "center");
  check_point(grid, k, "frequency");
  GridFunction out(grid, "gaussian");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec y = grid.node(i);
    out[i] = amplitude * std::exp(-(y - c).squaredNorm() / (2.0 * width * width)) *
             std::polar(1.0, y.dot(k));
  }
  return out;
}

GridFunction discrete_delta(const GridSpec& grid) {
  GridFunction out(grid, "delta");
  out[grid.origin_index()] = 1.0 / grid.cell_volume();
  return out;
}

double effective_width(const GridFunction& packet) {
  const GridSpec& g = packet.grid();
  double mass = 0.0, second = 0.0;
  for (std::size_t i = 0; i < packet.size(); ++i) {
    const double w = std::norm(packet[i]);
    mass += w;
    second += w * g.node(i).squaredNorm();
  }
  require(mass > 0.0, ErrorCode::Input, "packet is identically zero");
  return std::sqrt(2.0 * second / (mass * g.dimension()));
}

GridFunction make_scaled_packet(const GridSpec& grid, const PacketBase& base, double lambda,
                                double b) {
  require(lambda >= 1.0, ErrorCode::Input, "dilation lambda must be >= 1");
  require(b > 0.0 && b < 1.0, ErrorCode::Input, "scaling exponent b must lie in (0, 1)");
  const int n = grid.dimension();
  const double s = std::pow(lambda, b);
  const double width = std::holds_alternative<GaussianBase>(base)
                           ? std::get<GaussianBase>(base).width
                           : effective_width(std::get<GridFunction>(base));
  if (s * grid.max_dx() > width / 4.0) {
    std::ostringstream os;
    os << "packet under-resolved: lambda^b dx = " << s * grid.max_dx() << " > w/4 = "
       << width / 4.0;
    fail(ErrorCode::Resolution, os.str());
  }
  const double amp = std::pow(lambda, n * b / 2.0);

  if (const auto* gb = std::get_if<GaussianBase>(&base)) {
    GridFunction out(grid, "phi_lambda");
    const double c = s * s / (2.0 * gb->width * gb->width);
    for (std::size_t i = 0; i < grid.size(); ++i)
      out[i] = amp * std::exp(-c * grid.node(i).squaredNorm());
    return out;
  }

  const GridFunction& phi = std::get<GridFunction>(base);
  require(phi.grid() == grid, ErrorCode::Input, "custom packet lives on a different grid");
  if (lambda == 1.0) return phi;
  std::vector<cplx> coeff(phi.values().begin(), phi.values().end());
  fft_forward(grid, coeff);
  for (int d = 0; d < n; ++d)
    apply_axis_matrix(coeff, grid.shape(), d, axis_interpolation_matrix(grid, d, s));
  for (auto& v : coeff) v *= amp;
  return GridFunction(grid, std::move(coeff), "phi_lambda");
}

GridFunction free_evolve_packet(const GridFunction& packet, double t) {
  if (t == 0.0) return packet;
  const GridSpec& g = packet.grid();
  const int n = g.dimension();
  std::vector<cplx> spec(packet.values().begin(), packet.values().end());
  fft_forward(g, spec);

  double peak = 0.0;
  for (const auto& v : spec) peak = std::max(peak, std::abs(v));
  std::vector<double> ksup(n, 0.0);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (std::abs(spec[i]) < 1e-10 * peak) continue;
    g.unflatten(i, idx);
    for (int d = 0; d < n; ++d) ksup[d] = std::max(ksup[d], std::abs(g.frequency(d, idx[d])));
  }
  for (int d = 0; d < n; ++d) {
    // Adjacent-sample phase increment of t|k|^2/2 near the spectral support.
    const double dphase = std::abs(t) * ksup[d] * g.dk(d);
    if (dphase > kPi) {
      std::ostringstream os;
      os << "free evolution under-resolved on axis " << d << ": phase step " << dphase
         << " > pi (t = " << t << ", spectral support " << ksup[d] << ")";
      fail(ErrorCode::Resolution, os.str());
    }
  }

  Vec k(n);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    g.unflatten(i, idx);
    for (int d = 0; d < n; ++d) k(d) = g.frequency(d, idx[d]);
    spec[i] *= std::polar(1.0, -0.5 * t * k.squaredNorm());
  }
  fft_inverse(g, spec);
  return GridFunction(g, std::move(spec), packet.label());
}

cplx gaussian_packet_value(double width, double lambda, double b, double t, const Vec& y) {
  const double sigma2 = width * width * std::pow(lambda, -2.0 * b);
  const cplx beta(sigma2, t);
  const int n = static_cast<int>(y.size());
  const cplx factor = std::pow(lambda, b / 2.0) * std::sqrt(sigma2 / beta);
  cplx amp = 1.0;
  for (int d = 0; d < n; ++d) amp *= factor;
  return amp * std::exp(-y.squaredNorm() / (2.0 * beta));
}

GridFunction translate(const GridFunction& packet, const Vec& shift) {
  const GridSpec& g = packet.grid();
  const int n = g.dimension();
  check_point(g, shift, "shift");
  bool on_lattice = true;
  std::vector<long long> steps(n);
  for (int d = 0; d < n; ++d) {
    const double r = shift(d) / g.dx(d);
    steps[d] = std::llround(r);
    if (std::abs(r - static_cast<double>(steps[d])) > 1e-9) on_lattice = false;
  }
  if (on_lattice) {
    GridFunction out(g, packet.label());
    std::vector<std::size_t> idx(n), src(n);
    for (std::size_t i = 0; i < packet.size(); ++i) {
      g.unflatten(i, idx);
      for (int d = 0; d < n; ++d) {
        const auto m = static_cast<long long>(g.points(d));
        src[d] = static_cast<std::size_t>(((static_cast<long long>(idx[d]) - steps[d]) % m + m) % m);
      }
      out[i] = packet[g.flat_index(src)];
    }
    return out;
  }
  std::vector<cplx> data(packet.values().begin(), packet.values().end());
  apply_fourier_multiplier(g, data, [&](const Vec& k) { return std::polar(1.0, -k.dot(shift)); });
  return GridFunction(g, std::move(data), packet.label());
}

cplx wpt(const GridFunction& f, const GridFunction& packet, const PhasePoint& p) {
  const GridSpec& g = f.grid();
  require(packet.grid() == g, ErrorCode::Input, "packet and field live on different grids");
  check_point(g, p.x, "x");
  check_point(g, p.xi, "xi");
  check_nyquist(g, p.xi);
  const auto r = support_radius(packet);
  for (int d = 0; d < g.dimension(); ++d) {
    if (std::abs(p.x(d)) + r[d] > g.half_width(d)) {
      std::ostringstream os;
      os << "packet centred at x_" << d << " = " << p.x(d) << " with support radius " << r[d]
         << " leaves the domain [-" << g.half_width(d) << ", " << g.half_width(d) << ")";
      fail(ErrorCode::Domain, os.str());
    }
  }
  const GridFunction shifted = translate(packet, p.x);
  const int n = g.dimension();
  std::vector<std::size_t> idx(n);
  cplx acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    g.unflatten(i, idx);
    double ph = 0.0;
    for (int d = 0; d < n; ++d) ph += g.coordinate(d, idx[d]) * p.xi(d);
    acc += std::conj(shifted[i]) * f[i] * std::polar(1.0, -ph);
  }
  return acc * g.cell_volume();
}

cplx wpt_gaussian(const GridFunction& f, double width, double lambda, double b, double t,
                  const PhasePoint& p) {
  const GridSpec& g = f.grid();
  check_point(g, p.x, "x");
  check_point(g, p.xi, "xi");
  check_nyquist(g, p.xi);
  const int n = g.dimension();
  const double sigma2 = width * width * std::pow(lambda, -2.0 * b);
  const cplx beta(sigma2, t);
  const cplx factor = std::pow(lambda, b / 2.0) * std::sqrt(sigma2 / beta);
  const cplx inv2beta_conj = 1.0 / (2.0 * std::conj(beta));
  AxisFactors c(n);
  for (int d = 0; d < n; ++d) {
    c[d].resize(g.points(d));
    for (std::size_t j = 0; j < g.points(d); ++j) {
      const double y = g.coordinate(d, j);
      const double z = y - p.x(d);
      c[d][j] = std::conj(factor) * std::exp(-z * z * inv2beta_conj) * std::polar(1.0, -y * p.xi(d));
    }
  }
  return separable_sum(f, c);
}

std::vector<Vec> node_lattice(const GridSpec& grid, std::size_t stride) {
  require(stride >= 1, ErrorCode::Input, "lattice stride must be positive");
  const int n = grid.dimension();
  std::vector<std::size_t> counts(n);
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) {
    require(grid.points(d) % stride == 0, ErrorCode::Input, "stride must divide the grid size");
    counts[d] = grid.points(d) / stride;
    total *= counts[d];
  }
  std::vector<Vec> out;
  out.reserve(total);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t r = flat;
    Vec x(n);
    for (int d = n - 1; d >= 0; --d) {
      idx[d] = r % counts[d];
      r /= counts[d];
      x(d) = grid.coordinate(d, idx[d] * stride);
    }
    out.push_back(x);
  }
  return out;
}

std::vector<Vec> frequency_lattice(const GridSpec& grid) {
  const int n = grid.dimension();
  std::vector<Vec> out;
  out.reserve(grid.size());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.unflatten(i, idx);
    Vec k(n);
    for (int d = 0; d < n; ++d) k(d) = grid.frequency(d, idx[d]);
    out.push_back(k);
  }
  return out;
}

WptTable wpt_grid(const GridFunction& f, const GridFunction& packet,
                  std::span<const Vec> positions, std::span<const Vec> frequencies) {
  const GridSpec& g = f.grid();
  require(packet.grid() == g, ErrorCode::Input, "packet and field live on different grids");
  const int n = g.dimension();

  // Map each requested frequency to its DFT index.
  std::vector<std::size_t> kindex(frequencies.size());
  std::vector<cplx> kphase(frequencies.size());
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < frequencies.size(); ++j) {
    const Vec& xi = frequencies[j];
    check_point(g, xi, "xi");
    check_nyquist(g, xi);
    double ph = 0.0;
    for (int d = 0; d < n; ++d) {
      const double r = xi(d) / g.dk(d);
      const long long k = std::llround(r);
      require(std::abs(r - static_cast<double>(k)) < 1e-9, ErrorCode::Input,
              "xi-lattice entries must be grid frequencies");
      const auto m = static_cast<long long>(g.points(d));
      idx[d] = static_cast<std::size_t>(((k % m) + m) % m);
      ph += g.half_width(d) * xi(d);
    }
    kindex[j] = g.flat_index(idx);
    kphase[j] = std::polar(g.cell_volume(), ph);
  }

  WptTable table;
  table.grid = g;
  table.positions.assign(positions.begin(), positions.end());
  table.frequencies.assign(frequencies.begin(), frequencies.end());
  table.values.resize(positions.size() * frequencies.size());
  std::vector<cplx> buf(g.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    check_point(g, positions[i], "x");
    const GridFunction shifted = translate(packet, positions[i]);
    for (std::size_t m = 0; m < g.size(); ++m) buf[m] = std::conj(shifted[m]) * f[m];
    fft_forward(g, buf);
    for (std::size_t j = 0; j < frequencies.size(); ++j)
      table.values[i * frequencies.size() + j] = kphase[j] * buf[kindex[j]];
  }
  return table;
}

WptTable wpt_grid_full(const GridFunction& f, const GridFunction& packet, std::size_t stride) {
  const auto pos = node_lattice(f.grid(), stride);
  const auto freq = frequency_lattice(f.grid());
  WptTable t = wpt_grid(f, packet, pos, freq);
  t.position_stride = stride;
  t.full_band = true;
  return t;
}

GridFunction inverse_wpt(const WptTable& table, const GridFunction& packet) {
  const GridSpec& g = table.grid;
  require(packet.grid() == g, ErrorCode::Input, "packet and table live on different grids");
  require(table.full_band && table.frequencies.size() == g.size(), ErrorCode::Resolution,
          "inversion needs the full grid frequency band");
  require(table.position_stride > 0, ErrorCode::Resolution,
          "inversion needs positions on a strided node lattice");
  const double w = effective_width(packet);
  const double spacing = table.position_stride * g.max_dx();
  if (spacing > w / 4.0) {
    std::ostringstream os;
    os << "position lattice spacing " << spacing << " exceeds packet width / 4 = " << w / 4.0;
    fail(ErrorCode::Resolution, os.str());
  }
  const int n = g.dimension();
  std::vector<cplx> shiftphase(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double ph = 0.0;
    for (int d = 0; d < n; ++d) ph += g.half_width(d) * table.frequencies[k](d);
    shiftphase[k] = std::polar(1.0, -ph);
  }
  const double lattice_weight = std::pow(static_cast<double>(table.position_stride), n);
  GridFunction out(g, "inverse_wpt");
  std::vector<cplx> buf(g.size());
  for (std::size_t i = 0; i < table.positions.size(); ++i) {
    for (std::size_t k = 0; k < g.size(); ++k) buf[k] = table.at(i, k) * shiftphase[k];
    fft_inverse(g, buf);
    const GridFunction shifted = translate(packet, table.positions[i]);
    for (std::size_t m = 0; m < g.size(); ++m) out[m] += shifted[m] * buf[m] * lattice_weight;
  }
  const double norm2 = std::pow(packet.l2_norm(), 2);
  out *= 1.0 / norm2;
  return out;
}

cplx gaussian_wpt_oracle(const OracleDatum& f, int n, double packet_width, double t,
                         double lambda, double b, const PhasePoint& p) {
  require(p.x.size() == n && p.xi.size() == n, ErrorCode::Input, "phase point dimension mismatch");
  if (std::holds_alternative<DeltaDatum>(f))
    return std::conj(gaussian_packet_value(packet_width, lambda, b, t, -p.x));

  const auto& gd = std::get<GaussianDatum>(f);
  const Vec c = gd.center.size() == 0 ? Vec(Vec::Zero(n)) : gd.center;
  const Vec k = gd.frequency.size() == 0 ? Vec(Vec::Zero(n)) : gd.frequency;
  require(c.size() == n && k.size() == n, ErrorCode::Input, "gaussian datum dimension mismatch");
  const double sigma2 = packet_width * packet_width * std::pow(lambda, -2.0 * b);
  const cplx beta(sigma2, t);
  const cplx bc = std::conj(beta);
  const cplx alpha_c = std::conj(std::pow(lambda, b / 2.0) * std::sqrt(sigma2 / beta));
  const double s2 = gd.width * gd.width;
  cplx out = gd.amplitude;
  for (int d = 0; d < n; ++d) {
    const cplx pp = 1.0 / (2.0 * bc) + 1.0 / (2.0 * s2);
    const cplx q = p.x(d) / bc + c(d) / s2 + cplx(0.0, k(d) - p.xi(d));
    const cplx r = -p.x(d) * p.x(d) / (2.0 * bc) - c(d) * c(d) / (2.0 * s2);
    out *= alpha_c * std::sqrt(kPi / pp) * std::exp(q * q / (4.0 * pp) + r);
  }
  return out;
}

double delta_magnitude_printed_form(int n, double b, double lambda, double t0, double x_norm) {
  const double lam_abs = std::abs(cplx(std::pow(lambda, -2.0 * b), -t0));
  return std::pow(lambda, -n * b / 2.0) * std::pow(lam_abs, n / 2.0) *
         std::exp(-x_norm * x_norm / (2.0 * lam_abs));
}

double commutator_check(const GridFunction& packet, double t, std::span<const int> alpha,
                        std::span<const int> beta) {
  const GridSpec& g = packet.grid();
  const int n = g.dimension();
  require(static_cast<int>(alpha.size()) == n && static_cast<int>(beta.size()) == n,
          ErrorCode::Input, "multi-indices must have one entry per axis");
  int order = 0;
  for (int d = 0; d < n; ++d) {
    require(alpha[d] >= 0 && beta[d] >= 0, ErrorCode::Input, "multi-index entries must be >= 0");
    order += alpha[d] + beta[d];
  }
  require(order <= 2, ErrorCode::Input, "commutator check supports |alpha| + |beta| <= 2");

  auto derivative_beta = [&](GridFunction u) {
    apply_fourier_multiplier(g, u.values(), [&](const Vec& k) {
      cplx m = 1.0;
      for (int d = 0; d < n; ++d)
        for (int r = 0; r < beta[d]; ++r) m *= cplx(0.0, k(d));
      return m;
    });
    return u;
  };

  // x^alpha d^beta e^{it Delta/2} phi
  GridFunction lhs = derivative_beta(free_evolve_packet(packet, t));
  {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      g.unflatten(i, idx);
      double w = 1.0;
      for (int d = 0; d < n; ++d) w *= std::pow(g.coordinate(d, idx[d]), alpha[d]);
      lhs[i] *= w;
    }
  }

  // e^{it Delta/2} (x - it grad)^alpha d^beta phi
  GridFunction w = derivative_beta(packet);
  std::vector<std::size_t> idx(n);
  for (int d = 0; d < n; ++d) {
    for (int r = 0; r < alpha[d]; ++r) {
      GridFunction dw = w;
      spectral_derivative(g, dw.values(), d);
      for (std::size_t i = 0; i < w.size(); ++i) {
        g.unflatten(i, idx);
        w[i] = g.coordinate(d, idx[d]) * w[i] - cplx(0.0, t) * dw[i];
      }
    }
  }
  const GridFunction rhs = free_evolve_packet(w, t);
  return max_abs_difference(lhs, rhs);
}

}  // namespace mswf
