#pragma once

#include <span>
#include <variant>
#include <vector>

#include "mswf/grid.hpp"
#include "mswf/linalg.hpp"

namespace mswf {

/// phi_0(x) = exp(-|x|^2 / (2 w^2)); w = 1 is the unit gaussian.
struct GaussianBase {
  double width = 1.0;
};

using PacketBase = std::variant<GaussianBase, GridFunction>;

struct PacketSpec {
  PacketBase base = GaussianBase{};
  double b = 0.125;       // scaling exponent, 0 < b < 1
  double lambda = 1.0;    // dilation, >= 1
  double time = 0.0;      // free-evolution time t of phi_lambda^{(t)}
};

struct PhasePoint {
  Vec x;
  Vec xi;
};

/// Theorem-mode scaling exponent min(1/8, (1 - rho)/8).
double theorem_exponent(double rho);

// --- construction -----------------------------------------------------------

GridFunction gaussian(const GridSpec& grid, double width = 1.0, const Vec& center = {},
                      const Vec& frequency = {}, double amplitude = 1.0);

/// Discretized delta at the origin node: dx^{-n} there, zero elsewhere.
GridFunction discrete_delta(const GridSpec& grid);

/// Effective width of a packet: sqrt(2 <|x|^2> / n) with <.> the |phi|^2 mean,
/// which equals w for exp(-|x|^2 / (2 w^2)).
double effective_width(const GridFunction& packet);

/// phi_lambda(x) = lambda^{nb/2} phi(lambda^b x) sampled on the grid.
/// Resolution error when lambda^b dx > w / 4.
GridFunction make_scaled_packet(const GridSpec& grid, const PacketBase& base, double lambda,
                                double b);

/// e^{it Delta / 2} applied as the Fourier multiplier e^{-it|k|^2/2}.
GridFunction free_evolve_packet(const GridFunction& packet, double t);

/// Closed-form value of phi_lambda^{(t)}(y) for a gaussian base.
cplx gaussian_packet_value(double width, double lambda, double b, double t, const Vec& y);

/// Translate a packet: returns phi(. - shift) using an exact circular shift
/// on lattice shifts and a spectral phase shift otherwise.
GridFunction translate(const GridFunction& packet, const Vec& shift);

// --- transform --------------------------------------------------------------

/// W_phi f(x, xi) = int conj(phi(y - x)) f(y) e^{-i y.xi} dy, trapezoidal on the grid.
cplx wpt(const GridFunction& f, const GridFunction& packet, const PhasePoint& p);

/// Same pairing with the packet evaluated in closed form (gaussian base,
/// optionally dilated and freely evolved). No translation wrap-around.
cplx wpt_gaussian(const GridFunction& f, double width, double lambda, double b, double t,
                  const PhasePoint& p);

/// Batched transform on an x-lattice x an xi-lattice of grid frequencies.
struct WptTable {
  GridSpec grid;
  std::vector<Vec> positions;
  std::vector<Vec> frequencies;
  std::vector<cplx> values;  // positions.size() x frequencies.size(), row-major
  std::size_t position_stride = 0;  // > 0 when positions form a strided node lattice
  bool full_band = false;           // frequencies cover every DFT mode in FFT order

  cplx at(std::size_t i, std::size_t j) const { return values[i * frequencies.size() + j]; }
};

/// Every `stride`-th node per axis.
std::vector<Vec> node_lattice(const GridSpec& grid, std::size_t stride);
/// Every DFT frequency, in FFT order.
std::vector<Vec> frequency_lattice(const GridSpec& grid);

WptTable wpt_grid(const GridFunction& f, const GridFunction& packet,
                  std::span<const Vec> positions, std::span<const Vec> frequencies);
/// Convenience: strided node lattice x full DFT band, as needed for inversion.
WptTable wpt_grid_full(const GridFunction& f, const GridFunction& packet, std::size_t stride);

/// W*_phi[F] / ||phi||^2.
GridFunction inverse_wpt(const WptTable& table, const GridFunction& packet);

// --- closed forms -----------------------------------------------------------

struct GaussianDatum {
  double amplitude = 1.0;
  Vec center;     // defaults to 0
  Vec frequency;  // defaults to 0
  double width = 1.0;  // f(y) = A exp(-|y-c|^2/(2 s^2)) e^{i y.freq}
};
struct DeltaDatum {};
using OracleDatum = std::variant<GaussianDatum, DeltaDatum>;

/// Exact W_{phi_lambda^{(t)}} f(p) for a gaussian base of the given width.
cplx gaussian_wpt_oracle(const OracleDatum& f, int n, double packet_width, double t,
                         double lambda, double b, const PhasePoint& p);

/// The magnitude C_n lambda^{-nb/2} |Lambda|^{n/2} exp(-|x|^2 / (2|Lambda|)),
/// Lambda = lambda^{-2b} - i t0, with C_n = 1 fixed by the lambda = 1, t0 = 0 value.
/// Kept for cross-plotting; the exact magnitude is gaussian_wpt_oracle(DeltaDatum).
double delta_magnitude_printed_form(int n, double b, double lambda, double t0, double x_norm);

// --- commutator -------------------------------------------------------------

/// max |x^alpha d^beta e^{itD/2} phi - e^{itD/2} (x - it grad)^alpha d^beta phi|.
double commutator_check(const GridFunction& packet, double t, std::span<const int> alpha,
                        std::span<const int> beta);

}  // namespace mswf
