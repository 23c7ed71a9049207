#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mswf/characteristics.hpp"
#include "mswf/errors.hpp"
#include "mswf/propagator.hpp"

using namespace mswf;

namespace {
Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
double mean_position(const GridFunction& u) {
  double m = 0.0, x = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    m += std::norm(u[i]);
    x += std::norm(u[i]) * u.grid().coordinate(0, i);
  }
  return x / m;
}
}  // namespace

TEST_CASE("scalar potential models") {
  auto v = ScalarPotentialModel::soft_power(2, 1.0, 0.3);
  CHECK(v.value(0.0, v2(0, 0)) == doctest::Approx(0.3));
  CHECK(v.conforming());
  CHECK_FALSE(ScalarPotentialModel::quadratic(1).conforming());
  const std::vector<double> radii{10.0, 100.0, 1000.0};
  CHECK(v.verify(2, radii, 8).conforming);
  CHECK_FALSE(ScalarPotentialModel::quadratic(2).verify(2, radii, 8).conforming);
  auto back = ScalarPotentialModel::from_json(v.to_json(), 2);
  CHECK(back.value(0.3, v2(1, 2)) == v.value(0.3, v2(1, 2)));
  CHECK_THROWS_AS(ScalarPotentialModel::from_json({{"family", "bogus"}}, 1), Error);
}

TEST_CASE("free evolution matches the closed form and free_evolve_packet") {
  GridSpec g(1, 512, 20.0);
  auto u0 = gaussian(g);
  EvolveConfig cfg;
  cfg.dt = 1e-3;
  auto z = VectorPotentialModel::zero(1);
  auto V0 = ScalarPotentialModel::zero(1);
  auto u = evolve(z, V0, u0, 0.0, 1.0, cfg);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    err = std::max(err, std::abs(u[i] - gaussian_packet_value(1.0, 1.0, 0.125, 1.0, g.node(i))));
  CHECK(err < 1e-6);
  CHECK(max_abs_difference(u, free_evolve_packet(u0, 1.0)) < 1e-10);
}

TEST_CASE("L2 conservation and the boundary guard") {
  GridSpec g(2, 64, 12.0);
  auto u0 = gaussian(g, 1.0, v2(0.5, -0.5), v2(1.0, 0.5));
  EvolveConfig cfg;
  cfg.dt = 5e-3;
  cfg.probe_every = 10;
  for (const auto& m : {VectorPotentialModel::soft_power(2, 0.5),
                        VectorPotentialModel::rotational(0.5, Modulation::Sin),
                        VectorPotentialModel::constant_field(2, 1.0)}) {
    auto r = evolve_with_stats(m, ScalarPotentialModel::soft_power(2, 1.0, 0.3), u0, 0.0, 1.0, cfg);
    CHECK(std::abs(r.stats.l2_final / r.stats.l2_initial - 1.0) < 1e-6);
    for (const auto& [t, n] : r.probe) CHECK(std::abs(n / r.stats.l2_initial - 1.0) < 1e-6);
  }
  auto fast = gaussian(g, 1.0, v2(0, 0), v2(4.0, 0.0));
  CHECK_THROWS_AS(evolve(VectorPotentialModel::zero(2), ScalarPotentialModel::zero(2), fast, 0.0,
                         2.0, cfg),
                  Error);
  EvolveConfig big = cfg;
  big.dt = 0.5;
  CHECK_THROWS_AS(evolve(VectorPotentialModel::constant_field(2, 1.0),
                         ScalarPotentialModel::zero(2), u0, 0.0, 1.0, big),
                  Error);
}

TEST_CASE("harmonic oscillator returns the packet after one period") {
  GridSpec g(1, 256, 12.0);
  auto u0 = gaussian(g, 1.0, v1(2.0));
  EvolveConfig cfg;
  cfg.dt = 2e-3;
  auto u = evolve(VectorPotentialModel::zero(1), ScalarPotentialModel::quadratic(1), u0, 0.0,
                  2.0 * std::numbers::pi, cfg);
  CHECK(std::abs(mean_position(u) - 2.0) < 1e-3);
}

TEST_CASE("second-order convergence in dt") {
  GridSpec g(2, 64, 10.0);
  auto u0 = gaussian(g, 1.0, v2(0.5, 0.0), v2(1.0, -1.0));
  auto m = VectorPotentialModel::rotational(0.5, Modulation::Sin, 1.5);
  auto V = ScalarPotentialModel::soft_power(2, 1.0, 0.3);
  EvolveConfig cfg;
  cfg.dt = 0.1 / 8;
  auto ref = evolve(m, V, u0, 0.0, 1.0, cfg);
  cfg.dt = 0.1;
  const double e1 = (evolve(m, V, u0, 0.0, 1.0, cfg) - ref).l2_norm();
  cfg.dt = 0.05;
  const double e2 = (evolve(m, V, u0, 0.0, 1.0, cfg) - ref).l2_norm();
  const double order = std::log2(e1 / e2);
  CHECK(order > 1.8);
  CHECK(order < 2.6);
}

TEST_CASE("splitting agrees with the midpoint reference and the semi-Lagrangian option") {
  GridSpec g(2, 64, 10.0);
  auto u0 = gaussian(g, 1.0, v2(0.0, 0.5), v2(0.5, 0.5));
  auto m = VectorPotentialModel::soft_power(2, 0.5, Modulation::HalfCos, {0.6, -0.4});
  auto V = ScalarPotentialModel::zero(2);
  EvolveConfig cfg;
  cfg.dt = 2e-3;
  auto a = evolve(m, V, u0, 0.0, 0.5, cfg);
  cfg.method = EvolveMethod::ReferenceMidpoint;
  auto b = evolve(m, V, u0, 0.0, 0.5, cfg);
  CHECK((a - b).l2_norm() / u0.l2_norm() < 1e-4);
  // Semi-Lagrangian accuracy is interpolation-limited (about dx^3), so it gets a finer grid.
  GridSpec fine(2, 128, 10.0);
  auto w0 = gaussian(fine, 1.0, v2(0.0, 0.5), v2(0.5, 0.5));
  cfg.method = EvolveMethod::StrangSplit;
  cfg.dt = 0.01;
  auto d = evolve(m, V, w0, 0.0, 0.5, cfg);
  cfg.method = EvolveMethod::StrangSemiLagrangian;
  cfg.dt = 0.05;
  auto c = evolve(m, V, w0, 0.0, 0.5, cfg);
  CHECK((d - c).l2_norm() / w0.l2_norm() < 2e-3);
  CHECK(std::abs(c.l2_norm() / w0.l2_norm() - 1.0) < 1e-3);
  GridSpec big(2, 256, 10.0);
  CHECK_THROWS_AS(evolve(m, V, gaussian(big), 0.0, 0.1, cfg = EvolveConfig{1e-3,
                  EvolveMethod::ReferenceMidpoint}), Error);
}

TEST_CASE("leading term of the representation formula") {
  GridSpec g(1, 512, 20.0);
  auto u0 = gaussian(g, 1.0, v1(0.0), v1(2.0));
  PacketSpec ps;
  ps.lambda = 16.0;
  ps.b = 0.125;
  auto z = VectorPotentialModel::zero(1);
  const PhasePoint p{v1(0.0), v1(2.0)};
  CHECK(std::abs(evolved_wpt_leading(z, u0, ps, 0.0, p, 1e-10) -
                 wpt_gaussian(u0, 1.0, 16.0, 0.125, 0.0, p)) < 1e-14);
  EvolveConfig cfg;
  auto ut = evolve(z, ScalarPotentialModel::zero(1), u0, 0.0, 1.0, cfg);
  for (double x : {1.0, 2.0, 3.0}) {
    const PhasePoint q{v1(x), v1(2.0)};
    const cplx exact = wpt_gaussian(ut, 1.0, 16.0, 0.125, 1.0, q);
    CHECK(std::abs(evolved_wpt_leading(z, u0, ps, 1.0, q, 1e-10) - exact) < 1e-6);
  }
}
