#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mswf/errors.hpp"
#include "mswf/fft.hpp"
#include "mswf/packets.hpp"

using namespace mswf;

namespace {

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

GridFunction random_bandlimited(const GridSpec& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<cplx> spec(g.size(), 0.0);
  std::vector<std::size_t> idx(g.dimension());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.unflatten(i, idx);
    bool inner = true;
    for (int d = 0; d < g.dimension(); ++d)
      inner = inner && std::abs(g.frequency(d, idx[d])) < 0.5 * g.nyquist(d);
    if (inner) spec[i] = cplx(nd(rng), nd(rng));
  }
  fft_inverse(g, spec);
  return GridFunction(g, std::move(spec));
}

double width_at_1_over_e(const GridFunction& u) {
  // half-width where |u| falls to max/e, by linear interpolation.
  const GridSpec& g = u.grid();
  const double peak = u.max_abs();
  const std::size_t o = g.origin_index();
  for (std::size_t i = o; i + 1 < u.size(); ++i) {
    const double a = std::abs(u[i]) / peak, b = std::abs(u[i + 1]) / peak;
    if (b < std::exp(-1.0)) {
      const double s = (a - std::exp(-1.0)) / (a - b);
      return g.coordinate(0, i) + s * g.dx(0);
    }
  }
  return -1.0;
}

}  // namespace

TEST_CASE("scaled packet: unit dilation leaves the base unchanged") {
  GridSpec g(1, 256, 20.0);
  auto base = gaussian(g);
  auto p = make_scaled_packet(g, base, 1.0, 0.125);
  CHECK(max_abs_difference(p, base) == 0.0);
  auto q = make_scaled_packet(g, GaussianBase{1.0}, 1.0, 0.125);
  CHECK(max_abs_difference(q, base) < 1e-15);
}

TEST_CASE("scaled packet: L2 norm independent of lambda and width halves at 256") {
  GridSpec g(1, 512, 20.0);
  const double n0 = gaussian(g).l2_norm();
  for (double lam = 1.0; lam <= 4096.0; lam *= 4.0) {
    auto p = make_scaled_packet(g, GaussianBase{1.0}, lam, 0.125);
    CHECK(std::abs(p.l2_norm() / n0 - 1.0) < 1e-8);
  }
  auto p = make_scaled_packet(g, GaussianBase{1.0}, 256.0, 0.125);
  // |phi| = e^{-1} at |x| = sqrt(2) w for exp(-x^2/(2w^2)).
  const double ratio = width_at_1_over_e(gaussian(g)) / width_at_1_over_e(p);
  CHECK(ratio == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("scaled packet: custom base interpolates the gaussian") {
  GridSpec g(1, 512, 20.0);
  auto base = gaussian(g);
  auto p = make_scaled_packet(g, base, 256.0, 0.125);
  auto q = make_scaled_packet(g, GaussianBase{1.0}, 256.0, 0.125);
  CHECK(max_abs_difference(p, q) < 1e-10);
}

TEST_CASE("scaled packet: under-resolved dilation raises") {
  GridSpec g(1, 64, 20.0);
  CHECK_THROWS_AS(make_scaled_packet(g, GaussianBase{1.0}, 1e6, 0.125), Error);
}

TEST_CASE("free evolution: closed form, unitarity and group law") {
  GridSpec g(1, 512, 20.0);
  auto u = gaussian(g);
  CHECK(max_abs_difference(free_evolve_packet(u, 0.0), u) == 0.0);
  auto e = free_evolve_packet(u, 1.0);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(0, i);
    const cplx b(1.0, 1.0);
    err = std::max(err, std::abs(e[i] - std::pow(b, -0.5) * std::exp(-x * x / (2.0 * b))));
  }
  CHECK(err < 1e-8);
  for (double t : {-2.0, -1.0, 1.0, 2.0})
    CHECK(std::abs(free_evolve_packet(u, t).l2_norm() - u.l2_norm()) < 1e-10);
  auto a = free_evolve_packet(free_evolve_packet(u, 0.7), 0.5);
  CHECK(max_abs_difference(a, free_evolve_packet(u, 1.2)) < 1e-9);
  double cf = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    cf = std::max(cf, std::abs(e[i] - gaussian_packet_value(1.0, 1.0, 0.125, 1.0, g.node(i))));
  CHECK(cf < 1e-8);
}

TEST_CASE("free evolution: a delta cannot be evolved on the grid") {
  GridSpec g(1, 256, 20.0);
  CHECK_THROWS_AS(free_evolve_packet(discrete_delta(g), 1.0), Error);
}

TEST_CASE("wpt: gaussian self-pairing, delta pairing, linearity") {
  GridSpec g(1, 256, 20.0);
  auto phi = gaussian(g);
  CHECK(std::abs(wpt(phi, phi, {v1(0.0), v1(0.0)}) - std::sqrt(std::numbers::pi)) < 1e-12);

  auto delta = discrete_delta(g);
  for (double x : {-2.0, -0.3, 0.0, 1.7}) {
    const cplx w = wpt(delta, phi, {v1(x), v1(1.3)});
    CHECK(std::abs(w - std::exp(-x * x / 2.0)) < 1e-12);
  }

  auto f = random_bandlimited(g, 1), h = random_bandlimited(g, 2);
  GridFunction f_loc = f, h_loc = h;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(0, i);
    f_loc[i] *= std::exp(-x * x / 8.0);
    h_loc[i] *= std::exp(-x * x / 8.0);
  }
  const cplx al(0.3, -1.1), be(2.0, 0.4);
  GridFunction comb = al * f_loc + be * h_loc;
  const PhasePoint p{v1(0.4), v1(-2.0)};
  const cplx lhs = wpt(comb, phi, p);
  const cplx rhs = al * wpt(f_loc, phi, p) + be * wpt(h_loc, phi, p);
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
}

TEST_CASE("wpt: guards") {
  GridSpec g(1, 256, 20.0);
  auto phi = gaussian(g);
  CHECK_THROWS_AS(wpt(phi, phi, {v1(0.0), v1(25.0)}), Error);
  CHECK_THROWS_AS(wpt(phi, phi, {v1(19.0), v1(0.0)}), Error);
  try {
    wpt(phi, phi, {v1(0.0), v1(25.0)});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Nyquist);
  }
}

TEST_CASE("wpt: translation covariance") {
  GridSpec g(1, 256, 20.0);
  auto phi = gaussian(g);
  const double h = 0.6;
  auto f = gaussian(g, 0.8, v1(0.2), v1(1.0));
  auto fs = gaussian(g, 0.8, v1(0.2 + h), v1(1.0));
  // f(y - h) carries the phase e^{i(y-h)}; fs above uses e^{iy}, so correct for it.
  fs *= std::polar(1.0, -h * 1.0);
  const PhasePoint p{v1(0.35), v1(0.7)};
  const cplx a = wpt(fs, phi, {v1(0.35 + h), v1(0.7)});
  const cplx b = std::polar(1.0, -h * 0.7) * wpt(f, phi, p);
  CHECK(std::abs(a - b) < 1e-10);
}

TEST_CASE("oracle: gaussian and delta closed forms") {
  GridSpec g(1, 256, 20.0);
  auto phi = gaussian(g);
  double err = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const PhasePoint p{v1(-3.0 + 6.0 * i / 7.0), v1(-3.0 + 6.0 * j / 7.0)};
      const cplx w = wpt(phi, phi, p);
      const double mag = std::sqrt(std::numbers::pi) *
                         std::exp(-p.x(0) * p.x(0) / 4.0 - p.xi(0) * p.xi(0) / 4.0);
      err = std::max(err, std::abs(std::abs(w) - mag));
      err = std::max(err, std::abs(w - gaussian_wpt_oracle(GaussianDatum{}, 1, 1.0, 0.0, 1.0,
                                                            0.125, p)));
    }
  CHECK(err < 1e-8);

  // Evolved, dilated packet against the closed form.
  GridSpec fine(1, 1024, 40.0);
  auto f = gaussian(fine, 0.7, v1(0.5), v1(-1.0), 2.0);
  const GaussianDatum gd{2.0, v1(0.5), v1(-1.0), 0.7};
  auto pk = free_evolve_packet(make_scaled_packet(fine, GaussianBase{1.0}, 16.0, 0.125), 0.8);
  for (double x : {-1.0, 0.0, 2.0})
    for (double xi : {-2.0, 0.5}) {
      const PhasePoint p{v1(x), v1(xi)};
      const cplx o = gaussian_wpt_oracle(gd, 1, 1.0, 0.8, 16.0, 0.125, p);
      CHECK(std::abs(wpt(f, pk, p) - o) < 1e-8);
      CHECK(std::abs(wpt_gaussian(f, 1.0, 16.0, 0.125, 0.8, p) - o) < 1e-8);
    }

  const PhasePoint p0{v1(0.7), v1(0.0)};
  CHECK(std::abs(gaussian_wpt_oracle(DeltaDatum{}, 1, 1.0, 0.0, 1.0, 0.125, p0)) ==
        doctest::Approx(std::exp(-0.49 / 2.0)).epsilon(1e-14));
  const double printed = delta_magnitude_printed_form(1, 0.125, 16.0, 1.0, 0.0);
  const double expect = std::pow(16.0, -1.0 / 16.0) *
                        std::sqrt(std::abs(cplx(std::pow(16.0, -0.25), -1.0)));
  CHECK(printed == doctest::Approx(expect).epsilon(1e-14));
  CHECK(delta_magnitude_printed_form(1, 0.125, 1.0, 0.0, 0.7) ==
        doctest::Approx(std::exp(-0.49 / 2.0)).epsilon(1e-14));
}

TEST_CASE("wpt_grid: pointwise agreement, oracle lattice, Parseval") {
  GridSpec g(1, 256, 20.0);
  auto phi = gaussian(g);
  auto f = gaussian(g, 1.2, v1(0.3), v1(0.5));
  std::vector<Vec> xs, ks;
  for (int i = 0; i < 8; ++i) xs.push_back(v1(-3.0 + 0.75 * i));
  for (int j = 0; j < 8; ++j) ks.push_back(v1((static_cast<int>(j) - 4) * 4 * g.dk(0)));
  auto table = wpt_grid(f, phi, xs, ks);
  const GaussianDatum gd{1.0, v1(0.3), v1(0.5), 1.2};
  double dev = 0.0, oracle_dev = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ks.size(); ++j) {
      dev = std::max(dev, std::abs(table.at(i, j) - wpt(f, phi, {xs[i], ks[j]})));
      oracle_dev = std::max(oracle_dev, std::abs(table.at(i, j) -
                                                 gaussian_wpt_oracle(gd, 1, 1.0, 0.0, 1.0, 0.125,
                                                                     {xs[i], ks[j]})));
    }
  CHECK(dev < 1e-10);
  CHECK(oracle_dev < 1e-8);

  auto single = wpt_grid(f, phi, std::vector<Vec>{xs[2]}, std::vector<Vec>{ks[5]});
  CHECK(std::abs(single.at(0, 0) - wpt(f, phi, {xs[2], ks[5]})) < 1e-12);

  auto full = wpt_grid_full(f, phi, 1);
  double mass = 0.0;
  for (const auto& v : full.values) mass += std::norm(v);
  mass *= g.dx(0) * g.dk(0) / (2.0 * std::numbers::pi);
  const double expect = std::pow(phi.l2_norm() * f.l2_norm(), 2);
  CHECK(std::abs(mass / expect - 1.0) < 0.01);
  CHECK_THROWS_AS(wpt_grid(f, phi, xs, std::vector<Vec>{v1(0.37 * g.dk(0))}), Error);
}

TEST_CASE("inverse wpt: round trips") {
  GridSpec g(1, 256, 20.0);
  auto phi = gaussian(g);
  auto f = gaussian(g, 1.0, v1(1.0), v1(2.0));
  auto back = inverse_wpt(wpt_grid_full(f, phi, 1), phi);
  CHECK((back - f).l2_norm() / f.l2_norm() < 1e-6);

  auto r = random_bandlimited(g, 7);
  auto back_r = inverse_wpt(wpt_grid_full(r, phi, 1), phi);
  CHECK((back_r - r).l2_norm() / r.l2_norm() < 1e-4);

  auto zero_table = wpt_grid_full(GridFunction(g), phi, 1);
  CHECK(inverse_wpt(zero_table, phi).max_abs() == 0.0);

  CHECK_THROWS_AS(inverse_wpt(wpt_grid_full(f, phi, 16), phi), Error);
}

TEST_CASE("commutator identity") {
  GridSpec g(1, 512, 20.0);
  auto phi = gaussian(g);
  const std::vector<int> none{0}, one{1}, two{2};
  CHECK(commutator_check(phi, 0.0, one, one) == 0.0);
  CHECK(commutator_check(phi, 1.0, one, none) < 1e-8);
  CHECK(commutator_check(phi, 0.5, none, one) < 1e-10);
  for (double t : {0.5, 1.0}) {
    CHECK(commutator_check(phi, t, two, none) < 1e-8);
    CHECK(commutator_check(phi, t, one, one) < 1e-8);
    CHECK(commutator_check(phi, t, none, two) < 1e-8);
  }
  GridSpec g2(2, 128, 12.0);
  auto phi2 = gaussian(g2);
  const std::vector<int> a{1, 1}, z{0, 0}, b{0, 1};
  CHECK(commutator_check(phi2, 1.0, a, z) < 1e-8);
  CHECK(commutator_check(phi2, 0.5, std::vector<int>{1, 0}, b) < 1e-8);
}
