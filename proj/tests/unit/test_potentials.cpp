#include <doctest.h>

#include <cmath>

#include "mswf/errors.hpp"
#include "mswf/potentials.hpp"

using namespace mswf;

namespace {
Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}
}  // namespace

TEST_CASE("eval_a: family values") {
  auto z = VectorPotentialModel::zero(3);
  Vec x3(3);
  x3 << 1.0, -2.0, 0.5;
  CHECK(eval_a(z, 0.7, x3).norm() == 0.0);
  auto sp = VectorPotentialModel::soft_power(2, 0.5);
  auto a0 = eval_a(sp, 0.0, v2(0.0, 0.0));
  CHECK(a0(0) == doctest::Approx(1.0));
  CHECK(a0(1) == doctest::Approx(1.0));
  auto cf = VectorPotentialModel::constant_field(2, 1.0);
  auto ac = eval_a(cf, 0.0, v2(1.0, 0.0));
  CHECK(ac(0) == doctest::Approx(0.0));
  CHECK(ac(1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(eval_a(sp, 0.0, x3), Error);
}

TEST_CASE("jacobian and magnetic field") {
  auto cf = VectorPotentialModel::constant_field(2, 1.0);
  Mat j = jacobian_a(cf, 0.0, v2(0.3, -0.8));
  CHECK(j(0, 0) == 0.0);
  CHECK(j(0, 1) == doctest::Approx(-0.5));
  CHECK(j(1, 0) == doctest::Approx(0.5));
  Mat b = magnetic_field(cf, 0.0, v2(0.3, -0.8));
  CHECK(b(0, 1) == doctest::Approx(1.0));
  CHECK(b(1, 0) == doctest::Approx(-1.0));
  CHECK(magnetic_field(VectorPotentialModel::zero(2), 0.0, v2(1, 1)).norm() == 0.0);
  CHECK(jacobian_a(VectorPotentialModel::zero(2), 0.0, v2(1, 1)).norm() == 0.0);

  auto sp = VectorPotentialModel::soft_power(2, 0.5);
  CHECK((jacobian_a(sp, 0.0, v2(1.0, 2.0)) - sp.jacobian_fd(0.0, v2(1.0, 2.0), 1e-5))
            .cwiseAbs()
            .maxCoeff() < 1e-7);

  // Antisymmetry holds exactly; analytic rows match FD gradients out to |x| = 100.
  auto rot = VectorPotentialModel::rotational(0.5, Modulation::Sin);
  for (double r : {0.5, 3.0, 40.0, 100.0})
    for (const auto& x : sphere_samples(2, r, 7)) {
      Mat bm = magnetic_field(rot, 0.9, x);
      CHECK((bm + bm.transpose()).norm() == 0.0);
      for (const auto* m : {&rot, &sp}) {
        Mat ja = jacobian_a(*m, 0.9, x);
        Mat jf = m->jacobian_fd(0.9, x);
        CHECK((ja - jf).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, ja.cwiseAbs().maxCoeff()));
      }
    }
}

TEST_CASE("rotational field decays like <x>^{rho-1}") {
  auto rot = VectorPotentialModel::rotational(0.5, Modulation::Sin);
  const double b10 = magnetic_field(rot, 0.5, v2(10.0, 0.0)).norm();
  const double b100 = magnetic_field(rot, 0.5, v2(100.0, 0.0)).norm();
  const double expect = std::pow(std::sqrt(1.0 + 1e4) / std::sqrt(1.0 + 1e2), -0.5);
  CHECK(std::abs(b100 / b10 / expect - 1.0) < 0.25);
}

TEST_CASE("higher partials agree with finite differences") {
  auto sp = VectorPotentialModel::soft_power(2, 0.5, Modulation::HalfCos, {1.0, -0.5});
  auto rot = VectorPotentialModel::rotational(0.5);
  const Vec x = v2(1.3, -0.7);
  for (const auto* m : {&sp, &rot}) {
    auto custom = VectorPotentialModel::custom(
        2, 0.5, [m](double t, const Vec& y) { return m->value(t, y); });
    for (int order = 1; order <= 3; ++order)
      for (const auto& axes : detail::multi_indices(2, order)) {
        const Vec exact = m->partial(0.4, x, axes);
        const Vec fd = custom.partial(0.4, x, axes);
        CHECK((exact - fd).norm() < 1e-5 * std::max(1.0, exact.norm()));
      }
  }
}

TEST_CASE("verify_decay verdicts") {
  const std::vector<double> radii{10.0, 100.0, 1000.0};
  auto sp = VectorPotentialModel::soft_power(2, 0.5);
  auto rep = verify_decay(sp, 0.5, 3, radii, 12);
  CHECK(rep.conforming);
  for (std::size_t o = 0; o < 4; ++o)
    for (const auto& sh : rep.shells)
      CHECK(sh.sup_by_order[o] <= 2.0 * rep.shells.front().sup_by_order[o] + 1e-300);
  CHECK(verify_decay(VectorPotentialModel::rotational(0.5), 0.5, 3, radii, 12).conforming);
  CHECK_FALSE(verify_decay(VectorPotentialModel::constant_field(2), 0.9, 3, radii, 12).conforming);
  auto zr = verify_decay(VectorPotentialModel::zero(2), 0.3, 3, radii, 8);
  CHECK(zr.conforming);
  for (const auto& sh : zr.shells)
    for (double s : sh.sup_by_order) CHECK(s == 0.0);
  auto bad = VectorPotentialModel::custom(
      2, 0.5, [](double, const Vec& y) { return Vec(Vec::Constant(2, y(0) > 50 ? NAN : 1.0)); });
  CHECK_THROWS_AS(verify_decay(bad, 0.5, 1, radii, 8), Error);
}

TEST_CASE("physical fields are antisymmetric and decay") {
  Vec x(3);
  x << 1.0, 2.0, 3.0;
  for (auto b : {circular_current_field(x), line_current_field(x)})
    CHECK((b + b.transpose()).norm() == 0.0);
  Vec far = 10.0 * x;
  CHECK(circular_current_field(far).norm() < circular_current_field(x).norm());
  CHECK(line_current_field(far).norm() < line_current_field(x).norm());
}

TEST_CASE("json round trip") {
  auto sp = VectorPotentialModel::soft_power(2, 0.5, Modulation::Sin, {0.3, 0.2});
  auto back = VectorPotentialModel::from_json(sp.to_json());
  CHECK(back.family() == PotentialFamily::SoftPower);
  CHECK(back.rho() == 0.5);
  CHECK(back.modulation() == Modulation::Sin);
  CHECK((back.value(1.1, v2(2.0, -1.0)) - sp.value(1.1, v2(2.0, -1.0))).norm() == 0.0);
  CHECK_THROWS_AS(VectorPotentialModel::from_json({{"family", "custom-sampled"}, {"n", 2}}),
                  Error);
  CHECK_THROWS_AS(VectorPotentialModel::from_json({{"family", "nope"}}), Error);
}
