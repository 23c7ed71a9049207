// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mswf/characteristics.hpp"
#include "mswf/detector.hpp"
#include "mswf/errors.hpp"
#include "mswf/experiments.hpp"
#include "mswf/fft.hpp"
#include "mswf/packets.hpp"
#include "mswf/propagator.hpp"

#ifndef MSWF_CONFIG_DIR
#define MSWF_CONFIG_DIR "configs"
#endif

using namespace mswf;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
  template <class T>
  void note(const std::string& key, const T& v) {
    detail << ' ' << key << '=' << v;
  }
};

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

ExperimentOutput run_config(const std::string& name) {
  std::ifstream in(std::string(MSWF_CONFIG_DIR) + "/" + name);
  if (!in) fail(ErrorCode::Input, "missing config " + name);
  return run_experiment(ExperimentConfig::from_json(json::parse(in)));
}

void inversion(Outcome& o) {
  const GridSpec g(1, 256, 20.0);
  const GridFunction phi = gaussian(g);
  const GridFunction f = gaussian(g, 1.0, v1(1.0), v1(2.0));
  const double eg = (inverse_wpt(wpt_grid_full(f, phi, 1), phi) - f).l2_norm() / f.l2_norm();
  const GridFunction r = random_bandlimited(g, 7);
  const double er = (inverse_wpt(wpt_grid_full(r, phi, 1), phi) - r).l2_norm() / r.l2_norm();
  o.note("gaussian_rel_l2", eg);
  o.note("random_rel_l2", er);
  o.check(eg <= 1e-6, "gaussian round trip");
  o.check(er <= 1e-4, "band-limited round trip");
}

void oracle(Outcome& o) {
  const GridSpec g(1, 256, 20.0);
  const GridFunction phi = gaussian(g);
  double err = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const PhasePoint p{v1(-3.0 + 6.0 * i / 7.0), v1(-3.0 + 6.0 * j / 7.0)};
      const double mag = std::sqrt(std::numbers::pi) *
                         std::exp(-p.x(0) * p.x(0) / 4.0 - p.xi(0) * p.xi(0) / 4.0);
      err = std::max(err, std::abs(std::abs(wpt(phi, phi, p)) - mag));
    }
  o.note("max_abs_error", err);
  o.check(err <= 1e-8, "8x8 lattice");
}

// Constant field B0 = 1 in the symmetric gauge: the kinetic momentum rotates with period 2 pi.
FlowState landau(double s, const Vec& x0, const Vec& xi0) {
  const auto m = VectorPotentialModel::constant_field(2, 1.0);
  const Vec v0 = xi0 - m.value(0.0, x0);
  const double c = std::cos(s), sn = std::sin(s);
  const Vec v = v2(v0(0) * c + v0(1) * sn, -v0(0) * sn + v0(1) * c);
  const Vec x = x0 + v2(v0(0) * sn + v0(1) * (1 - c), v0(0) * (c - 1) + v0(1) * sn);
  return {s, x, v + m.value(0.0, x)};
}

void flow_correctness(Outcome& o) {
  const auto cf = VectorPotentialModel::constant_field(2, 1.0);
  const Vec x0 = v2(0.5, -0.25), xi0 = v2(1.0, 2.0);
  double landau_err = 0.0;
  for (int k = 1; k <= 8; ++k) {
    const double s = 2.0 * std::numbers::pi * k / 8.0;
    const FlowState e = landau(s, x0, xi0);
    const FlowResult r = flow(cf, 0.0, s, x0, xi0, 1e-10);
    landau_err = std::max({landau_err, (r.terminal.x - e.x).cwiseAbs().maxCoeff(),
                           (r.terminal.xi - e.xi).cwiseAbs().maxCoeff()});
  }
  const auto z = VectorPotentialModel::zero(2);
  const FlowResult fr = flow(z, 1.0, -2.0, x0, xi0, 1e-10);
  const double free_err = std::max((fr.terminal.x - (x0 - 3.0 * xi0)).cwiseAbs().maxCoeff(),
                                   (fr.terminal.xi - xi0).cwiseAbs().maxCoeff());
  double rt_err = 0.0;
  for (const auto& m : {VectorPotentialModel::soft_power(2, 0.5),
                        VectorPotentialModel::rotational(0.5, Modulation::Sin), cf}) {
    const FlowState fw = flow(m, 0.0, 1.5, x0, xi0, 1e-10).terminal;
    const FlowState bw = flow(m, 1.5, 0.0, fw.x, fw.xi, 1e-10).terminal;
    rt_err = std::max({rt_err, (bw.x - x0).norm(), (bw.xi - xi0).norm()});
  }
  o.note("landau_err", landau_err);
  o.note("free_err", free_err);
  o.note("round_trip_err", rt_err);
  o.check(landau_err <= 1e-8, "Landau orbit");
  o.check(free_err <= 1e-12, "free flow");
  o.check(rt_err <= 1e-8, "reversibility");
}

void flow_bounds(Outcome& o) {
  FlowBoundsConfig cfg;
  cfg.a_param = 2.0;
  cfg.p = 0.5;
  cfg.t0 = 1.0;
  for (int k = 4; k <= 14; k += 2) cfg.lambdas.push_back(std::ldexp(1.0, k));
  cfg.x_samples = {v2(0, 0), v2(1, 0), v2(-0.5, 0.8)};
  cfg.xi_samples = {v2(1, 0), v2(0, 0.6), v2(-1.2, 1.2)};
  const std::pair<const char*, VectorPotentialModel> models[] = {
      {"zero", VectorPotentialModel::zero(2)}, {"soft_power", VectorPotentialModel::soft_power(2, 0.5)}};
  for (const auto& [name, m] : models) {
    const FlowBoundsReport r = check_flow_bounds(m, cfg);
    o.note(std::string(name) + "_lambda_hat0", r.lambda_hat0);
    o.note(std::string(name) + "_violations", r.validation_violations);
    o.check(r.pass && std::isfinite(r.lambda_hat0) && r.validation_violations == 0, name);
  }
}

void integral_bound(Outcome& o) {
  IntegralBoundConfig cfg;
  cfg.delta = 2.0;
  cfg.lambdas = {1.0, 10.0, 100.0, 1000.0, 10000.0};
  cfg.x_samples = {v2(0, 0), v2(1, -1)};
  cfg.xi_samples = {v2(1, 0), v2(0.6, 0.8)};
  const std::pair<const char*, VectorPotentialModel> models[] = {
      {"zero", VectorPotentialModel::zero(2)},
      {"soft_power", VectorPotentialModel::soft_power(2, 0.5)},
      {"rotational", VectorPotentialModel::rotational(0.5, Modulation::Sin)}};
  for (const auto& [name, m] : models) {
    const IntegralBoundReport r = check_integral_bound(m, cfg);
    o.note(std::string(name) + "_variation", r.variation);
    o.check(r.stable, name);
  }
  IntegralBoundConfig z = cfg;
  z.delta = 1.0;
  double err = 0.0;
  for (double lam : cfg.lambdas)
    err = std::max(err, std::abs(integral_bound_value(VectorPotentialModel::zero(2), z, v2(0, 0),
                                                      v2(lam, 0)) - std::atan(lam)));
  o.note("arctan_err", err);
  o.check(err <= 1e-6, "zero-model arctan");
}

void commutator(Outcome& o) {
  const GridSpec g(1, 512, 20.0);
  const GridFunction phi = gaussian(g);
  double worst = 0.0;
  for (double t : {0.5, 1.0})
    for (int a = 0; a <= 2; ++a)
      for (int b = 0; a + b <= 2; ++b) {
        const std::vector<int> al{a}, be{b};
        worst = std::max(worst, commutator_check(phi, t, al, be));
      }
  o.note("max_discrepancy", worst);
  o.check(worst <= 1e-8, "commutator");
}

void propagator(Outcome& o) {
  {
    const GridSpec g(1, 512, 20.0);
    EvolveConfig cfg;
    cfg.dt = 1e-3;
    const GridFunction u = evolve(VectorPotentialModel::zero(1), ScalarPotentialModel::zero(1),
                                  gaussian(g), 0.0, 1.0, cfg);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      err = std::max(err, std::abs(u[i] - gaussian_packet_value(1.0, 1.0, 0.125, 1.0, g.node(i))));
    o.note("free_gaussian_err", err);
    o.check(err <= 1e-6, "free gaussian");
  }
  {
    const GridSpec g(2, 64, 12.0);
    const GridFunction u0 = gaussian(g, 1.0, v2(0.5, -0.5), v2(1.0, 0.5));
    EvolveConfig cfg;
    cfg.dt = 5e-3;
    cfg.probe_every = 10;
    double drift = 0.0;
    for (const auto& m : {VectorPotentialModel::zero(2), VectorPotentialModel::soft_power(2, 0.5),
                          VectorPotentialModel::rotational(0.5, Modulation::Sin),
                          VectorPotentialModel::constant_field(2, 1.0)})
      for (const auto& V : {ScalarPotentialModel::zero(2), ScalarPotentialModel::soft_power(2, 1.0, 0.3)}) {
        const auto r = evolve_with_stats(m, V, u0, 0.0, 1.0, cfg);
        drift = std::max(drift, std::abs(r.stats.l2_final / r.stats.l2_initial - 1.0));
        for (const auto& [t, n] : r.probe) drift = std::max(drift, std::abs(n / r.stats.l2_initial - 1.0));
      }
    o.note("l2_drift", drift);
    o.check(drift <= 1e-6, "L2 drift");
  }
  {
    const GridSpec g(2, 64, 10.0);
    const GridFunction u0 = gaussian(g, 1.0, v2(0.5, 0.0), v2(1.0, -1.0));
    const auto m = VectorPotentialModel::rotational(0.5, Modulation::Sin, 1.5);
    const auto V = ScalarPotentialModel::soft_power(2, 1.0, 0.3);
    EvolveConfig cfg;
    cfg.dt = 0.1 / 8;
    const GridFunction ref = evolve(m, V, u0, 0.0, 1.0, cfg);
    cfg.dt = 0.1;
    const double e1 = (evolve(m, V, u0, 0.0, 1.0, cfg) - ref).l2_norm();
    cfg.dt = 0.05;
    const double e2 = (evolve(m, V, u0, 0.0, 1.0, cfg) - ref).l2_norm();
    const double order = std::log2(e1 / e2);
    o.note("observed_order", order);
    o.check(order > 1.8 && order < 2.6, "order 2");
  }
}

void leading_term(Outcome& o) {
  {
    const GridSpec g(1, 512, 20.0);
    const GridFunction u0 = gaussian(g, 1.0, v1(0.0), v1(2.0));
    PacketSpec ps;
    ps.lambda = 16.0;
    ps.b = 0.125;
    const auto z = VectorPotentialModel::zero(1);
    EvolveConfig cfg;
    const GridFunction ut = evolve(z, ScalarPotentialModel::zero(1), u0, 0.0, 1.0, cfg);
    double err = 0.0;
    for (double x : {0.0, 1.0, 2.0, 3.0}) {
      const PhasePoint q{v1(x), v1(2.0)};
      err = std::max(err, std::abs(evolved_wpt_leading(z, u0, ps, 1.0, q, 1e-10) -
                                   wpt_gaussian(ut, 1.0, 16.0, 0.125, 1.0, q)));
    }
    o.note("zero_model_err", err);
    o.check(err <= 1e-6, "a = 0 leading term");
  }
  // Each rung evaluates at (0, 0.25 lambda) with u0 placed at the backward-flowed point.
  const GridSpec g(1, 4096, 48.0);
  const auto m = VectorPotentialModel::soft_power(1, 0.5);
  const auto V = ScalarPotentialModel::zero(1);
  const double t = 0.5, b = theorem_exponent(0.5);
  std::vector<double> rel;
  for (double lam : {16.0, 64.0, 256.0}) {
    const PhasePoint p{v1(0.0), v1(0.25 * lam)};
    const FlowState back = flow(m, t, 0.0, p.x, p.xi, 1e-11).terminal;
    const GridFunction u0 = gaussian(g, 1.0, back.x, back.xi);
    EvolveConfig cfg;
    cfg.dt = 1e-3;
    const GridFunction ut = evolve(m, V, u0, 0.0, t, cfg);
    PacketSpec ps;
    ps.lambda = lam;
    ps.b = b;
    const cplx exact = wpt_gaussian(ut, 1.0, lam, b, t, p);
    const cplx lead = evolved_wpt_leading(m, u0, ps, t, p, 1e-11);
    rel.push_back(std::abs(lead - exact) / std::abs(exact));
  }
  o.note("soft_power_rel", json(rel).dump());
  o.check(rel[1] < rel[0] && rel[2] < rel[1], "monotone decrease");
}

void static_ground_truth(Outcome& o) {
  const GridSpec g(1, 32768, 8.0);
  ScanSettings s;
  for (double x : {-6.0, -3.0, 0.0, 3.0, 6.0}) s.positions.push_back(v1(x));
  s.directions = {v1(1.0), v1(-1.0)};
  s.ladder = dyadic_ladder(3, 12);
  s.b = 0.125;
  const ScanTable gt = wf_scan_static(gaussian(g), s);
  o.note("gaussian_not_in_wf", gt.count(Verdict::NotInWF));
  o.check(gt.count(Verdict::NotInWF) == static_cast<int>(gt.cells.size()), "gaussian");
  const ScanTable dt = wf_scan_static(discrete_delta(g), s);
  const double target = -g.dimension() * s.b / 2.0;
  double worst = 0.0;
  bool cells_ok = true;
  for (const ScanCell& c : dt.cells) {
    if (c.x.norm() == 0.0) {
      cells_ok = cells_ok && c.report.verdict == Verdict::InWF;
      worst = std::max(worst, std::abs(c.report.Nhat - target));
    } else {
      cells_ok = cells_ok && c.report.verdict == Verdict::NotInWF;
    }
  }
  o.note("delta_origin_Nhat_dev", worst);
  o.check(cells_ok, "delta verdicts");
  o.check(worst <= 0.05, "delta exponent");
}

void consistency(Outcome& o, const std::string& config, double min_agreement) {
  const ExperimentOutput r = run_config(config);
  const double agreement = r.summary["agreement"].get<double>();
  const int conclusive = r.summary["conclusive_both"].get<int>();
  o.note(config + ":agreement", agreement);
  o.note(config + ":conclusive", conclusive);
  o.check(conclusive > 0 && agreement >= min_agreement, config);
  o.check(!r.failure.has_value(), config + " consistency bound");
}

void fundamental(Outcome& o) {
  for (const char* name : {"fundamental_1d.json", "fundamental_2d.json"}) {
    const ExperimentOutput r = run_config(name);
    const json& s = r.summary;
    const auto& lb = s["lower_bound"];
    const double lo = lb["ratio_min"].back().get<double>(), hi = lb["ratio_max"].back().get<double>();
    o.note(std::string(name) + ":not_in_wf", s["fraction_not_in_wf"].get<double>());
    o.note(std::string(name) + ":ratio_top", "[" + std::to_string(lo) + "," + std::to_string(hi) + "]");
    o.check(s["counts"]["inconclusive"].get<int>() == 0 && s["fraction_not_in_wf"].get<double>() == 1.0,
            std::string(name) + " verdicts");
    o.check(lb["lambdas"].back().get<double>() == 1e4 && lo >= 0.9 && hi <= 1.1,
            std::string(name) + " lower bound");
  }
  const ExperimentOutput c = run_config("fundamental_control.json");
  o.note("control_origin_in_wf", c.summary["origin_in_wf"].get<bool>());
  o.check(c.summary["origin_in_wf"].get<bool>(), "control");
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  const std::vector<std::pair<int, std::function<void(Outcome&)>>> criteria = {
      {1, inversion},
      {2, oracle},
      {3, flow_correctness},
      {4, flow_bounds},
      {5, integral_bound},
      {6, commutator},
      {7, propagator},
      {8, leading_term},
      {9, static_ground_truth},
      {10, [](Outcome& o) {
         consistency(o, "free_transport.json", 1.0);
         consistency(o, "rotational_transport.json", 0.9);
       }},
      {11, fundamental},
      {12, [](Outcome& o) {
         consistency(o, "scalar_1d.json", 1.0);
         consistency(o, "scalar_2d.json", 0.9);
       }},
  };
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!pick.empty() && !pick.contains(id)) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("criterion %d: %s%s seconds=%.1f\n", id, o.pass ? "PASS" : "FAIL", o.detail.str().c_str(),
                secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
