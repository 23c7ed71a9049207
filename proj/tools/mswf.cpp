#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mswf/characteristics.hpp"
#include "mswf/detector.hpp"
#include "mswf/errors.hpp"
#include "mswf/experiments.hpp"
#include "mswf/io.hpp"
#include "mswf/packets.hpp"
#include "mswf/propagator.hpp"

using namespace mswf;
using nlohmann::json;

namespace {

Vec parse_vec(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    const double d = std::strtod(item.c_str(), &end);
    require(!item.empty() && end == item.c_str() + item.size(), ErrorCode::Input,
            std::string("cannot parse ") + what + " from '" + s + "'");
    v.push_back(d);
  }
  require(!v.empty(), ErrorCode::Input, std::string(what) + " is empty");
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i)) = v[i];
  return out;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

// JSON literal or path to a JSON file.
json load_json(const std::string& s) {
  if (s.empty()) return json::object();
  try {
    if (s.front() == '{' || s.front() == '[') return json::parse(s);
    return json::parse(read_text(s));
  } catch (const json::exception& e) {
    fail(ErrorCode::Input, "invalid JSON in '" + s + "': " + e.what());
  }
}

VectorPotentialModel potential_from(const std::string& s, int n) {
  json j = s.empty() ? json{{"family", "zero"}} : load_json(s);
  if (!j.contains("n")) j["n"] = n;
  return VectorPotentialModel::from_json(j);
}

ScalarPotentialModel scalar_from(const std::string& s, int n) {
  return s.empty() ? ScalarPotentialModel::zero(n) : ScalarPotentialModel::from_json(load_json(s), n);
}

// Turns a flat JSON object into "--key value" pairs for a subcommand.
std::vector<std::string> config_args(const json& j) {
  require(j.is_object(), ErrorCode::Input, "--config must hold a JSON object");
  std::vector<std::string> out;
  for (const auto& [k, v] : j.items()) {
    if (k == "config") continue;
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back("--" + k);
      continue;
    }
    out.push_back("--" + k);
    if (v.is_array()) {
      std::string joined;
      for (const auto& e : v) joined += (joined.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
      out.push_back(joined);
    } else if (v.is_string()) {
      out.push_back(v.get<std::string>());
    } else {
      out.push_back(v.dump());
    }
  }
  return out;
}

struct GridOpts {
  int n = 1;
  std::size_t points = 256;
  double half_width = 20.0;
  void add(CLI::App* app) {
    app->add_option("--n", n, "dimension");
    app->add_option("--points", points, "nodes per axis (power of two)");
    app->add_option("--half-width", half_width, "domain [-L, L)^n");
  }
  GridSpec grid() const { return GridSpec(n, points, half_width); }
};

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wave front set toolkit for magnetic Schroedinger equations"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config;

  // packet
  auto* packet = app.add_subcommand("packet", "build a scaled (and freely evolved) gaussian packet");
  GridOpts pg;
  pg.add(packet);
  double p_width = 1.0, p_lambda = 1.0, p_b = 0.125, p_time = 0.0;
  std::string p_out, p_csv;
  packet->add_option("--width", p_width);
  packet->add_option("--lambda", p_lambda);
  packet->add_option("--b", p_b);
  packet->add_option("--time", p_time, "free evolution time");
  packet->add_option("--out", p_out, "WFGF output");
  packet->add_option("--csv", p_csv, "CSV output");
  packet->add_option("--config", config, "JSON defaults for the flags");

  // wpt
  auto* wptc = app.add_subcommand("wpt", "wave packet transform at one phase-space point");
  std::string w_in, w_x, w_xi;
  double w_width = 1.0, w_lambda = 1.0, w_b = 0.125, w_time = 0.0;
  wptc->add_option("--in", w_in, "WFGF input")->required();
  wptc->add_option("--x", w_x, "position, comma separated")->required();
  wptc->add_option("--xi", w_xi, "frequency, comma separated")->required();
  wptc->add_option("--width", w_width);
  wptc->add_option("--lambda", w_lambda);
  wptc->add_option("--b", w_b);
  wptc->add_option("--time", w_time, "packet free-evolution time");
  wptc->add_option("--config", config);

  // iwpt
  auto* iwpt = app.add_subcommand("iwpt", "forward and inverse transform on the node lattice");
  std::string i_in, i_out;
  double i_width = 1.0;
  std::size_t i_stride = 1;
  iwpt->add_option("--in", i_in, "WFGF input")->required();
  iwpt->add_option("--out", i_out, "WFGF reconstruction");
  iwpt->add_option("--width", i_width);
  iwpt->add_option("--stride", i_stride, "x-lattice stride");
  iwpt->add_option("--config", config);

  // flow
  auto* flowc = app.add_subcommand("flow", "integrate the bicharacteristic flow");
  double f_t0 = 0.0, f_target = 1.0, f_tol = 1e-10;
  std::string f_x, f_xi, f_pot, f_traj;
  flowc->add_option("--t0", f_t0);
  flowc->add_option("--target", f_target);
  flowc->add_option("--x", f_x)->required();
  flowc->add_option("--xi", f_xi)->required();
  flowc->add_option("--tol", f_tol);
  flowc->add_option("--potential", f_pot, "JSON literal or file");
  flowc->add_option("--dump-traj", f_traj, "trajectory CSV");
  flowc->add_option("--config", config);

  // evolve
  auto* evolvec = app.add_subcommand("evolve", "solve the magnetic Schroedinger equation");
  EvolveConfig ecfg;
  std::string e_method = "strang-split", e_pot, e_scalar, e_in, e_out, e_probe;
  double e_t0 = 0.0, e_t1 = 1.0;
  evolvec->add_option("--dt", ecfg.dt);
  evolvec->add_option("--t0", e_t0);
  evolvec->add_option("--t1", e_t1);
  evolvec->add_option("--method", e_method);
  evolvec->add_option("--potential", e_pot);
  evolvec->add_option("--scalar-potential", e_scalar);
  evolvec->add_option("--in", e_in)->required();
  evolvec->add_option("--out", e_out)->required();
  evolvec->add_option("--probe-l2", e_probe, "CSV of (t, ||u||)");
  evolvec->add_option("--probe-every", ecfg.probe_every);
  evolvec->add_option("--config", config);

  // detect
  auto* detect = app.add_subcommand("detect", "wave front set test at one conic neighbourhood");
  std::string d_in, d_x, d_xi, d_ladder = "3:12", d_thr, d_pot, d_scalar;
  double d_b = 0.125, d_width = 1.0, d_t0 = 0.0, d_k = 0.25, d_cone = 0.2, d_a = 1.5,
         d_tol = 1e-10;
  bool d_detail = false;
  detect->add_option("--in", d_in, "WFGF input")->required();
  detect->add_option("--x", d_x)->required();
  detect->add_option("--xi", d_xi)->required();
  detect->add_option("--ladder", d_ladder, "kmin:kmax[:step], lambda = 2^k");
  detect->add_option("--thresholds", d_thr, "N=6,Nlow=1,R2=0.95");
  detect->add_option("--b", d_b);
  detect->add_option("--width", d_width);
  detect->add_option("--t0", d_t0, "dynamic test on u0 at time t0 when non-zero");
  detect->add_option("--potential", d_pot);
  detect->add_option("--scalar-potential", d_scalar);
  detect->add_option("--k-radius", d_k);
  detect->add_option("--cone-angle", d_cone);
  detect->add_option("--a", d_a);
  detect->add_option("--flow-tol", d_tol);
  detect->add_flag("--detail", d_detail, "per-sample output");
  detect->add_option("--config", config);

  // experiment
  auto* exper = app.add_subcommand("experiment", "run a configured experiment");
  std::string x_id, x_out;
  bool x_control = false;
  exper->add_option("--config", config, "experiment JSON")->required();
  exper->add_option("--experiment", x_id, "override the experiment id");
  exper->add_option("--out", x_out, "output directory");
  exper->add_flag("--control", x_control, "fundamental solution control run at t0 = 0");

  // Splice --config defaults in front of the explicit flags so the latter win.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (args.size() >= 1 && args[0] != "experiment") {
      for (std::size_t i = 1; i + 1 < args.size(); ++i)
        if (args[i] == "--config") {
          const auto extra = config_args(load_json(args[i + 1]));
          args.insert(args.begin() + 1, extra.begin(), extra.end());
          break;
        }
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", e.what()}, {"code", to_string(e.code())}}.dump() << "\n";
    return exit_code(e.code());
  }
  std::vector<char*> cargv{argv[0]};
  for (auto& a : args) cargv.push_back(a.data());

  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*packet) {
      const GridSpec g = pg.grid();
      GridFunction phi = make_scaled_packet(g, GaussianBase{p_width}, p_lambda, p_b);
      if (p_time != 0.0) phi = free_evolve_packet(phi, p_time);
      if (!p_out.empty()) write_wfgf(p_out, phi);
      if (!p_csv.empty()) write_text(p_csv, grid_csv(phi));
      emit({{"grid", g.to_json()}, {"l2", phi.l2_norm()}, {"max_abs", phi.max_abs()},
            {"effective_width", effective_width(phi)}});
    } else if (*wptc) {
      const GridFunction f = read_wfgf(w_in);
      const PhasePoint p{parse_vec(w_x, "x"), parse_vec(w_xi, "xi")};
      const cplx w = wpt_gaussian(f, w_width, w_lambda, w_b, w_time, p);
      emit({{"x", to_std(p.x)}, {"xi", to_std(p.xi)}, {"re", w.real()}, {"im", w.imag()},
            {"abs", std::abs(w)}});
    } else if (*iwpt) {
      const GridFunction f = read_wfgf(i_in);
      const GridFunction phi = gaussian(f.grid(), i_width);
      const GridFunction back = inverse_wpt(wpt_grid_full(f, phi, i_stride), phi);
      if (!i_out.empty()) write_wfgf(i_out, back);
      emit({{"relative_l2_error", (back - f).l2_norm() / f.l2_norm()}});
    } else if (*flowc) {
      const Vec x = parse_vec(f_x, "x"), xi = parse_vec(f_xi, "xi");
      const auto model = potential_from(f_pot, static_cast<int>(x.size()));
      const FlowResult r = flow(model, f_t0, f_target, x, xi, f_tol);
      if (!f_traj.empty()) write_text(f_traj, trajectory_csv(model, r));
      emit({{"s", r.terminal.s}, {"x", to_std(r.terminal.x)}, {"xi", to_std(r.terminal.xi)},
            {"phase", {{"re", r.phase.real()}, {"im", r.phase.imag()}}},
            {"steps", r.stats.steps}, {"rejections", r.stats.rejections}});
    } else if (*evolvec) {
      const GridFunction u0 = read_wfgf(e_in);
      ecfg.method = parse_method(e_method);
      if (!e_probe.empty() && ecfg.probe_every == 0) ecfg.probe_every = 1;
      const auto model = potential_from(e_pot, u0.dimension());
      const auto V = scalar_from(e_scalar, u0.dimension());
      const EvolveResult r = evolve_with_stats(model, V, u0, e_t0, e_t1, ecfg);
      write_wfgf(e_out, r.u);
      if (!e_probe.empty()) write_text(e_probe, probe_csv(r.probe));
      emit({{"config", ecfg.to_json()}, {"potential", model.to_json()},
            {"scalar_potential", V.to_json()}, {"stats", r.stats.to_json()}});
    } else if (*detect) {
      const GridFunction f = read_wfgf(d_in);
      ConicSample s;
      s.x0 = parse_vec(d_x, "x");
      s.xi0 = parse_vec(d_xi, "xi");
      s.k_radius = d_k;
      s.cone_angle = d_cone;
      s.a = d_a;
      const Thresholds thr = d_thr.empty() ? Thresholds{} : Thresholds::parse(d_thr);
      const auto ladder = parse_ladder(d_ladder);
      DecayReport r;
      if (d_t0 == 0.0 && d_pot.empty()) {
        r = wf_test_static(f, GaussianBase{d_width}, d_b, s, ladder, thr);
      } else {
        const auto model = potential_from(d_pot, f.dimension());
        r = wf_test_dynamic(f, model, scalar_from(d_scalar, f.dimension()), d_t0,
                            GaussianBase{d_width}, d_b, s, ladder, thr, d_tol);
      }
      json j = r.to_json(d_detail);
      j["sample"] = s.to_json();
      emit(j);
    } else if (*exper) {
      json j = load_json(config);
      if (!x_id.empty()) j["experiment"] = x_id;
      if (x_control) j["control"] = true;
      if (!x_out.empty()) j["output_dir"] = x_out;
      const ExperimentConfig cfg = ExperimentConfig::from_json(j);
      const ExperimentOutput out = run_experiment(cfg);
      write_outputs(out, cfg.output_dir);
      json brief = {{"experiment", std::string(to_string(cfg.id))},
                    {"output_dir", cfg.output_dir},
                    {"pass", out.summary.value("pass", false)}};
      for (const char* k : {"agreement", "fraction_not_in_wf", "origin_in_wf", "conclusive_both"})
        if (out.summary.contains(k)) brief[k] = out.summary[k];
      emit(brief);
      if (out.failure) {
        std::cerr << json{{"error", out.failure->what()},
                          {"code", to_string(out.failure->code())}}.dump()
                  << "\n";
        return exit_code(out.failure->code());
      }
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", e.what()}, {"code", to_string(e.code())}}.dump() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"code", "numeric"}}.dump() << "\n";
    return 3;
  }
  return 0;
}
