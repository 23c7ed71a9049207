#include "mswf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <set>
#include <sstream>

#include "mswf/io.hpp"
#include "mswf/packets.hpp"
#include "mswf/parallel.hpp"

namespace mswf {
namespace {

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<int>(i)) = v[i];
  return out;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec vec_or_zero(const std::vector<double>& v, int n, const char* what) {
  if (v.empty()) return Vec::Zero(n);
  require(static_cast<int>(v.size()) == n, ErrorCode::Input,
          std::string(what) + " has the wrong dimension");
  return to_vec(v);
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const char* where) {
  require(j.is_object(), ErrorCode::Input, std::string(where) + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    require(allowed.count(k) > 0, ErrorCode::Input,
            "unknown key '" + k + "' in " + std::string(where));
}

std::vector<Vec> parse_points(const nlohmann::json& j, int n, const char* what) {
  std::vector<Vec> out;
  if (j.is_array()) {
    for (const auto& p : j) {
      const auto v = p.is_number() ? std::vector<double>{p.get<double>()}
                                   : p.get<std::vector<double>>();
      require(static_cast<int>(v.size()) == n, ErrorCode::Input,
              std::string(what) + " entries must have the grid dimension");
      out.push_back(to_vec(v));
    }
    return out;
  }
  // {"min": m, "max": M, "step": s}: cartesian lattice on every axis.
  check_keys(j, {"min", "max", "step"}, what);
  const double lo = j.at("min").get<double>(), hi = j.at("max").get<double>();
  const double step = j.at("step").get<double>();
  require(step > 0.0 && hi >= lo, ErrorCode::Input, std::string(what) + " lattice needs min <= max, step > 0");
  std::vector<double> axis;
  for (int i = 0; lo + i * step <= hi + 1e-9 * step; ++i) axis.push_back(lo + i * step);
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= axis.size();
  for (std::size_t c = 0; c < total; ++c) {
    Vec x(n);
    std::size_t r = c;
    for (int d = n - 1; d >= 0; --d) {
      x(d) = axis[r % axis.size()];
      r /= axis.size();
    }
    out.push_back(x);
  }
  return out;
}

std::vector<Vec> default_x_samples(int n) {
  std::vector<Vec> out{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
  out[1](0) = 1.0;
  out[2](0) = -0.5;
  if (n > 1) out[2](1) = 0.8;
  if (n > 2) out[2](2) = 0.3;
  return out;
}

std::vector<Vec> default_xi_samples(int n) {
  std::vector<Vec> out{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
  out[0](0) = 1.0;
  out[1](n - 1) = n == 1 ? -0.6 : 0.6;
  out[2](0) = n == 1 ? 1.7 : -1.2;
  if (n > 1) out[2](1) = 1.2;
  if (n > 2) out[2](2) = 0.5;
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

nlohmann::json points_json(const std::vector<Vec>& pts) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : pts) a.push_back(to_std(p));
  return a;
}

// Fraction of rungs that survive the unflowed guards at the largest sampled modulus.
std::vector<double> preflight_ladder(const ExperimentConfig& cfg, nlohmann::json& guards) {
  const ScanSettings& s = cfg.scan;
  const GridSpec& g = cfg.grid;
  const double width = std::get<GaussianBase>(s.base).width;
  double max_comp = 0.0;
  for (const auto& d : s.directions) {
    require(d.size() == g.dimension(), ErrorCode::Input, "scan direction dimension mismatch");
    max_comp = std::max(max_comp, d.lpNorm<Eigen::Infinity>() / d.norm());
  }
  std::vector<double> kept;
  nlohmann::json dropped = nlohmann::json::array();
  for (double lam : s.ladder) {
    bool ok = std::pow(lam, s.b) * g.max_dx() <= width / 4.0;
    for (int d = 0; d < g.dimension(); ++d)
      ok = ok && lam * s.a * max_comp * g.dx(d) <= std::numbers::pi;
    if (ok)
      kept.push_back(lam);
    else
      dropped.push_back(lam);
  }
  guards["ladder_requested"] = s.ladder;
  guards["ladder_preflight"] = kept;
  guards["ladder_preflight_dropped"] = dropped;
  require(kept.size() >= 5 || s.positions.empty() || s.directions.empty(), ErrorCode::Nyquist,
          "fewer than 5 ladder rungs pass the resolution and Nyquist guards on this grid");
  return kept;
}

void preflight_positions(const ExperimentConfig& cfg) {
  const GridSpec& g = cfg.grid;
  for (const auto& x : cfg.scan.positions) {
    require(x.size() == g.dimension(), ErrorCode::Input, "scan position dimension mismatch");
    for (int d = 0; d < g.dimension(); ++d)
      require(std::abs(x(d)) + cfg.scan.k_radius < g.half_width(d), ErrorCode::Domain,
              "scan position outside the grid domain");
  }
}

void preflight_model(const ExperimentConfig& cfg, const VectorPotentialModel& model) {
  require(model.dimension() == cfg.grid.dimension(), ErrorCode::Input,
          "potential dimension does not match the grid");
  require(model.conforming() || cfg.allow_nonconforming, ErrorCode::Guard,
          "potential family '" + std::string(to_string(model.family())) +
              "' is non-conforming; set allow_nonconforming to run it anyway");
}

// Long-format ladder rows: one per cell per rung, worst sample magnitudes.
void ladder_rows(std::ostringstream& os, const std::string& test, const ScanTable& t) {
  for (const auto& c : t.cells) {
    const auto& r = c.report;
    if (r.worst < 0 || r.worst >= static_cast<int>(r.samples.size())) continue;
    const auto& mags = r.samples[r.worst].magnitudes;
    for (std::size_t k = 0; k < r.ladder.size() && k < mags.size(); ++k) {
      os << test << ",";
      for (int d = 0; d < c.x.size(); ++d) os << fmt(c.x(d)) << ",";
      for (int d = 0; d < c.xi.size(); ++d) os << fmt(c.xi(d)) << ",";
      os << fmt(r.ladder[k]) << "," << fmt(mags[k]) << "\n";
    }
  }
}

std::string ladder_header(int n) {
  std::ostringstream os;
  os << "test,";
  for (int d = 0; d < n; ++d) os << "x" << d << ",";
  for (int d = 0; d < n; ++d) os << "xi" << d << ",";
  os << "lambda,mag\n";
  return os.str();
}

nlohmann::json counts_json(const ScanTable& t) {
  return {{"cells", t.cells.size()},
          {"not-in-WF", t.count(Verdict::NotInWF)},
          {"in-WF", t.count(Verdict::InWF)},
          {"inconclusive", t.count(Verdict::Inconclusive)}};
}

}  // namespace

std::string_view to_string(ExperimentId id) {
  switch (id) {
    case ExperimentId::FreeTransport: return "free-transport";
    case ExperimentId::MagneticTransport: return "magnetic-transport";
    case ExperimentId::FundamentalSolution: return "fundamental-solution";
    case ExperimentId::LemmaSuite: return "lemma-suite";
    case ExperimentId::ScalarPotential: return "scalar-potential";
  }
  return "free-transport";
}

ExperimentId parse_experiment(std::string_view s) {
  for (auto id : {ExperimentId::FreeTransport, ExperimentId::MagneticTransport,
                  ExperimentId::FundamentalSolution, ExperimentId::LemmaSuite,
                  ExperimentId::ScalarPotential})
    if (s == to_string(id)) return id;
  fail(ErrorCode::Input, "unknown experiment '" + std::string(s) + "'");
}

// --- data ------------------------------------------------------------------------

nlohmann::json DatumSpec::to_json() const {
  return {{"kind", kind}, {"width", width}, {"center", center}, {"frequency", frequency},
          {"normal", normal}};
}

DatumSpec DatumSpec::from_json(const nlohmann::json& j) {
  DatumSpec d;
  if (j.is_string()) {
    d.kind = j.get<std::string>();
    return d;
  }
  check_keys(j, {"kind", "width", "center", "frequency", "normal"}, "datum");
  d.kind = j.value("kind", d.kind);
  d.width = j.value("width", d.width);
  d.center = j.value("center", d.center);
  d.frequency = j.value("frequency", d.frequency);
  d.normal = j.value("normal", d.normal);
  return d;
}

GridFunction make_datum(const GridSpec& grid, const DatumSpec& d) {
  const int n = grid.dimension();
  if (d.kind == "delta") return discrete_delta(grid);
  const Vec c = vec_or_zero(d.center, n, "datum center");
  const Vec k = vec_or_zero(d.frequency, n, "datum frequency");
  if (d.kind == "delta-like" || d.kind == "gaussian") {
    GridFunction f = gaussian(grid, d.width, c, k);
    f.set_label(d.kind);
    return f;
  }
  if (d.kind == "jump") {
    Vec nu = vec_or_zero(d.normal, n, "datum normal");
    if (d.normal.empty()) nu(0) = 1.0;
    require(nu.norm() > 0.0, ErrorCode::Input, "jump normal must be non-zero");
    GridFunction f = gaussian(grid, d.width, c, k);
    for (std::size_t i = 0; i < f.size(); ++i)
      if (nu.dot(grid.node(i) - c) < 0.0) f[i] = -f[i];
    f.set_label("jump");
    return f;
  }
  fail(ErrorCode::Input, "unknown datum kind '" + d.kind + "'");
}

// --- configuration ---------------------------------------------------------------

VectorPotentialModel ExperimentConfig::model() const {
  if (id == ExperimentId::FreeTransport) return VectorPotentialModel::zero(grid.dimension());
  nlohmann::json j = potential;
  if (!j.contains("n")) j["n"] = grid.dimension();
  return VectorPotentialModel::from_json(j);
}

ScalarPotentialModel ExperimentConfig::scalar() const {
  if (id != ExperimentId::ScalarPotential) return ScalarPotentialModel::zero(grid.dimension());
  return ScalarPotentialModel::from_json(scalar_potential, grid.dimension());
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  check_keys(j,
             {"experiment", "grid", "potential", "scalar_potential", "datum", "t0", "control",
              "b", "scan", "evolve", "min_agreement", "max_inconclusive",
              "lower_bound_lambdas", "lemma", "allow_nonconforming", "output_dir", "static_floor",
              "b_mode"},
             "experiment config");
  ExperimentConfig c;
  if (j.contains("experiment")) c.id = parse_experiment(j["experiment"].get<std::string>());
  if (j.contains("grid")) c.grid = GridSpec::from_json(j["grid"]);
  const int n = c.grid.dimension();
  c.potential = j.value("potential", nlohmann::json{{"family", "zero"}});
  if (!c.potential.contains("n")) c.potential["n"] = n;
  c.scalar_potential = j.value("scalar_potential", c.scalar_potential);
  if (j.contains("datum")) c.datum = DatumSpec::from_json(j["datum"]);
  c.t0 = j.value("t0", c.t0);
  c.control = j.value("control", c.control);
  c.min_agreement = j.value("min_agreement", c.min_agreement);
  c.max_inconclusive = j.value("max_inconclusive", c.max_inconclusive);
  c.static_floor = j.value("static_floor", c.static_floor);
  c.lower_bound_lambdas = j.value("lower_bound_lambdas", c.lower_bound_lambdas);
  c.allow_nonconforming = j.value("allow_nonconforming", c.allow_nonconforming);
  c.output_dir = j.value("output_dir", c.output_dir);

  if (j.contains("b")) {
    if (j["b"].is_string()) {
      c.b_mode = j["b"].get<std::string>();
      require(c.b_mode == "theorem", ErrorCode::Input, "b must be a number or \"theorem\"");
    } else {
      c.b_mode = "fixed";
      c.b = j["b"].get<double>();
    }
  }
  if (j.contains("b_mode")) {
    c.b_mode = j["b_mode"].get<std::string>();
    require(c.b_mode == "theorem" || c.b_mode == "fixed", ErrorCode::Input,
            "b_mode must be theorem or fixed");
  }
  if (c.b_mode == "theorem") {
    require(c.model().rho() < 1.0, ErrorCode::Guard,
            "theorem-mode b needs a decaying potential (rho < 1)");
    c.b = theorem_exponent(c.model().rho());
  }
  require(c.b > 0.0 && c.b < 1.0, ErrorCode::Input, "b must lie in (0, 1)");

  ScanSettings& s = c.scan;
  s.b = c.b;
  s.ladder = dyadic_ladder(0, 4);
  s.directions = direction_fan(n, 8);
  for (int i = -2; i <= 2; ++i) {
    Vec x = Vec::Zero(n);
    x(0) = i;
    s.positions.push_back(x);
  }
  if (j.contains("scan")) {
    const auto& sj = j["scan"];
    check_keys(sj,
               {"positions", "directions", "ladder", "thresholds", "packet_width", "packet", "b",
                "k_radius", "cone_angle", "a", "flow_tol"},
               "scan");
    if (sj.contains("positions")) s.positions = parse_points(sj["positions"], n, "scan.positions");
    if (sj.contains("directions")) {
      if (sj["directions"].is_number_integer())
        s.directions = direction_fan(n, sj["directions"].get<int>());
      else
        s.directions = parse_points(sj["directions"], n, "scan.directions");
    }
    if (sj.contains("ladder")) {
      if (sj["ladder"].is_string())
        s.ladder = parse_ladder(sj["ladder"].get<std::string>());
      else
        s.ladder = sj["ladder"].get<std::vector<double>>();
    }
    if (sj.contains("thresholds")) {
      const auto& t = sj["thresholds"];
      if (t.is_string()) {
        s.thresholds = Thresholds::parse(t.get<std::string>());
      } else {
        check_keys(t, {"N", "Nlow", "R2", "floor"}, "scan.thresholds");
        s.thresholds.floor = t.value("floor", s.thresholds.floor);
        s.thresholds.N = t.value("N", s.thresholds.N);
        s.thresholds.N_low = t.value("Nlow", s.thresholds.N_low);
        s.thresholds.R2 = t.value("R2", s.thresholds.R2);
      }
    }
    double width = sj.value("packet_width", 1.0);
    if (sj.contains("packet")) {
      require(sj["packet"].value("kind", std::string("gaussian")) == "gaussian", ErrorCode::Input,
              "experiments use gaussian packets");
      width = sj["packet"].value("width", width);
    }
    // scan.b in a resolved config mirrors the top-level b.
    if (sj.contains("b"))
      require(std::abs(sj["b"].get<double>() - c.b) < 1e-15, ErrorCode::Input,
              "scan.b disagrees with b");
    s.base = GaussianBase{width};
    s.k_radius = sj.value("k_radius", s.k_radius);
    s.cone_angle = sj.value("cone_angle", s.cone_angle);
    s.a = sj.value("a", s.a);
    s.flow_tol = sj.value("flow_tol", s.flow_tol);
  }
  require(s.ladder.size() >= 5, ErrorCode::Input, "the ladder needs at least 5 rungs");
  require(std::get<GaussianBase>(s.base).width > 0.0, ErrorCode::Input,
          "packet width must be positive");

  if (j.contains("evolve")) {
    const auto& e = j["evolve"];
    check_keys(e,
               {"dt", "method", "boundary_guard", "boundary_fraction", "boundary_mass_limit",
                "probe_every"},
               "evolve");
    c.evolve.probe_every = e.value("probe_every", c.evolve.probe_every);
    c.evolve.dt = e.value("dt", c.evolve.dt);
    if (e.contains("method")) c.evolve.method = parse_method(e["method"].get<std::string>());
    c.evolve.boundary_guard = e.value("boundary_guard", c.evolve.boundary_guard);
    c.evolve.boundary_fraction = e.value("boundary_fraction", c.evolve.boundary_fraction);
    c.evolve.boundary_mass_limit = e.value("boundary_mass_limit", c.evolve.boundary_mass_limit);
  }

  LemmaSettings& L = c.lemma;
  const int mn = c.model().dimension();
  for (int k = 4; k <= 14; k += 2) L.flow_bounds.lambdas.push_back(std::ldexp(1.0, k));
  L.flow_bounds.x_samples = default_x_samples(mn);
  L.flow_bounds.xi_samples = default_xi_samples(mn);
  L.integral.delta = 2.0;
  L.integral.x_samples = default_x_samples(mn);
  L.integral.xi_samples = default_xi_samples(mn);
  if (j.contains("lemma")) {
    const auto& lj = j["lemma"];
    check_keys(lj,
               {"a", "p", "flow_lambdas", "flow_t0", "delta", "interval", "integral_lambdas",
                "commutator_times", "commutator_points", "commutator_half_width",
                "commutator_tolerance", "x_samples", "xi_samples"},
               "lemma");
    L.flow_bounds.a_param = lj.value("a", L.flow_bounds.a_param);
    L.flow_bounds.p = lj.value("p", L.flow_bounds.p);
    L.flow_bounds.lambdas = lj.value("flow_lambdas", L.flow_bounds.lambdas);
    L.flow_bounds.t0 = lj.value("flow_t0", L.flow_bounds.t0);
    L.integral.delta = lj.value("delta", L.integral.delta);
    if (lj.contains("interval")) {
      const auto iv = lj["interval"].get<std::vector<double>>();
      require(iv.size() == 2, ErrorCode::Input, "lemma.interval must be [a, b]");
      L.integral.a = iv[0];
      L.integral.b = iv[1];
    }
    L.integral.lambdas = lj.value("integral_lambdas", L.integral.lambdas);
    L.commutator_times = lj.value("commutator_times", L.commutator_times);
    L.commutator_points = lj.value("commutator_points", L.commutator_points);
    L.commutator_half_width = lj.value("commutator_half_width", L.commutator_half_width);
    L.commutator_tolerance = lj.value("commutator_tolerance", L.commutator_tolerance);
    if (lj.contains("x_samples")) {
      L.flow_bounds.x_samples = parse_points(lj["x_samples"], mn, "lemma.x_samples");
      L.integral.x_samples = L.flow_bounds.x_samples;
    }
    if (lj.contains("xi_samples")) {
      L.flow_bounds.xi_samples = parse_points(lj["xi_samples"], mn, "lemma.xi_samples");
      L.integral.xi_samples = L.flow_bounds.xi_samples;
    }
  }
  return c;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json lemma_j = {{"a", lemma.flow_bounds.a_param},
                            {"p", lemma.flow_bounds.p},
                            {"flow_lambdas", lemma.flow_bounds.lambdas},
                            {"flow_t0", lemma.flow_bounds.t0},
                            {"delta", lemma.integral.delta},
                            {"interval", {lemma.integral.a, lemma.integral.b}},
                            {"integral_lambdas", lemma.integral.lambdas},
                            {"commutator_times", lemma.commutator_times},
                            {"commutator_points", lemma.commutator_points},
                            {"commutator_half_width", lemma.commutator_half_width},
                            {"commutator_tolerance", lemma.commutator_tolerance},
                            {"x_samples", points_json(lemma.flow_bounds.x_samples)},
                            {"xi_samples", points_json(lemma.flow_bounds.xi_samples)}};
  return {{"experiment", std::string(to_string(id))},
          {"grid", grid.to_json()},
          {"potential", model().to_json()},
          {"scalar_potential", scalar().to_json()},
          {"datum", datum.to_json()},
          {"t0", t0},
          {"control", control},
          {"b_mode", b_mode},
          {"b", b},
          {"scan", scan.to_json()},
          {"evolve", evolve.to_json()},
          {"min_agreement", min_agreement},
          {"max_inconclusive", max_inconclusive},
          {"static_floor", static_floor},
          {"lower_bound_lambdas", lower_bound_lambdas},
          {"lemma", lemma_j},
          {"allow_nonconforming", allow_nonconforming},
          {"output_dir", output_dir}};
}

// --- experiments -----------------------------------------------------------------

ExperimentOutput run_fundamental_solution(const ExperimentConfig& cfg) {
  const VectorPotentialModel model = cfg.model();
  preflight_model(cfg, model);
  require(cfg.control || cfg.t0 != 0.0, ErrorCode::Input,
          "t0 = 0 has WF(delta) != empty; use the control run for t0 = 0");
  const double t0 = cfg.control ? 0.0 : cfg.t0;
  preflight_positions(cfg);
  nlohmann::json guards;
  preflight_ladder(cfg, guards);

  const GridSpec& g = cfg.grid;
  const int n = g.dimension();
  const GridFunction u0 = discrete_delta(g);
  const ScanTable table =
      wf_scan_dynamic(u0, model, ScalarPotentialModel::zero(n), t0, cfg.scan);

  ExperimentOutput out;
  const int conclusive = table.count(Verdict::NotInWF) + table.count(Verdict::InWF);
  const double frac = conclusive > 0 ? double(table.count(Verdict::NotInWF)) / conclusive : 0.0;
  nlohmann::json origin = nlohmann::json::array();
  for (const auto& c : table.cells)
    if (c.x.norm() == 0.0)
      origin.push_back({{"xi", to_std(c.xi)}, {"verdict", std::string(to_string(c.report.verdict))}});
  const bool origin_in_wf =
      !origin.empty() && std::all_of(origin.begin(), origin.end(), [](const nlohmann::json& o) {
        return o["verdict"] == "in-WF";
      });

  // Closed-form magnitude with the numerically flowed |x(0)| at every cell centre.
  std::ostringstream an;
  for (int d = 0; d < n; ++d) an << "x" << d << ",";
  for (int d = 0; d < n; ++d) an << "xi" << d << ",";
  an << "lambda,x0_norm,analytic,measured\n";
  const double width = std::get<GaussianBase>(cfg.scan.base).width;
  for (const auto& c : table.cells) {
    if (!c.error.empty()) continue;
    for (double lam : c.report.ladder) {
      const Vec xi = lam * c.xi;
      const FlowState st = t0 == 0.0 ? FlowState{0.0, c.x, xi}
                                     : flow(model, t0, 0.0, c.x, xi, cfg.scan.flow_tol).terminal;
      const double xn = st.x.norm();
      const double measured = std::abs(wpt_gaussian(u0, width, lam, cfg.b, -t0, {st.x, st.xi}));
      for (int d = 0; d < n; ++d) an << fmt(c.x(d)) << ",";
      for (int d = 0; d < n; ++d) an << fmt(c.xi(d)) << ",";
      an << fmt(lam) << "," << fmt(xn) << ","
         << fmt(delta_magnitude_printed_form(n, cfg.b, lam, t0, xn)) << "," << fmt(measured)
         << "\n";
    }
  }

  nlohmann::json lower = nullptr;
  std::ostringstream lb;
  lb << "lambda,ratio_min,ratio_max\n";
  if (t0 != 0.0) {
    LowerBoundConfig lc;
    lc.t0 = t0;
    lc.lambdas = cfg.lower_bound_lambdas;
    lc.x_samples = cfg.scan.positions;
    for (const auto& d : cfg.scan.directions) lc.xi_samples.push_back(d);
    lc.tol = cfg.scan.flow_tol;
    if (!lc.x_samples.empty() && !lc.xi_samples.empty()) {
      const LowerBoundReport rep = lower_bound_x0(model, lc);
      lower = rep.to_json();
      for (std::size_t i = 0; i < rep.lambdas.size(); ++i)
        lb << fmt(rep.lambdas[i]) << "," << fmt(rep.ratio_min[i]) << "," << fmt(rep.ratio_max[i])
           << "\n";
    }
  }

  std::ostringstream lad;
  lad << ladder_header(n);
  ladder_rows(lad, "dynamic", table);

  out.summary = {{"experiment", "fundamental-solution"},
                 {"config", cfg.to_json()},
                 {"guards", guards},
                 {"t0_effective", t0},
                 {"counts", counts_json(table)},
                 {"conclusive", conclusive},
                 {"fraction_not_in_wf", frac},
                 {"origin_cells", origin},
                 {"origin_in_wf", origin_in_wf},
                 {"lower_bound", lower}};
  out.files = {{"cells.csv", table.csv()},
               {"cells.json", table.to_json().dump(1)},
               {"ladder.csv", lad.str()},
               {"analytic.csv", an.str()}};
  if (t0 != 0.0) out.files.emplace_back("lower_bound.csv", lb.str());

  if (cfg.control) {
    out.summary["pass"] = origin_in_wf;
    if (!origin_in_wf)
      out.failure = Error(ErrorCode::Consistency, "control run: origin cell is not in-WF");
  } else {
    const bool pass = conclusive > 0 && frac >= cfg.min_agreement;
    out.summary["pass"] = pass;
    if (!pass)
      out.failure = Error(ErrorCode::Consistency,
                          "fraction of not-in-WF conclusive cells " + fmt(frac) +
                              " below " + fmt(cfg.min_agreement));
  }
  return out;
}

ExperimentOutput run_transport_consistency(const ExperimentConfig& cfg) {
  const VectorPotentialModel model = cfg.model();
  const ScalarPotentialModel V = cfg.scalar();
  preflight_model(cfg, model);
  require(V.dimension() == cfg.grid.dimension(), ErrorCode::Input,
          "scalar potential dimension does not match the grid");
  require(V.conforming() || cfg.allow_nonconforming, ErrorCode::Guard,
          "scalar potential is non-conforming (mu >= 2)");
  require(cfg.t0 > 0.0, ErrorCode::Input, "transport consistency needs t0 > 0");
  preflight_positions(cfg);
  nlohmann::json guards;
  preflight_ladder(cfg, guards);
  const double cfl = [&] {
    double amax = 0.0;
    for (std::size_t i = 0; i < cfg.grid.size(); i += std::max<std::size_t>(1, cfg.grid.size() / 4096))
      amax = std::max(amax, model.value(0.0, cfg.grid.node(i)).norm());
    return amax * cfg.evolve.dt / cfg.grid.min_dx();
  }();
  guards["cfl_estimate"] = cfl;

  const GridSpec& g = cfg.grid;
  const int n = g.dimension();
  const GridFunction u0 = make_datum(g, cfg.datum);
  const EvolveResult ev = evolve_with_stats(model, V, u0, 0.0, cfg.t0, cfg.evolve);
  guards["evolve"] = ev.stats.to_json();

  ScanSettings static_scan = cfg.scan;
  static_scan.thresholds.floor = std::max(static_scan.thresholds.floor, cfg.static_floor);
  const ScanTable st = wf_scan_static(ev.u, static_scan);
  const ScanTable dy = wf_scan_dynamic(u0, model, V, cfg.t0, cfg.scan);

  auto idx = [](Verdict v) { return static_cast<int>(v); };
  int matrix[3][3] = {};
  int both = 0, agree = 0, any_inconclusive = 0;
  nlohmann::json disagreements = nlohmann::json::array();
  std::ostringstream cells;
  for (int d = 0; d < n; ++d) cells << "x" << d << ",";
  for (int d = 0; d < n; ++d) cells << "xi" << d << ",";
  cells << "static_Nhat,static_R2,static_verdict,dynamic_Nhat,dynamic_R2,dynamic_verdict,agree,"
           "error\n";
  for (std::size_t i = 0; i < st.cells.size(); ++i) {
    const auto& a = st.cells[i];
    const auto& b = dy.cells[i];
    ++matrix[idx(a.report.verdict)][idx(b.report.verdict)];
    const bool conclusive =
        a.report.verdict != Verdict::Inconclusive && b.report.verdict != Verdict::Inconclusive;
    if (!conclusive) ++any_inconclusive;
    if (conclusive) {
      ++both;
      if (a.report.verdict == b.report.verdict)
        ++agree;
      else
        disagreements.push_back({{"x", to_std(a.x)},
                                 {"xi", to_std(a.xi)},
                                 {"static", std::string(to_string(a.report.verdict))},
                                 {"dynamic", std::string(to_string(b.report.verdict))},
                                 {"static_Nhat", a.report.to_json()["Nhat"]},
                                 {"dynamic_Nhat", b.report.to_json()["Nhat"]}});
    }
    for (int d = 0; d < n; ++d) cells << fmt(a.x(d)) << ",";
    for (int d = 0; d < n; ++d) cells << fmt(a.xi(d)) << ",";
    std::string err = a.error.empty() ? b.error : a.error;
    std::replace(err.begin(), err.end(), ',', ';');
    cells << fmt(a.report.Nhat) << "," << fmt(a.report.R2) << "," << to_string(a.report.verdict)
          << "," << fmt(b.report.Nhat) << "," << fmt(b.report.R2) << ","
          << to_string(b.report.verdict) << ","
          << (conclusive ? (a.report.verdict == b.report.verdict ? "1" : "0") : "") << "," << err
          << "\n";
  }
  const double agreement = both > 0 ? double(agree) / both : 0.0;
  const double inconclusive_frac =
      st.cells.empty() ? 0.0 : double(any_inconclusive) / st.cells.size();

  nlohmann::json mat = nlohmann::json::object();
  for (auto vs : {Verdict::NotInWF, Verdict::InWF, Verdict::Inconclusive})
    for (auto vd : {Verdict::NotInWF, Verdict::InWF, Verdict::Inconclusive})
      mat[std::string(to_string(vs))][std::string(to_string(vd))] = matrix[idx(vs)][idx(vd)];

  std::ostringstream lad;
  lad << ladder_header(n);
  ladder_rows(lad, "static", st);
  ladder_rows(lad, "dynamic", dy);

  ExperimentOutput out;
  const bool pass = both > 0 && agreement >= cfg.min_agreement &&
                    inconclusive_frac <= cfg.max_inconclusive;
  out.summary = {{"experiment", std::string(to_string(cfg.id))},
                 {"config", cfg.to_json()},
                 {"guards", guards},
                 {"static_counts", counts_json(st)},
                 {"dynamic_counts", counts_json(dy)},
                 {"agreement_matrix", mat},
                 {"conclusive_both", both},
                 {"agreement", agreement},
                 {"inconclusive_fraction", inconclusive_frac},
                 {"disagreements", disagreements},
                 {"pass", pass}};
  out.files = {{"cells.csv", cells.str()},
               {"cells.json", nlohmann::json{{"static", st.to_json()}, {"dynamic", dy.to_json()}}
                                  .dump(1)},
               {"ladder.csv", lad.str()}};
  if (both == 0 || inconclusive_frac > cfg.max_inconclusive)
    out.failure = Error(ErrorCode::Consistency,
                        "too many inconclusive cells (" + fmt(inconclusive_frac) + ")");
  else if (agreement < cfg.min_agreement)
    out.failure = Error(ErrorCode::Consistency, "verdict agreement " + fmt(agreement) +
                                                    " below " + fmt(cfg.min_agreement));
  return out;
}

ExperimentOutput run_scalar_potential(const ExperimentConfig& cfg) {
  require(cfg.id == ExperimentId::ScalarPotential, ErrorCode::Input,
          "run_scalar_potential needs experiment = scalar-potential");
  return run_transport_consistency(cfg);
}

ExperimentOutput run_lemma_suite(const ExperimentConfig& cfg) {
  const VectorPotentialModel model = cfg.model();
  require(model.conforming() || cfg.allow_nonconforming, ErrorCode::Guard,
          "lemma suite needs a conforming potential");
  const LemmaSettings& L = cfg.lemma;

  ExperimentOutput out;
  nlohmann::json checks = nlohmann::json::object();
  bool all = true;

  auto record = [&](const std::string& name, auto&& body) {
    try {
      nlohmann::json r = body();
      all = all && r.value("pass", false);
      checks[name] = r;
    } catch (const Error& e) {
      all = false;
      checks[name] = {{"pass", false}, {"error", e.what()}, {"code", std::string(to_string(e.code()))}};
    }
  };

  record("flow_bounds", [&] {
    const FlowBoundsReport rep = check_flow_bounds(model, L.flow_bounds);
    nlohmann::json j = rep.to_json();
    j["pass"] = rep.pass;
    return j;
  });
  record("integral_bound", [&] {
    const IntegralBoundReport rep = check_integral_bound(model, L.integral);
    nlohmann::json j = rep.to_json();
    j["pass"] = rep.stable;
    return j;
  });
  record("commutator", [&] {
    const GridSpec g(1, L.commutator_points, L.commutator_half_width);
    const GridFunction phi = gaussian(g);
    nlohmann::json rows = nlohmann::json::array();
    double worst = 0.0;
    for (double t : L.commutator_times)
      for (int alpha = 0; alpha <= 2; ++alpha)
        for (int beta = 0; alpha + beta <= 2; ++beta) {
          const std::vector<int> a{alpha}, b{beta};
          const double d = commutator_check(phi, t, a, b);
          worst = std::max(worst, d);
          rows.push_back({{"t", t}, {"alpha", alpha}, {"beta", beta}, {"discrepancy", d}});
        }
    return nlohmann::json{{"rows", rows},
                          {"max_discrepancy", worst},
                          {"tolerance", L.commutator_tolerance},
                          {"pass", worst <= L.commutator_tolerance}};
  });

  std::ostringstream fb;
  fb << "lambda,samples,violations,x_ratio_min,x_ratio_max,xi_ratio_min,xi_ratio_max\n";
  if (checks["flow_bounds"].contains("rungs"))
    for (const auto& r : checks["flow_bounds"]["rungs"])
      fb << r.value("lambda", 0.0) << "," << r.value("samples", 0) << ","
         << r.value("violations", 0) << "," << r["x_ratio_min"] << "," << r["x_ratio_max"] << ","
         << r["xi_ratio_min"] << "," << r["xi_ratio_max"] << "\n";

  out.summary = {{"experiment", "lemma-suite"},
                 {"config", cfg.to_json()},
                 {"checks", checks},
                 {"pass", all}};
  out.files = {{"flow_bounds.csv", fb.str()}};
  if (!all) out.failure = Error(ErrorCode::Consistency, "lemma suite: at least one check failed");
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.id) {
    case ExperimentId::FundamentalSolution: return run_fundamental_solution(cfg);
    case ExperimentId::LemmaSuite: return run_lemma_suite(cfg);
    case ExperimentId::ScalarPotential: return run_scalar_potential(cfg);
    case ExperimentId::FreeTransport:
    case ExperimentId::MagneticTransport: return run_transport_consistency(cfg);
  }
  fail(ErrorCode::Input, "unknown experiment");
}

void write_outputs(const ExperimentOutput& out, const std::string& dir) {
  const std::filesystem::path root(dir);
  write_text(root / "summary.json", out.summary.dump(2) + "\n");
  for (const auto& [name, text] : out.files) write_text(root / name, text);
}

}  // namespace mswf
