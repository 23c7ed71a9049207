#include "mswf/detector.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "mswf/characteristics.hpp"
#include "mswf/errors.hpp"
#include "mswf/parallel.hpp"

namespace mswf {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json number_or_string(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double parse_double(std::string_view s, const char* what) {
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v))
    fail(ErrorCode::Input, std::string("cannot parse ") + what + " from '" + tmp + "'");
  return v;
}

// Least-squares line through (x, y); returns slope and R^2.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxx > 0 ? sxy / sxx : 0.0;
  double ssr = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (my + slope * (x[i] - mx));
    ssr += r * r;
  }
  // A perfect fit counts as R^2 = 1 even for constant data.
  const double r2 = ssr <= 1e-24 * std::max(1.0, syy) ? 1.0 : (syy > 0 ? 1.0 - ssr / syy : 0.0);
  return {slope, r2};
}

double packet_norm(const PacketBase& base, int n) {
  if (const auto* g = std::get_if<GaussianBase>(&base))
    return std::pow(std::numbers::pi * g->width * g->width, n / 4.0);
  return std::get<GridFunction>(base).l2_norm();
}

double packet_width(const PacketBase& base) {
  if (const auto* g = std::get_if<GaussianBase>(&base)) return g->width;
  return effective_width(std::get<GridFunction>(base));
}

std::string describe(double lambda, const std::string& why) {
  std::ostringstream os;
  os << lambda << ": " << why;
  return os.str();
}

// Shared core: t0 == 0 with the zero model is the static test.
DecayReport run_test(const GridFunction& f, const VectorPotentialModel& model, double t0,
                     const PacketBase& base, double b, const ConicSample& sample,
                     const std::vector<double>& ladder, const Thresholds& thr, double tol) {
  const GridSpec& g = f.grid();
  const int n = g.dimension();
  require(sample.x0.size() == n && sample.xi0.size() == n, ErrorCode::Input,
          "conic sample dimension does not match the grid");
  require(model.dimension() == n, ErrorCode::Input, "potential dimension does not match the grid");
  require(!ladder.empty() && std::is_sorted(ladder.begin(), ladder.end()) &&
              std::adjacent_find(ladder.begin(), ladder.end()) == ladder.end(),
          ErrorCode::Input, "ladder must be strictly increasing");
  require(ladder.size() >= 5, ErrorCode::Input, "the ladder needs at least 5 rungs");
  require(ladder.front() >= 1.0, ErrorCode::Input, "ladder rungs must be >= 1");
  require(b > 0.0 && b < 1.0, ErrorCode::Input, "scaling exponent b must lie in (0, 1)");
  if (const auto* gf = std::get_if<GridFunction>(&base))
    require(gf->grid() == g, ErrorCode::Input, "custom packet lives on a different grid");

  DecayReport rep;
  rep.ladder_requested = ladder;
  rep.thresholds = thr;
  rep.t0 = t0;
  rep.b = b;

  std::vector<std::pair<Vec, Vec>> points;  // (x, unit-modulus xi) samples
  for (const auto& x : sample.positions())
    for (const auto& d : sample.directions())
      for (double m : sample.moduli()) points.emplace_back(x, m * d);

  const double width = packet_width(base);
  const double floor = thr.floor * f.l2_norm() * packet_norm(base, n);

  // Flowed points per rung, then rung guards.
  std::vector<std::vector<PhasePoint>> flowed;
  for (double lam : ladder) {
    if (std::pow(lam, b) * g.max_dx() > width / 4.0) {
      rep.dropped.push_back(describe(lam, "packet under-resolved"));
      continue;
    }
    std::vector<PhasePoint> pts(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
      const Vec xi = lam * points[i].second;
      if (t0 == 0.0) {
        pts[i] = {points[i].first, xi};
      } else {
        const FlowState st = flow(model, t0, 0.0, points[i].first, xi, tol).terminal;
        pts[i] = {st.x, st.xi};
      }
    });
    bool ok = true;
    for (const auto& p : pts)
      for (int d = 0; d < n; ++d) ok = ok && std::abs(p.xi(d)) * g.dx(d) <= std::numbers::pi;
    if (!ok) {
      rep.dropped.push_back(describe(lam, "nyquist"));
      continue;
    }
    rep.ladder.push_back(lam);
    flowed.push_back(std::move(pts));
  }

  rep.samples.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    rep.samples[i].x = points[i].first;
    rep.samples[i].xi = points[i].second;
    rep.samples[i].magnitudes.resize(rep.ladder.size());
  }
  for (std::size_t r = 0; r < rep.ladder.size(); ++r) {
    const double lam = rep.ladder[r];
    GridFunction packet;
    const bool custom = std::holds_alternative<GridFunction>(base);
    if (custom) {
      packet = make_scaled_packet(g, base, lam, b);
      if (t0 != 0.0) packet = free_evolve_packet(packet, -t0);
    }
    parallel_for(points.size(), [&](std::size_t i) {
      const PhasePoint& p = flowed[r][i];
      const cplx w = custom ? wpt(f, packet, p)
                            : wpt_gaussian(f, std::get<GaussianBase>(base).width, lam, b, -t0, p);
      rep.samples[i].magnitudes[r] = std::abs(w);
    });
  }

  if (rep.ladder.size() < 5) {
    rep.flags.push_back("ladder-truncated");
    rep.verdict = Verdict::Inconclusive;
    return rep;
  }

  std::vector<DecayFit> fits;
  for (auto& s : rep.samples) {
    s.fit = decay_exponent(rep.ladder, s.magnitudes, floor);
    rep.censored += s.fit.censored;
    fits.push_back(s.fit);
  }
  rep.verdict = classify(fits, thr);

  double best = kInf;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& ft = fits[i];
    if (ft.super_polynomial || std::isnan(ft.Nhat)) continue;
    if (ft.Nhat < best) {
      best = ft.Nhat;
      rep.worst = static_cast<int>(i);
    }
  }
  if (rep.worst >= 0) {
    rep.Nhat = best;
    rep.R2 = fits[rep.worst].R2;
  } else {
    rep.Nhat = kInf;
    rep.R2 = 1.0;
    rep.worst = 0;
    rep.flags.push_back("super-polynomial");
  }
  for (const auto& ft : fits)
    for (const auto& fl : ft.flags)
      if (fl == "insufficient" &&
          std::find(rep.flags.begin(), rep.flags.end(), fl) == rep.flags.end())
        rep.flags.push_back(fl);
  return rep;
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::NotInWF: return "not-in-WF";
    case Verdict::InWF: return "in-WF";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

nlohmann::json Thresholds::to_json() const { return {{"N", N}, {"Nlow", N_low}, {"R2", R2}, {"floor", floor}}; }

Thresholds Thresholds::parse(std::string_view s) {
  Thresholds t;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const std::string_view item = s.substr(0, comma);
    s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    require(eq != std::string_view::npos, ErrorCode::Input,
            "thresholds must look like N=6,Nlow=1,R2=0.95,floor=1e-14");
    const std::string_view key = item.substr(0, eq);
    const double v = parse_double(item.substr(eq + 1), "threshold");
    if (key == "N")
      t.N = v;
    else if (key == "Nlow" || key == "N_low")
      t.N_low = v;
    else if (key == "R2")
      t.R2 = v;
    else if (key == "floor")
      t.floor = v;
    else
      fail(ErrorCode::Input, "unknown threshold '" + std::string(key) + "'");
  }
  require(t.N_low < t.N, ErrorCode::Input, "Nlow must be below N");
  require(t.floor > 0.0 && t.floor < 1.0, ErrorCode::Input, "floor must lie in (0, 1)");
  return t;
}

std::vector<double> dyadic_ladder(double kmin, double kmax, double step) {
  require(step > 0.0 && kmax >= kmin, ErrorCode::Input, "ladder needs kmin <= kmax and step > 0");
  std::vector<double> out;
  for (double k = kmin; k <= kmax + 1e-9; k += step) out.push_back(std::exp2(k));
  return out;
}

std::vector<double> parse_ladder(std::string_view s) {
  std::vector<double> parts;
  while (true) {
    const auto c = s.find(':');
    parts.push_back(parse_double(s.substr(0, c), "ladder bound"));
    if (c == std::string_view::npos) break;
    s = s.substr(c + 1);
  }
  require(parts.size() == 2 || parts.size() == 3, ErrorCode::Input,
          "ladder must be kmin:kmax or kmin:kmax:step");
  return dyadic_ladder(parts[0], parts[1], parts.size() == 3 ? parts[2] : 1.0);
}

nlohmann::json DecayFit::to_json() const {
  return {{"Nhat", number_or_string(Nhat)},
          {"R2", number_or_string(R2)},
          {"used", used},
          {"censored", censored},
          {"super_polynomial", super_polynomial},
          {"flags", flags}};
}

DecayFit decay_exponent(std::span<const double> ladder, std::span<const double> magnitudes,
                        double floor) {
  require(ladder.size() == magnitudes.size(), ErrorCode::Input,
          "ladder and magnitude lists differ in length");
  require(ladder.size() >= 5, ErrorCode::Input, "decay fits need at least 5 rungs");
  double peak = 0.0;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    require(ladder[i] > 0.0 && (i == 0 || ladder[i] > ladder[i - 1]), ErrorCode::Input,
            "ladder must be positive and strictly increasing");
    require(magnitudes[i] >= 0.0 && !std::isnan(magnitudes[i]), ErrorCode::Input,
            "magnitudes must be non-negative");
    peak = std::max(peak, magnitudes[i]);
  }
  const double fl = floor < 0.0 ? 1e-14 * peak : floor;

  DecayFit fit;
  std::vector<double> lx, ly;
  std::vector<bool> cens(ladder.size());
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    cens[i] = !(magnitudes[i] > fl);
    if (cens[i]) {
      ++fit.censored;
    } else {
      lx.push_back(std::log(ladder[i]));
      ly.push_back(std::log(magnitudes[i]));
    }
  }
  fit.used = static_cast<int>(lx.size());
  if (lx.empty()) {
    fit.Nhat = kInf;
    fit.R2 = 1.0;
    fit.super_polynomial = true;
    fit.flags = {"all-censored"};
    return fit;
  }
  if (fit.censored > 0) {
    // Censoring confined to the top of the ladder: the decay outran every power law.
    const auto first = std::find(cens.begin(), cens.end(), true);
    if (first != cens.begin() && std::all_of(first, cens.end(), [](bool c) { return c; })) {
      fit.super_polynomial = true;
      fit.flags.push_back("tail-censored");
    }
  }
  if (lx.size() >= 2) {
    const auto [slope, r2] = fit_line(lx, ly);
    fit.Nhat = -slope;
    fit.R2 = lx.size() >= 3 ? r2 : 1.0;
  }
  if (lx.size() < 3 && !fit.super_polynomial) fit.flags.push_back("insufficient");

  // Local 3-point slopes; strictly steepening with mean step > 0.5 signals super-polynomial decay.
  if (lx.size() >= 5) {
    std::vector<double> local;
    for (std::size_t i = 0; i + 2 < lx.size(); ++i) {
      const std::vector<double> wx(lx.begin() + i, lx.begin() + i + 3);
      const std::vector<double> wy(ly.begin() + i, ly.begin() + i + 3);
      local.push_back(fit_line(wx, wy).first);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < local.size(); ++i) monotone = monotone && local[i] < local[i - 1];
    const double mean_step = (local.front() - local.back()) / static_cast<double>(local.size() - 1);
    if (monotone && mean_step > 0.5) {
      fit.super_polynomial = true;
      fit.flags.push_back("steepening");
    }
  }
  return fit;
}

Verdict classify(const std::vector<DecayFit>& fits, const Thresholds& thr) {
  if (fits.empty()) return Verdict::Inconclusive;
  for (const auto& f : fits)
    if (!f.super_polynomial && !std::isnan(f.Nhat) && f.Nhat <= thr.N_low) return Verdict::InWF;
  for (const auto& f : fits) {
    if (f.super_polynomial) continue;
    if (std::isnan(f.Nhat) || f.Nhat < thr.N || !(f.R2 >= thr.R2)) return Verdict::Inconclusive;
  }
  return Verdict::NotInWF;
}

// --- ConicSample ---------------------------------------------------------------

std::vector<Vec> ConicSample::positions() const {
  const int n = static_cast<int>(x0.size());
  require(k_radius >= 0.0, ErrorCode::Input, "K-radius must be non-negative");
  std::vector<Vec> out;
  if (k_radius == 0.0) return {x0};
  int total = 1;
  for (int d = 0; d < n; ++d) total *= 3;
  for (int c = 0; c < total; ++c) {
    Vec x = x0;
    int r = c;
    for (int d = n - 1; d >= 0; --d) {
      x(d) += k_radius * ((r % 3) - 1);
      r /= 3;
    }
    out.push_back(x);
  }
  return out;
}

std::vector<Vec> ConicSample::directions() const {
  const int n = static_cast<int>(xi0.size());
  const double m = xi0.norm();
  require(m > 0.0, ErrorCode::Input, "cone direction xi0 must be non-zero");
  require(cone_angle >= 0.0 && cone_angle < std::numbers::pi / 2, ErrorCode::Input,
          "cone half-angle must lie in [0, pi/2)");
  const Vec u = xi0 / m;
  if (n == 1 || cone_angle == 0.0) return {u};
  std::vector<Vec> out;
  if (n == 2) {
    const double th = std::atan2(u(1), u(0));
    for (double f : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      Vec d(2);
      d << std::cos(th + f * cone_angle), std::sin(th + f * cone_angle);
      out.push_back(d);
    }
    return out;
  }
  // n = 3: axis plus tilts towards two orthogonal directions.
  Vec e = Vec::Zero(3);
  int smallest = 0;
  for (int d = 1; d < 3; ++d)
    if (std::abs(u(d)) < std::abs(u(smallest))) smallest = d;
  e(smallest) = 1.0;
  Eigen::Vector3d u3 = u, e3 = e;
  const Eigen::Vector3d p = u3.cross(e3).normalized();
  const Eigen::Vector3d q = u3.cross(p).normalized();
  out.push_back(u);
  const double c = std::cos(cone_angle), s = std::sin(cone_angle);
  for (const Eigen::Vector3d& w : {p, Eigen::Vector3d(-p), q, Eigen::Vector3d(-q)}) {
    const Eigen::Vector3d d = c * u3 + s * w;
    out.push_back(Vec(d));
  }
  return out;
}

std::vector<double> ConicSample::moduli() const {
  require(a >= 1.0, ErrorCode::Input, "annulus parameter a must be >= 1");
  if (a == 1.0) return {1.0};
  return {1.0 / a, 1.0, a};
}

nlohmann::json ConicSample::to_json() const {
  return {{"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
          {"xi0", std::vector<double>(xi0.data(), xi0.data() + xi0.size())},
          {"k_radius", k_radius},
          {"cone_angle", cone_angle},
          {"a", a}};
}

nlohmann::json DecayReport::to_json(bool detail) const {
  nlohmann::json j;
  j["lambda"] = ladder;
  j["mag"] = (worst >= 0 && worst < static_cast<int>(samples.size())) ? samples[worst].magnitudes
                                                                      : std::vector<double>{};
  j["Nhat"] = number_or_string(Nhat);
  j["R2"] = number_or_string(R2);
  j["flags"] = flags;
  j["verdict"] = std::string(to_string(verdict));
  j["censored"] = censored;
  j["dropped"] = dropped;
  j["thresholds"] = thresholds.to_json();
  j["t0"] = t0;
  j["b"] = b;
  if (detail) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& r : samples)
      s.push_back({{"x", std::vector<double>(r.x.data(), r.x.data() + r.x.size())},
                   {"xi", std::vector<double>(r.xi.data(), r.xi.data() + r.xi.size())},
                   {"mag", r.magnitudes},
                   {"fit", r.fit.to_json()}});
    j["samples"] = s;
  }
  return j;
}

DecayReport wf_test_static(const GridFunction& f, const PacketBase& base, double b,
                           const ConicSample& sample, const std::vector<double>& ladder,
                           const Thresholds& thr) {
  return run_test(f, VectorPotentialModel::zero(f.dimension()), 0.0, base, b, sample, ladder, thr,
                  1e-10);
}

DecayReport wf_test_dynamic(const GridFunction& u0, const VectorPotentialModel& model,
                            const ScalarPotentialModel& V, double t0, const PacketBase& base,
                            double b, const ConicSample& sample,
                            const std::vector<double>& ladder, const Thresholds& thr,
                            double flow_tol) {
  require(V.dimension() == u0.dimension(), ErrorCode::Input,
          "scalar potential dimension does not match the grid");
  return run_test(u0, model, t0, base, b, sample, ladder, thr, flow_tol);
}

// --- scans ---------------------------------------------------------------------

std::vector<Vec> direction_fan(int n, int count) {
  std::vector<Vec> out;
  if (n == 1) {
    out.push_back(Vec::Constant(1, 1.0));
    out.push_back(Vec::Constant(1, -1.0));
  } else if (n == 2) {
    require(count >= 1, ErrorCode::Input, "direction fan needs at least one direction");
    for (int j = 0; j < count; ++j) {
      Vec d(2);
      const double th = 2.0 * std::numbers::pi * j / count;
      d << std::cos(th), std::sin(th);
      out.push_back(d);
    }
  } else {
    for (int axis = 0; axis < n; ++axis)
      for (double s : {1.0, -1.0}) {
        Vec d = Vec::Zero(n);
        d(axis) = s;
        out.push_back(d);
      }
  }
  return out;
}

nlohmann::json ScanSettings::to_json() const {
  nlohmann::json pos = nlohmann::json::array(), dir = nlohmann::json::array();
  for (const auto& p : positions) pos.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  for (const auto& d : directions) dir.push_back(std::vector<double>(d.data(), d.data() + d.size()));
  nlohmann::json packet;
  if (const auto* g = std::get_if<GaussianBase>(&base))
    packet = {{"kind", "gaussian"}, {"width", g->width}};
  else
    packet = {{"kind", "custom"}};
  return {{"positions", pos},           {"directions", dir},
          {"ladder", ladder},           {"thresholds", thresholds.to_json()},
          {"packet", packet},           {"b", b},
          {"k_radius", k_radius},       {"cone_angle", cone_angle},
          {"a", a},                     {"flow_tol", flow_tol}};
}

std::string ScanTable::csv() const {
  std::ostringstream os;
  os << std::setprecision(10);
  const int n = cells.empty() ? 0 : static_cast<int>(cells.front().x.size());
  for (int d = 0; d < n; ++d) os << "x" << d << ",";
  for (int d = 0; d < n; ++d) os << "xi" << d << ",";
  os << "Nhat,R2,verdict,error\n";
  for (const auto& c : cells) {
    for (int d = 0; d < n; ++d) os << c.x(d) << ",";
    for (int d = 0; d < n; ++d) os << c.xi(d) << ",";
    os << c.report.Nhat << "," << c.report.R2 << "," << to_string(c.report.verdict) << ",";
    std::string e = c.error;
    std::replace(e.begin(), e.end(), ',', ';');
    std::replace(e.begin(), e.end(), '\n', ' ');
    os << e << "\n";
  }
  return os.str();
}

nlohmann::json ScanTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json r = c.report.to_json();
    r["x"] = std::vector<double>(c.x.data(), c.x.data() + c.x.size());
    r["xi"] = std::vector<double>(c.xi.data(), c.xi.data() + c.xi.size());
    if (!c.error.empty()) r["error"] = c.error;
    rows.push_back(r);
  }
  return {{"cells", rows},
          {"counts",
           {{"not-in-WF", count(Verdict::NotInWF)},
            {"in-WF", count(Verdict::InWF)},
            {"inconclusive", count(Verdict::Inconclusive)}}}};
}

int ScanTable::count(Verdict v) const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(),
                                        [v](const ScanCell& c) { return c.report.verdict == v; }));
}

namespace {

template <class Test>
ScanTable scan(const ScanSettings& s, Test&& test) {
  ScanTable t;
  for (const auto& x : s.positions)
    for (const auto& d : s.directions) t.cells.push_back({x, d, {}, {}});
  parallel_for(t.cells.size(), [&](std::size_t i) {
    ScanCell& c = t.cells[i];
    ConicSample cs;
    cs.x0 = c.x;
    cs.xi0 = c.xi;
    cs.k_radius = s.k_radius;
    cs.cone_angle = s.cone_angle;
    cs.a = s.a;
    try {
      c.report = test(cs);
    } catch (const std::exception& e) {
      c.error = e.what();
      c.report = DecayReport{};
      c.report.verdict = Verdict::Inconclusive;
      c.report.flags.push_back("error");
    }
  });
  return t;
}

}  // namespace

ScanTable wf_scan_static(const GridFunction& f, const ScanSettings& s) {
  return scan(s, [&](const ConicSample& cs) {
    return wf_test_static(f, s.base, s.b, cs, s.ladder, s.thresholds);
  });
}

ScanTable wf_scan_dynamic(const GridFunction& u0, const VectorPotentialModel& model,
                          const ScalarPotentialModel& V, double t0, const ScanSettings& s) {
  return scan(s, [&](const ConicSample& cs) {
    return wf_test_dynamic(u0, model, V, t0, s.base, s.b, cs, s.ladder, s.thresholds, s.flow_tol);
  });
}

}  // namespace mswf
