#include "mswf/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mswf/characteristics.hpp"
#include "mswf/errors.hpp"
#include "mswf/fft.hpp"

namespace mswf {

// --- scalar potential ------------------------------------------------------------

ScalarPotentialModel ScalarPotentialModel::zero(int n) {
  require(n >= 1 && n <= kMaxDim, ErrorCode::Input, "dimension must be 1..3");
  ScalarPotentialModel m;
  m.n_ = n;
  return m;
}

ScalarPotentialModel ScalarPotentialModel::soft_power(int n, double mu, double amplitude,
                                                      Modulation g) {
  require(n >= 1 && n <= kMaxDim, ErrorCode::Input, "dimension must be 1..3");
  require(std::isfinite(mu) && std::isfinite(amplitude), ErrorCode::Input,
          "scalar potential parameters must be finite");
  ScalarPotentialModel m;
  m.n_ = n;
  m.family_ = ScalarFamily::SoftPower;
  m.mu_ = mu;
  m.amplitude_ = amplitude;
  m.modulation_ = g;
  return m;
}

ScalarPotentialModel ScalarPotentialModel::quadratic(int n, double amplitude) {
  require(n >= 1 && n <= kMaxDim, ErrorCode::Input, "dimension must be 1..3");
  ScalarPotentialModel m;
  m.n_ = n;
  m.family_ = ScalarFamily::Quadratic;
  m.mu_ = 2.0;
  m.amplitude_ = amplitude;
  return m;
}

double ScalarPotentialModel::value(double t, const Vec& x) const {
  require(x.size() == n_, ErrorCode::Input, "point dimension does not match the scalar potential");
  switch (family_) {
    case ScalarFamily::Zero:
      return 0.0;
    case ScalarFamily::SoftPower:
      return amplitude_ * modulation_value(modulation_, t) * std::pow(bracket(x), mu_);
    case ScalarFamily::Quadratic:
      return 0.5 * amplitude_ * x.squaredNorm();
  }
  return 0.0;
}

DecayVerification ScalarPotentialModel::verify(int max_order, std::span<const double> radii,
                                               int samples_per_radius) const {
  // Reuse the vector-potential checker on a single-component wrapper.
  const ScalarPotentialModel self = *this;
  const int n = n_;
  auto wrapped = VectorPotentialModel::custom(
      n, mu_,
      [self, n](double t, const Vec& x) {
        Vec v = Vec::Zero(n);
        v(0) = self.value(t, x);
        return v;
      },
      conforming());
  auto rep = verify_decay(wrapped, mu_, max_order, radii, samples_per_radius);
  rep.conforming = rep.conforming && conforming();
  return rep;
}

std::string_view to_string(ScalarFamily f) {
  switch (f) {
    case ScalarFamily::Zero: return "zero";
    case ScalarFamily::SoftPower: return "soft-power";
    case ScalarFamily::Quadratic: return "quadratic";
  }
  return "zero";
}

nlohmann::json ScalarPotentialModel::to_json() const {
  return {{"family", std::string(to_string(family_))},
          {"n", n_},
          {"mu", mu_},
          {"amplitude", amplitude_},
          {"modulation", std::string(to_string(modulation_))}};
}

ScalarPotentialModel ScalarPotentialModel::from_json(const nlohmann::json& j, int n) {
  require(j.is_object(), ErrorCode::Input, "scalar potential config must be a JSON object");
  const int dim = j.value("n", n);
  const std::string fam = j.value("family", std::string("zero"));
  if (fam == "zero") return zero(dim);
  if (fam == "soft-power")
    return soft_power(dim, j.value("mu", 1.0), j.value("amplitude", 1.0),
                      parse_modulation(j.value("modulation", std::string("one"))));
  if (fam == "quadratic" || fam == "quadratic-test") return quadratic(dim, j.value("amplitude", 1.0));
  fail(ErrorCode::Input, "unknown scalar potential family '" + fam + "'");
}

// --- config / stats ----------------------------------------------------------------

std::string_view to_string(EvolveMethod m) {
  switch (m) {
    case EvolveMethod::StrangSplit: return "strang-split";
    case EvolveMethod::StrangSemiLagrangian: return "strang-semi-lagrangian";
    case EvolveMethod::ReferenceMidpoint: return "reference-midpoint";
  }
  return "strang-split";
}

EvolveMethod parse_method(std::string_view s) {
  if (s == "strang-split" || s == "strang") return EvolveMethod::StrangSplit;
  if (s == "strang-semi-lagrangian" || s == "semi-lagrangian")
    return EvolveMethod::StrangSemiLagrangian;
  if (s == "reference-midpoint" || s == "midpoint") return EvolveMethod::ReferenceMidpoint;
  fail(ErrorCode::Input, "unknown evolve method '" + std::string(s) + "'");
}

nlohmann::json EvolveConfig::to_json() const {
  return {{"dt", dt},
          {"method", std::string(to_string(method))},
          {"probe_every", probe_every},
          {"boundary_guard", boundary_guard},
          {"boundary_fraction", boundary_fraction},
          {"boundary_mass_limit", boundary_mass_limit}};
}

nlohmann::json EvolveStats::to_json() const {
  return {{"steps", steps},
          {"dt_used", dt_used},
          {"max_boundary_mass", max_boundary_mass},
          {"l2_initial", l2_initial},
          {"l2_final", l2_final},
          {"max_series_terms", max_series_terms},
          {"max_fixed_point_iters", max_fixed_point_iters}};
}

// --- solver ------------------------------------------------------------------------

namespace {

struct Fields {
  std::vector<std::vector<double>> a;  // per component
  std::vector<double> div;
  std::vector<double> w;  // |a|^2 / 2 + V
  double max_a = 0.0;
  double max_w = 0.0;
  double max_div = 0.0;
};

class Solver {
 public:
  Solver(const VectorPotentialModel& model, const ScalarPotentialModel& V, const GridSpec& g,
         const EvolveConfig& cfg)
      : model_(model), V_(V), g_(g), cfg_(cfg), n_(g.dimension()) {
    kvec_.assign(n_, std::vector<double>(g.size()));
    k2_.resize(g.size());
    std::vector<std::size_t> idx(n_);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.unflatten(i, idx);
      double s = 0.0;
      for (int d = 0; d < n_; ++d) {
        kvec_[d][i] = g.frequency(d, idx[d]);
        s += kvec_[d][i] * kvec_[d][i];
      }
      k2_[i] = s;
    }
    nodes_.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) nodes_.push_back(g.node(i));
  }

  bool has_potential_terms() const { return !model_.is_zero() || !V_.is_zero(); }
  bool static_fields() const { return model_.time_independent() && V_.time_independent(); }

  void compute_fields(double t, Fields& f) const {
    f.a.assign(n_, std::vector<double>(g_.size()));
    f.div.resize(g_.size());
    f.w.resize(g_.size());
    f.max_a = f.max_w = f.max_div = 0.0;
    for (std::size_t i = 0; i < g_.size(); ++i) {
      const Vec& x = nodes_[i];
      const Vec a = model_.value(t, x);
      const double dv = model_.is_zero() ? 0.0 : model_.divergence(t, x);
      const double w = 0.5 * a.squaredNorm() + V_.value(t, x);
      if (!a.allFinite() || !std::isfinite(dv) || !std::isfinite(w))
        fail(ErrorCode::Numeric, "non-finite potential sample on the grid");
      for (int d = 0; d < n_; ++d) f.a[d][i] = a(d);
      f.div[i] = dv;
      f.w[i] = w;
      f.max_a = std::max(f.max_a, a.norm());
      f.max_w = std::max(f.max_w, std::abs(w));
      f.max_div = std::max(f.max_div, std::abs(dv));
    }
  }

  void check_cfl(const Fields& f, double tau) const {
    if (f.max_a * std::abs(tau) > 4.0 * g_.min_dx()) {
      std::ostringstream os;
      os << "transport CFL guard violated: max|a| dt = " << f.max_a * std::abs(tau)
         << " > 4 dx = " << 4.0 * g_.min_dx();
      fail(ErrorCode::Guard, os.str());
    }
  }

  void kinetic(std::vector<cplx>& u, double tau) const {
    fft_forward(g_, u);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= std::polar(1.0, -0.5 * tau * k2_[i]);
    fft_inverse(g_, u);
  }

  // A u = (1/2)(a . D u + D . (a u)), exactly skew-Hermitian on the grid.
  void apply_transport(const Fields& f, const std::vector<cplx>& u, std::vector<cplx>& out) {
    const std::size_t N = u.size();
    spec_.assign(u.begin(), u.end());
    fft_forward(g_, spec_);
    out.assign(N, 0.0);
    for (int d = 0; d < n_; ++d) {
      tmp_.resize(N);
      for (std::size_t i = 0; i < N; ++i) tmp_[i] = spec_[i] * cplx(0.0, kvec_[d][i]);
      fft_inverse(g_, tmp_);
      for (std::size_t i = 0; i < N; ++i) out[i] += f.a[d][i] * tmp_[i];
    }
    acc_.assign(N, 0.0);
    for (int d = 0; d < n_; ++d) {
      tmp_.resize(N);
      for (std::size_t i = 0; i < N; ++i) tmp_[i] = f.a[d][i] * u[i];
      fft_forward(g_, tmp_);
      for (std::size_t i = 0; i < N; ++i) acc_[i] += cplx(0.0, kvec_[d][i]) * tmp_[i];
    }
    fft_inverse(g_, acc_);
    for (std::size_t i = 0; i < N; ++i) out[i] = 0.5 * (out[i] + acc_[i]);
  }

  // exp(tau G) u with G = A - i w, by a Taylor series on sub-steps.
  void spectral_transport(const Fields& f, std::vector<cplx>& u, double tau, EvolveStats& st) {
    double kmax = 0.0;
    for (int d = 0; d < n_; ++d) kmax += g_.nyquist(d);
    const double est = std::abs(tau) * (f.max_a * kmax + 0.5 * f.max_div + f.max_w);
    const int sub = std::max(1, static_cast<int>(std::ceil(est / 2.0)));
    const double h = tau / sub;
    std::vector<cplx> term, next, sum;
    for (int s = 0; s < sub; ++s) {
      term = u;
      sum = u;
      double umax = 0.0;
      for (const auto& v : u) umax = std::max(umax, std::abs(v));
      int k = 1;
      for (;; ++k) {
        if (k > 80) fail(ErrorCode::Numeric, "transport series failed to converge");
        apply_transport(f, term, next);
        double tmax = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
          next[i] = (next[i] - cplx(0.0, f.w[i]) * term[i]) * (h / k);
          sum[i] += next[i];
          tmax = std::max(tmax, std::abs(next[i]));
        }
        term.swap(next);
        if (tmax <= 1e-17 * umax) break;
      }
      st.max_series_terms = std::max(st.max_series_terms, k);
      u.swap(sum);
    }
  }

  void phase(const Fields& f, std::vector<cplx>& u, double tau) const {
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= std::polar(1.0, -tau * f.w[i]);
  }

  // Periodic cubic Lagrange interpolation of u at point y.
  cplx interpolate(const std::vector<cplx>& u, const Vec& y) const {
    std::array<std::array<double, 4>, kMaxDim> w{};
    std::array<std::array<std::size_t, 4>, kMaxDim> id{};
    for (int d = 0; d < n_; ++d) {
      const double pos = (y(d) + g_.half_width(d)) / g_.dx(d);
      const double fl = std::floor(pos);
      const double t = pos - fl;
      const auto m = static_cast<long long>(g_.points(d));
      const auto i0 = static_cast<long long>(fl);
      w[d] = {-t * (t - 1) * (t - 2) / 6.0, (t + 1) * (t - 1) * (t - 2) / 2.0,
              -(t + 1) * t * (t - 2) / 2.0, (t + 1) * t * (t - 1) / 6.0};
      for (int j = 0; j < 4; ++j)
        id[d][j] = static_cast<std::size_t>((((i0 - 1 + j) % m) + m) % m);
    }
    cplx acc = 0.0;
    std::array<std::size_t, kMaxDim> idx{};
    const int total = n_ == 1 ? 4 : (n_ == 2 ? 16 : 64);
    for (int c = 0; c < total; ++c) {
      int r = c;
      double wt = 1.0;
      for (int d = n_ - 1; d >= 0; --d) {
        const int j = r % 4;
        r /= 4;
        wt *= w[d][j];
        idx[d] = id[d][j];
      }
      acc += wt * u[g_.flat_index(std::span<const std::size_t>(idx.data(), n_))];
    }
    return acc;
  }

  // Semi-Lagrangian step for u_t = a . grad u + (1/2)(div a) u at midpoint time tm.
  void semi_lagrangian(std::vector<cplx>& u, double tm, double tau) const {
    std::vector<cplx> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const Vec& X = nodes_[i];
      Vec Y = X + tau * model_.value(tm, X);
      const Vec mid = 0.5 * (X + Y);
      Y = X + tau * model_.value(tm, mid);
      const double dv = model_.divergence(tm, 0.5 * (X + Y));
      out[i] = interpolate(u, Y) * std::exp(0.5 * tau * dv);
    }
    u.swap(out);
  }

  // R u = i A u + w u, the non-kinetic part of H.
  void apply_r(const Fields& f, const std::vector<cplx>& u, std::vector<cplx>& out) {
    apply_transport(f, u, out);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = cplx(0.0, 1.0) * out[i] + f.w[i] * u[i];
  }

  // Crank-Nicolson step (I + i tau H/2) u1 = (I - i tau H/2) u0, solved by fixed-point
  // iteration preconditioned with the exact kinetic inverse.
  void midpoint(const Fields& f, std::vector<cplx>& u, double tau, EvolveStats& st) {
    const std::size_t N = u.size();
    const cplx half(0.0, 0.5 * tau);
    std::vector<cplx> ku = u, ru, rhs(N), x = u, next(N);
    fft_forward(g_, ku);
    for (std::size_t i = 0; i < N; ++i) ku[i] *= 0.5 * k2_[i];
    fft_inverse(g_, ku);
    apply_r(f, u, ru);
    for (std::size_t i = 0; i < N; ++i) rhs[i] = u[i] - half * (ku[i] + ru[i]);
    double umax = 0.0;
    for (const auto& v : u) umax = std::max(umax, std::abs(v));
    int it = 0;
    for (;; ++it) {
      if (it > 500) fail(ErrorCode::Numeric, "reference midpoint iteration did not converge");
      apply_r(f, x, ru);
      for (std::size_t i = 0; i < N; ++i) next[i] = rhs[i] - half * ru[i];
      fft_forward(g_, next);
      for (std::size_t i = 0; i < N; ++i) next[i] /= 1.0 + half * (0.5 * k2_[i]);
      fft_inverse(g_, next);
      double dmax = 0.0;
      for (std::size_t i = 0; i < N; ++i) dmax = std::max(dmax, std::abs(next[i] - x[i]));
      x.swap(next);
      if (!std::isfinite(dmax)) fail(ErrorCode::Numeric, "reference midpoint iteration diverged");
      if (dmax <= 1e-14 * umax) break;
    }
    st.max_fixed_point_iters = std::max(st.max_fixed_point_iters, it + 1);
    u.swap(x);
  }

 private:
  const VectorPotentialModel& model_;
  const ScalarPotentialModel& V_;
  const GridSpec& g_;
  const EvolveConfig& cfg_;
  int n_;
  std::vector<std::vector<double>> kvec_;
  std::vector<double> k2_;
  std::vector<Vec> nodes_;
  std::vector<cplx> spec_, tmp_, acc_;
};

double l2(const GridSpec& g, const std::vector<cplx>& u) {
  double s = 0.0;
  for (const auto& v : u) s += std::norm(v);
  return std::sqrt(s * g.cell_volume());
}

void check_state(const GridFunction& u, const EvolveConfig& cfg, EvolveStats& st, double t) {
  for (const auto& v : u.values())
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      fail(ErrorCode::Numeric, "solution became non-finite");
  if (!cfg.boundary_guard) return;
  const double m = boundary_mass_fraction(u, cfg.boundary_fraction);
  st.max_boundary_mass = std::max(st.max_boundary_mass, m);
  if (m > cfg.boundary_mass_limit) {
    std::ostringstream os;
    os << "boundary-mass guard: fraction " << m << " of the squared L2 mass lies within "
       << cfg.boundary_fraction * 100 << "% of the domain edge at t = " << t;
    fail(ErrorCode::Domain, os.str());
  }
}

}  // namespace

EvolveResult evolve_with_stats(const VectorPotentialModel& model, const ScalarPotentialModel& V,
                               const GridFunction& u0, double t0, double t1,
                               const EvolveConfig& cfg) {
  const GridSpec& g = u0.grid();
  require(model.dimension() == g.dimension() && V.dimension() == g.dimension(), ErrorCode::Input,
          "potential and grid dimensions differ");
  require(cfg.dt > 0.0 && std::isfinite(cfg.dt), ErrorCode::Input, "dt must be positive");
  require(std::isfinite(t0) && std::isfinite(t1), ErrorCode::Input, "evolve times must be finite");
  if (cfg.method == EvolveMethod::ReferenceMidpoint)
    for (int d = 0; d < g.dimension(); ++d)
      require(g.points(d) <= 128, ErrorCode::Input, "reference-midpoint is limited to M <= 128");

  EvolveResult res;
  res.stats.l2_initial = u0.l2_norm();
  GridFunction u = u0;
  check_state(u, cfg, res.stats, t0);
  auto record = [&](double t, const std::vector<cplx>& v) {
    if (cfg.probe_every > 0) res.probe.emplace_back(t, l2(g, v));
  };
  record(t0, u.storage());

  const double span = t1 - t0;
  const int steps = span == 0.0 ? 0 : static_cast<int>(std::ceil(std::abs(span) / cfg.dt - 1e-9));
  const double tau = steps == 0 ? 0.0 : span / steps;
  res.stats.steps = steps;
  res.stats.dt_used = std::abs(tau);
  Solver solver(model, V, g, cfg);
  auto& data = u.storage();

  if (steps > 0 && !solver.has_potential_terms()) {
    solver.kinetic(data, span);
    check_state(u, cfg, res.stats, t1);
    record(t1, data);
  } else if (steps > 0) {
    Fields f;
    const bool fixed = solver.static_fields();
    if (fixed) {
      solver.compute_fields(t0, f);
      solver.check_cfl(f, tau);
    }
    const bool strang = cfg.method != EvolveMethod::ReferenceMidpoint;
    if (strang) solver.kinetic(data, 0.5 * tau);
    for (int s = 0; s < steps; ++s) {
      const double tm = t0 + (s + 0.5) * tau;
      if (!fixed) {
        solver.compute_fields(tm, f);
        solver.check_cfl(f, tau);
      }
      switch (cfg.method) {
        case EvolveMethod::StrangSplit:
          solver.spectral_transport(f, data, tau, res.stats);
          break;
        case EvolveMethod::StrangSemiLagrangian:
          solver.phase(f, data, 0.5 * tau);
          solver.semi_lagrangian(data, tm, tau);
          solver.phase(f, data, 0.5 * tau);
          break;
        case EvolveMethod::ReferenceMidpoint:
          solver.midpoint(f, data, tau, res.stats);
          break;
      }
      const bool last = s + 1 == steps;
      if (strang) solver.kinetic(data, last ? 0.5 * tau : tau);
      const double t = t0 + (s + 1) * tau;
      check_state(u, cfg, res.stats, t);
      if (cfg.probe_every > 0 && ((s + 1) % cfg.probe_every == 0 || last)) record(t, data);
    }
  }
  res.stats.l2_final = u.l2_norm();
  res.u = std::move(u);
  return res;
}

GridFunction evolve(const VectorPotentialModel& model, const ScalarPotentialModel& V,
                    const GridFunction& u0, double t0, double t1, const EvolveConfig& cfg) {
  return evolve_with_stats(model, V, u0, t0, t1, cfg).u;
}

cplx evolved_wpt_leading(const VectorPotentialModel& model, const GridFunction& u0,
                         const PacketSpec& packet, double t, const PhasePoint& p, double tol) {
  const FlowResult fr = flow(model, t, 0.0, p.x, p.xi, tol);
  // fr.phase = int_t^0 Psi = -int_0^t Psi.
  const cplx factor = std::exp(cplx(0.0, -1.0) * fr.phase);
  const PhasePoint p0{fr.terminal.x, fr.terminal.xi};
  cplx w;
  if (const auto* gb = std::get_if<GaussianBase>(&packet.base)) {
    w = wpt_gaussian(u0, gb->width, packet.lambda, packet.b, 0.0, p0);
  } else {
    w = wpt(u0, make_scaled_packet(u0.grid(), packet.base, packet.lambda, packet.b), p0);
  }
  return factor * w;
}

}  // namespace mswf
