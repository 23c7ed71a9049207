#include "mswf/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mswf/errors.hpp"

namespace mswf {
namespace {

using Eigen::VectorXd;

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr int kMaxSteps = 2000000;

struct System {
  const VectorPotentialModel& model;
  const std::vector<FlowIntegrand>& extras;
  int n;
  int evaluations = 0;

  VectorXd operator()(double s, const VectorXd& y) {
    ++evaluations;
    const Vec x = y.segment(0, n);
    const Vec xi = y.segment(n, n);
    const Vec a = model.value(s, x);
    const Mat J = model.jacobian(s, x);
    const Vec v = xi - a;
    const Vec jt_v = J.transpose() * v;
    VectorXd f(y.size());
    f.segment(0, n) = v;
    f.segment(n, n) = jt_v;
    // Psi = -h + grad_x h . x + (i/2) div a
    f(2 * n) = -0.5 * v.squaredNorm() - jt_v.dot(x);
    f(2 * n + 1) = 0.5 * J.trace();
    for (std::size_t k = 0; k < extras.size(); ++k) f(2 * n + 2 + k) = extras[k](s, x, xi);
    return f;
  }
};

double scaled_norm(const VectorXd& e, const VectorXd& y0, const VectorXd& y1, double tol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double sc = tol + tol * std::max(std::abs(y0(i)), std::abs(y1(i)));
    acc += (e(i) / sc) * (e(i) / sc);
  }
  return std::sqrt(acc / static_cast<double>(e.size()));
}

double initial_step(System& sys, double s0, const VectorXd& y0, const VectorXd& f0, double tol,
                    double span) {
  const double d0 = scaled_norm(y0, y0, y0, tol);
  const double d1 = scaled_norm(f0, y0, y0, tol);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, std::abs(span));
  const double dir = span >= 0 ? 1.0 : -1.0;
  const VectorXd y1 = y0 + dir * h0 * f0;
  const VectorXd f1 = sys(s0 + dir * h0, y1);
  const double d2 = scaled_norm(f1 - f0, y0, y0, tol) / h0;
  const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                              : std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min({100.0 * h0, h1, std::abs(span)});
}

FlowState unpack(double s, const VectorXd& y, int n) {
  return {s, y.segment(0, n), y.segment(n, n)};
}

}  // namespace

// --- FlowResult ---------------------------------------------------------------

VectorXd FlowResult::packed_at(double s) const {
  const double lo = std::min(times_.front(), times_.back());
  const double hi = std::max(times_.front(), times_.back());
  const double slack = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
  require(s >= lo - slack && s <= hi + slack, ErrorCode::Input,
          "dense output requested outside the integrated interval");
  if (times_.size() == 1) return y_.front();
  const bool forward = times_.back() >= times_.front();
  // First accepted time at or beyond s in the direction of integration.
  auto it = forward ? std::lower_bound(times_.begin(), times_.end(), s)
                    : std::lower_bound(times_.begin(), times_.end(), s, std::greater<double>());
  std::size_t j = static_cast<std::size_t>(std::distance(times_.begin(), it));
  if (j == 0) return y_.front();
  if (j >= times_.size()) return y_.back();
  if (times_[j] == s) return y_[j];
  const std::size_t i = j - 1;
  const double h = times_[j] - times_[i];
  const double th = (s - times_[i]) / h;
  const double h00 = (1 + 2 * th) * (1 - th) * (1 - th);
  const double h10 = th * (1 - th) * (1 - th);
  const double h01 = th * th * (3 - 2 * th);
  const double h11 = th * th * (th - 1);
  return h00 * y_[i] + h10 * h * f_[i] + h01 * y_[j] + h11 * h * f_[j];
}

FlowState FlowResult::state_at(double s) const { return unpack(s, packed_at(s), n_); }

cplx FlowResult::phase_at(double s) const {
  const VectorXd y = packed_at(s);
  return {y(2 * n_), y(2 * n_ + 1)};
}

double FlowResult::extra_at(double s, std::size_t k) const {
  return packed_at(s)(2 * n_ + 2 + static_cast<Eigen::Index>(k));
}

// --- Hamiltonian pieces --------------------------------------------------------

double hamiltonian(const VectorPotentialModel& model, double t, const Vec& x, const Vec& xi) {
  require(x.size() == model.dimension() && xi.size() == model.dimension(), ErrorCode::Input,
          "phase point dimension does not match the model");
  return 0.5 * (xi - model.value(t, x)).squaredNorm();
}

cplx psi(const VectorPotentialModel& model, double t, const Vec& x, const Vec& xi) {
  require(x.size() == model.dimension() && xi.size() == model.dimension(), ErrorCode::Input,
          "phase point dimension does not match the model");
  const Vec v = xi - model.value(t, x);
  const Mat J = model.jacobian(t, x);
  const Vec grad_h = -(J.transpose() * v);
  return {-0.5 * v.squaredNorm() + grad_h.dot(x), 0.5 * J.trace()};
}

// --- integrator ------------------------------------------------------------------

FlowResult flow(const VectorPotentialModel& model, double t0, double s_target, const Vec& x0,
                const Vec& xi0, double tol, const std::vector<FlowIntegrand>& extras) {
  const int n = model.dimension();
  require(x0.size() == n && xi0.size() == n, ErrorCode::Input,
          "initial phase point dimension does not match the model");
  require(tol >= 1e-13 && tol <= 1e-3, ErrorCode::Input, "flow tolerance must lie in [1e-13, 1e-3]");
  require(std::isfinite(t0) && std::isfinite(s_target), ErrorCode::Input, "flow times must be finite");
  require(x0.allFinite() && xi0.allFinite(), ErrorCode::Input, "initial phase point must be finite");

  const int dim = 2 * n + 2 + static_cast<int>(extras.size());
  VectorXd y = VectorXd::Zero(dim);
  y.segment(0, n) = x0;
  y.segment(n, n) = xi0;

  System sys{model, extras, n};
  FlowResult res;
  res.n_ = n;
  res.stats.tol = tol;
  VectorXd f = sys(t0, y);
  res.times_.push_back(t0);
  res.y_.push_back(y);
  res.f_.push_back(f);

  const double span = s_target - t0;
  double s = t0;
  if (span != 0.0) {
    const double dir = span > 0 ? 1.0 : -1.0;
    double h = initial_step(sys, t0, y, f, tol, span);
    bool last_rejected = false;
    while (dir * (s_target - s) > 0.0) {
      if (res.stats.steps + res.stats.rejections > kMaxSteps)
        fail(ErrorCode::Numeric, "flow exceeded the step budget");
      const double remaining = std::abs(s_target - s);
      bool final_step = false;
      if (h >= remaining) {
        h = remaining;
        final_step = true;
      }
      if (h < 1e-14 * std::max(1.0, std::abs(s))) {
        std::ostringstream os;
        os << "flow step underflow at s = " << s << " (h = " << h << ")";
        fail(ErrorCode::Numeric, os.str());
      }
      const double hs = dir * h;
      const VectorXd k1 = f;
      const VectorXd k2 = sys(s + c2 * hs, y + hs * (a21 * k1));
      const VectorXd k3 = sys(s + c3 * hs, y + hs * (a31 * k1 + a32 * k2));
      const VectorXd k4 = sys(s + c4 * hs, y + hs * (a41 * k1 + a42 * k2 + a43 * k3));
      const VectorXd k5 = sys(s + c5 * hs, y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const VectorXd k6 =
          sys(s + hs, y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const VectorXd ynew = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const double snew = final_step ? s_target : s + hs;
      const VectorXd k7 = sys(snew, ynew);
      const VectorXd err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double en = scaled_norm(err, y, ynew, tol);
      if (!std::isfinite(en) || !ynew.allFinite()) {
        if (!ynew.allFinite() && h < 1e-10) fail(ErrorCode::Numeric, "flow state became non-finite");
        h *= 0.2;
        ++res.stats.rejections;
        last_rejected = true;
        continue;
      }
      if (en <= 1.0) {
        s = snew;
        y = ynew;
        f = k7;
        ++res.stats.steps;
        res.times_.push_back(s);
        res.y_.push_back(y);
        res.f_.push_back(f);
        double fac = en == 0.0 ? 5.0 : 0.9 * std::pow(en, -0.2);
        fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
        h *= fac;
        last_rejected = false;
      } else {
        h *= std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0);
        ++res.stats.rejections;
        last_rejected = true;
      }
    }
  }
  res.stats.evaluations = sys.evaluations;
  for (std::size_t i = 0; i < res.times_.size(); ++i)
    res.trajectory.push_back(unpack(res.times_[i], res.y_[i], n));
  res.terminal = res.trajectory.back();
  res.phase = {y(2 * n), y(2 * n + 1)};
  for (std::size_t k = 0; k < extras.size(); ++k) res.extras.push_back(y(2 * n + 2 + k));
  return res;
}

cplx phase_integral(const VectorPotentialModel& model, double t0, double t, const Vec& x0,
                    const Vec& xi0, double tol) {
  const cplx to_t = flow(model, t0, t, x0, xi0, tol).phase;
  if (t0 == 0.0) return to_t;
  return to_t - flow(model, t0, 0.0, x0, xi0, tol).phase;
}

// --- suites ----------------------------------------------------------------------

std::vector<double> log_space(double lo, double hi, int count) {
  require(lo > 0.0 && hi > 0.0 && count >= 1, ErrorCode::Input, "log_space needs positive bounds");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < count; ++i) out[i] = std::exp(a + (b - a) * i / (count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

nlohmann::json FlowBoundsRung::to_json() const {
  return {{"lambda", lambda},           {"samples", samples},
          {"violations", violations},   {"x_ratio_min", x_ratio_min},
          {"x_ratio_max", x_ratio_max}, {"xi_ratio_min", xi_ratio_min},
          {"xi_ratio_max", xi_ratio_max}, {"pass", pass()}};
}

nlohmann::json FlowBoundsReport::to_json() const {
  nlohmann::json r = nlohmann::json::array(), v = nlohmann::json::array();
  for (const auto& x : rungs) r.push_back(x.to_json());
  for (const auto& x : validation) v.push_back(x.to_json());
  return {{"rungs", r},
          {"lambda_hat0", std::isfinite(lambda_hat0) ? nlohmann::json(lambda_hat0)
                                                     : nlohmann::json("inf")},
          {"validation", v},
          {"validation_violations", validation_violations},
          {"pass", pass}};
}

FlowBoundsRung flow_bounds_rung(const VectorPotentialModel& model, const FlowBoundsConfig& cfg,
                                double lambda) {
  require(cfg.a_param >= 1.0, ErrorCode::Input, "Gamma_a parameter must be >= 1");
  require(cfg.p > 0.0 && cfg.p < 1.0, ErrorCode::Input, "window exponent p must lie in (0, 1)");
  require(cfg.t0 > 0.0, ErrorCode::Input, "t0 must be positive");
  FlowBoundsRung rung;
  rung.lambda = lambda;
  const double lo = 1.0 / (2.0 * cfg.a_param), hi = 2.0 * cfg.a_param;
  const double s_min = std::pow(lambda, cfg.p - 1.0);
  if (s_min > cfg.t0) return rung;
  const auto window = log_space(s_min, cfg.t0, cfg.s_samples);
  for (const auto& x : cfg.x_samples)
    for (const auto& xi : cfg.xi_samples) {
      const double m = xi.norm();
      require(m >= 1.0 / cfg.a_param - 1e-12 && m <= cfg.a_param + 1e-12, ErrorCode::Input,
              "xi samples must lie in Gamma_a");
      const FlowResult fr = flow(model, cfg.t0, 0.0, x, lambda * xi, cfg.tol);
      for (double ss : window) {
        const FlowState st = fr.state_at(cfg.t0 - ss);
        const double rx = st.x.norm() / (ss * lambda);
        const double rk = st.xi.norm() / lambda;
        rung.x_ratio_min = std::min(rung.x_ratio_min, rx);
        rung.x_ratio_max = std::max(rung.x_ratio_max, rx);
        rung.xi_ratio_min = std::min(rung.xi_ratio_min, rk);
        rung.xi_ratio_max = std::max(rung.xi_ratio_max, rk);
        ++rung.samples;
        if (rx < lo || rx > hi || rk < lo || rk > hi) ++rung.violations;
      }
    }
  return rung;
}

FlowBoundsReport check_flow_bounds(const VectorPotentialModel& model, const FlowBoundsConfig& cfg) {
  require(!cfg.lambdas.empty() && std::is_sorted(cfg.lambdas.begin(), cfg.lambdas.end()),
          ErrorCode::Input, "lambda ladder must be non-empty and increasing");
  require(!cfg.x_samples.empty() && !cfg.xi_samples.empty(), ErrorCode::Input,
          "flow bounds need position and direction samples");
  FlowBoundsReport rep;
  for (double lam : cfg.lambdas) rep.rungs.push_back(flow_bounds_rung(model, cfg, lam));
  for (std::size_t i = rep.rungs.size(); i-- > 0;) {
    if (!rep.rungs[i].pass()) break;
    rep.lambda_hat0 = rep.rungs[i].lambda;
  }
  if (std::isfinite(rep.lambda_hat0)) {
    for (std::size_t i = 0; i + 1 < rep.rungs.size(); ++i) {
      if (rep.rungs[i].lambda < 2.0 * rep.lambda_hat0) continue;
      const double mid = rep.rungs[i].lambda * std::sqrt(2.0);
      if (mid >= rep.rungs[i + 1].lambda) continue;
      rep.validation.push_back(flow_bounds_rung(model, cfg, mid));
      rep.validation_violations += rep.validation.back().violations;
    }
  }
  rep.pass = std::isfinite(rep.lambda_hat0) && rep.validation_violations == 0;
  return rep;
}

nlohmann::json IntegralBoundReport::to_json() const {
  return {{"lambdas", lambdas}, {"sup_ratio", sup_ratio}, {"variation", variation},
          {"stable", stable}};
}

double integral_bound_value(const VectorPotentialModel& model, const IntegralBoundConfig& cfg,
                            const Vec& x, const Vec& xi) {
  require(cfg.delta > 0.0, ErrorCode::Input, "delta must be positive");
  require(cfg.b >= cfg.a, ErrorCode::Input, "interval must satisfy a <= b");
  if (cfg.a == cfg.b) return 0.0;
  Vec xa = x, xia = xi;
  if (cfg.base_time != cfg.a) {
    const FlowState st = flow(model, cfg.base_time, cfg.a, x, xi, cfg.tol).terminal;
    xa = st.x;
    xia = st.xi;
  }
  const double d = cfg.delta;
  const std::vector<FlowIntegrand> extra{[d](double, const Vec& y, const Vec& k) {
    return k.norm() / std::pow(bracket(y), 1.0 + d);
  }};
  return flow(model, cfg.a, cfg.b, xa, xia, cfg.tol, extra).extras[0];
}

IntegralBoundReport check_integral_bound(const VectorPotentialModel& model,
                                         const IntegralBoundConfig& cfg) {
  require(!cfg.x_samples.empty() && !cfg.xi_samples.empty(), ErrorCode::Input,
          "integral bound needs position and direction samples");
  IntegralBoundReport rep;
  rep.lambdas = cfg.lambdas;
  for (double lam : cfg.lambdas) {
    double sup = 0.0;
    for (const auto& x : cfg.x_samples)
      for (const auto& xi : cfg.xi_samples)
        sup = std::max(sup, integral_bound_value(model, cfg, x, lam * xi) /
                                (1.0 + std::abs(cfg.b - cfg.a)));
    rep.sup_ratio.push_back(sup);
  }
  const auto [mn, mx] = std::minmax_element(rep.sup_ratio.begin(), rep.sup_ratio.end());
  rep.variation = *mx == 0.0 ? 1.0 : (*mn == 0.0 ? std::numeric_limits<double>::infinity()
                                                 : *mx / *mn);
  rep.stable = rep.variation < 2.0;
  return rep;
}

nlohmann::json LowerBoundReport::to_json() const {
  return {{"lambdas", lambdas}, {"ratio_min", ratio_min}, {"ratio_max", ratio_max},
          {"converged", converged}};
}

LowerBoundReport lower_bound_x0(const VectorPotentialModel& model, const LowerBoundConfig& cfg) {
  require(cfg.t0 > 0.0, ErrorCode::Input, "t0 must be positive");
  require(!cfg.lambdas.empty() && !cfg.x_samples.empty() && !cfg.xi_samples.empty(),
          ErrorCode::Input, "lower bound needs a ladder and samples");
  LowerBoundReport rep;
  rep.lambdas = cfg.lambdas;
  for (double lam : cfg.lambdas) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& x : cfg.x_samples)
      for (const auto& xi : cfg.xi_samples) {
        require(xi.norm() > 0.0, ErrorCode::Input, "direction samples must be non-zero");
        const FlowState st = flow(model, cfg.t0, 0.0, x, lam * xi, cfg.tol).terminal;
        const double r = st.x.norm() / (lam * cfg.t0 * xi.norm());
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    rep.ratio_min.push_back(lo);
    rep.ratio_max.push_back(hi);
  }
  rep.converged = rep.ratio_min.back() >= 0.9 && rep.ratio_max.back() <= 1.1;
  return rep;
}

}  // namespace mswf
