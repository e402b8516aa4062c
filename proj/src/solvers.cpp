#include "odentk/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "odentk/error.hpp"

namespace odentk {

namespace {

double rms_scaled(const Vector& e, const Vector& y0, const Vector& y1, double rtol, double atol) {
  const Eigen::Index n = e.size();
  if (n == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = e[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

void integrate_fixed(const Rhs& rhs, const Vector& y0, double s_end, const SolverSpec& spec,
                     const AcceptFn& on_accept) {
  const int L = spec.steps;
  const double h = s_end / L;
  Vector y = y0;
  Vector k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size());
  double s = 0.0;
  rhs(s, y, k1);
  on_accept(s, y, k1);
  for (int i = 0; i < L; ++i) {
    if (spec.method == SolverMethod::euler) {
      y = y + h * k1;
    } else {
      const double hh = 0.5 * h;
      rhs(s + hh, y + hh * k1, k2);
      rhs(s + hh, y + hh * k2, k3);
      rhs(s + h, y + h * k3, k4);
      y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    s = (i + 1 == L) ? s_end : h * (i + 1);
    require(y.allFinite(), ErrorCode::numeric, "fixed-step solve produced non-finite state");
    rhs(s, y, k1);
    on_accept(s, y, k1);
  }
}

// Dormand-Prince 5(4), FSAL, PI step control (Hairer, Norsett & Wanner II.4).
void integrate_dopri5(const Rhs& rhs, const Vector& y0, double s_end, const SolverSpec& spec,
                      const AcceptFn& on_accept) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  constexpr double beta = 0.04, alpha = 0.2 - 0.75 * beta;
  constexpr double safety = 0.9, facmin = 0.2, facmax = 10.0;

  const double rtol = spec.rel_tol, atol = spec.abs_tol;
  const Eigen::Index n = y0.size();
  Vector y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ynew(n);
  double s = 0.0;
  rhs(s, y, k1);
  on_accept(s, y, k1);
  if (s_end <= 0.0) return;

  // Initial step guess.
  double h;
  {
    Vector zero = Vector::Zero(n);
    const double d0 = rms_scaled(y, y, zero, rtol, atol);
    const double d1 = rms_scaled(k1, y, zero, rtol, atol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, s_end);
    const Vector y1 = y + h0 * k1;
    rhs(s + h0, y1, k2);
    const double d2 = rms_scaled(k2 - k1, y, zero, rtol, atol) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min({100.0 * h0, h1, s_end});
  }

  double err_old = 1e-4;
  bool last_rejected = false;
  long attempts = 0;
  while (s < s_end) {
    if (++attempts > spec.max_steps) throw SolverFailure("adaptive solver exceeded max_steps", s);
    if (s + 1.01 * h >= s_end) h = s_end - s;
    rhs(s + c2 * h, y + h * (a21 * k1), k2);
    rhs(s + c3 * h, y + h * (a31 * k1 + a32 * k2), k3);
    rhs(s + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
    rhs(s + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
    rhs(s + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double s_new = (h == s_end - s) ? s_end : s + h;
    rhs(s_new, ynew, k7);
    const Vector errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = rms_scaled(errv, y, ynew, rtol, atol);
    if (!std::isfinite(err)) err = 1e10;
    if (err <= 1.0) {
      const double fac = std::clamp(safety * std::pow(err, -alpha) * std::pow(err_old, beta), facmin,
                                    last_rejected ? 1.0 : facmax);
      err_old = std::max(err, 1e-4);
      s = s_new;
      y.swap(ynew);
      k1.swap(k7);
      on_accept(s, y, k1);
      h *= err == 0.0 ? facmax : fac;
      last_rejected = false;
    } else {
      h *= std::max(facmin, safety * std::pow(err, -alpha));
      last_rejected = true;
    }
    if (h < 1e-14 * std::max(1.0, s_end)) throw SolverFailure("adaptive step size underflow", s);
  }
}

void validate_grid(const Trajectory& fwd, double T) {
  require(fwd.size() >= 2 && fwd.direction == Direction::forward, ErrorCode::input,
          "backward solve needs a forward trajectory with at least two nodes");
  require(std::abs(fwd.times.front()) <= 1e-13 * T && std::abs(fwd.times.back() - T) <= 1e-12 * T, ErrorCode::input,
          "forward trajectory does not span [0, T]");
}

}  // namespace

const char* solver_method_name(SolverMethod m) noexcept {
  switch (m) {
    case SolverMethod::euler:
      return "euler";
    case SolverMethod::rk4:
      return "rk4";
    case SolverMethod::adaptive:
      return "adaptive";
  }
  return "?";
}

SolverMethod solver_method_from_name(std::string_view name) {
  if (name == "euler") return SolverMethod::euler;
  if (name == "rk4") return SolverMethod::rk4;
  if (name == "adaptive" || name == "dopri5") return SolverMethod::adaptive;
  fail(ErrorCode::config, "unknown solver method '" + std::string(name) + "'");
}

SolverSpec SolverSpec::euler(int steps) {
  SolverSpec s;
  s.method = SolverMethod::euler;
  s.steps = steps;
  return s;
}

SolverSpec SolverSpec::rk4(int steps) {
  SolverSpec s;
  s.method = SolverMethod::rk4;
  s.steps = steps;
  return s;
}

SolverSpec SolverSpec::adaptive(double rel_tol, double abs_tol) {
  SolverSpec s;
  s.method = SolverMethod::adaptive;
  s.rel_tol = rel_tol;
  s.abs_tol = abs_tol;
  return s;
}

void SolverSpec::validate() const {
  if (method == SolverMethod::adaptive) {
    require(rel_tol > 0.0 && abs_tol > 0.0, ErrorCode::config, "adaptive tolerances must be positive");
    require(max_steps >= 1, ErrorCode::config, "max_steps must be positive");
  } else {
    require(steps >= 1, ErrorCode::config, "fixed-step solves need steps >= 1");
  }
}

long Trajectory::node_index(double t) const {
  if (times.empty()) return -1;
  const double scale = std::max({1.0, std::abs(times.front()), std::abs(times.back())});
  const bool ascending = times.back() >= times.front();
  auto it = ascending ? std::lower_bound(times.begin(), times.end(), t)
                      : std::lower_bound(times.begin(), times.end(), t, std::greater<double>());
  for (auto cand : {it, it == times.begin() ? it : it - 1}) {
    if (cand != times.end() && std::abs(*cand - t) <= 1e-13 * scale) return cand - times.begin();
  }
  return -1;
}

Vector Trajectory::interpolate(double t) const {
  require(!times.empty(), ErrorCode::input, "empty trajectory");
  const long idx = node_index(t);
  if (idx >= 0) return states[idx];
  const bool ascending = times.back() >= times.front();
  const double lo_t = std::min(times.front(), times.back());
  const double hi_t = std::max(times.front(), times.back());
  require(t >= lo_t && t <= hi_t, ErrorCode::input, "interpolation time outside the trajectory");
  std::size_t j = ascending ? std::upper_bound(times.begin(), times.end(), t) - times.begin()
                            : std::upper_bound(times.begin(), times.end(), t, std::greater<double>()) - times.begin();
  j = std::clamp<std::size_t>(j, 1, times.size() - 1);
  const std::size_t i = j - 1;
  const double t0 = times[i], t1 = times[j];
  const double h = t1 - t0;
  const double u = (t - t0) / h;
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u, h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
  return h00 * states[i] + (h10 * h) * slopes[i] + h01 * states[j] + (h11 * h) * slopes[j];
}

void integrate(const Rhs& rhs, const Vector& y0, double s_end, const SolverSpec& spec, const AcceptFn& on_accept) {
  spec.validate();
  require(s_end > 0.0 && std::isfinite(s_end), ErrorCode::config, "integration length must be positive");
  if (spec.method == SolverMethod::adaptive) {
    integrate_dopri5(rhs, y0, s_end, spec, on_accept);
  } else {
    integrate_fixed(rhs, y0, s_end, spec, on_accept);
  }
}

Trajectory solve_forward(const ModelConfig& cfg, const Params& p, const Vector& x, const SolverSpec& s) {
  cfg.validate();
  check_params(cfg, p);
  Trajectory traj;
  traj.direction = Direction::forward;
  const Vector h0 = initial_state(cfg, p, x);
  integrate([&](double, const Vector& y, Vector& dy) { dy = vector_field(cfg, p, y); }, h0, cfg.horizon, s,
            [&](double t, const Vector& y, const Vector& dy) {
              traj.times.push_back(t);
              traj.states.push_back(y);
              traj.slopes.push_back(dy);
            });
  return traj;
}

Trajectory solve_backward_adjoint(const ModelConfig& cfg, const Params& p, const Trajectory& fwd,
                                  const SolverSpec& s) {
  cfg.validate();
  check_params(cfg, p);
  s.validate();
  const double T = cfg.horizon;
  validate_grid(fwd, T);
  if (s.method != SolverMethod::adaptive) {
    // Fixed-step backward solves must share the forward grid.
    bool same = fwd.size() == static_cast<std::size_t>(s.steps) + 1;
    for (std::size_t i = 0; same && i < fwd.size(); ++i)
      same = std::abs(fwd.times[i] - T * static_cast<double>(i) / s.steps) <= 1e-12 * T;
    // A forward trajectory at least as fine as the backward grid is read by interpolation.
    const bool dense = fwd.size() >= static_cast<std::size_t>(s.steps) + 1;
    require(same || dense, ErrorCode::input, "backward grid does not match the forward trajectory");
  }
  Trajectory back;
  back.direction = Direction::backward;
  const Vector lambda_T = adjoint_terminal(cfg, p, fwd.terminal());
  try {
  integrate(
      [&](double sv, const Vector& lam, Vector& dlam) {
        const double t = sv == T ? 0.0 : T - sv;
        dlam = adjoint_field(cfg, p, fwd.interpolate(t), lam);
      },
      lambda_T, T, s,
      [&](double sv, const Vector& lam, const Vector& dlam) {
        back.times.push_back(sv == T ? 0.0 : T - sv);
        back.states.push_back(lam);
        back.slopes.push_back(-dlam);
      });
  } catch (const SolverFailure& e) {
    throw SolverFailure(e.what(), T - e.last_time());
  }
  return back;
}

AugmentedResult solve_augmented(const ModelConfig& cfg, const Params& p, const Vector& h_T, const SolverSpec& s) {
  cfg.validate();
  check_params(cfg, p);
  const Eigen::Index n = cfg.width;
  require(h_T.size() == n, ErrorCode::shape, "h_T must have length n");
  const double scale = cfg.sigma_w / std::sqrt(static_cast<double>(n));
  Vector y0 = Vector::Zero(2 * n + n * n);
  y0.head(n) = h_T;
  y0.segment(n, n) = adjoint_terminal(cfg, p, h_T);
  Vector last;
  integrate(
      [&](double, const Vector& y, Vector& dy) {
        dy.resize(y.size());
        const Vector h = y.head(n);
        const Vector lam = y.segment(n, n);
        const Vector phi = apply_value(cfg.activation, h);
        dy.head(n) = -scale * (p.W * phi);
        dy.segment(n, n) = adjoint_field(cfg, p, h, lam);
        Eigen::Map<Matrix>(dy.data() + 2 * n, n, n) = scale * lam * phi.transpose();
      },
      y0, cfg.horizon, s, [&](double, const Vector& y, const Vector&) { last = y; });
  AugmentedResult r;
  r.h0 = last.head(n);
  r.lambda0 = last.segment(n, n);
  r.g0 = Eigen::Map<const Matrix>(last.data() + 2 * n, n, n);
  return r;
}

std::vector<Vector> discretize_resnet_forward(const ModelConfig& cfg, const Params& p, const Vector& x, int L) {
  cfg.validate();
  check_params(cfg, p);
  require(L >= 1, ErrorCode::config, "L must be >= 1");
  const double kappa = cfg.horizon / L;
  std::vector<Vector> h;
  h.reserve(L + 1);
  h.push_back(initial_state(cfg, p, x));
  for (int l = 1; l <= L; ++l) {
    const Vector k = vector_field(cfg, p, h.back());
    h.push_back(h.back() + kappa * k);
  }
  return h;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
  out << "t";
  for (std::size_t i = 0; i < n; ++i) out << ",state_" << i;
  out << '\n';
  out.precision(17);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << traj.times[k];
    for (std::size_t i = 0; i < n; ++i) out << ',' << traj.states[k][i];
    out << '\n';
  }
}

}  // namespace odentk
