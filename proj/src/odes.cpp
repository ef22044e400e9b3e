#include "eidgm/odes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include "eidgm/errors.hpp"

namespace eidgm::odes {
namespace {

void require_dims(std::span<const double> y, std::span<const double> p, std::size_t ny,
                  std::size_t np, const char* name) {
  if (y.size() != ny || p.size() != np) {
    throw ShapeError(std::string(name) + ": expected state/param dims " + std::to_string(ny) +
                     "/" + std::to_string(np) + ", got " + std::to_string(y.size()) + "/" +
                     std::to_string(p.size()));
  }
}

// Shared by the numeric and tape right-hand sides.
template <class V, class P>
std::array<V, 1> exponential_rhs(const V& y, const P& r) {
  return {r * y};
}

template <class V, class P>
std::array<V, 1> logistic_rhs(const V& y, const P& r, const P& K) {
  return {r * y * (1.0 - y / K)};
}

template <class V, class P>
std::array<V, 3> lorenz_rhs(const V& x, const V& y, const V& z, const P& sigma, const P& rho,
                            const P& beta) {
  return {sigma * (y - x), x * (rho - z) - y, x * y - beta * z};
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
// Error estimate: 5th-order minus embedded 4th-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension (Hairer & Wanner's contd5 coefficients).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

class Stepper {
 public:
  Stepper(const OdeSystem& sys, std::span<const double> p)
      : sys_(sys), p_(p), n_(sys.state_dim), k_(7, std::vector<double>(n_)), tmp_(n_) {}

  void f(double t, const std::vector<double>& y, std::vector<double>& out) {
    sys_.rhs(y, p_, t, out);
  }

  // One step of size h from (t, y) with k_[0] = f(t, y). Fills y_new, err,
  // and k_[6] = f(t + h, y_new).
  void step(double t, const std::vector<double>& y, double h, std::vector<double>& y_new,
            std::vector<double>& err) {
    auto& k1 = k_[0];
    auto& k2 = k_[1];
    auto& k3 = k_[2];
    auto& k4 = k_[3];
    auto& k5 = k_[4];
    auto& k6 = k_[5];
    auto& k7 = k_[6];
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, tmp_, k2);
    for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, tmp_, k3);
    for (std::size_t i = 0; i < n_; ++i) {
      tmp_[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    }
    f(t + c4 * h, tmp_, k4);
    for (std::size_t i = 0; i < n_; ++i) {
      tmp_[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    }
    f(t + c5 * h, tmp_, k5);
    for (std::size_t i = 0; i < n_; ++i) {
      tmp_[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    }
    f(t + h, tmp_, k6);
    for (std::size_t i = 0; i < n_; ++i) {
      y_new[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    }
    f(t + h, y_new, k7);
    for (std::size_t i = 0; i < n_; ++i) {
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    }
  }

  // Dense output on the last accepted step [t, t + h].
  void interpolate(const std::vector<double>& y, const std::vector<double>& y_new, double h,
                   double theta, std::span<double> out) const {
    const auto& k1 = k_[0];
    const double theta1 = 1.0 - theta;
    for (std::size_t i = 0; i < n_; ++i) {
      const double ydiff = y_new[i] - y[i];
      const double bspl = h * k1[i] - ydiff;
      const double r4 = ydiff - h * k_[6][i] - bspl;
      const double r5 = h * (d1 * k1[i] + d3 * k_[2][i] + d4 * k_[3][i] + d5 * k_[4][i] +
                             d6 * k_[5][i] + d7 * k_[6][i]);
      out[i] = y[i] + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)));
    }
  }

  std::vector<double>& k1() { return k_[0]; }
  std::vector<double>& k7() { return k_[6]; }

 private:
  const OdeSystem& sys_;
  std::span<const double> p_;
  std::size_t n_;
  std::vector<std::vector<double>> k_;
  std::vector<double> tmp_;
};

double rms_norm(const std::vector<double>& v, const std::vector<double>& sc) {
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double q = v[i] / sc[i];
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

std::vector<double> OdeSystem::evaluate(std::span<const double> y, std::span<const double> p,
                                        double t) const {
  require_dims(y, p, state_dim, param_dim, name.c_str());
  std::vector<double> out(state_dim);
  rhs(y, p, t, out);
  return out;
}

std::vector<double> rhs_exponential(std::span<const double> y, std::span<const double> p,
                                    double) {
  require_dims(y, p, 1, 1, "exponential");
  return {exponential_rhs(y[0], p[0])[0]};
}

std::vector<double> rhs_logistic(std::span<const double> y, std::span<const double> p, double) {
  require_dims(y, p, 1, 2, "logistic");
  if (p[1] == 0.0) throw DomainError("logistic: carrying capacity K must be nonzero");
  return {logistic_rhs(y[0], p[0], p[1])[0]};
}

std::vector<double> rhs_lorenz(std::span<const double> y, std::span<const double> p, double) {
  require_dims(y, p, 3, 3, "lorenz");
  const auto d = lorenz_rhs(y[0], y[1], y[2], p[0], p[1], p[2]);
  return {d.begin(), d.end()};
}

OdeSystem exponential() {
  OdeSystem s;
  s.name = "exponential";
  s.state_dim = 1;
  s.param_dim = 1;
  s.rhs = [](std::span<const double> y, std::span<const double> p, double,
             std::span<double> out) { out[0] = exponential_rhs(y[0], p[0])[0]; };
  s.tape_rhs = [](std::span<const diff::Var> y, std::span<const diff::Var> p, diff::Var) {
    const auto d = exponential_rhs(y[0], p[0]);
    return std::vector<diff::Var>(d.begin(), d.end());
  };
  return s;
}

OdeSystem logistic() {
  OdeSystem s;
  s.name = "logistic";
  s.state_dim = 1;
  s.param_dim = 2;
  s.rhs = [](std::span<const double> y, std::span<const double> p, double,
             std::span<double> out) { out[0] = logistic_rhs(y[0], p[0], p[1])[0]; };
  s.tape_rhs = [](std::span<const diff::Var> y, std::span<const diff::Var> p, diff::Var) {
    const auto d = logistic_rhs(y[0], p[0], p[1]);
    return std::vector<diff::Var>(d.begin(), d.end());
  };
  return s;
}

OdeSystem lorenz() {
  OdeSystem s;
  s.name = "lorenz";
  s.state_dim = 3;
  s.param_dim = 3;
  s.rhs = [](std::span<const double> y, std::span<const double> p, double,
             std::span<double> out) {
    const auto d = lorenz_rhs(y[0], y[1], y[2], p[0], p[1], p[2]);
    std::copy(d.begin(), d.end(), out.begin());
  };
  s.tape_rhs = [](std::span<const diff::Var> y, std::span<const diff::Var> p, diff::Var) {
    const auto d = lorenz_rhs(y[0], y[1], y[2], p[0], p[1], p[2]);
    return std::vector<diff::Var>(d.begin(), d.end());
  };
  return s;
}

OdeSystem system_by_name(const std::string& name) {
  if (name == "exponential") return exponential();
  if (name == "logistic") return logistic();
  if (name == "lorenz") return lorenz();
  throw ConfigError("unknown ODE system '" + name + "'");
}

double closed_form_exponential(double r, double y0, double t) { return y0 * std::exp(r * t); }

double closed_form_logistic(double r, double K, double y0, double t) {
  if (!(y0 > 0.0) || !(K > 0.0)) throw DomainError("logistic closed form needs y0 > 0, K > 0");
  return K / (1.0 + ((K - y0) / y0) * std::exp(-r * t));
}

Trajectory integrate(const OdeSystem& system, std::span<const double> y0,
                     std::span<const double> p, std::span<const double> t_grid, double rel_tol,
                     double abs_tol) {
  if (t_grid.empty()) throw ShapeError("integrate: empty time grid");
  return integrate_from(system, t_grid.front(), y0, p, t_grid,
                        IntegratorOptions{rel_tol, abs_tol, 1'000'000});
}

Trajectory integrate_from(const OdeSystem& system, double t0, std::span<const double> y0,
                          std::span<const double> p, std::span<const double> t_grid,
                          const IntegratorOptions& options) {
  const std::size_t n = system.state_dim;
  require_dims(y0, p, n, system.param_dim, system.name.c_str());
  if (!(options.rel_tol > 0.0) || !(options.abs_tol > 0.0)) {
    throw DomainError("integrate: tolerances must be positive");
  }
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) {
      throw ContractError("integrate: time grid must be strictly ascending");
    }
  }
  if (!t_grid.empty() && t_grid.front() < t0) {
    throw ContractError("integrate: time grid starts before the initial time");
  }

  Trajectory traj;
  traj.times.assign(t_grid.begin(), t_grid.end());
  traj.states = Matrix(t_grid.size(), n);
  traj.params.assign(p.begin(), p.end());
  if (t_grid.empty()) return traj;

  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> y_new(n), err(n), sc(n);
  Stepper st(system, p);

  std::size_t next = 0;
  while (next < t_grid.size() && t_grid[next] == t0) {
    std::copy(y.begin(), y.end(), traj.states.row(next).begin());
    ++next;
  }
  if (next == t_grid.size()) return traj;

  const double t_end = t_grid.back();
  double t = t0;
  st.f(t, y, st.k1());

  // Initial step size (Hairer, Norsett & Wanner, II.4).
  for (std::size_t i = 0; i < n; ++i) sc[i] = options.abs_tol + options.rel_tol * std::abs(y[i]);
  double h;
  {
    const double d0 = rms_norm(y, sc);
    const double d1n = rms_norm(st.k1(), sc);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, t_end - t);
    std::vector<double> y1(n), f1(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = y[i] + h0 * st.k1()[i];
    st.f(t + h0, y1, f1);
    std::vector<double> df(n);
    for (std::size_t i = 0; i < n; ++i) df[i] = f1[i] - st.k1()[i];
    const double d2 = rms_norm(df, sc) / h0;
    const double dm = std::max(d1n, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    h = std::min(100.0 * h0, h1);
  }

  constexpr double kSafety = 0.9, kFacMin = 0.2, kFacMax = 10.0;
  bool last_rejected = false;
  std::size_t steps = 0;
  while (next < t_grid.size()) {
    if (++steps > options.max_steps) {
      throw IntegrationError(system.name + ": step budget exhausted", t);
    }
    h = std::min(h, t_end - t);
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      throw IntegrationError(system.name + ": step size underflow", t);
    }
    st.step(t, y, h, y_new, err);
    for (std::size_t i = 0; i < n; ++i) {
      sc[i] = options.abs_tol + options.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
    }
    const double e = rms_norm(err, sc);
    if (!std::isfinite(e)) {
      // Shrink hard; the underflow check above ends runaway solutions.
      h *= kFacMin;
      last_rejected = true;
      continue;
    }
    if (e <= 1.0) {
      const double t_new = (h == t_end - t) ? t_end : t + h;
      while (next < t_grid.size() && t_grid[next] <= t_new) {
        if (t_grid[next] == t_new) {
          std::copy(y_new.begin(), y_new.end(), traj.states.row(next).begin());
        } else {
          st.interpolate(y, y_new, h, (t_grid[next] - t) / h, traj.states.row(next));
        }
        ++next;
      }
      t = t_new;
      y.swap(y_new);
      std::swap(st.k1(), st.k7());
      double fac = e == 0.0 ? kFacMax : kSafety * std::pow(e, -1.0 / 5.0);
      fac = std::clamp(fac, kFacMin, last_rejected ? 1.0 : kFacMax);
      h *= fac;
      last_rejected = false;
    } else {
      h *= std::max(kFacMin, kSafety * std::pow(e, -1.0 / 5.0));
      last_rejected = true;
    }
  }
  return traj;
}

std::vector<double> integrate_fixed_step(const OdeSystem& system, std::span<const double> y0,
                                         std::span<const double> p, double t0, double t1,
                                         std::size_t steps) {
  require_dims(y0, p, system.state_dim, system.param_dim, system.name.c_str());
  if (steps == 0) throw DomainError("integrate_fixed_step: need at least one step");
  const std::size_t n = system.state_dim;
  std::vector<double> y(y0.begin(), y0.end()), y_new(n), err(n);
  Stepper st(system, p);
  const double h = (t1 - t0) / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + h * static_cast<double>(s);
    st.f(t, y, st.k1());
    st.step(t, y, h, y_new, err);
    y.swap(y_new);
  }
  return y;
}

std::vector<Trajectory> integrate_batch(const OdeSystem& system, double t0,
                                        std::span<const double> y0, const Matrix& params,
                                        std::span<const double> t_grid,
                                        const IntegratorOptions& options) {
  std::vector<Trajectory> out(params.rows);
  std::vector<std::exception_ptr> errors(params.rows);
  const long rows = static_cast<long>(params.rows);
#pragma omp parallel for schedule(dynamic, 1)
  for (long j = 0; j < rows; ++j) {
    try {
      out[j] = integrate_from(system, t0, y0, params.row(j), t_grid, options);
    } catch (...) {
      errors[j] = std::current_exception();
    }
  }
  for (std::size_t j = 0; j < errors.size(); ++j) {
    if (!errors[j]) continue;
    try {
      std::rethrow_exception(errors[j]);
    } catch (const IntegrationError& e) {
      throw IntegrationError("parameter " + std::to_string(j) + ": " + e.what(),
                             e.last_good_time());
    }
  }
  return out;
}

}  // namespace eidgm::odes
