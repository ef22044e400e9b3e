#pragma once

// Benchmark ODE systems and an adaptive Dormand-Prince 5(4) integrator with
// dense output.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eidgm/diff/var.hpp"
#include "eidgm/matrix.hpp"

namespace eidgm::odes {

using RealRhs = std::function<void(std::span<const double> y, std::span<const double> p,
                                   double t, std::span<double> dydt)>;

/// Right-hand side recorded on a tape. Each Var is a B x 1 column: one
/// lane per (time, parameter) pair.
using TapeRhs = std::function<std::vector<diff::Var>(
    std::span<const diff::Var> y, std::span<const diff::Var> p, diff::Var t)>;

struct OdeSystem {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t param_dim = 0;
  RealRhs rhs;
  TapeRhs tape_rhs;  // optional; required for physics-informed training

  std::vector<double> evaluate(std::span<const double> y, std::span<const double> p,
                               double t) const;
  bool has_tape_rhs() const { return static_cast<bool>(tape_rhs); }
};

OdeSystem exponential();
OdeSystem logistic();
OdeSystem lorenz();
/// "exponential" | "logistic" | "lorenz".
OdeSystem system_by_name(const std::string& name);

std::vector<double> rhs_exponential(std::span<const double> y, std::span<const double> p,
                                    double t);
std::vector<double> rhs_logistic(std::span<const double> y, std::span<const double> p,
                                 double t);
std::vector<double> rhs_lorenz(std::span<const double> y, std::span<const double> p, double t);

double closed_form_exponential(double r, double y0, double t);
double closed_form_logistic(double r, double K, double y0, double t);

struct Trajectory {
  std::vector<double> times;
  Matrix states;  // times.size() x state_dim
  std::vector<double> params;
};

struct IntegratorOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  std::size_t max_steps = 1'000'000;
};

/// Solves from y(t0) = y0 and reports the state at each time of `t_grid`
/// (strictly ascending, all >= t0). t0 defaults to the first grid point.
Trajectory integrate(const OdeSystem& system, std::span<const double> y0,
                     std::span<const double> p, std::span<const double> t_grid,
                     double rel_tol = 1e-9, double abs_tol = 1e-11);
Trajectory integrate_from(const OdeSystem& system, double t0, std::span<const double> y0,
                          std::span<const double> p, std::span<const double> t_grid,
                          const IntegratorOptions& options);

/// Fixed-step Dormand-Prince (5th-order solution) over [t0, t1] in `steps`
/// equal steps; returns the final state.
std::vector<double> integrate_fixed_step(const OdeSystem& system, std::span<const double> y0,
                                         std::span<const double> p, double t0, double t1,
                                         std::size_t steps);

/// One trajectory per parameter row, computed in parallel and returned in
/// input order. A failure is rethrown naming the parameter index.
std::vector<Trajectory> integrate_batch(const OdeSystem& system, double t0,
                                        std::span<const double> y0, const Matrix& params,
                                        std::span<const double> t_grid,
                                        const IntegratorOptions& options);

}  // namespace eidgm::odes
