#include <cmath>

#include "doctest.h"
#include "eidgm/errors.hpp"
#include "eidgm/odes.hpp"

using namespace eidgm;
using namespace eidgm::odes;

namespace {
std::vector<double> v(std::initializer_list<double> x) { return x; }
}  // namespace

TEST_CASE("right-hand sides by direct substitution") {
  CHECK(rhs_exponential(v({1}), v({2}), 0)[0] == 2.0);
  CHECK(rhs_exponential(v({0}), v({5}), 0)[0] == 0.0);
  CHECK(rhs_exponential(v({3}), v({-1}), 0)[0] == -3.0);

  CHECK(rhs_logistic(v({1.3}), v({2, 1.3}), 0)[0] == doctest::Approx(0.0));
  CHECK(rhs_logistic(v({0}), v({2, 1}), 0)[0] == 0.0);
  CHECK(rhs_logistic(v({0.5}), v({2, 1}), 0)[0] == 0.5);
  CHECK_THROWS_AS(rhs_logistic(v({0.5}), v({2, 0}), 0), DomainError);

  const auto o = rhs_lorenz(v({0, 0, 0}), v({10, 28, 8.0 / 3}), 0);
  CHECK(o == v({0, 0, 0}));
  const double b = 8.0 / 3, q = std::sqrt(b * 27);
  for (double d : rhs_lorenz(v({q, q, 27}), v({10, 28, b}), 0)) CHECK(std::fabs(d) < 1e-12);
  const auto s = rhs_lorenz(v({1, 2, 3}), v({10, 28, 8.0 / 3}), 0);
  CHECK(s[0] == doctest::Approx(10));
  CHECK(s[1] == doctest::Approx(23));
  CHECK(s[2] == doctest::Approx(-6));

  CHECK_THROWS_AS(rhs_exponential(v({1, 2}), v({1}), 0), ShapeError);
  CHECK_THROWS_AS(rhs_lorenz(v({1, 2}), v({1, 2, 3}), 0), ShapeError);
}

TEST_CASE("closed forms") {
  CHECK(closed_form_exponential(2.0, 1.7, 0.0) == 1.7);
  CHECK(closed_form_exponential(2.0, 1.0, 0.5) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  CHECK(std::fabs(closed_form_logistic(2.0, 1.3, 0.1, 50.0) - 1.3) < 1e-8);
  CHECK_THROWS_AS(closed_form_logistic(2.0, 1.0, -0.1, 1.0), DomainError);
  CHECK_THROWS_AS(closed_form_logistic(2.0, 0.0, 0.1, 1.0), DomainError);
}

TEST_CASE("adaptive integration matches closed forms") {
  const double t1[] = {0.0, 1.0};
  const auto e = integrate(exponential(), v({1}), v({2}), t1, 1e-9, 1e-11);
  CHECK(std::fabs(e.states(1, 0) - std::exp(2.0)) < 1e-7);

  const double t2[] = {0.5, 1.0, 2.0};
  const auto l = integrate_from(logistic(), 0.0, v({0.1}), v({2, 1}), t2, IntegratorOptions{});
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::fabs(l.states(k, 0) - closed_form_logistic(2, 1, 0.1, t2[k])) < 1e-7);
  }
  CHECK(l.params == v({2, 1}));
  CHECK(l.times == v({0.5, 1.0, 2.0}));
}

TEST_CASE("Lorenz solutions agree across tolerances") {
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(k / 20.0);
  const auto y0 = v({4.67, 5.49, 9.06});
  const auto p = v({9.5, 27.0, 5.0 / 3});
  const auto a = integrate(lorenz(), y0, p, grid, 1e-9, 1e-11);
  const auto b = integrate(lorenz(), y0, p, grid, 1e-12, 1e-14);
  double worst = 0;
  for (std::size_t k = 0; k < a.states.data.size(); ++k) {
    worst = std::max(worst, std::fabs(a.states.data[k] - b.states.data[k]));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("fixed-step order is at least four") {
  const auto sys = exponential();
  double prev = 0;
  for (std::size_t steps : {4, 8, 16}) {
    const double y = integrate_fixed_step(sys, v({1}), v({2}), 0.0, 1.0, steps)[0];
    const double err = std::fabs(y - std::exp(2.0));
    if (prev > 0) CHECK(prev / err >= 16.0);
    prev = err;
  }
}

TEST_CASE("batch integration keeps input order and reports the failing index") {
  Matrix params(3, 1);
  params.data = {0.5, 1.0, 1.5};
  const double grid[] = {0.0, 1.0};
  const auto out = integrate_batch(exponential(), 0.0, v({1}), params, grid, IntegratorOptions{});
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::fabs(out[i].states(1, 0) - std::exp(params.data[i])) < 1e-7);
  }
  IntegratorOptions tight;
  tight.max_steps = 3;
  Matrix lp(2, 3);
  lp.data = {10, 28, 8.0 / 3, 10, 28, 8.0 / 3};
  const double far[] = {0.0, 10.0};
  CHECK_THROWS_AS(integrate_batch(lorenz(), 0.0, v({1, 1, 1}), lp, far, tight), IntegrationError);
}

TEST_CASE("integrator rejects bad grids") {
  const double bad[] = {1.0, 0.5};
  CHECK_THROWS(integrate(exponential(), v({1}), v({1}), bad));
  CHECK_THROWS(system_by_name("vanderpol"));
}
