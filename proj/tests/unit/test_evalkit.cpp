#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "eidgm/errors.hpp"
#include "eidgm/evalkit.hpp"
#include "json.hpp"

using namespace eidgm;
using namespace eidgm::eval;

namespace {
std::vector<double> v(std::initializer_list<double> x) { return x; }

std::vector<double> draw(std::mt19937_64& g, std::size_t n) {
  std::normal_distribution<double> d(0.0, 2.0);
  std::vector<double> out(n);
  for (double& x : out) x = d(g);
  return out;
}
}  // namespace

TEST_CASE("W1 exact small cases") {
  CHECK(wasserstein_1d(v({0.3, -1, 4}), v({4, 0.3, -1})) == 0.0);
  CHECK(wasserstein_1d(v({0}), v({1})) == 1.0);
  CHECK(wasserstein_1d(v({0, 2}), v({1, 3})) == 1.0);
  CHECK(wasserstein_1d(v({0}), v({0, 1})) == doctest::Approx(0.5));
  CHECK(wasserstein_1d(v({0, 1, 2}), v({1.5})) == doctest::Approx((1.5 + 0.5 + 0.5) / 3));
  CHECK_THROWS_AS(wasserstein_1d(v({}), v({1})), DomainError);
  CHECK_THROWS_AS(wasserstein_1d_cdf(v({1}), v({})), DomainError);
}

TEST_CASE("W1 metric properties on random samples") {
  std::mt19937_64 g(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + g() % 20;
    const auto a = draw(g, n), b = draw(g, n), c = draw(g, n);
    const double ab = wasserstein_1d(a, b);
    CHECK(ab == wasserstein_1d(b, a));
    CHECK(ab <= wasserstein_1d(a, c) + wasserstein_1d(c, b) + 1e-12);
    CHECK(std::fabs(ab - wasserstein_1d_cdf(a, b)) < 1e-12);
    std::vector<double> a_shift = a, b_shift = b, a_scale = a, b_scale = b;
    for (auto& x : a_shift) x += 1.75;
    for (auto& x : b_shift) x += 1.75;
    for (auto& x : a_scale) x *= -2.5;
    for (auto& x : b_scale) x *= -2.5;
    CHECK(std::fabs(wasserstein_1d(a_shift, b_shift) - ab) < 1e-12);
    CHECK(std::fabs(wasserstein_1d(a_scale, b_scale) - 2.5 * ab) < 1e-12);
  }
}

TEST_CASE("summed W1 report") {
  Matrix a(4, 2), b(4, 2);
  std::mt19937_64 g(1);
  for (std::size_t k = 0; k < a.data.size(); ++k) a.data[k] = draw(g, 1)[0];
  CHECK(summed_wasserstein(a, a).summed_w1 == 0.0);
  for (std::size_t r = 0; r < 4; ++r) {
    b(r, 0) = a(r, 0) + 1.0;
    b(r, 1) = a(r, 1) + 2.0;
  }
  const auto rep = summed_wasserstein(a, b);
  CHECK(rep.summed_w1 == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::fabs(rep.summed_w1 - rep.per_dimension_w1[0] - rep.per_dimension_w1[1]) < 1e-12);
  CHECK_THROWS_AS(summed_wasserstein(a, Matrix(3, 1)), ShapeError);

  auto with_meta = rep;
  with_meta.metadata["benchmark"] = "exp-uni";
  const auto j = nlohmann::json::parse(with_meta.to_json());
  CHECK(j["summed_w1"].get<double>() == rep.summed_w1);
  CHECK(j["w1_p2"].get<double>() == rep.per_dimension_w1[1]);
  CHECK(j["benchmark"] == "exp-uni");
  for (const auto& item : j.items()) CHECK((item.value().is_number() || item.value().is_string()));
}

TEST_CASE("histogram conventions") {
  const std::vector<double> mid(10, 0.5);
  CHECK(histogram(mid, 2, 0.0, 1.0).counts == std::vector<std::size_t>{0, 10});
  CHECK(histogram({}, 3, 0.0, 1.0).counts == std::vector<std::size_t>{0, 0, 0});
  CHECK(histogram(v({1.0, 0.0, 2.0, -1.0}), 2, 0.0, 1.0).counts == std::vector<std::size_t>{1, 1});
  CHECK_THROWS_AS(histogram(mid, 2, 1.0, 0.0), DomainError);

  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(100'000);
  for (double& x : s) x = u(g);
  const auto h = histogram(s, 10, 0.0, 1.0);
  const double sigma = std::sqrt(1e5 * 0.1 * 0.9);
  for (auto c : h.counts) CHECK(std::fabs(static_cast<double>(c) - 1e4) < 3 * sigma);
  CHECK(h.edges.size() == 11);
  CHECK(h.edges.back() == 1.0);
}

TEST_CASE("interquartile range") {
  CHECK(interquartile_range(v({1, 2, 3, 4, 5})) == doctest::Approx(2.0));
  CHECK_THROWS_AS(interquartile_range(v({})), DomainError);
}

TEST_CASE("posterior predictive checks") {
  const auto sys = odes::exponential();
  Matrix truth(6, 1);
  truth.data = {0.9, 0.95, 1.0, 1.05, 1.1, 1.2};
  const double y0[] = {1.0};
  const double times[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto data = rcs::generate_rcs(sys, truth, y0, times);

  const auto self = posterior_predictive(truth, sys, y0, data);
  CHECK(self.failures == 0);
  for (double w : self.per_time_w1.data) CHECK(w < 1e-6);

  Matrix shifted = truth;
  for (double& p : shifted.data) p += 1.0;
  const auto off = posterior_predictive(shifted, sys, y0, data);
  for (std::size_t r = 1; r < 5; ++r) CHECK(off.per_time_w1(r, 0) > off.per_time_w1(r - 1, 0));

  std::ostringstream traj, table;
  write_trajectories_csv(self.trajectories, traj);
  write_predictive_csv(self, table);
  CHECK(traj.str().rfind("sample,t,y1\n", 0) == 0);
  CHECK(table.str().rfind("t,y1_w1\n", 0) == 0);

  Matrix mixed(3, 1);
  mixed.data = {1.0, 800.0, 1.1};
  const auto partial = posterior_predictive(mixed, sys, y0, data);
  CHECK(partial.failures == 1);
  CHECK(partial.trajectories.size() == 2);

  const auto lor = odes::lorenz();
  Matrix lp(2, 3);
  lp.data = {10, 28, 8.0 / 3, 10, 28, 8.0 / 3};
  const double ly0[] = {1, 1, 1};
  const double lt[] = {0.0, 0.5};
  const auto ldata = rcs::generate_rcs(lor, lp, ly0, lt);
  odes::IntegratorOptions few;
  few.max_steps = 2;
  CHECK_THROWS_AS(posterior_predictive(lp, lor, ly0, ldata, 0.0, few), IntegrationError);
}
