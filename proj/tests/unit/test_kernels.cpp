#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "eidgm/kernels.hpp"
#include "eidgm/rng.hpp"

using namespace eidgm;
using namespace eidgm::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12).scale(1.0));
  }
}

struct Case {
  std::size_t batch, in, out;
  bool bias;
};

const Case kCases[] = {{1, 1, 1, true},  {7, 3, 5, true},    {33, 32, 32, true},
                       {50, 64, 97, false}, {130, 9, 40, true}, {5, 70, 1, true}};

}  // namespace

TEST_CASE("parallel affine kernels agree with the serial reference") {
  Rng rng(11);
  const auto& s = kernel_set(Backend::Serial);
  const auto& p = kernel_set(Backend::Parallel);
  for (const auto& c : kCases) {
    CAPTURE(c.batch);
    CAPTURE(c.in);
    CAPTURE(c.out);
    AffineLayout L{3, c.in, c.out, c.bias};
    auto theta = random_vec(rng, 3 + L.span() + 2);
    auto x = random_vec(rng, c.batch * c.in);
    auto dy = random_vec(rng, c.batch * c.out);

    std::vector<double> ys(c.batch * c.out), yp(c.batch * c.out);
    s.affine(x, c.batch, theta, L, ys);
    p.affine(x, c.batch, theta, L, yp);
    check_close(ys, yp);

    auto dxs = random_vec(rng, c.batch * c.in);
    auto dxp = dxs;
    s.affine_backward_input(dy, c.batch, theta, L, dxs);
    p.affine_backward_input(dy, c.batch, theta, L, dxp);
    check_close(dxs, dxp);

    std::vector<double> dts(theta.size(), 0.5), dtp(theta.size(), 0.5);
    s.affine_backward_theta(x, dy, c.batch, L, dts);
    p.affine_backward_theta(x, dy, c.batch, L, dtp);
    check_close(dts, dtp);
  }
}

TEST_CASE("parallel grouped kernels agree with the serial reference") {
  Rng rng(12);
  const auto& s = kernel_set(Backend::Serial);
  const auto& p = kernel_set(Backend::Parallel);
  for (const auto& c : kCases) {
    const std::size_t groups = 4;
    std::vector<std::uint32_t> labels(c.batch);
    for (auto& g : labels) g = static_cast<std::uint32_t>(rng.index(groups));
    auto index = GroupIndex::build(labels, groups);
    AffineLayout L{1, c.in, c.out, c.bias};
    const std::size_t stride = L.span() + 1;
    auto theta = random_vec(rng, groups * stride);
    auto x = random_vec(rng, c.batch * c.in);
    auto dy = random_vec(rng, c.batch * c.out);

    std::vector<double> ys(c.batch * c.out), yp(c.batch * c.out);
    s.grouped_affine(x, c.batch, theta, stride, *index, L, ys);
    p.grouped_affine(x, c.batch, theta, stride, *index, L, yp);
    check_close(ys, yp);

    std::vector<double> dxs(c.batch * c.in, 0.25), dxp(c.batch * c.in, 0.25);
    s.grouped_backward_input(dy, c.batch, theta, stride, *index, L, dxs);
    p.grouped_backward_input(dy, c.batch, theta, stride, *index, L, dxp);
    check_close(dxs, dxp);

    std::vector<double> dts(theta.size(), 0.0), dtp(theta.size(), 0.0);
    s.grouped_backward_theta(x, dy, c.batch, stride, *index, L, dts);
    p.grouped_backward_theta(x, dy, c.batch, stride, *index, L, dtp);
    check_close(dts, dtp);
  }
}

TEST_CASE("group index sorts rows by label and rejects bad labels") {
  auto index = GroupIndex::build({2, 0, 2, 1}, 3);
  CHECK(index->offsets == std::vector<std::size_t>{0, 1, 2, 4});
  CHECK(index->rows == std::vector<std::uint32_t>{1, 3, 0, 2});
  CHECK_THROWS_AS(GroupIndex::build({0, 3}, 3), std::out_of_range);
}

TEST_CASE("vectorized tanh stays within a few ulp of std::tanh") {
  Rng rng(13);
  std::vector<double> x{0.0, -0.0, 0.625, -0.625, 0.62500001, 1.0, 30.0, -30.0, 1e300, -1e300, 1e-300};
  for (int k = 0; k < 20000; ++k) x.push_back(rng.uniform(-25.0, 25.0));
  for (int k = 0; k < 20000; ++k) x.push_back(rng.uniform(-1.0, 1.0));
  std::vector<double> ys(x.size()), yp(x.size());
  kernel_set(Backend::Serial).tanh(x, ys);
  kernel_set(Backend::Parallel).tanh(x, yp);
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    CHECK(ys[k] == std::tanh(x[k]));
    const double ulp = std::nextafter(std::fabs(ys[k]), 2.0) - std::fabs(ys[k]);
    worst = std::max(worst, std::fabs(yp[k] - ys[k]) / ulp);
  }
  CHECK(worst <= 4.0);
  CHECK(yp[0] == 0.0);
  CHECK(std::fabs(yp[8]) == 1.0);
}
