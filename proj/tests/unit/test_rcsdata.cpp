#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "eidgm/errors.hpp"
#include "eidgm/rcsdata.hpp"

using namespace eidgm;
using namespace eidgm::rcs;

namespace {

RcsDataset random_dataset(std::uint64_t seed, std::size_t dim) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n(0.0, 3.0);
  RcsDataset d;
  d.state_dim = dim;
  for (std::size_t r = 0; r < 4; ++r) {
    d.times.push_back(0.3 * r + n(g) * 1e-3 + 1.0);
    Matrix m(3 + g() % 4, dim);
    for (double& v : m.data) v = n(g);
    d.observations.push_back(m);
  }
  return d;
}

}  // namespace

TEST_CASE("parameter generation") {
  const ParamRange range{{0.5}, {3.5}};
  std::vector<PeakSpec> one{{{1.0}, {0.0}, 3}};
  const Matrix p = generate_parameters(one, 9);
  CHECK(p.rows == 3);
  CHECK(p.data == std::vector<double>{1, 1, 1});

  const auto tri = default_peaks({{1.0}, {2.0}, {3.0}}, range, 12);
  const Matrix q = generate_parameters(tri, 4);
  REQUIRE(q.rows == 36);
  for (std::size_t h = 0; h < 3; ++h) {
    for (std::size_t s = 0; s < 12; ++s) {
      const double v = q(h * 12 + s, 0);
      CHECK(range.contains(std::span<const double>(&v, 1)));
      CHECK(std::fabs(v - (1.0 + h)) <= 0.15);
    }
  }

  std::vector<PeakSpec> two{{{1.0, 2.0}, {0.1, 0.1}, 10'000}, {{3.0, -1.0}, {0.1, 0.1}, 10'000}};
  const Matrix big = generate_parameters(two, 5);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0;
      for (std::size_t s = 0; s < 10'000; ++s) mean += big(h * 10'000 + s, c);
      CHECK(std::fabs(mean / 1e4 - two[h].center[c]) < 0.01);
    }
  }
  CHECK(generate_parameters(tri, 4) == q);
  CHECK_FALSE(generate_parameters(tri, 5) == q);
  CHECK_THROWS_AS(generate_parameters({}, 1), DomainError);
  CHECK_THROWS_AS(validate_peak({{3.4}, {0.2}, 1}, range), DomainError);
  CHECK_THROWS_AS(validate_peak({{1.0}, {-0.1}, 1}, range), DomainError);
}

TEST_CASE("RCS generation from the exponential model") {
  Matrix p(1, 1, std::log(2.0));
  const double y0[] = {1.0};
  const double times[] = {0.0, 1.0};
  const auto d = generate_rcs(odes::exponential(), p, y0, times);
  REQUIRE(d.time_count() == 2);
  CHECK(std::fabs(d.observations[0](0, 0) - 1.0) < 1e-7);
  CHECK(std::fabs(d.observations[1](0, 0) - 2.0) < 1e-7);

  const ParamRange range{{0.5}, {3.5}};
  const Matrix ps = generate_parameters(default_peaks({{1.0}}, range, 12), 1);
  const double five[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto e = generate_rcs(odes::exponential(), ps, y0, five);
  CHECK(e.time_count() == 5);
  CHECK(e.point_count() == 60);

  const auto empty = generate_rcs(odes::exponential(), Matrix(0, 1), y0, five);
  for (const auto& m : empty.observations) CHECK(m.rows == 0);
}

TEST_CASE("CSV ingest and emit") {
  std::istringstream in("t,y1\n0,1\n0,2\n");
  const auto d = read_csv(in);
  CHECK(d.times == std::vector<double>{0.0});
  CHECK(d.observations[0].rows == 2);

  std::ostringstream text;
  text << "t,y1\n";
  for (double t : {18.0, 4.0, 12.0, 8.0}) {
    for (int j = 0; j < 12; ++j) text << t << ',' << (t + j * 0.01) << '\n';
  }
  std::istringstream shaped(text.str());
  const auto ab = read_csv(shaped);
  CHECK(ab.times == std::vector<double>{4, 8, 12, 18});
  for (const auto& m : ab.observations) CHECK(m.rows == 12);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = random_dataset(seed, 1 + seed % 3);
    std::ostringstream out;
    write_csv(r, out);
    std::istringstream back(out.str());
    CHECK(read_csv(back) == r);
  }

  std::istringstream bad("t,y1\n0,1\n0,x\n");
  try {
    read_csv(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  std::istringstream ragged("t,y1,y2\n0,1\n");
  CHECK_THROWS_AS(read_csv(ragged), ParseError);
  std::istringstream header("time,y1\n0,1\n");
  CHECK_THROWS_AS(read_csv(header), ParseError);
}

TEST_CASE("standardization") {
  RcsDataset flat;
  flat.state_dim = 1;
  flat.times = {0.0, 1.0};
  flat.observations = {Matrix(2, 1, 5.0), Matrix(2, 1, 5.0)};
  const auto [fs, fi] = standardize(flat);
  CHECK(fi.shift[1] == 5.0);
  CHECK(fi.scale[1] == 1.0);

  RcsDataset two;
  two.state_dim = 1;
  two.times = {0.0};
  Matrix m(2, 1);
  m.data = {0.0, 2.0};
  two.observations = {m};
  const auto [ts, ti] = standardize(two);
  CHECK(ti.shift[1] == 1.0);
  CHECK(ti.scale[1] == 1.0);
  CHECK(ts.observations[0].data == std::vector<double>{-1.0, 1.0});

  const auto r = random_dataset(3, 2);
  const auto [rs, ri] = standardize(r);
  const Matrix pooled = rs.pooled_points();
  for (std::size_t c = 0; c < pooled.cols; ++c) {
    double mean = 0, var = 0;
    for (std::size_t k = 0; k < pooled.rows; ++k) mean += pooled(k, c);
    mean /= pooled.rows;
    for (std::size_t k = 0; k < pooled.rows; ++k) var += std::pow(pooled(k, c) - mean, 2);
    var /= pooled.rows;
    CHECK(std::fabs(mean) < 1e-10);
    CHECK(std::fabs(var - 1.0) < 1e-10);
  }
  const Matrix raw = r.pooled_points();
  const Matrix round = ri.invert(ri.apply(raw));
  for (std::size_t k = 0; k < raw.data.size(); ++k) {
    CHECK(std::fabs(round.data[k] - raw.data[k]) < 1e-12);
  }
  RcsDataset single;
  single.state_dim = 1;
  single.times = {0.0};
  single.observations = {Matrix(1, 1, 2.0)};
  CHECK_THROWS_AS(standardize(single), DomainError);
}

TEST_CASE("parameter CSV round trip") {
  Matrix p(3, 2);
  p.data = {1.0 / 3, 2.5, -1e-300, 7, 0.1, 1e10};
  std::ostringstream out;
  write_param_csv(p, out);
  CHECK(out.str().rfind("p1,p2\n", 0) == 0);
  std::istringstream in(out.str());
  CHECK(read_param_csv(in) == p);
}
