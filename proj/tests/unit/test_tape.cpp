#include <cmath>

#include "doctest.h"
#include "eidgm/diff/var.hpp"
#include "eidgm/errors.hpp"
#include "../support/random_graph.hpp"

using namespace eidgm;
using namespace eidgm::diff;

namespace {
Matrix scalar(double v) { return Matrix(1, 1, v); }
}  // namespace

TEST_CASE("primal values of elementary graphs") {
  Tape t;
  Var x{&t, t.leaf(scalar(3.0))};
  Var y{&t, t.leaf(scalar(4.0))};
  CHECK((x * y).value().item() == 12.0);
  Var z{&t, t.leaf(scalar(0.0))};
  CHECK(tanh(z).value().item() == 0.0);
  Var one{&t, t.leaf(scalar(1.0))};
  CHECK(tanh(one).value().item() ==
        doctest::Approx(static_cast<double>(testsupport::tanh_series(1.0L))).epsilon(1e-12));
}

TEST_CASE("reverse gradients of elementary graphs") {
  Tape t;
  Var x{&t, t.leaf(scalar(3.0))};
  Var y{&t, t.leaf(scalar(4.0))};
  auto g = t.reverse_gradients((x * y).id);
  CHECK(g.wrt(x.id).item() == 4.0);
  CHECK(g.wrt(y.id).item() == 3.0);

  Tape t2;
  Var z{&t2, t2.leaf(scalar(0.0))};
  CHECK(t2.reverse_gradients(tanh(z).id).wrt(z.id).item() == 1.0);
}

TEST_CASE("forward tangents of elementary graphs") {
  Tape t;
  Var x{&t, t.leaf(scalar(3.0))};
  Var f = square(x);
  const NodeId outs[] = {f.id};
  CHECK(t.value(t.forward_tangent(x.id, outs)[0].tangent).item() == 6.0);

  Tape t2;
  Var w{&t2, t2.constant(scalar(2.0))};
  Var b{&t2, t2.constant(scalar(0.0))};
  Var s{&t2, t2.leaf(scalar(0.0))};
  Var h = tanh(w * s + b);
  const NodeId outs2[] = {h.id};
  CHECK(t2.value(t2.forward_tangent(s.id, outs2)[0].tangent).item() == doctest::Approx(2.0));
}

TEST_CASE("mixed second derivative of tanh(w t) matches the closed form") {
  for (double w : {1.0, -0.7, 2.3}) {
    for (double tv : {0.5, -1.2, 0.05}) {
      Tape t;
      Var wv{&t, t.leaf(scalar(w))};
      Var tt{&t, t.leaf(scalar(tv))};
      Var f = tanh(wv * tt);
      const NodeId outs[] = {f.id};
      const auto tp = t.forward_tangent(tt.id, outs);
      const double got = t.reverse_gradients(tp[0].tangent).wrt(wv.id).item();
      const double th = std::tanh(w * tv);
      const double want = (1 - th * th) - 2 * w * tv * th * (1 - th * th);
      CHECK(std::fabs(got - want) < 1e-8);
    }
  }
}

TEST_CASE("gradient of the tangent matches finite differences of the analytic derivative") {
  auto dfdt = [](double w, double tv) {
    const double th = std::tanh(w * tv);
    return w * (1 - th * th);
  };
  Tape t;
  Var wv{&t, t.leaf(scalar(1.0))};
  Var tt{&t, t.leaf(scalar(0.5))};
  Var f = tanh(wv * tt);
  const NodeId outs[] = {f.id};
  const auto tp = t.forward_tangent(tt.id, outs);
  const double got = t.reverse_gradients(tp[0].tangent).wrt(wv.id).item();
  const double h = 1e-5;
  const double fd = (dfdt(1.0 + h, 0.5) - dfdt(1.0 - h, 0.5)) / (2 * h);
  CHECK(testsupport::rel_err(got, fd) < 1e-5);
}

TEST_CASE("random graphs agree with central finite differences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto c = testsupport::check_graph(seed);
    INFO("seed " << seed);
    CHECK(c.max_reverse_err < 1e-5);
    CHECK(c.max_tangent_err < 1e-5);
  }
}

TEST_CASE("re-evaluation reproduces stored primals bit-exactly") {
  testsupport::RandomGraph rg;
  testsupport::build_random_graph(rg, 7);
  std::vector<NodeId> all;
  for (NodeId id = 0; id < rg.tape.size(); ++id) all.push_back(id);
  const auto again = rg.tape.forward_eval(rg.leaf_values, all);
  for (NodeId id = 0; id < rg.tape.size(); ++id) CHECK(again[id].data == rg.tape.value(id).data);
}

TEST_CASE("evaluation and gradients are deterministic") {
  testsupport::RandomGraph a, b;
  testsupport::build_random_graph(a, 11);
  testsupport::build_random_graph(b, 11);
  CHECK(a.tape.value(a.output).data == b.tape.value(b.output).data);
  const auto ga = a.tape.reverse_gradients(a.output);
  const auto gb = b.tape.reverse_gradients(b.output);
  for (std::size_t k = 0; k < ga.all().size(); ++k) CHECK(ga.all()[k].data == gb.all()[k].data);
}

// Each term reaches x through a single edge, so both sides add the same
// two rounded terms.
TEST_CASE("linearity of the gradient is exact") {
  Tape t;
  Var x{&t, t.leaf(Matrix(3, 1, 0.3))};
  Var f = sum(tanh(x));
  Var g = sum(square(x));
  Var comb = f * 2.0 + g * 3.0;
  const auto gc = t.reverse_gradients(comb.id).wrt(x.id);
  const auto gf = t.reverse_gradients(f.id).wrt(x.id);
  const auto gg = t.reverse_gradients(g.id).wrt(x.id);
  for (std::size_t k = 0; k < 3; ++k) CHECK(gc.data[k] == 2.0 * gf.data[k] + 3.0 * gg.data[k]);
}

TEST_CASE("serial and parallel backends agree on random graphs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    testsupport::RandomGraph p(kernels::Backend::Parallel), s(kernels::Backend::Serial);
    testsupport::build_random_graph(p, seed);
    testsupport::build_random_graph(s, seed);
    CHECK(p.tape.value(p.output).item() ==
          doctest::Approx(s.tape.value(s.output).item()).epsilon(1e-13));
    const auto gp = p.tape.reverse_gradients(p.output);
    const auto gs = s.tape.reverse_gradients(s.output);
    for (std::size_t k = 0; k < gp.all().size(); ++k) {
      for (std::size_t e = 0; e < gp.all()[k].data.size(); ++e) {
        CHECK(gp.all()[k].data[e] == doctest::Approx(gs.all()[k].data[e]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("contract errors") {
  Tape t;
  Var x{&t, t.leaf(Matrix(2, 1, 1.0))};
  Var y = tanh(x);
  CHECK_THROWS_AS(t.reverse_gradients(y.id), ContractError);
  const NodeId outs[] = {y.id};
  CHECK_THROWS_AS(t.forward_tangent(y.id, outs), ContractError);
  const std::vector<Matrix> none;
  CHECK_THROWS_AS(t.forward_eval(none, outs), ShapeError);
  Var c{&t, t.leaf(Matrix(3, 1, 1.0))};
  CHECK_THROWS_AS(x + c, ShapeError);
}
