// Acceptance run: one PASS/FAIL line per criterion. Long-running criteria
// share artifacts under the working directory (acceptance_runs/).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "eidgm/cli.hpp"
#include "eidgm/emulator.hpp"
#include "eidgm/estimator.hpp"
#include "eidgm/evalkit.hpp"
#include "eidgm/odes.hpp"
#include "eidgm/rng.hpp"
#include "support/random_graph.hpp"

namespace fs = std::filesystem;
using namespace eidgm;

namespace {

// Desk-scale budgets.
constexpr double kEmulatorScale = 0.5;    // criterion 4 and the emulator for 5, 6, 8
constexpr double kWganScale = 0.5;        // WGAN epochs for 5, 6
constexpr double kLogisticScale = 0.2;    // criterion 7, both emulators and the WGANs
constexpr double kReproduceScale = 0.02;  // criterion 9

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_root = "acceptance_runs";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

cli::ExperimentConfig config_for(const std::string& bench, const std::string& dir, double scale,
                                 std::vector<std::string> sets = {}) {
  sets.push_back("output_dir=" + (g_root / dir).string());
  sets.push_back("scale=" + std::to_string(scale));
  return cli::resolve_config(bench, "", sets);
}

std::ofstream log_for(const std::string& dir) {
  fs::create_directories(g_root / dir);
  return std::ofstream(g_root / dir / "log.txt", std::ios::app);
}

double summed_w1(const fs::path& dir) {
  const auto m = nlohmann::json::parse(slurp(dir / "metrics.json"));
  return m.at("summed_w1").get<double>();
}

// ---- 1 --------------------------------------------------------------------

Outcome autodiff_suite() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto c = testsupport::check_graph(seed);
    worst = std::max({worst, c.max_reverse_err, c.max_tangent_err});
  }
  double mixed = 0.0;
  for (double w : {1.0, -0.7, 2.3, 0.1}) {
    for (double tv : {0.5, -1.2, 0.05, 1.9}) {
      diff::Tape t;
      diff::Var wv{&t, t.leaf(Matrix(1, 1, w))};
      diff::Var tt{&t, t.leaf(Matrix(1, 1, tv))};
      diff::Var f = tanh(wv * tt);
      const diff::NodeId outs[] = {f.id};
      const auto tp = t.forward_tangent(tt.id, outs);
      const double got = t.reverse_gradients(tp[0].tangent).wrt(wv.id).item();
      const double th = std::tanh(w * tv);
      const double want = (1 - th * th) * (1 - 2 * w * tv * th);
      mixed = std::max(mixed, std::fabs(got - want));
    }
  }
  return {worst < 1e-5 && mixed < 1e-8,
          "max FD rel err " + fmt(worst) + " over 100 graphs, mixed d2 err " + fmt(mixed)};
}

// ---- 2 --------------------------------------------------------------------

Outcome ode_suite() {
  const auto grid = linspace(0.0, 1.0, 21);
  double closed = 0.0;
  for (double r : {0.5, 1.0, 3.5}) {
    const double y0[] = {1.0}, p[] = {r};
    const auto tr = odes::integrate(odes::exponential(), y0, p, grid, 1e-9, 1e-11);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      closed = std::max(closed,
                        std::fabs(tr.states(k, 0) - odes::closed_form_exponential(r, 1.0, grid[k])));
    }
  }
  const auto lgrid = linspace(0.0, 2.0, 21);
  for (double r : {1.0, 5.0}) {
    for (double K : {0.2, 1.5}) {
      for (double y0v : {1e-5, 0.1}) {
        const double y0[] = {y0v}, p[] = {r, K};
        const auto tr = odes::integrate(odes::logistic(), y0, p, lgrid, 1e-9, 1e-11);
        for (std::size_t k = 0; k < lgrid.size(); ++k) {
          closed = std::max(
              closed, std::fabs(tr.states(k, 0) - odes::closed_form_logistic(r, K, y0v, lgrid[k])));
        }
      }
    }
  }
  double lorenz = 0.0;
  const double y0[] = {4.67, 5.49, 9.06};
  for (const auto& pv : std::vector<std::vector<double>>{{10, 28, 8.0 / 3}, {9.5, 18, 1}}) {
    const auto a = odes::integrate(odes::lorenz(), y0, pv, grid, 1e-9, 1e-11);
    const auto b = odes::integrate(odes::lorenz(), y0, pv, grid, 1e-12, 1e-14);
    for (std::size_t i = 0; i < a.states.data.size(); ++i) {
      lorenz = std::max(lorenz, std::fabs(a.states.data[i] - b.states.data[i]));
    }
  }
  return {closed < 1e-7 && lorenz < 1e-5,
          "closed-form err " + fmt(closed) + ", Lorenz tol 1e-9 vs 1e-12 " + fmt(lorenz)};
}

// ---- 3 --------------------------------------------------------------------

Outcome w1_suite() {
  using eval::wasserstein_1d;
  using V = std::vector<double>;
  bool exact = wasserstein_1d(V{0}, V{1}) == 1.0 && wasserstein_1d(V{0, 2}, V{1, 3}) == 1.0 &&
               wasserstein_1d(V{0.3, -2, 7}, V{7, 0.3, -2}) == 0.0;
  Matrix a(4, 2), b(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    a(i, 0) = 0.5 * i;
    a(i, 1) = -1.0 * i;
    b(i, 0) = a(i, 0) + 1.0;
    b(i, 1) = a(i, 1) + 2.0;
  }
  exact = exact && std::fabs(eval::summed_wasserstein(a, b).summed_w1 - 3.0) < 1e-12 &&
          eval::summed_wasserstein(a, a).summed_w1 == 0.0;

  Rng rng(2024);
  double worst = 0.0;
  bool symmetric = true, zero_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(30), m = 1 + rng.index(30);
    V x(n), y(n), z(m);
    for (auto& v : x) v = rng.normal() * 3;
    for (auto& v : y) v = rng.uniform(-5, 5);
    for (auto& v : z) v = rng.normal() + 1;
    const double xy = wasserstein_1d(x, y), yx = wasserstein_1d(y, x);
    symmetric = symmetric && xy == yx && wasserstein_1d(x, z) == wasserstein_1d(z, x);
    worst = std::max(worst, xy - (wasserstein_1d(x, z) + wasserstein_1d(z, y)));
    const double c = rng.uniform(-10, 10);
    V xc = x, yc = y, xs = x, ys = y;
    for (auto& v : xc) v += c;
    for (auto& v : yc) v += c;
    for (auto& v : xs) v *= c;
    for (auto& v : ys) v *= c;
    worst = std::max(worst, std::fabs(wasserstein_1d(xc, yc) - xy));
    worst = std::max(worst, std::fabs(wasserstein_1d(xs, ys) - std::fabs(c) * xy));
    worst = std::max(worst, std::fabs(eval::wasserstein_1d_cdf(x, y) - xy));
    V perm(x.rbegin(), x.rend());
    zero_ok = zero_ok && wasserstein_1d(x, perm) == 0.0 && (x == y || xy > 0.0);
  }
  return {exact && symmetric && zero_ok && worst < 1e-12,
          std::string("exact cases ") + (exact ? "ok" : "wrong") + ", max property violation " +
              fmt(worst) + " on 1000 random pairs"};
}

// ---- 4 --------------------------------------------------------------------

Outcome emulator_accuracy() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = config_for("exp-uni", "exp_uni", kEmulatorScale);
  auto log = log_for("exp_uni");
  cli::gen_data(cfg, log);
  cli::train_emulator(cfg, log);
  const double train_s = seconds_since(t0);
  const auto em = emulator::load_emulator((g_root / "exp_uni" / "emulator.bin").string());

  Matrix params(20, 1);
  for (std::size_t i = 0; i < 20; ++i) params(i, 0) = 0.5 + 3.0 * i / 19.0;
  const auto times = linspace(0.0, 1.0, 20);
  const Matrix pred = em->predict(params, times);
  double worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t r = 0; r < 20; ++r) {
      worst = std::max(worst, std::fabs(pred(i * 20 + r, 0) -
                                        odes::closed_form_exponential(params(i, 0), 1.0, times[r])));
    }
  }
  diff::Tape tape;
  diff::Var w{&tape, tape.constant(Matrix::row_vector(em->weights()))};
  const auto batch =
      emulator::make_batch(tape, w, params, times, emulator::PairIndex::grid(20, 20), true);
  const double physics =
      emulator::loss_physics_disc(*em, batch, odes::exponential()).value().item();
  return {worst < 5e-2 && physics < 1e-2 && train_s < 15 * 60,
          "max grid err " + fmt(worst) + ", mean physics residual " + fmt(physics) +
              ", training " + fmt(train_s) + " s"};
}

// ---- 5, 6 -----------------------------------------------------------------

// The exponential emulator does not depend on the peaks, so criterion 4's
// network is reused.
void run_wgan(const cli::ExperimentConfig& cfg, const std::string& dir, std::ostream& log) {
  if (dir != "exp_uni") {
    cli::gen_data(cfg, log);
    fs::copy_file(g_root / "exp_uni" / "emulator.bin", g_root / dir / "emulator.bin",
                  fs::copy_options::overwrite_existing);
  }
  cli::estimate(cfg, log);
  cli::evaluate(cfg, log);
}

Outcome exp_uni_end_to_end() {
  if (!fs::exists(g_root / "exp_uni" / "emulator.bin")) return {false, "no emulator from criterion 4"};
  const auto t0 = std::chrono::steady_clock::now();
  auto log = log_for("exp_uni");
  run_wgan(config_for("exp-uni", "exp_uni", kWganScale), "exp_uni", log);
  const double s = seconds_since(t0);
  const double w1 = summed_w1(g_root / "exp_uni");
  return {w1 < 0.15 && s < 20 * 60, "summed W1 " + fmt(w1) + ", " + fmt(s) + " s"};
}

Outcome exp_bi_end_to_end() {
  if (!fs::exists(g_root / "exp_uni" / "emulator.bin")) return {false, "no emulator from criterion 4"};
  const auto t0 = std::chrono::steady_clock::now();
  auto log = log_for("exp_bi");
  run_wgan(config_for("exp-bi", "exp_bi", kWganScale), "exp_bi", log);
  const double s = seconds_since(t0);
  const double w1 = summed_w1(g_root / "exp_bi");
  const Matrix post = rcs::read_param_csv((g_root / "exp_bi" / "posterior.csv").string());
  double near1 = 0, near3 = 0;
  for (double v : post.data) {
    near1 += std::fabs(v - 1.0) <= 0.25;
    near3 += std::fabs(v - 3.0) <= 0.25;
  }
  near1 /= static_cast<double>(post.rows);
  near3 /= static_cast<double>(post.rows);
  return {near1 >= 0.3 && near3 >= 0.3 && w1 < 0.30 && s < 30 * 60,
          "mass near 1: " + fmt(near1) + ", near 3: " + fmt(near3) + ", summed W1 " + fmt(w1) +
              ", " + fmt(s) + " s"};
}

// ---- 7 --------------------------------------------------------------------

Outcome logistic_ordering() {
  std::vector<double> hyper, deep;
  for (const std::string kind : {"hyperpinn", "deeponet"}) {
    const std::string base = "log_bi_" + kind;
    // DeepONet keeps its 2x learning-rate ratio over HyperPINN. y(0) = 0.1:
    // from 1e-5 the solutions stay far below K and K is not identifiable.
    const std::vector<std::string> emulator_sets = {
        "data.y0=[0.1]", "emulator.architecture.kind=" + kind,
        std::string("emulator.adam.lr=") + (kind == "deeponet" ? "2e-3" : "1e-3")};
    auto with = [&](std::vector<std::string> extra) {
      extra.insert(extra.begin(), emulator_sets.begin(), emulator_sets.end());
      return extra;
    };
    const auto cfg = config_for("log-bi", base + "_s0", kLogisticScale, with({"seed=0"}));
    auto log = log_for(base + "_s0");
    cli::gen_data(cfg, log);
    cli::train_emulator(cfg, log);
    for (int s = 0; s < 3; ++s) {
      const std::string dir = base + "_s" + std::to_string(s);
      // each seed draws its own dataset and estimator; the emulator is shared
      auto run_cfg = config_for("log-bi", dir, kLogisticScale, with({"seed=" + std::to_string(s)}));
      auto run_log = log_for(dir);
      if (s > 0) {
        fs::copy_file(g_root / (base + "_s0") / "emulator.bin", g_root / dir / "emulator.bin",
                      fs::copy_options::overwrite_existing);
      }
      cli::gen_data(run_cfg, run_log);
      cli::estimate(run_cfg, run_log);
      cli::evaluate(run_cfg, run_log);
      (kind == "hyperpinn" ? hyper : deep).push_back(summed_w1(g_root / dir));
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double h = median(hyper), d = median(deep);
  return {h < d || (h < 0.3 && d < 0.3),
          "median summed W1 HyperPINN " + fmt(h) + " vs DeepONet " + fmt(d)};
}

// ---- 8 --------------------------------------------------------------------

Outcome penalty_mechanism() {
  const auto t0 = std::chrono::steady_clock::now();
  double lo = 0.0, max_norm = 0.0;
  const fs::path dir = g_root / "exp_uni";
  const bool have_run = fs::exists(dir / "wgan.bin");
  if (have_run) {
    const auto em = emulator::load_emulator((dir / "emulator.bin").string());
    const auto pair = estimator::load_pair((dir / "wgan.bin").string());
    const auto data = rcs::ingest_csv((dir / "data.csv").string());
    const auto norms = estimator::interpolated_gradient_norms(pair, *em, data, 1000, 77);
    lo = *std::min_element(norms.begin(), norms.end());
    max_norm = *std::max_element(norms.begin(), norms.end());
  }

  estimator::WganConfig tiny;
  tiny.noise_dim = 2;
  tiny.generator_width = 4;
  tiny.generator_depth = 2;
  tiny.critic_width = 5;
  tiny.critic_depth = 2;
  tiny.seed = 5;
  const ParamRange range{{0.5}, {3.5}};
  const auto pair = estimator::make_pair(tiny, range, rcs::ScalingInfo{{0, 0}, {1, 1}});
  Matrix real(5, 2), fake(8, 2);
  Rng rng(9);
  for (auto& v : real.data) v = rng.normal();
  for (auto& v : fake.data) v = rng.normal() + 0.5;
  auto penalty = [&](const std::vector<double>& w, std::vector<double>* grad) {
    diff::Tape t;
    Rng r(31);
    diff::Var th{&t, t.leaf(Matrix::row_vector(w))};
    auto gp = estimator::gradient_penalty(t, estimator::tape_critic(pair.critic_spec, th), real,
                                          fake, r);
    if (grad) *grad = t.reverse_gradients(gp.id).wrt(th.id).data;
    return gp.value().item();
  };
  std::vector<double> grad;
  penalty(pair.theta_d, &grad);
  double fd_err = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < pair.theta_d.size(); ++i) {
    auto plus = pair.theta_d, minus = pair.theta_d;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (penalty(plus, nullptr) - penalty(minus, nullptr)) / (2 * h);
    fd_err = std::max(fd_err, std::fabs(grad[i] - fd) / std::max(std::fabs(fd), 1e-4));
  }
  const double s = seconds_since(t0);
  return {have_run && max_norm >= 0.5 && max_norm <= 1.5 && fd_err < 1e-4 && s < 5 * 60,
          have_run ? "max |grad D| " + fmt(max_norm) + " (min " + fmt(lo) + ") over 1000 points, " +
                         "penalty FD rel err " + fmt(fd_err)
                   : "no trained pair from criterion 5"};
}

// ---- 9 --------------------------------------------------------------------

Outcome determinism() {
  auto reproduce = [&](const std::string& dir) {
    const std::string out = (g_root / dir).string();
    std::vector<std::string> args = {"rcs-infer", "reproduce", "exp-uni", "--seed", "7", "--scale",
                                     std::to_string(kReproduceScale), "--set", "output_dir=" + out};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
  };
  fs::remove_all(g_root / "repro_a");
  fs::remove_all(g_root / "repro_b");
  const int a = reproduce("repro_a"), b = reproduce("repro_b");
  const bool same_post = slurp(g_root / "repro_a" / "posterior.csv") ==
                         slurp(g_root / "repro_b" / "posterior.csv");
  const bool same_metrics = slurp(g_root / "repro_a" / "metrics.json") ==
                            slurp(g_root / "repro_b" / "metrics.json");
  const bool nonempty = fs::exists(g_root / "repro_a" / "posterior.csv") &&
                        fs::file_size(g_root / "repro_a" / "posterior.csv") > 0;
  return {a == 0 && b == 0 && nonempty && same_post && same_metrics,
          std::string("exit codes ") + std::to_string(a) + "/" + std::to_string(b) +
              ", posterior " + (same_post ? "identical" : "differs") + ", metrics " +
              (same_metrics ? "identical" : "differs")};
}

// ---- 10 -------------------------------------------------------------------

Outcome sample_count() {
  const std::size_t sizes[] = {1, 64, 64, 64, 64, 3265};
  bool vacuous_ok = true, monotone = true;
  double previous = 0.0;
  std::string detail;
  for (double eps : {0.5, 0.2, 0.1, 0.05}) {
    const auto b = emulator::required_sample_count(eps, 0.05, 100, sizes, 1.0, 1.0);
    vacuous_ok = vacuous_ok && b.vacuous && std::fabs(b.n_p_bound - 16.0 / (eps * eps)) < 1e-9 * b.n_p_bound;
    monotone = monotone && b.n_p_bound >= previous;
    previous = b.n_p_bound;
    detail += fmt(b.n_p_bound) + (eps == 0.05 ? "" : ", ");
  }
  return {vacuous_ok && monotone, "bounds for eps 0.5..0.05: " + detail};
}

}  // namespace

int main(int argc, char** argv) {
  // usage: eidgm_acceptance [run-root] [criterion ids...]
  if (argc > 1) g_root = argv[1];
  std::vector<int> only;
  for (int k = 2; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  fs::create_directories(g_root);
  struct Item {
    int id;
    std::function<Outcome()> fn;
  };
  const std::vector<Item> items = {
      {1, autodiff_suite},   {2, ode_suite},          {3, w1_suite},
      {4, emulator_accuracy}, {5, exp_uni_end_to_end}, {6, exp_bi_end_to_end},
      {7, logistic_ordering}, {8, penalty_mechanism},  {9, determinism},
      {10, sample_count}};
  int failures = 0;
  for (const auto& item : items) {
    if (!only.empty() && std::find(only.begin(), only.end(), item.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = item.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d: %s  %s  [%.1f s]\n", item.id, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
