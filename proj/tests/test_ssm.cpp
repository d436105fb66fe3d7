#include <doctest.h>

#include <cmath>
#include <random>

#include "alignscan/error.hpp"
#include "alignscan/ssm.hpp"
#include "alignscan/verify.hpp"

using namespace alignscan;

namespace {

StateSpace diag_ss(std::size_t channels, std::vector<double> a,
                   SsmMode mode = SsmMode::LTI) {
  StateSpace ss;
  ss.channel_dim = channels;
  ss.state_dim = a.size() / channels;
  ss.a_diag = std::move(a);
  ss.mode = mode;
  return ss;
}

StepParams step(std::vector<double> delta, std::vector<double> b,
                std::vector<double> c) {
  return StepParams{std::move(delta), std::move(b), std::move(c)};
}

// a_bar = b_bar = 0.5 for a single state
StateSpace half_ss() { return diag_ss(1, {-std::log(2.0)}); }
StepParams half_step() { return step({1.0}, {std::log(2.0)}, {1.0}); }

}  // namespace

TEST_CASE("zoh matches the closed form") {
  const StateSpace ss = diag_ss(1, {-1.0});
  const auto d = discretize_zoh(ss, step({1.0}, {1.0}, {1.0}));
  CHECK(d.a_bar[0] == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(d.b_bar[0] == doctest::Approx(0.6321205588285577).epsilon(1e-15));
}

TEST_CASE("zoh with zero timescale is the identity with no input") {
  const auto z = zoh_element(0.0, -3.0, 5.0);
  CHECK(z.a_bar == 1.0);
  CHECK(z.b_bar == 0.0);
}

TEST_CASE("zoh b_bar equals the integral of exp(a s) B") {
  // a = -0.5, B = 2, delta = 1, Simpson with 2000 panels
  const double a = -0.5, b = 2.0, delta = 1.0;
  const int n = 2000;
  const double h = delta / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * std::exp(a * i * h);
  }
  const double quad = sum * h / 3.0 * b;
  const auto z = zoh_element(delta, a, b);
  CHECK(z.b_bar == doctest::Approx(quad).epsilon(1e-12));
  CHECK(z.b_bar == doctest::Approx(1.5738773611494663).epsilon(1e-14));
}

TEST_CASE("zoh series branch is continuous at the threshold") {
  const double a = -1.0, b = 3.0;
  const auto below = zoh_element(0.99e-8, a, b);
  const auto above = zoh_element(1.01e-8, a, b);
  CHECK(below.b_bar / 0.99e-8 == doctest::Approx(above.b_bar / 1.01e-8).epsilon(1e-7));
}

TEST_CASE("recurrent scan of a constant input") {
  const TokenTensor x(1, 3, 1, 1.0);
  const StepParams p = half_step();
  const auto out = scan_recurrent(half_ss(), {&p, 1}, x);
  CHECK(out.y.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(out.y.at(0, 1, 0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(out.y.at(0, 2, 0) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(out.h_final[0] == doctest::Approx(0.875).epsilon(1e-15));
}

TEST_CASE("single token output is C b_bar x") {
  const StateSpace ss = diag_ss(1, {-1.0, -2.0}, SsmMode::Selective);
  const StepParams p = step({0.3}, {1.0, -2.0}, {0.5, 4.0});
  const TokenTensor x(1, 1, 1, 2.0);
  const auto out = scan_recurrent(ss, {&p, 1}, x);
  double expect = 0.0;
  for (int n = 0; n < 2; ++n) {
    expect += p.c_out[n] * zoh_element(0.3, ss.a_diag[n], p.b_in[n]).b_bar * 2.0;
  }
  CHECK(out.y.at(0, 0, 0) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("convolution kernel is C a_bar^k b_bar") {
  const auto k = convolution_kernel(half_ss(), half_step(), 3);
  REQUIRE(k.size() == 3);
  CHECK(k[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(k[2] == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("impulse response equals the kernel") {
  const StateSpace ss = diag_ss(2, {-0.5, -1.5, -0.2, -3.0});
  const StepParams p = step({0.4, 0.9}, {1.0, 0.5}, {2.0, -1.0});
  TokenTensor x(1, 6, 2);
  x.at(0, 0, 0) = 1.0;
  x.at(0, 0, 1) = 1.0;
  const auto out = scan_recurrent(ss, {&p, 1}, x);
  const auto k = convolution_kernel(ss, p, 6);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(out.y.at(0, t, c) == doctest::Approx(k[c * 6 + t]).epsilon(1e-14));
    }
  }
}

TEST_CASE("recurrent scan is linear in x") {
  std::mt19937_64 rng(3);
  const auto inst = random_instance(rng, SsmMode::Selective, {.no_prune = true});
  TokenTensor x2 = inst.x_full;
  TokenTensor sum = inst.x_full;
  std::normal_distribution<double> dist;
  for (std::size_t i = 0; i < x2.size(); ++i) {
    x2.values()[i] = dist(rng);
    sum.values()[i] = 2.0 * inst.x_full.values()[i] - 3.0 * x2.values()[i];
  }
  const auto y1 = scan_recurrent(inst.ss, inst.params_full, inst.x_full).y;
  const auto y2 = scan_recurrent(inst.ss, inst.params_full, x2).y;
  const auto ys = scan_recurrent(inst.ss, inst.params_full, sum).y;
  double worst = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    worst = std::max(worst, std::abs(ys.values()[i] - 2.0 * y1.values()[i] +
                                     3.0 * y2.values()[i]));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("zero input gives zero output") {
  std::mt19937_64 rng(4);
  auto inst = random_instance(rng, SsmMode::Selective, {.no_prune = true});
  for (double& v : inst.x_full.values()) v = 0.0;
  const auto out = scan_recurrent(inst.ss, inst.params_full, inst.x_full);
  for (double v : out.y.values()) CHECK(v == 0.0);
  for (double v : out.h_final) CHECK(v == 0.0);
}

TEST_CASE("long bounded input stays bounded") {
  const StateSpace ss = diag_ss(1, {-0.01, -1.0});
  const StepParams p = step({0.5}, {1.0, 1.0}, {1.0, 1.0});
  const TokenTensor x(1, 10000, 1, 1.0);
  const auto out = scan_recurrent(ss, {&p, 1}, x);
  // steady state of each mode is b_bar / (1 - a_bar) = -1/a
  for (double v : out.y.values()) {
    REQUIRE(std::isfinite(v));
    REQUIRE(std::abs(v) <= 101.0 + 1e-9);
  }
  CHECK(out.y.at(0, 9999, 0) == doctest::Approx(101.0).epsilon(1e-9));
}

TEST_CASE("convolution matches recurrence in LTI mode") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto inst = random_instance(
        rng, SsmMode::LTI, {.max_tokens = 32, .no_prune = true});
    const auto rec = scan_recurrent(inst.ss, inst.params_full, inst.x_full);
    const auto conv = scan_convolution(inst.ss, inst.params_full[0], inst.x_full);
    CHECK(relative_error(conv.y, rec.y) <= 1e-10);
    for (std::size_t k = 0; k < rec.h_final.size(); ++k) {
      CHECK(conv.h_final[k] == doctest::Approx(rec.h_final[k]).epsilon(1e-10));
    }
  }
}

TEST_CASE("dense ZOH on a diagonal matrix matches the diagonal path") {
  DenseLtiSystem sys;
  sys.state_dim = 3;
  sys.a = {-0.5, 0, 0, 0, -1.0, 0, 0, 0, -2.5};
  sys.b = {1.0, -0.5, 2.0};
  sys.c = {0.3, 1.0, -1.0};
  sys.delta = 0.7;
  const auto dense = discretize_zoh_dense(sys);
  const StateSpace ss = diag_ss(1, {-0.5, -1.0, -2.5});
  const StepParams p = step({0.7}, sys.b, sys.c);
  const auto diag = discretize_zoh(ss, p);
  for (std::size_t n = 0; n < 3; ++n) {
    CHECK(dense.a_bar[n * 3 + n] == doctest::Approx(diag.a_bar[n]).epsilon(1e-13));
    CHECK(dense.b_bar[n] == doctest::Approx(diag.b_bar[n]).epsilon(1e-13));
  }
  const std::vector<double> xs = {1.0, -2.0, 0.5, 3.0, 0.0};
  const auto yd = scan_dense_lti(sys, xs);
  const TokenTensor x(1, 5, 1, std::vector<double>(xs));
  const auto yr = scan_recurrent(ss, {&p, 1}, x);
  for (std::size_t t = 0; t < 5; ++t) {
    CHECK(yd[t] == doctest::Approx(yr.y.at(0, t, 0)).epsilon(1e-12));
  }
}

TEST_CASE("dense ZOH with a coupled matrix matches a fine forward-Euler integration") {
  DenseLtiSystem sys;
  sys.state_dim = 2;
  sys.a = {-1.0, 0.5, -0.5, -1.0};
  sys.b = {1.0, 0.0};
  sys.c = {1.0, 1.0};
  sys.delta = 0.5;
  const auto d = discretize_zoh_dense(sys);
  // integrate h' = A h + B from h(0) = 0 over [0, delta]
  double h0 = 0.0, h1 = 0.0;
  const int steps = 200000;
  const double dt = sys.delta / steps;
  for (int i = 0; i < steps; ++i) {
    const double d0 = -1.0 * h0 + 0.5 * h1 + 1.0;
    const double d1 = -0.5 * h0 - 1.0 * h1;
    h0 += dt * d0;
    h1 += dt * d1;
  }
  CHECK(d.b_bar[0] == doctest::Approx(h0).epsilon(1e-5));
  CHECK(d.b_bar[1] == doctest::Approx(h1).epsilon(1e-4));
}

TEST_CASE("invalid systems are rejected") {
  CHECK_THROWS_AS(diag_ss(1, {0.0}).validate(), DomainError);
  CHECK_THROWS_AS(diag_ss(1, {0.5}).validate(), DomainError);
  StateSpace bad = diag_ss(2, {-1.0, -1.0});
  bad.a_diag.pop_back();
  CHECK_THROWS_AS(bad.validate(), StructuralError);

  const StateSpace ss = diag_ss(1, {-1.0});
  CHECK_THROWS_AS(step({-0.1}, {1.0}, {1.0}).validate(ss), DomainError);
  CHECK_THROWS_AS(step({0.1}, {1.0, 2.0, 3.0}, {1.0}).validate(ss), StructuralError);
  CHECK_THROWS_AS(step({0.1, 0.2}, {1.0}, {1.0}).validate(ss), StructuralError);

  const StepParams p = step({1.0}, {1.0}, {1.0});
  const TokenTensor wrong_channels(1, 3, 2);
  CHECK_THROWS_AS(scan_recurrent(ss, {&p, 1}, wrong_channels), StructuralError);
  const std::vector<StepParams> two = {p, p};
  CHECK_THROWS_AS(scan_recurrent(ss, two, TokenTensor(1, 3, 1)), StructuralError);

  const StateSpace sel = diag_ss(1, {-1.0}, SsmMode::Selective);
  CHECK_THROWS_AS(scan_convolution(sel, p, TokenTensor(1, 3, 1)),
                  UnsupportedModeError);
}

TEST_CASE("threaded scan is bitwise identical and counts the same work") {
  std::mt19937_64 rng(6);
  const auto inst = random_instance(rng, SsmMode::Selective,
                                    {.max_batch = 2, .no_prune = true});
  OpCounters c1, c4;
  ScanOptions o1, o4;
  o1.counters = &c1;
  o4.counters = &c4;
  o4.threads = 4;
  const auto a = scan_recurrent(inst.ss, inst.params_full, inst.x_full, o1);
  const auto b = scan_recurrent(inst.ss, inst.params_full, inst.x_full, o4);
  CHECK(a.y == b.y);
  CHECK(a.h_final == b.h_final);
  CHECK(c1 == c4);
  const std::uint64_t lanes = inst.x_full.batch() * inst.ss.channel_dim;
  CHECK(c1.kept_steps == lanes * inst.x_full.tokens());
  CHECK(c1.kept_macs == c1.kept_steps * inst.ss.state_dim * kKeptMacsPerState);
  CHECK(c1.pruned_steps == 0);
}

TEST_CASE("trace records every state") {
  const TokenTensor x(1, 3, 1, 1.0);
  const StepParams p = half_step();
  ScanOptions o;
  o.keep_trace = true;
  const auto out = scan_recurrent(half_ss(), {&p, 1}, x, o);
  REQUIRE(out.trace_positions == 3);
  CHECK(out.trace(0, 1, 0, 0, 1, 1) == doctest::Approx(0.75));
}
